#include "varcpo/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>

#include "varcpo/battery.hpp"
#include "varcpo/icy_lake.hpp"
#include "varcpo/surrogate.hpp"

namespace varcpo {

namespace fs = std::filesystem;

namespace {

std::string g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(tag)};
  return std::mt19937_64(seq);
}

constexpr std::uint64_t kPolicyInit = 1;
constexpr std::uint64_t kCriticInit = 2;
constexpr std::uint64_t kEnvStream = 3;
constexpr std::uint64_t kActionStream = 4;

bool episode_success(const Environment& env, bool terminated) {
  if (const auto* battery = dynamic_cast<const BatteryToy*>(&env)) return terminated && battery->battery() > 0.0;
  return terminated;
}

bool landed_on_ice(const Environment& env) {
  const auto* icy = dynamic_cast<const IcyLake*>(&env);
  return icy != nullptr && icy->last_tile() == Tile::Ice;
}

Architecture policy_architecture(const TrainConfig& cfg, const CmdpSpec& spec) {
  Architecture a;
  a.input_dim = feature_dim(spec.observation_dim);
  a.hidden = cfg.hidden;
  a.output_dim = spec.action_dim();
  return a;
}

Architecture value_architecture(const TrainConfig& cfg, const CmdpSpec& spec) {
  Architecture a = policy_architecture(cfg, spec);
  a.output_dim = 1;
  return a;
}

std::array<ValueHead, kStreamCount> make_critics(const TrainConfig& cfg, const CmdpSpec& spec) {
  const Architecture a = value_architecture(cfg, spec);
  // Cost targets live on the rho scale, augmented-cost targets on rho^2.
  return {ValueHead(a, 1.0), ValueHead(a, cfg.rho), ValueHead(a, cfg.rho * cfg.rho)};
}

Policy make_policy(const TrainConfig& cfg) {
  const CmdpSpec spec = cfg.make_environment()->spec();
  return Policy(spec.discrete() ? HeadKind::CategoricalPolicy : HeadKind::GaussianPolicy,
                policy_architecture(cfg, spec), cfg.log_std_min, cfg.log_std_max);
}

TrainConfig validated(TrainConfig cfg) {
  cfg.validate();
  return cfg;
}

struct Adam {
  Vector m;
  Vector v;
  int t = 0;

  Vector step(const Vector& grad, double lr) {
    constexpr double b1 = 0.9;
    constexpr double b2 = 0.999;
    if (m.size() == 0) {
      m = Vector::Zero(grad.size());
      v = Vector::Zero(grad.size());
    }
    ++t;
    m = b1 * m + (1.0 - b1) * grad;
    v = b2 * v + (1.0 - b2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(b1, t);
    const double c2 = 1.0 - std::pow(b2, t);
    return -lr * (m / c1).cwiseQuotient(((v / c2).cwiseSqrt().array() + 1e-8).matrix());
  }
};

}  // namespace

std::vector<std::string> metrics_columns() {
  return {"iteration",         "env_steps",       "reward_return",      "mu",
          "j_tilde",           "c_offset",        "mode",               "cost_p95",
          "cost_p95_reliable", "violation_frac",  "ice_visitation",     "wc_bound",
          "direction_norm",    "dual_case",       "cg_iterations",      "cg_residual",
          "backtracks",        "accepted",        "kl",                 "surrogate_change",
          "constraint_before", "constraint_after"};
}

std::string metrics_csv_header() {
  std::string out;
  for (const auto& c : metrics_columns()) out += (out.empty() ? "" : ",") + c;
  return out;
}

std::string metrics_csv_row(const IterationMetrics& m) {
  std::ostringstream o;
  o << m.iteration << ',' << m.env_steps << ',' << g9(m.reward_return) << ',' << g9(m.mu) << ','
    << g9(m.j_tilde) << ',' << g9(m.c_offset) << ',' << to_string(m.mode) << ',' << g9(m.cost_p95) << ','
    << (m.cost_p95_reliable ? 1 : 0) << ',' << g9(m.violation_fraction) << ',' << g9(m.ice_visitation) << ','
    << (m.wc_bound ? g9(*m.wc_bound) : std::string()) << ',' << g9(m.step.direction_norm) << ','
    << to_string(m.step.dual_case) << ',' << m.step.cg_iterations << ',' << g9(m.step.cg_residual) << ','
    << m.step.backtracks << ',' << (m.step.accepted ? 1 : 0) << ',' << g9(m.step.kl) << ','
    << g9(m.step.surrogate_change) << ',' << g9(m.step.constraint_before) << ','
    << g9(m.step.constraint_after);
  return o.str();
}

double empirical_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("quantile level must lie in (0,1]");
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n) - 1e-12));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return values[rank - 1];
}

RegressionResult regress_critic(ValueHead& head, const Matrix& features, const Vector& targets, double lr,
                                int epochs, CriticOptimizer optimizer) {
  RegressionResult out;
  const Vector start = head.parameters();
  out.initial_loss = head.mse(features, targets);
  out.final_loss = out.initial_loss;
  Adam adam;
  for (int e = 0; e < epochs; ++e) {
    double loss = 0.0;
    const Vector grad = head.mse_grad(features, targets, &loss);
    // `loss` belongs to the parameters before this epoch's update.
    if (e > 0) out.history.push_back(loss);
    if (!std::isfinite(loss) || (loss > 10.0 * out.initial_loss && loss > 1e-12)) {
      head.set_parameters(start);
      out.diverged = true;
      out.final_loss = out.initial_loss;
      return out;
    }
    const Vector delta = optimizer == CriticOptimizer::Adam ? adam.step(grad, lr) : Vector(-lr * grad);
    head.set_parameters(head.parameters() + delta);
  }
  if (epochs > 0) {
    out.final_loss = head.mse(features, targets);
    out.history.push_back(out.final_loss);
    if (!std::isfinite(out.final_loss) || (out.final_loss > 10.0 * out.initial_loss && out.final_loss > 1e-12)) {
      head.set_parameters(start);
      out.diverged = true;
      out.final_loss = out.initial_loss;
    }
  }
  return out;
}

std::array<RegressionResult, kStreamCount> update_critics(const RolloutBatch& batch,
                                                          const std::array<ValueHead*, kStreamCount>& critics,
                                                          double lr, int epochs, CriticOptimizer optimizer) {
  std::array<RegressionResult, kStreamCount> out;
  const Matrix x = batch.features();
  for (int k = 0; k < kStreamCount; ++k)
    out[k] = regress_critic(*critics[k], x, batch.returns(static_cast<Stream>(k)), lr, epochs, optimizer);
  return out;
}

Trainer::Trainer(TrainConfig config)
    : config_(validated(std::move(config))),
      spec_(config_.rho, config_.epsilon, config_.algorithm),
      policy_(make_policy(config_)),
      critics_(make_critics(config_, config_.make_environment()->spec())) {
  gae_.lambda = config_.gae_lambda;
  gae_.reward_discount = config_.reward_discount();
  gae_.cost_discount = config_.cost_discount();

  auto proto = config_.make_environment();
  auto prng = derived_rng(config_.seed, 0, kPolicyInit);
  policy_.initialize(prng, config_.log_std_init);
  for (int k = 0; k < kStreamCount; ++k) {
    auto crng = derived_rng(config_.seed, static_cast<std::uint64_t>(k), kCriticInit);
    critics_[k].initialize(crng);
  }

  if (!config_.init_checkpoint.empty()) {
    Checkpoint ckpt = load_checkpoint(config_.init_checkpoint);
    if (ckpt.policies.empty()) throw TrainingError("init checkpoint holds no policy");
    const Policy& p = ckpt.policies.front();
    if (p.kind() != policy_.kind() || p.parameter_count() != policy_.parameter_count())
      throw TrainingError("init checkpoint policy does not match the configured architecture");
    policy_.set_parameters(p.parameters());
    if (ckpt.values.size() == kStreamCount) {
      for (int k = 0; k < kStreamCount; ++k) {
        if (ckpt.values[k].parameter_count() != critics_[k].parameter_count())
          throw TrainingError("init checkpoint critic does not match the configured architecture");
        critics_[k].set_parameters(ckpt.values[k].parameters());
      }
    }
  }

  for (int w = 0; w < config_.workers; ++w) {
    Worker worker;
    worker.env = std::make_unique<AugmentedEnvironment>(proto->clone());
    auto seeder = derived_rng(config_.seed, static_cast<std::uint64_t>(w), kEnvStream);
    worker.env->reset(seeder());
    worker.rng = derived_rng(config_.seed, static_cast<std::uint64_t>(w), kActionStream);
    workers_.push_back(std::move(worker));
  }
}

void Trainer::collect_worker(Worker& w, int steps, std::vector<Trajectory>& out) const {
  AugmentedEnvironment& env = *w.env;
  const double y_scale = 1.0 / config_.rho;
  int taken = 0;
  while (taken < steps) {
    Trajectory tr;
    env.reset();
    while (true) {
      const Vector x = encode_features(env.state(), y_scale);
      const Action a = policy_.sample(x, w.rng);
      const double lp = policy_.log_prob(x, a);
      const auto step = env.step(a);
      ++taken;
      const double raw = step.outcome.cost;
      double signal = raw;
      if (config_.cost_signal == CostSignal::Exceedance)
        signal = (step.state.accumulated_cost < config_.rho && step.next.accumulated_cost >= config_.rho) ? 1.0 : 0.0;

      tr.features.push_back(x);
      tr.actions.push_back(a);
      tr.rewards.push_back(config_.objective == Objective::Cost ? raw : step.outcome.reward);
      tr.costs.push_back(signal);
      tr.aug_costs.push_back(augmented_cost(raw, step.state.accumulated_cost, step.state.discount, spec_));
      tr.accumulated.push_back(step.state.accumulated_cost);
      tr.discounts.push_back(step.state.discount);
      tr.log_probs.push_back(lp);
      tr.raw_cost_return += step.state.discount * raw;
      tr.ice_visits += landed_on_ice(env.base());

      if (step.outcome.done() || taken >= steps) {
        tr.terminated = step.outcome.terminated;
        tr.truncated = !tr.terminated;
        tr.cut = !step.outcome.done();
        tr.bootstrap_features = encode_features(step.next, y_scale);
        break;
      }
    }
    out.push_back(std::move(tr));
  }
}

RolloutBatch Trainer::collect() {
  const int k = static_cast<int>(workers_.size());
  std::vector<std::vector<Trajectory>> parts(k);
  std::vector<int> quota(k, config_.batch_steps / k);
  for (int i = 0; i < config_.batch_steps % k; ++i) ++quota[i];
  if (k == 1) {
    collect_worker(workers_[0], quota[0], parts[0]);
  } else {
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(k);
    for (int i = 0; i < k; ++i) {
      threads.emplace_back([&, i] {
        try {
          collect_worker(workers_[i], quota[i], parts[i]);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  RolloutBatch batch;
  for (auto& p : parts)
    for (auto& t : p) batch.trajectories.push_back(std::move(t));
  return batch;
}

IterationMetrics Trainer::iterate() {
  RolloutBatch batch = collect();
  ++iteration_;
  env_steps_ += static_cast<long>(batch.step_count());

  annotate(batch, {&critics_[0], &critics_[1], &critics_[2]}, gae_);
  MomentEstimates moments;
  try {
    moments = estimate_moments(batch);
  } catch (const EstimationError& e) {
    dump_state(e.what());
    throw TrainingError(std::string(e.what()) + " (iteration " + std::to_string(iteration_) +
                        "); increase train.batch_steps");
  }

  const ConstraintMode mode = resolve_mode(config_.algorithm, moments.mu, spec_);
  const double limit = config_.cost_signal == CostSignal::Exceedance ? config_.epsilon : config_.cost_limit;
  const SurrogateContext ctx =
      SurrogateContext::from_batch(batch, spec_, mode, moments, gae_.cost_discount, limit);
  const Vector g = objective_gradient(ctx, policy_);
  const ConstraintTerms terms = assemble_constraint_gradient(ctx, policy_);

  StepProblem problem;
  problem.g = g;
  problem.b = terms.b;
  problem.c = terms.c;
  problem.delta = config_.solver.delta;
  const double damping = config_.solver.damping;
  problem.fvp = [&](const Vector& v) { return policy_.fisher_vector_product(ctx.features, v, damping); };

  StepSolution sol;
  try {
    sol = solve_step(problem, config_.solver);
  } catch (const SolverError& e) {
    dump_state(e.what());
    throw TrainingError(std::string("policy step failed: ") + e.what());
  }

  const Policy old = policy_;
  Policy trial = policy_;
  const TrialEvaluator evaluator = [&](const Vector& theta) {
    return evaluate_trial(ctx, old, trial, theta, terms.c);
  };
  const LineSearchResult ls =
      line_search(policy_.parameters(), sol.direction, sol.report.dual_case, terms.c, evaluator, config_.solver);
  policy_.set_parameters(ls.theta);

  IterationMetrics m;
  m.iteration = iteration_;
  m.env_steps = env_steps_;
  m.mu = moments.mu;
  m.j_tilde = moments.j_tilde;
  m.mode = mode;
  m.c_offset = mode == ConstraintMode::Unconstrained ? constraint_eval(moments, spec_).c_offset : terms.c;

  m.step = sol.report;
  m.step.backtracks = ls.backtracks;
  m.step.accepted = ls.accepted;
  m.step.kl = ls.evaluation.kl;
  m.step.surrogate_change = ls.evaluation.objective_change;
  if (mode == ConstraintMode::Unconstrained) {
    m.step.constraint_before = m.c_offset;
    m.step.constraint_after = m.c_offset;
  } else {
    m.step.constraint_after = ls.evaluation.constraint_value;
  }

  std::vector<double> episode_costs;
  double reward_sum = 0.0;
  int ice = 0;
  for (const auto& t : batch.trajectories) {
    ice += t.ice_visits;
    if (t.cut) continue;
    episode_costs.push_back(t.raw_cost_return);
    reward_sum += t.reward_total();
  }
  if (!episode_costs.empty()) {
    const double n = static_cast<double>(episode_costs.size());
    m.reward_return = reward_sum / n;
    m.cost_p95 = empirical_quantile(episode_costs, 0.95);
    m.cost_p95_reliable = episode_costs.size() >= 30;
    m.violation_fraction =
        static_cast<double>(std::count_if(episode_costs.begin(), episode_costs.end(),
                                          [&](double c) { return c >= config_.rho; })) / n;
  }
  m.ice_visitation = static_cast<double>(ice) / static_cast<double>(batch.step_count());

  if (mode == ConstraintMode::VaR && gae_.cost_discount < 1.0) {
    const Vector ratio = (policy_.log_probs(ctx.features, ctx.actions) - ctx.old_log_probs).array().exp();
    const double alpha_tilde = ratio.cwiseProduct(ctx.aug_advantages).cwiseAbs().maxCoeff();
    const double alpha_c = ratio.cwiseProduct(ctx.cost_advantages).cwiseAbs().maxCoeff();
    m.wc_bound = worst_case_bound(alpha_tilde, alpha_c, moments.mu, config_.solver.delta, gae_.cost_discount,
                                  config_.epsilon);
  }

  update_critics(batch, {&critics_[0], &critics_[1], &critics_[2]}, config_.critic_lr, config_.critic_epochs,
                 config_.critic_optimizer);

  const double checks[] = {m.reward_return,         m.mu,           m.j_tilde, m.c_offset, m.cost_p95,
                           m.step.direction_norm,   m.step.kl,      m.step.surrogate_change,
                           m.step.constraint_after, m.ice_visitation};
  const bool params_ok = policy_.parameters().allFinite() && critics_[0].parameters().allFinite() &&
                         critics_[1].parameters().allFinite() && critics_[2].parameters().allFinite();
  if (!params_ok || !std::all_of(std::begin(checks), std::end(checks), [](double v) { return std::isfinite(v); })) {
    dump_state("non-finite value in iteration metrics or parameters");
    throw TrainingError("non-finite value at iteration " + std::to_string(iteration_) + ": " + metrics_csv_row(m));
  }
  return m;
}

std::vector<IterationMetrics> Trainer::train(std::ostream* progress) {
  const fs::path out_dir(config_.out_dir);
  fs::create_directories(out_dir);
  {
    std::ofstream cfg(out_dir / "config.txt");
    cfg << config_.to_text();
  }
  std::ofstream csv(out_dir / "metrics.csv");
  if (!csv) throw TrainingError("cannot write " + (out_dir / "metrics.csv").string());
  csv << metrics_csv_header() << '\n';

  std::vector<IterationMetrics> all;
  while (env_steps_ + config_.batch_steps <= config_.total_steps) {
    IterationMetrics m = iterate();
    csv << metrics_csv_row(m) << '\n';
    csv.flush();
    if (progress) {
      *progress << "iter " << m.iteration << " steps " << m.env_steps << " mode " << to_string(m.mode)
                << " reward " << g9(m.reward_return) << " mu " << g9(m.mu) << " p95 " << g9(m.cost_p95)
                << " ice " << g9(m.ice_visitation) << " kl " << g9(m.step.kl) << '\n';
    }
    if (iteration_ % config_.checkpoint_every == 0) {
      char stem[32];
      std::snprintf(stem, sizeof stem, "checkpoint_%06d", iteration_);
      write_checkpoint_files(stem);
    }
    all.push_back(m);
  }
  write_checkpoint_files("checkpoint_final");
  return all;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.policies.push_back(policy_);
  for (const auto& v : critics_) c.values.push_back(v);
  return c;
}

void Trainer::write_checkpoint_files(const std::string& stem) const {
  const fs::path dir(config_.out_dir);
  fs::create_directories(dir);
  save_checkpoint(dir / (stem + ".txt"), checkpoint());
  save_manifest(dir / (stem + ".manifest"), Manifest{config_.hash(), iteration_, env_steps_, config_});
}

void Trainer::dump_state(const std::string& reason) const {
  try {
    const fs::path dir(config_.out_dir);
    fs::create_directories(dir);
    std::ofstream out(dir / "failure_state.txt");
    out << "reason " << reason << "\n";
    out << "iteration " << iteration_ << "\n";
    out << "env_steps " << env_steps_ << "\n";
    out << "config\n" << config_.to_text();
    out << "parameters\n";
    write_checkpoint(out, checkpoint());
  } catch (...) {
    // The dump is best effort; the caller reports the original failure.
  }
}

void save_manifest(const fs::path& path, const Manifest& m) {
  std::ofstream out(path);
  if (!out) throw TrainingError("cannot write manifest " + path.string());
  out << "varcpo-manifest 1\n";
  out << "config_hash " << std::hex << std::setw(16) << std::setfill('0') << m.config_hash << std::dec << "\n";
  out << "iteration " << m.iteration << "\n";
  out << "env_steps " << m.env_steps << "\n";
  out << "config\n" << m.config.to_text();
}

Manifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw TrainingError("cannot read manifest " + path.string());
  Manifest m;
  std::string line;
  if (!std::getline(in, line) || line != "varcpo-manifest 1") throw TrainingError("not a manifest: " + path.string());
  std::string key;
  while (in >> key) {
    if (key == "config_hash") {
      in >> std::hex >> m.config_hash >> std::dec;
    } else if (key == "iteration") {
      in >> m.iteration;
    } else if (key == "env_steps") {
      in >> m.env_steps;
    } else if (key == "config") {
      std::getline(in, line);
      std::stringstream rest;
      rest << in.rdbuf();
      m.config = TrainConfig::from_text(rest.str());
      return m;
    } else {
      throw TrainingError("unexpected manifest field '" + key + "'");
    }
  }
  throw TrainingError("manifest has no config section: " + path.string());
}

EvaluationSummary evaluate(Environment& env, const ActionFn& act, int episodes, double rho, std::uint64_t seed) {
  if (episodes <= 0) throw std::invalid_argument("evaluation needs at least one episode");
  auto rng = derived_rng(seed, 0, kActionStream);
  const double gamma_c = env.spec().cost_discount;
  std::vector<double> costs;
  double reward_sum = 0.0;
  int successes = 0;
  long steps = 0;
  long ice = 0;
  for (int e = 0; e < episodes; ++e) {
    AugmentedState s{e == 0 ? env.reset(seed) : env.reset(), 0.0, 1.0};
    double reward = 0.0;
    while (true) {
      const StepOutcome out = env.step(act(s, rng));
      ++steps;
      ice += landed_on_ice(env);
      reward += out.reward;
      s = augment(out, s, gamma_c);
      if (out.done()) {
        successes += episode_success(env, out.terminated);
        break;
      }
    }
    costs.push_back(s.accumulated_cost);
    reward_sum += reward;
  }
  EvaluationSummary r;
  const double n = episodes;
  r.episodes = episodes;
  r.mean_reward = reward_sum / n;
  double mu = 0.0;
  for (double c : costs) mu += c;
  r.mu = mu / n;
  r.q50 = empirical_quantile(costs, 0.50);
  r.q90 = empirical_quantile(costs, 0.90);
  r.q95 = empirical_quantile(costs, 0.95);
  r.q99 = empirical_quantile(costs, 0.99);
  const double p = static_cast<double>(std::count_if(costs.begin(), costs.end(), [&](double c) { return c >= rho; })) / n;
  r.violation_probability = p;
  constexpr double z = 1.959963984540054;
  const double denom = 1.0 + z * z / n;
  const double centre = (p + z * z / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom;
  r.ci_low = std::max(0.0, centre - half);
  r.ci_high = std::min(1.0, centre + half);
  r.success_rate = successes / n;
  r.ice_visitation = static_cast<double>(ice) / static_cast<double>(steps);
  return r;
}

EvaluationSummary evaluate(const Checkpoint& ckpt, const TrainConfig& config, int episodes, std::uint64_t seed,
                           bool greedy) {
  if (ckpt.policies.empty()) throw TrainingError("checkpoint holds no policy");
  const Policy& policy = ckpt.policies.front();
  auto env = config.make_environment();
  const CmdpSpec& spec = env->spec();
  const Architecture& a = policy.architecture();
  if (a.input_dim != feature_dim(spec.observation_dim) || a.output_dim != spec.action_dim() ||
      (policy.kind() == HeadKind::CategoricalPolicy) != spec.discrete())
    throw TrainingError("checkpoint policy does not match environment '" + env->name() + "' dimensions");
  const double y_scale = 1.0 / config.rho;
  const ActionFn act = [&](const AugmentedState& s, std::mt19937_64& rng) {
    const Vector x = encode_features(s, y_scale);
    return greedy ? policy.mode(x) : policy.sample(x, rng);
  };
  return evaluate(*env, act, episodes, config.rho, seed);
}

}  // namespace varcpo
