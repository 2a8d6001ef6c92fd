#include "varcpo/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace varcpo {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_double(const std::string& v) {
  std::size_t pos = 0;
  const double d = std::stod(v, &pos);
  if (pos != v.size()) throw std::invalid_argument("trailing characters");
  return d;
}

long to_long(const std::string& v) {
  long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw std::invalid_argument("not an integer");
  return out;
}

std::uint64_t to_u64(const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw std::invalid_argument("not an unsigned integer");
  return out;
}

std::string_view to_string(CostSignal s) { return s == CostSignal::Raw ? "raw" : "exceedance"; }
std::string_view to_string(Objective o) { return o == Objective::Reward ? "reward" : "cost"; }
std::string_view to_string(CriticOptimizer o) { return o == CriticOptimizer::Sgd ? "sgd" : "adam"; }

template <typename E>
E parse_choice(const std::string& v, std::initializer_list<std::pair<const char*, E>> choices) {
  for (const auto& [name, value] : choices)
    if (v == name) return value;
  throw std::invalid_argument("unknown choice");
}

using Setter = std::function<void(TrainConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"env.name", [](TrainConfig& c, const std::string& v) {
         if (v != "icylake" && v != "battery") throw std::invalid_argument("expected icylake or battery");
         c.env = v;
       }},
      {"env.gamma", [](TrainConfig& c, const std::string& v) { c.icy.reward_discount = c.battery.reward_discount = to_double(v); }},
      {"env.cost_gamma", [](TrainConfig& c, const std::string& v) { c.icy.cost_discount = c.battery.cost_discount = to_double(v); }},
      {"env.max_steps", [](TrainConfig& c, const std::string& v) {
         c.icy.max_episode_steps = c.battery.max_episode_steps = static_cast<int>(to_long(v));
       }},
      {"env.map", [](TrainConfig& c, const std::string& v) {
         const auto rows = split(v, ',');
         if (rows.size() != 4) throw std::invalid_argument("expected 4 comma-separated rows");
         for (int i = 0; i < 4; ++i) c.icy.rows[i] = rows[i];
       }},
      {"env.snow_cost", [](TrainConfig& c, const std::string& v) { c.icy.snow_cost = to_double(v); }},
      {"env.ice_base_cost", [](TrainConfig& c, const std::string& v) { c.icy.ice_base_cost = to_double(v); }},
      {"env.slip_cost", [](TrainConfig& c, const std::string& v) { c.icy.slip_cost = to_double(v); }},
      {"env.slip_prob", [](TrainConfig& c, const std::string& v) { c.icy.slip_prob = to_double(v); }},
      {"env.goal_reward", [](TrainConfig& c, const std::string& v) { c.icy.goal_reward = to_double(v); }},
      {"env.goal_cost", [](TrainConfig& c, const std::string& v) { c.icy.goal_cost = to_double(v); }},
      {"env.capacity", [](TrainConfig& c, const std::string& v) { c.battery.capacity = to_double(v); }},
      {"env.drag", [](TrainConfig& c, const std::string& v) { c.battery.drag = to_double(v); }},
      {"algo.mode", [](TrainConfig& c, const std::string& v) {
         c.algorithm = parse_constraint_mode(v);
         if (c.algorithm == ConstraintMode::Recovery) throw std::invalid_argument("recovery is not a training mode");
       }},
      {"algo.objective", [](TrainConfig& c, const std::string& v) {
         c.objective = parse_choice<Objective>(v, {{"reward", Objective::Reward}, {"cost", Objective::Cost}});
       }},
      {"constraint.rho", [](TrainConfig& c, const std::string& v) { c.rho = to_double(v); }},
      {"constraint.epsilon", [](TrainConfig& c, const std::string& v) { c.epsilon = to_double(v); }},
      {"constraint.cost_limit", [](TrainConfig& c, const std::string& v) { c.cost_limit = to_double(v); }},
      {"constraint.cost_signal", [](TrainConfig& c, const std::string& v) {
         c.cost_signal = parse_choice<CostSignal>(v, {{"raw", CostSignal::Raw}, {"exceedance", CostSignal::Exceedance}});
       }},
      {"train.batch_steps", [](TrainConfig& c, const std::string& v) { c.batch_steps = static_cast<int>(to_long(v)); }},
      {"train.total_steps", [](TrainConfig& c, const std::string& v) { c.total_steps = to_long(v); }},
      {"train.seed", [](TrainConfig& c, const std::string& v) { c.seed = to_u64(v); }},
      {"train.workers", [](TrainConfig& c, const std::string& v) { c.workers = static_cast<int>(to_long(v)); }},
      {"train.out_dir", [](TrainConfig& c, const std::string& v) { c.out_dir = v; }},
      {"train.checkpoint_every", [](TrainConfig& c, const std::string& v) { c.checkpoint_every = static_cast<int>(to_long(v)); }},
      {"train.init_checkpoint", [](TrainConfig& c, const std::string& v) { c.init_checkpoint = v; }},
      {"gae.lambda", [](TrainConfig& c, const std::string& v) { c.gae_lambda = to_double(v); }},
      {"solver.delta", [](TrainConfig& c, const std::string& v) { c.solver.delta = to_double(v); }},
      {"solver.cg_iters", [](TrainConfig& c, const std::string& v) { c.solver.cg_iters = static_cast<int>(to_long(v)); }},
      {"solver.cg_tol", [](TrainConfig& c, const std::string& v) { c.solver.cg_tol = to_double(v); }},
      {"solver.damping", [](TrainConfig& c, const std::string& v) { c.solver.damping = to_double(v); }},
      {"solver.backtrack", [](TrainConfig& c, const std::string& v) { c.solver.backtrack = to_double(v); }},
      {"solver.max_backtracks", [](TrainConfig& c, const std::string& v) { c.solver.max_backtracks = static_cast<int>(to_long(v)); }},
      {"critic.lr", [](TrainConfig& c, const std::string& v) { c.critic_lr = to_double(v); }},
      {"critic.epochs", [](TrainConfig& c, const std::string& v) { c.critic_epochs = static_cast<int>(to_long(v)); }},
      {"critic.optimizer", [](TrainConfig& c, const std::string& v) {
         c.critic_optimizer = parse_choice<CriticOptimizer>(v, {{"sgd", CriticOptimizer::Sgd}, {"adam", CriticOptimizer::Adam}});
       }},
      {"net.hidden", [](TrainConfig& c, const std::string& v) {
         std::vector<int> sizes;
         for (const auto& s : split(v, ',')) sizes.push_back(static_cast<int>(to_long(s)));
         c.hidden = sizes;
       }},
      {"policy.log_std_init", [](TrainConfig& c, const std::string& v) { c.log_std_init = to_double(v); }},
      {"policy.log_std_min", [](TrainConfig& c, const std::string& v) { c.log_std_min = to_double(v); }},
      {"policy.log_std_max", [](TrainConfig& c, const std::string& v) { c.log_std_max = to_double(v); }},
  };
  return table;
}

}  // namespace

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  std::vector<std::string> problems;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      problems.push_back("line " + std::to_string(lineno) + ": expected key = value");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) {
      problems.push_back("line " + std::to_string(lineno) + ": empty key");
      continue;
    }
    if (out.count(key)) problems.push_back("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    out[key] = trim(line.substr(eq + 1));
  }
  if (!problems.empty()) {
    std::string msg = "config parse errors:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ConfigError(msg);
  }
  return out;
}

TrainConfig TrainConfig::from_text(const std::string& text) {
  TrainConfig cfg;
  std::vector<std::string> problems;
  for (const auto& [key, value] : parse_key_values(text)) {
    const auto it = setters().find(key);
    if (it == setters().end()) {
      problems.push_back(key + ": unknown key");
      continue;
    }
    try {
      it->second(cfg, value);
    } catch (const std::exception& e) {
      problems.push_back(key + ": invalid value '" + value + "' (" + e.what() + ")");
    }
  }
  if (!problems.empty()) {
    std::string msg = "invalid config keys:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ConfigError(msg);
  }
  cfg.validate();
  return cfg;
}

TrainConfig TrainConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

void TrainConfig::validate() const {
  std::vector<std::string> problems;
  auto check = [&](bool ok, const char* key, const std::string& why) {
    if (!ok) problems.push_back(std::string(key) + ": " + why);
  };
  auto guard = [&](const char* key, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      problems.push_back(std::string(key) + ": " + e.what());
    }
  };
  if (env == "icylake") {
    guard("env.*", [&] { IcyLake probe(icy); });
  } else if (env == "battery") {
    guard("env.*", [&] { BatteryToy probe(battery); });
  } else {
    problems.push_back("env.name: unknown environment '" + env + "'");
  }
  check(algorithm != ConstraintMode::Recovery, "algo.mode", "recovery is not a training mode");
  check(rho > 0.0 && std::isfinite(rho), "constraint.rho", "must be positive");
  check(epsilon > 0.0 && epsilon < 1.0, "constraint.epsilon", "must lie in (0,1)");
  check(std::isfinite(cost_limit), "constraint.cost_limit", "must be finite");
  check(cost_signal == CostSignal::Raw || algorithm == ConstraintMode::ExpectedCost, "constraint.cost_signal",
        "exceedance signal is only meaningful with algo.mode = expected_cost");
  check(batch_steps >= 1, "train.batch_steps", "must be >= 1");
  check(total_steps >= batch_steps, "train.total_steps", "must be >= train.batch_steps");
  check(workers >= 1 && workers <= batch_steps, "train.workers", "must lie in [1, train.batch_steps]");
  check(checkpoint_every >= 1, "train.checkpoint_every", "must be >= 1");
  check(!out_dir.empty(), "train.out_dir", "must not be empty");
  check(gae_lambda >= 0.0 && gae_lambda <= 1.0, "gae.lambda", "must lie in [0,1]");
  guard("solver.*", [&] { solver.validate(); });
  check(critic_lr > 0.0, "critic.lr", "must be positive");
  check(critic_epochs >= 0, "critic.epochs", "must be >= 0");
  bool hidden_ok = !hidden.empty();
  for (int h : hidden) hidden_ok = hidden_ok && h >= 1;
  check(hidden_ok, "net.hidden", "needs at least one positive layer width");
  check(log_std_min < log_std_max, "policy.log_std_min", "must be below policy.log_std_max");
  check(log_std_init >= log_std_min && log_std_init <= log_std_max, "policy.log_std_init",
        "must lie in [policy.log_std_min, policy.log_std_max]");
  if (!problems.empty()) {
    std::string msg = "invalid config:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ConfigError(msg);
  }
}

std::string TrainConfig::to_text() const {
  std::ostringstream o;
  o << "env.name = " << env << "\n";
  if (env == "icylake") {
    o << "env.gamma = " << fmt(icy.reward_discount) << "\n";
    o << "env.cost_gamma = " << fmt(icy.cost_discount) << "\n";
    o << "env.max_steps = " << icy.max_episode_steps << "\n";
    o << "env.map = " << icy.rows[0] << "," << icy.rows[1] << "," << icy.rows[2] << "," << icy.rows[3] << "\n";
    o << "env.snow_cost = " << fmt(icy.snow_cost) << "\n";
    o << "env.ice_base_cost = " << fmt(icy.ice_base_cost) << "\n";
    o << "env.slip_cost = " << fmt(icy.slip_cost) << "\n";
    o << "env.slip_prob = " << fmt(icy.slip_prob) << "\n";
    o << "env.goal_reward = " << fmt(icy.goal_reward) << "\n";
    o << "env.goal_cost = " << fmt(icy.goal_cost) << "\n";
  } else {
    o << "env.gamma = " << fmt(battery.reward_discount) << "\n";
    o << "env.cost_gamma = " << fmt(battery.cost_discount) << "\n";
    o << "env.max_steps = " << battery.max_episode_steps << "\n";
    o << "env.capacity = " << fmt(battery.capacity) << "\n";
    o << "env.drag = " << fmt(battery.drag) << "\n";
  }
  o << "algo.mode = " << to_string(algorithm) << "\n";
  o << "algo.objective = " << to_string(objective) << "\n";
  o << "constraint.rho = " << fmt(rho) << "\n";
  o << "constraint.epsilon = " << fmt(epsilon) << "\n";
  o << "constraint.cost_limit = " << fmt(cost_limit) << "\n";
  o << "constraint.cost_signal = " << to_string(cost_signal) << "\n";
  o << "train.batch_steps = " << batch_steps << "\n";
  o << "train.total_steps = " << total_steps << "\n";
  o << "train.seed = " << seed << "\n";
  o << "train.workers = " << workers << "\n";
  o << "train.out_dir = " << out_dir << "\n";
  o << "train.checkpoint_every = " << checkpoint_every << "\n";
  if (!init_checkpoint.empty()) o << "train.init_checkpoint = " << init_checkpoint << "\n";
  o << "gae.lambda = " << fmt(gae_lambda) << "\n";
  o << "solver.delta = " << fmt(solver.delta) << "\n";
  o << "solver.cg_iters = " << solver.cg_iters << "\n";
  o << "solver.cg_tol = " << fmt(solver.cg_tol) << "\n";
  o << "solver.damping = " << fmt(solver.damping) << "\n";
  o << "solver.backtrack = " << fmt(solver.backtrack) << "\n";
  o << "solver.max_backtracks = " << solver.max_backtracks << "\n";
  o << "critic.lr = " << fmt(critic_lr) << "\n";
  o << "critic.epochs = " << critic_epochs << "\n";
  o << "critic.optimizer = " << to_string(critic_optimizer) << "\n";
  o << "net.hidden = ";
  for (std::size_t i = 0; i < hidden.size(); ++i) o << (i ? "," : "") << hidden[i];
  o << "\n";
  o << "policy.log_std_init = " << fmt(log_std_init) << "\n";
  o << "policy.log_std_min = " << fmt(log_std_min) << "\n";
  o << "policy.log_std_max = " << fmt(log_std_max) << "\n";
  return o.str();
}

std::uint64_t TrainConfig::hash() const {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : to_text()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

ConstraintSpec TrainConfig::constraint_spec() const { return ConstraintSpec(rho, epsilon, algorithm); }

std::unique_ptr<Environment> TrainConfig::make_environment() const {
  if (env == "battery") return std::make_unique<BatteryToy>(battery);
  return std::make_unique<IcyLake>(icy);
}

double TrainConfig::reward_discount() const {
  return env == "battery" ? battery.reward_discount : icy.reward_discount;
}

double TrainConfig::cost_discount() const { return env == "battery" ? battery.cost_discount : icy.cost_discount; }

}  // namespace varcpo
