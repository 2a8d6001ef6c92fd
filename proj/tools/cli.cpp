#include "cli.hpp"

#include <cstdio>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "varcpo/checkpoint.hpp"
#include "varcpo/config.hpp"
#include "varcpo/plot.hpp"
#include "varcpo/selftest.hpp"
#include "varcpo/trainer.hpp"

namespace varcpo {

namespace fs = std::filesystem;

namespace {

std::string g6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

int run_train(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& out_dir,
              bool quiet, std::ostream& out) {
  TrainConfig cfg = TrainConfig::from_file(config_path);
  if (seed) cfg.seed = *seed;
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  cfg.validate();
  Trainer trainer(cfg);
  const auto metrics = trainer.train(quiet ? nullptr : &out);
  out << "trained " << metrics.size() << " iterations, " << trainer.env_steps() << " env steps; metrics at "
      << (fs::path(cfg.out_dir) / "metrics.csv").string() << "\n";
  if (!metrics.empty()) {
    const auto& m = metrics.back();
    out << "final mode=" << to_string(m.mode) << " reward_return=" << g6(m.reward_return) << " mu=" << g6(m.mu)
        << " cost_p95=" << g6(m.cost_p95) << " ice_visitation=" << g6(m.ice_visitation) << "\n";
  }
  return 0;
}

int run_eval(const std::string& checkpoint_path, int episodes, const std::string& config_path, std::uint64_t seed,
             bool greedy, std::ostream& out) {
  if (episodes <= 0) throw std::invalid_argument("--episodes must be positive");
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  TrainConfig cfg;
  if (!config_path.empty()) {
    cfg = TrainConfig::from_file(config_path);
  } else {
    fs::path manifest(checkpoint_path);
    manifest.replace_extension(".manifest");
    if (!fs::exists(manifest))
      throw std::invalid_argument("no manifest next to checkpoint; pass --config to name the environment");
    cfg = load_manifest(manifest).config;
  }
  const EvaluationSummary s = evaluate(ckpt, cfg, episodes, seed, greedy);
  out << "episodes " << s.episodes << "\n";
  out << "mean_reward " << g6(s.mean_reward) << "\n";
  out << "mu " << g6(s.mu) << "\n";
  out << "cost_q50 " << g6(s.q50) << "\n";
  out << "cost_q90 " << g6(s.q90) << "\n";
  out << "cost_q95 " << g6(s.q95) << "\n";
  out << "cost_q99 " << g6(s.q99) << "\n";
  out << "violation_probability " << g6(s.violation_probability) << " ci95 [" << g6(s.ci_low) << ", "
      << g6(s.ci_high) << "]\n";
  out << "success_rate " << g6(s.success_rate) << "\n";
  out << "ice_visitation " << g6(s.ice_visitation) << "\n";
  return 0;
}

int run_plot(const std::vector<std::string>& inputs, const std::string& out_dir, bool quiet, std::ostream& out) {
  std::vector<fs::path> paths(inputs.begin(), inputs.end());
  const auto written = write_plots(paths, out_dir);
  if (!quiet)
    for (const auto& p : written) out << "wrote " << p.string() << "\n";
  return 0;
}

int run_selftest_cmd(double perturb_beta, std::ostream& out) {
  SelftestOptions opt;
  opt.beta_perturbation = perturb_beta;
  bool ok = true;
  for (const auto& r : run_selftest(opt)) {
    out << (r.passed() ? "PASS " : "FAIL ") << r.name << " cases=" << r.cases << " failures=" << r.failures
        << " worst=" << g6(r.worst) << "\n";
    ok = ok && r.passed();
  }
  return ok ? 0 : 1;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"VaR-constrained policy optimization: train, evaluate, plot, self-test"};
  app.name("varcpo");
  app.require_subcommand(1, 1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress progress output (results are still printed)");

  auto* train = app.add_subcommand("train", "Train a policy from a config file");
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  train->add_option("--config", config_path, "Config file (key = value)")->required()->check(CLI::ExistingFile);
  train->add_option("--seed", seed, "Override train.seed");
  train->add_option("--out", out_dir, "Override train.out_dir");
  train->fallthrough();

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint with a frozen policy");
  std::string checkpoint_path;
  int episodes = 0;
  std::string eval_config;
  std::uint64_t eval_seed = 0;
  bool greedy = false;
  eval->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--episodes", episodes, "Number of episodes")->required();
  eval->add_option("--config", eval_config, "Config naming the environment (default: the checkpoint manifest)")
      ->check(CLI::ExistingFile);
  eval->add_option("--seed", eval_seed, "Evaluation seed");
  eval->add_flag("--greedy", greedy, "Take the most likely action instead of sampling");
  eval->fallthrough();

  auto* plot = app.add_subcommand("plot", "Render metrics CSVs to SVG panels");
  std::vector<std::string> inputs;
  std::string plot_out;
  plot->add_option("--inputs", inputs, "Metrics CSV files")->required()->delimiter(',');
  plot->add_option("--out", plot_out, "Output directory")->required();
  plot->fallthrough();

  auto* selftest = app.add_subcommand("selftest", "Run the moment-identity and Chebyshev property suites");
  double perturb_beta = 0.0;
  selftest->add_option("--perturb-beta", perturb_beta, "Offset beta in the augmented cost (negative control)");
  selftest->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const CLI::App* sub = nullptr;
    for (const auto* s : app.get_subcommands()) sub = s;
    err << (sub ? sub->help() : app.help());
    return e.get_exit_code() == 0 ? 2 : e.get_exit_code();
  }

  try {
    if (train->parsed()) return run_train(config_path, seed, out_dir, quiet, out);
    if (eval->parsed()) return run_eval(checkpoint_path, episodes, eval_config, eval_seed, greedy, out);
    if (plot->parsed()) return run_plot(inputs, plot_out, quiet, out);
    if (selftest->parsed()) return run_selftest_cmd(perturb_beta, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace varcpo
