// Experiment runner CLI: `scbf run <config>` executes the configured methods
// and writes per-round CSV logs plus a JSON summary; `scbf compare <config>`
// additionally merges the per-loop curves of all methods into one CSV.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "scbf/config_io.hpp"
#include "scbf/federation.hpp"

namespace {

enum class LogLevel { kQuiet = 0, kInfo = 1, kDebug = 2 };

LogLevel log_level_from_env() {
  const char* env = std::getenv("SCBF_LOG");
  if (env == nullptr) return LogLevel::kInfo;
  const std::string v(env);
  if (v == "quiet") return LogLevel::kQuiet;
  if (v == "debug") return LogLevel::kDebug;
  return LogLevel::kInfo;
}

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::int64_t> loops;
};

void apply_overrides(scbf::JobConfig& job, const Overrides& o) {
  if (o.seed) job.base.master_seed = *o.seed;
  if (o.out_dir) job.out_dir = *o.out_dir;
  if (o.loops) job.base.global_loops = *o.loops;
}

// Runs one method, streaming rows into `rounds_path` so a partial file
// survives a mid-run failure.
std::vector<scbf::RoundRecord> run_streaming(const scbf::ExperimentConfig& cfg,
                                             const std::string& rounds_path,
                                             LogLevel level) {
  std::ofstream rounds(rounds_path);
  if (!rounds)
    throw scbf::InputError("cannot open " + rounds_path + " for writing");
  rounds << scbf::rounds_csv_header() << '\n';
  rounds.flush();
  auto on_round = [&](const scbf::RoundRecord& r) {
    rounds << scbf::rounds_csv_row(r) << '\n';
    rounds.flush();
    if (level >= LogLevel::kDebug) {
      std::cerr << "  loop " << r.loop << ": auc_roc="
                << r.auc_roc << " auc_pr=" << r.auc_pr << " uploaded="
                << r.uploaded_total << " pruned=" << r.neurons_pruned_total
                << '\n';
    }
  };
  return scbf::run_experiment<double>(cfg, on_round);
}

int run_job(const scbf::JobConfig& job, bool require_two, LogLevel level) {
  namespace fs = std::filesystem;
  if (require_two && job.methods.size() < 2) {
    std::cerr << "compare needs at least 2 methods in the config\n";
    return 2;
  }
  fs::create_directories(job.out_dir);

  const auto configs = scbf::resolve_methods(job);
  scbf::NamedRecords runs;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const std::string name = scbf::method_name(configs[i].method);
    if (level >= LogLevel::kInfo)
      std::cerr << "running " << name << " (" << configs[i].global_loops
                << " loops, K=" << configs[i].clients << ")\n";
    const std::string rounds_path =
        job.methods.size() == 1 && i == 0
            ? job.out_dir + "/rounds.csv"
            : job.out_dir + "/rounds_" + name + ".csv";
    auto records = run_streaming(configs[i], rounds_path, level);
    if (job.methods.size() > 1 && i == 0) {
      // keep the documented rounds.csv name pointing at the first method
      fs::copy_file(rounds_path, job.out_dir + "/rounds.csv",
                    fs::copy_options::overwrite_existing);
    }
    if (level >= LogLevel::kInfo && !records.empty()) {
      std::cerr << "  final auc_roc=" << records.back().auc_roc
                << " auc_pr=" << records.back().auc_pr << '\n';
    }
    runs.emplace_back(name, std::move(records));
  }
  const double total_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  if (require_two) {
    std::ofstream cmp(job.out_dir + "/compare.csv");
    cmp << scbf::compare_csv(runs);
  }
  std::ofstream summary(job.out_dir + "/summary.json");
  summary << scbf::summary_json(runs, total_seconds);
  if (level >= LogLevel::kInfo)
    std::cerr << "wrote " << job.out_dir << "/summary.json\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Channel-based federated learning experiment runner"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides overrides;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("config", config_path, "JSON experiment config")
        ->required();
    cmd->add_option("--seed", overrides.seed, "Override master_seed");
    cmd->add_option("--out-dir", overrides.out_dir, "Override output directory");
    cmd->add_option("--loops", overrides.loops, "Override global_loops");
  };

  CLI::App* run_cmd = app.add_subcommand("run", "Run the configured methods");
  add_common(run_cmd);
  CLI::App* compare_cmd = app.add_subcommand(
      "compare", "Run >=2 methods on identical data/seed and merge the curves");
  add_common(compare_cmd);

  CLI11_PARSE(app, argc, argv);

  const LogLevel level = log_level_from_env();
  try {
    scbf::JobConfig job = scbf::parse_job_file(config_path);
    apply_overrides(job, overrides);
    job.base.validate();
    return run_job(job, compare_cmd->parsed(), level);
  } catch (const scbf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const scbf::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
