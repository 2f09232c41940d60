#pragma once

// Run configuration, manifests and the prepare/train/gridsearch/evaluate/report commands.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "tidealloc/ddpg.hpp"
#include "tidealloc/evaluation.hpp"
#include "tidealloc/tabular_q.hpp"

namespace tidealloc::cli {

enum class Command { prepare, train, gridsearch, evaluate, report };
enum class Algo { q, ddpg, buyhold };

std::string_view to_string(Command command);
Command command_from_string(std::string_view text);
std::string_view to_string(Algo algo);
Algo algo_from_string(std::string_view text);

struct DataSources {
  std::string factors_monthly;
  std::string factors_daily;
  std::string predictors;
  std::string payout;
  std::string payout_column;  // empty: the payout file must have exactly two columns
  std::string prepared = "data";  // directory written by prepare, read by everything else
};

struct GridAxis {
  std::string key;                    // dotted config path, e.g. "q.alpha"
  std::vector<nlohmann::json> values;
};

struct RunConfig {
  Command command = Command::train;
  DataSources data;
  data::SplitName split = data::SplitName::test;
  Algo algo = Algo::ddpg;
  bool leverage = false;
  std::uint64_t seed = 1;
  std::string out = "runs/default";
  eval::SharpeConvention sharpe = eval::kDefaultSharpeConvention;
  std::size_t window = env::kDefaultWindow;
  std::size_t clusters = qlearn::kDefaultClusters;
  qlearn::QConfig q;
  ddpg::DdpgConfig ddpg;
  std::vector<GridAxis> grid;      // gridsearch only; enumerated in key order, last key fastest
  std::vector<std::string> runs;   // evaluate only: run directories written by train
  std::size_t workers = 1;         // gridsearch threads

  double max_weight() const { return leverage ? 1.5 : 1.0; }
  env::EnvConfig env_config() const;
  /// q/ddpg configs with the shared seed and leverage applied.
  qlearn::QConfig q_config() const;
  ddpg::DdpgConfig ddpg_config() const;
  /// Throws ValidationError on any invalid hyperparameter.
  void validate() const;
};

/// Unknown keys and wrongly typed values throw ValidationError. Missing keys keep defaults.
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& config);
RunConfig load_config(const std::filesystem::path& path);

/// FNV-1a of the canonical JSON of everything that affects results (`out` and `workers`
/// excluded), together with `extra` (dataset fingerprint, input digests, ...).
std::string manifest_hash(const RunConfig& config, const nlohmann::json& extra = {});

/// Every point of the grid, in enumeration order, as full configs with command=train.
std::vector<RunConfig> expand_grid(const RunConfig& config);

// Commands. Each writes into config.out and returns the manifest hash of the run.
std::string cmd_prepare(const RunConfig& config);
std::string cmd_train(const RunConfig& config);
std::string cmd_gridsearch(const RunConfig& config);
std::string cmd_evaluate(const RunConfig& config);
std::string cmd_report(const RunConfig& config);
std::string run_command(const RunConfig& config);

/// A trained run reloaded from its directory.
struct LoadedRun {
  RunConfig config;
  std::string label;
  std::string manifest_hash;
  std::string dataset_fingerprint;
  eval::Policy policy;
};
LoadedRun load_run(const std::filesystem::path& dir);

/// Output locations, relative to config.out.
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kCurvesFile = "curves.csv";
inline constexpr const char* kQCheckpointFile = "q_checkpoint.txt";
inline constexpr const char* kDdpgCheckpointFile = "ddpg_checkpoint.txt";
inline constexpr const char* kPolicyFile = "policy.txt";
inline constexpr const char* kGridResultsFile = "gridsearch.csv";
inline constexpr const char* kBestConfigFile = "best_config.json";
inline constexpr const char* kSummaryFile = "summary.csv";
inline constexpr const char* kSeriesFile = "comparison.csv";

/// Process exit code for an exception: 1 validation, 2 data, 3 runtime.
int exit_code_for(const std::exception& e);

}  // namespace tidealloc::cli
