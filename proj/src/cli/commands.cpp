#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

#include "tidealloc/cli.hpp"
#include "tidealloc/log.hpp"

namespace tidealloc::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path, std::string_view what) {
  if (path.empty()) throw ValidationError("no path given for " + std::string(what));
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing " + std::string(what) + " file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Write to a sibling temp file, then rename over the target.
void write_file(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw DataError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw DataError("cannot replace " + path.string());
  }
}

// Config as stored in manifests; same keys the hash covers.
json recorded_config(const RunConfig& config) {
  json j = config_to_json(config);
  j.erase("out");
  j.erase("workers");
  return j;
}

template <typename Writer>
void write_with(const fs::path& path, Writer&& writer) {
  std::ostringstream ss;
  writer(ss);
  write_file(path, ss.str());
}

json read_json(const fs::path& path) {
  const std::string text = read_file(path.string(), "manifest");
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

template <typename T, typename Parse>
T parse_source(const std::string& path, const std::string& bytes, Parse parse) {
  std::istringstream in(bytes);
  try {
    return parse(in);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

std::string label_for(const fs::path& dir) {
  fs::path p = dir;
  if (p.filename().empty()) p = p.parent_path();
  std::string label = p.filename().string();
  for (char& c : label) {
    if (c == ' ' || c == ',' || c == '=' || c == '\t') c = '_';
  }
  return label.empty() ? "run" : label;
}

struct Trained {
  eval::Policy policy;
};

json train_manifest_extra(const std::string& dataset) {
  return {{"kind", "train"}, {"dataset", dataset}};
}

// Trains the configured agent on `train` and writes checkpoint, curves and manifest to `dir`.
Trained train_into(const RunConfig& config, const data::DatasetSplit& train,
                   const std::string& dataset, const fs::path& dir) {
  const std::string hash = manifest_hash(config, train_manifest_extra(dataset));
  fs::create_directories(dir);
  Trained out;

  switch (config.algo) {
    case Algo::buyhold: {
      write_file(dir / kPolicyFile, "# tidealloc-policy v1 manifest=" + hash +
                                        "\nalgo=buyhold weight=1\n");
      out.policy = eval::buy_and_hold();
      break;
    }
    case Algo::q: {
      const auto points = qlearn::clustering_points(train);
      const qlearn::Centroids centroids =
          qlearn::fit_kmeans(points, data::kFeatureCount, config.clusters, config.seed);
      const qlearn::ActionGrid grid = qlearn::ActionGrid::for_max_weight(config.max_weight());
      env::MarketEnv market(train, config.env_config());
      const qlearn::TrainResult result = qlearn::train(market, centroids, grid, config.q_config());
      write_with(dir / kQCheckpointFile, [&](std::ostream& o) {
        qlearn::write_checkpoint(o, centroids, grid, result.table, hash);
      });
      write_with(dir / kCurvesFile, [&](std::ostream& o) {
        o << "# tidealloc-curves v1 algo=q manifest=" << hash << "\nepisode,epsilon,reward_sum\n";
        for (std::size_t e = 0; e < result.episode_returns.size(); ++e) {
          o << e + 1 << ',' << format_double(config.q_config().epsilon_at(e)) << ','
            << format_double(result.episode_returns[e]) << '\n';
        }
      });
      out.policy = qlearn::greedy_policy(result.table, centroids, grid);
      break;
    }
    case Algo::ddpg: {
      env::MarketEnv market(train, config.env_config());
      ddpg::TrainResult result = ddpg::train(market, config.ddpg_config());
      write_with(dir / kDdpgCheckpointFile,
                 [&](std::ostream& o) { ddpg::write_checkpoint(o, result.agent, hash); });
      write_with(dir / kCurvesFile, [&](std::ostream& o) {
        o << "# tidealloc-curves v1 algo=ddpg manifest=" << hash
          << "\nepisode,reward_sum,final_wealth,mean_critic_loss,mean_actor_objective,updates\n";
        for (std::size_t e = 0; e < result.curve.size(); ++e) {
          const ddpg::EpisodeMetrics& m = result.curve[e];
          o << e + 1 << ',' << format_double(m.reward_sum) << ',' << format_double(m.final_wealth)
            << ',' << format_double(m.mean_critic_loss) << ','
            << format_double(m.mean_actor_objective) << ',' << m.updates << '\n';
        }
      });
      out.policy = result.agent.policy();
      break;
    }
  }

  const json manifest = {{"kind", "train"},
                         {"version", 1},
                         {"hash", hash},
                         {"dataset", dataset},
                         {"config", recorded_config(config)}};
  write_file(dir / kManifestFile, manifest.dump(2) + "\n");
  return out;
}

void write_evaluation_outputs(const fs::path& dir, std::span<const eval::BacktestReport> reports,
                              const std::string& hash) {
  const eval::Comparison comparison = eval::compare(reports);
  write_with(dir / kSummaryFile, [&](std::ostream& o) { eval::write_summary(o, comparison, hash); });
  write_with(dir / kSeriesFile,
             [&](std::ostream& o) { eval::write_comparison_series(o, comparison, hash); });
  for (eval::Figure f : {eval::Figure::wealth, eval::Figure::rolling_sharpe, eval::Figure::weights}) {
    write_file(dir / eval::figure_file_name(f), eval::render_figure(comparison, f, hash));
  }
  for (const eval::SummaryRow& row : comparison.summary) {
    log_info(row.policy + ": LU=" + format_double(row.log_utility) +
             " PV=" + format_double(row.portfolio_value) + " SR=" + format_double(row.average_sharpe));
  }
}

}  // namespace

std::string cmd_prepare(const RunConfig& config) {
  const DataSources& src = config.data;
  const std::string monthly_bytes = read_file(src.factors_monthly, "monthly factor");
  const std::string daily_bytes = read_file(src.factors_daily, "daily factor");
  const std::string predictor_bytes = read_file(src.predictors, "predictor");
  const std::string payout_bytes = read_file(src.payout, "payout-yield");

  const auto monthly = parse_source<std::vector<data::RawMonthly>>(
      src.factors_monthly, monthly_bytes, [](std::istream& in) { return data::parse_factor_monthly(in); });
  const auto daily = parse_source<std::vector<data::RawDaily>>(
      src.factors_daily, daily_bytes, [](std::istream& in) { return data::parse_factor_daily(in); });
  const auto predictors = parse_source<std::vector<data::PredictorRow>>(
      src.predictors, predictor_bytes, [](std::istream& in) { return data::parse_predictors(in); });
  const auto payout = parse_source<std::vector<data::MonthlyPoint>>(
      src.payout, payout_bytes,
      [&](std::istream& in) { return data::parse_monthly_series(in, src.payout_column); });

  const auto rvol = data::monthly_realized_volatility(daily);
  const auto records = data::build_feature_table(monthly, predictors, payout, rvol);
  std::vector<std::string> warnings;
  const data::SplitSet splits = data::standardize(data::split_by_year(records), &warnings);

  const json inputs = {{"factors_monthly", fnv1a_hex(monthly_bytes)},
                       {"factors_daily", fnv1a_hex(daily_bytes)},
                       {"predictors", fnv1a_hex(predictor_bytes)},
                       {"payout", fnv1a_hex(payout_bytes)},
                       {"payout_column", src.payout_column}};
  const json identity = {{"kind", "prepare"}, {"dataset_version", data::kDatasetVersion}, {"inputs", inputs}};
  const std::string hash = fnv1a_hex(identity.dump());

  const fs::path dir = config.out;
  fs::create_directories(dir);
  for (const data::DatasetSplit& split : splits) {
    write_with(data::split_path(dir, split.name),
               [&](std::ostream& o) { data::write_split(o, split, hash); });
  }
  write_with(data::stats_path(dir), [&](std::ostream& o) { data::write_stats(o, *splits[0].stats, hash); });
  json manifest = identity;
  manifest["hash"] = hash;
  manifest["records"] = {{"train", splits[0].records.size()},
                         {"validation", splits[1].records.size()},
                         {"test", splits[2].records.size()}};
  manifest["warnings"] = warnings;
  write_file(dir / kManifestFile, manifest.dump(2) + "\n");
  log_info("prepared " + std::to_string(records.size()) + " months into " + dir.string());
  return hash;
}

std::string cmd_train(const RunConfig& config) {
  config.validate();
  const data::SplitName only[] = {data::SplitName::train};
  const data::PreparedData data = data::load_prepared(config.data.prepared, only);
  train_into(config, data.split(data::SplitName::train), data.fingerprint, config.out);
  return manifest_hash(config, train_manifest_extra(data.fingerprint));
}

std::string cmd_gridsearch(const RunConfig& config) {
  config.validate();
  const std::vector<RunConfig> points = expand_grid(config);
  // Selection must never see the test split.
  const data::SplitName only[] = {data::SplitName::train, data::SplitName::validation};
  const data::PreparedData data = data::load_prepared(config.data.prepared, only);
  const std::string hash =
      manifest_hash(config, json{{"kind", "gridsearch"}, {"dataset", data.fingerprint}});
  const fs::path dir = config.out;
  fs::create_directories(dir);

  const std::size_t n = points.size();
  std::vector<eval::BacktestReport> validation(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        RunConfig rc = points[i];
        char name[32];
        std::snprintf(name, sizeof name, "run_%03zu", i);
        rc.out = (dir / name).string();
        const Trained t = train_into(rc, data.split(data::SplitName::train), data.fingerprint, rc.out);
        validation[i] = eval::run_backtest(t.policy, name, data.split(data::SplitName::validation),
                                           rc.env_config(), rc.sharpe);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min(config.workers, n);
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (validation[i].log_utility > validation[best].log_utility) best = i;
  }

  write_with(dir / kGridResultsFile, [&](std::ostream& o) {
    o << "# tidealloc-gridsearch v1 manifest=" << hash << '\n' << "index,run";
    for (const GridAxis& axis : config.grid) o << ',' << axis.key;
    o << ",validation_log_utility,validation_portfolio_value,validation_average_sharpe,selected\n";
    for (std::size_t i = 0; i < n; ++i) {
      const json point = config_to_json(points[i]);
      o << i << ',' << validation[i].policy;
      for (const GridAxis& axis : config.grid) {
        std::string p = "/" + axis.key;
        std::replace(p.begin(), p.end(), '.', '/');
        o << ',' << point[json::json_pointer(p)].dump();
      }
      o << ',' << format_double(validation[i].log_utility) << ','
        << format_double(validation[i].portfolio_value) << ','
        << format_double(validation[i].average_sharpe) << ',' << (i == best ? 1 : 0) << '\n';
    }
  });
  json best_config = config_to_json(points[best]);
  best_config.erase("out");
  write_file(dir / kBestConfigFile, best_config.dump(2) + "\n");
  const json manifest = {{"kind", "gridsearch"},
                         {"version", 1},
                         {"hash", hash},
                         {"dataset", data.fingerprint},
                         {"points", n},
                         {"selected", best},
                         {"config", recorded_config(config)}};
  write_file(dir / kManifestFile, manifest.dump(2) + "\n");
  log_info("gridsearch selected run " + std::to_string(best) + " with validation LU " +
           format_double(validation[best].log_utility));
  return hash;
}

LoadedRun load_run(const fs::path& dir) {
  const json manifest = read_json(dir / kManifestFile);
  if (manifest.value("kind", "") != "train") {
    throw SchemaError((dir / kManifestFile).string() + " is not a train manifest");
  }
  if (manifest.value("version", 0) != 1) throw VersionError((dir / kManifestFile).string() + ": unsupported version");
  LoadedRun run;
  run.config = config_from_json(manifest.at("config"));
  run.manifest_hash = manifest.at("hash").get<std::string>();
  run.dataset_fingerprint = manifest.at("dataset").get<std::string>();
  run.label = label_for(dir);

  auto check_hash = [&](const std::string& found, const fs::path& file) {
    if (found != run.manifest_hash) {
      throw VersionError(file.string() + ": checkpoint manifest " + found + " does not match " +
                         run.manifest_hash);
    }
  };
  switch (run.config.algo) {
    case Algo::buyhold: {
      std::istringstream in(read_file((dir / kPolicyFile).string(), "policy"));
      std::string header;
      std::getline(in, header);
      const std::string prefix = "# tidealloc-policy v1 manifest=";
      if (header.rfind(prefix, 0) != 0) throw VersionError((dir / kPolicyFile).string() + ": bad header");
      check_hash(header.substr(prefix.size()), dir / kPolicyFile);
      run.policy = eval::buy_and_hold();
      break;
    }
    case Algo::q: {
      std::istringstream in(read_file((dir / kQCheckpointFile).string(), "Q checkpoint"));
      const qlearn::Checkpoint cp = qlearn::read_checkpoint(in);
      check_hash(cp.manifest_hash, dir / kQCheckpointFile);
      run.policy = qlearn::greedy_policy(cp.table, cp.centroids, cp.grid);
      break;
    }
    case Algo::ddpg: {
      std::istringstream in(read_file((dir / kDdpgCheckpointFile).string(), "DDPG checkpoint"));
      ddpg::Agent agent(run.config.ddpg_config(), env::Observation::size_for(run.config.window));
      check_hash(ddpg::read_checkpoint(in, agent), dir / kDdpgCheckpointFile);
      run.policy = agent.policy();
      break;
    }
  }
  return run;
}

std::string cmd_evaluate(const RunConfig& config) {
  if (config.runs.empty()) throw ValidationError("evaluate: no runs given");
  std::vector<LoadedRun> runs;
  for (const std::string& r : config.runs) runs.push_back(load_run(r));
  for (std::size_t i = 0; i < runs.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (runs[i].label == runs[j].label) throw ValidationError("evaluate: duplicate run label " + runs[i].label);
    }
  }

  const data::SplitName only[] = {config.split};
  const data::PreparedData data = data::load_prepared(config.data.prepared, only);
  json run_hashes = json::array();
  for (const LoadedRun& run : runs) {
    if (run.dataset_fingerprint != data.fingerprint) {
      throw VersionError("run " + run.label + " was trained on dataset " + run.dataset_fingerprint +
                         " but " + config.data.prepared + " holds " + data.fingerprint);
    }
    run_hashes.push_back({{"label", run.label}, {"hash", run.manifest_hash}});
  }
  const std::string hash = manifest_hash(
      config, json{{"kind", "evaluate"}, {"dataset", data.fingerprint}, {"runs", run_hashes}});

  std::vector<eval::BacktestReport> reports;
  for (const LoadedRun& run : runs) {
    reports.push_back(eval::run_backtest(run.policy, run.label, data.split(config.split),
                                         run.config.env_config(), config.sharpe));
  }

  const fs::path dir = fs::path(config.out) / std::string(data::to_string(config.split));
  fs::create_directories(dir);
  for (const eval::BacktestReport& r : reports) {
    write_with(dir / ("report_" + r.policy + ".csv"),
               [&](std::ostream& o) { eval::write_report(o, r, hash); });
  }
  write_evaluation_outputs(dir, reports, hash);
  const json manifest = {{"kind", "evaluate"},
                         {"version", 1},
                         {"hash", hash},
                         {"dataset", data.fingerprint},
                         {"runs", run_hashes},
                         {"config", recorded_config(config)}};
  write_file(dir / kManifestFile, manifest.dump(2) + "\n");
  return hash;
}

std::string cmd_report(const RunConfig& config) {
  const fs::path dir = fs::path(config.out) / std::string(data::to_string(config.split));
  if (!fs::is_directory(dir)) throw DataError("no evaluation output at " + dir.string());
  std::vector<fs::path> files;
  for (const fs::directory_entry& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.rfind("report_", 0) == 0 && e.path().extension() == ".csv") files.push_back(e.path());
  }
  if (files.empty()) throw DataError("no report files in " + dir.string());
  std::sort(files.begin(), files.end());

  std::vector<eval::BacktestReport> reports;
  std::string hash;
  for (const fs::path& f : files) {
    std::istringstream in(read_file(f.string(), "report"));
    std::string h;
    reports.push_back(eval::read_report(in, &h));
    if (hash.empty()) hash = h;
    if (h != hash) throw VersionError(f.string() + ": report from a different evaluation (" + h + ")");
  }
  write_evaluation_outputs(dir, reports, hash);
  return hash;
}

std::string run_command(const RunConfig& config) {
  switch (config.command) {
    case Command::prepare: return cmd_prepare(config);
    case Command::train: return cmd_train(config);
    case Command::gridsearch: return cmd_gridsearch(config);
    case Command::evaluate: return cmd_evaluate(config);
    case Command::report: return cmd_report(config);
  }
  throw ValidationError("unknown command");
}

}  // namespace tidealloc::cli
