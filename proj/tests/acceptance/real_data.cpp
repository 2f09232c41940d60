// Acceptance checks that need the published source files. Point TIDEALLOC_DATA_DIR at a
// directory holding
//   F-F_Research_Data_Factors.CSV  F-F_Research_Data_Factors_daily.CSV
//   PredictorData.csv              payout_yield.csv
// (TIDEALLOC_PAYOUT_COLUMN optionally names the payout column). Without them every check
// prints BLOCKED and the binary exits 77, which ctest reports as skipped.
//
//   acceptance_real_data          run 1, 7 and 6
//   acceptance_real_data 1 7      skip the (slow) grid searches

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "support/fixtures.hpp"
#include "tidealloc/cli.hpp"
#include "tidealloc/data.hpp"
#include "tidealloc/evaluation.hpp"

using namespace tidealloc;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kBuyHoldPv = 17.77;
constexpr double kBuyHoldSharpe = 0.95;

void report(bool pass, int id, const std::string& name, const std::string& detail) {
  std::printf("%s  [%d] %s: %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
}

int run_cli(const fs::path& dir, const std::string& args) {
  const std::string cmd = std::string("\"") + TIDEALLOC_CLI_PATH + "\" " + args + " >\"" +
                          (dir / "stdout.txt").string() + "\" 2>\"" + (dir / "stderr.txt").string() + "\"";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void require_cli(const fs::path& dir, const std::string& args) {
  if (run_cli(dir, args) != 0) {
    throw std::runtime_error("tidealloc " + args.substr(0, args.find(' ')) + " failed: " +
                             fixtures::read_text(dir / "stderr.txt"));
  }
}

struct SummaryRow {
  double portfolio_value = 0.0;
  double average_sharpe = 0.0;
};

std::map<std::string, SummaryRow> read_summary(const fs::path& file) {
  std::istringstream in(fixtures::read_text(file));
  std::string line;
  std::getline(in, line);
  std::getline(in, line);
  std::map<std::string, SummaryRow> rows;
  while (std::getline(in, line)) {
    std::stringstream ls(line);
    std::string policy, lu, pv, sharpe;
    std::getline(ls, policy, ',');
    std::getline(ls, lu, ',');
    std::getline(ls, pv, ',');
    std::getline(ls, sharpe, ',');
    rows[policy] = {std::stod(pv), std::stod(sharpe)};
  }
  return rows;
}

// Hyperparameter grids; the seed is a grid axis, so selection by validation log utility
// also picks the best of the three seeds without looking at the test split.
json q_grid(bool leverage) {
  return {{"algo", "q"},
          {"leverage", leverage},
          {"q", {{"episodes", 200}}},
          {"grid",
           {{"seed", {1, 2, 3}},
            {"q.alpha", {0.05, 0.1, 0.2}},
            {"q.gamma_td", {0.0, 0.9}},
            {"q.clusters", {8, 16}}}}};
}

json ddpg_grid() {
  return {{"algo", "ddpg"},
          {"leverage", false},
          {"ddpg", {{"episodes", 30}}},
          {"grid", {{"seed", {1, 2, 3}}, {"ddpg.n_step", {1, 3}}, {"ddpg.actor_lr", {1e-4, 1e-3}}}}};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  auto wanted = [&](int id) { return only.empty() || only.count(id); };

  const char* env_dir = std::getenv("TIDEALLOC_DATA_DIR");
  const fs::path src = env_dir ? env_dir : "";
  const char* names[] = {"F-F_Research_Data_Factors.CSV", "F-F_Research_Data_Factors_daily.CSV",
                         "PredictorData.csv", "payout_yield.csv"};
  std::string missing;
  for (const char* n : names) {
    if (!env_dir || !fs::exists(src / n)) missing += std::string(" ") + n;
  }
  if (!missing.empty()) {
    const std::string why = env_dir ? "missing" + missing + " in " + src.string()
                                    : std::string("TIDEALLOC_DATA_DIR is not set");
    for (int id : {1, 6, 7}) {
      if (wanted(id)) std::printf("BLOCKED [%d] real data unavailable (%s)\n", id, why.c_str());
    }
    return 77;
  }

  fixtures::QuietLog quiet;
  int failed = 0;
  try {
    const fs::path dir = fixtures::scratch_dir("acceptance_real");
    const fs::path data_dir = dir / "data";
    std::string prepare = "prepare --factors-monthly " + (src / names[0]).string() + " --factors-daily " +
                          (src / names[1]).string() + " --predictors " + (src / names[2]).string() +
                          " --payout " + (src / names[3]).string() + " --out " + data_dir.string();
    if (const char* col = std::getenv("TIDEALLOC_PAYOUT_COLUMN")) prepare += std::string(" --payout-column ") + col;
    require_cli(dir, prepare);

    const data::SplitName test_only[] = {data::SplitName::test};
    const auto data = data::load_prepared(data_dir, test_only);
    const auto& test = data.split(data::SplitName::test);

    if (wanted(1)) {
      const auto bh = eval::run_backtest(eval::buy_and_hold(), "buy_and_hold", test, env::EnvConfig{});
      const double rel = std::abs(bh.portfolio_value - kBuyHoldPv) / kBuyHoldPv;
      const bool pass = rel <= 0.05;
      failed += !pass;
      report(pass, 1, "buy-and-hold reproduction",
             "test split " + bh.months.front().date.str() + ".." + bh.months.back().date.str() +
                 ", final PV " + std::to_string(bh.portfolio_value) + " vs 17.77 (" +
                 std::to_string(100.0 * rel) + "% off, tol 5%)");
    }

    if (wanted(7)) {
      std::string detail;
      int within = 0;
      eval::SharpeConvention matched = eval::kDefaultSharpeConvention;
      for (auto conv : {eval::SharpeConvention::raw, eval::SharpeConvention::annualized}) {
        const auto bh = eval::run_backtest(eval::buy_and_hold(), "buy_and_hold", test, env::EnvConfig{}, conv);
        const bool hit = std::abs(bh.average_sharpe - kBuyHoldSharpe) <= 0.1;
        if (hit) {
          ++within;
          matched = conv;
        }
        detail += std::string(eval::to_string(conv)) + " " + std::to_string(bh.average_sharpe) + ", ";
      }
      const bool pass = within == 1 && matched == eval::kDefaultSharpeConvention;
      failed += !pass;
      report(pass, 7, "Sharpe convention calibration",
             detail + "frozen default " + std::string(eval::to_string(eval::kDefaultSharpeConvention)) +
                 ", conventions within 0.1 of 0.95: " + std::to_string(within));
    }

    if (wanted(6)) {
      const fs::path runs = dir / "runs";
      const std::string data_arg = " --data " + data_dir.string();
      const std::map<std::string, json> grids{
          {"q_nolev", q_grid(false)}, {"q_lev", q_grid(true)}, {"ddpg_nolev", ddpg_grid()}};
      std::string run_args;
      for (const auto& [label, grid] : grids) {
        fixtures::write_text(dir / (label + "_grid.json"), grid.dump(2));
        const fs::path search = dir / ("grid_" + label);
        require_cli(dir, "gridsearch --config " + (dir / (label + "_grid.json")).string() + data_arg +
                             " --out " + search.string());
        require_cli(dir, "train --config " + (search / cli::kBestConfigFile).string() + data_arg + " --out " +
                             (runs / label).string());
        const json best = json::parse(fixtures::read_text(search / cli::kBestConfigFile));
        std::printf("INFO  %s selected seed %s\n", label.c_str(), best.at("seed").dump().c_str());
        run_args += " --run " + (runs / label).string();
      }
      fixtures::write_text(dir / "buyhold.json", json{{"algo", "buyhold"}}.dump());
      require_cli(dir, "train --config " + (dir / "buyhold.json").string() + data_arg + " --out " +
                           (runs / "buy_and_hold").string());
      run_args += " --run " + (runs / "buy_and_hold").string();
      require_cli(dir, "evaluate --split test" + data_arg + " --out " + (dir / "eval").string() + run_args);

      const auto rows = read_summary(dir / "eval" / "test" / cli::kSummaryFile);
      std::string detail;
      for (const auto& [policy, row] : rows) {
        detail += policy + " PV " + std::to_string(row.portfolio_value) + " Sharpe " +
                  std::to_string(row.average_sharpe) + "; ";
      }
      const auto& d = rows.at("ddpg_nolev");
      const bool pass = d.portfolio_value > rows.at("q_nolev").portfolio_value &&
                        d.portfolio_value > rows.at("q_lev").portfolio_value &&
                        d.average_sharpe >= rows.at("buy_and_hold").average_sharpe - 0.1;
      failed += !pass;
      report(pass, 6, "ordering on real data", detail);
    }
  } catch (const std::exception& e) {
    std::printf("FAIL  real-data run aborted: %s\n", e.what());
    return 1;
  }
  return failed == 0 ? 0 : 1;
}
