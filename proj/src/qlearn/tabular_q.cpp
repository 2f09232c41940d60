#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>

#include "tidealloc/tabular_q.hpp"

namespace tidealloc::qlearn {

// --- ActionGrid ---

ActionGrid::ActionGrid(std::vector<double> weights) : weights_(std::move(weights)) {
  if (weights_.empty()) throw ValidationError("action grid is empty");
  if (weights_.front() < 0.0) throw ValidationError("action grid has a negative weight");
  for (std::size_t i = 1; i < weights_.size(); ++i) {
    if (!(weights_[i] > weights_[i - 1])) throw ValidationError("action grid not strictly increasing");
  }
}

ActionGrid ActionGrid::unlevered() {
  std::vector<double> w;
  for (int i = 0; i <= 10; ++i) w.push_back(i / 10.0);
  return ActionGrid(std::move(w));
}

ActionGrid ActionGrid::levered() {
  std::vector<double> w;
  for (int i = 0; i <= 10; ++i) w.push_back(i * 15 / 100.0);
  return ActionGrid(std::move(w));
}

ActionGrid ActionGrid::for_max_weight(double max_weight) {
  if (max_weight == 1.0) return unlevered();
  if (max_weight == 1.5) return levered();
  throw ValidationError("no action grid for max weight " + format_double(max_weight));
}

// --- QTable ---

QTable::QTable(std::size_t states, std::size_t actions)
    : states_(states), actions_(actions), values_(states * actions, 0.0),
      visits_(states * actions, 0) {}

double QTable::max_value(std::size_t s) const { return value(s, argmax(s)); }

std::size_t QTable::argmax(std::size_t s) const {
  std::size_t best = 0;
  for (std::size_t a = 1; a < actions_; ++a) {
    if (value(s, a) > value(s, best)) best = a;
  }
  return best;
}

double q_update(QTable& table, std::size_t s, std::size_t a, double r,
                std::optional<std::size_t> s_next, double alpha, double gamma_td) {
  const double bootstrap = s_next ? table.max_value(*s_next) : 0.0;
  const double target = r + gamma_td * bootstrap;
  double& q = table.value(s, a);
  q += alpha * (target - q);
  if (!std::isfinite(q)) throw NumericError("q_update produced a non-finite value");
  table.add_visit(s, a);
  return q;
}

std::size_t select_action(const QTable& table, std::size_t s, double epsilon,
                          std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (u(rng) < epsilon) {
    std::uniform_int_distribution<std::size_t> pick(0, table.actions() - 1);
    return pick(rng);
  }
  return table.argmax(s);
}

// --- QConfig ---

void QConfig::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ValidationError("alpha must lie in (0, 1]");
  if (!(alpha_decay >= 0.0)) throw ValidationError("alpha_decay must be >= 0");
  if (!(gamma_td >= 0.0 && gamma_td < 1.0)) throw ValidationError("gamma_td must lie in [0, 1)");
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!unit(epsilon_start) || !unit(epsilon_end)) throw ValidationError("epsilon must lie in [0, 1]");
  if (epsilon_end > epsilon_start) throw ValidationError("epsilon_end exceeds epsilon_start");
  if (!(epsilon_decay > 0.0 && epsilon_decay <= 1.0)) {
    throw ValidationError("epsilon_decay must lie in (0, 1]");
  }
}

double QConfig::epsilon_at(std::size_t episode) const {
  return std::max(epsilon_end, epsilon_start * std::pow(epsilon_decay, static_cast<double>(episode)));
}

double QConfig::alpha_for(std::uint64_t visits) const {
  if (alpha_decay == 0.0) return alpha;
  return alpha / std::pow(1.0 + static_cast<double>(visits), alpha_decay);
}

// --- market adapter ---

ClusteredMarketEnv::ClusteredMarketEnv(env::MarketEnv& market, const Centroids& centroids,
                                       const ActionGrid& grid)
    : market_(&market), centroids_(&centroids), grid_(&grid) {
  if (grid.max_weight() > market.config().max_weight) {
    throw ValidationError("action grid exceeds the environment's max weight");
  }
}

std::size_t ClusteredMarketEnv::reset() {
  return assign_cluster(market_->reset().latest_features(), *centroids_);
}

DiscreteStep ClusteredMarketEnv::step(std::size_t action) {
  const env::StepOutcome out = market_->step((*grid_)[action]);
  DiscreteStep step;
  step.reward = out.reward;
  step.terminal = out.done;
  if (!out.done) step.next_state = assign_cluster(out.next_observation->latest_features(), *centroids_);
  return step;
}

std::vector<double> clustering_points(const data::DatasetSplit& split) {
  std::vector<double> points;
  points.reserve(split.records.size() * data::kFeatureCount);
  for (const auto& rec : split.records) {
    points.insert(points.end(), rec.features.begin(), rec.features.end());
  }
  return points;
}

TrainResult train(env::MarketEnv& market, const Centroids& centroids, const ActionGrid& grid,
                  const QConfig& config) {
  ClusteredMarketEnv discrete(market, centroids, grid);
  return train_discrete(discrete, config);
}

Policy greedy_policy(const QTable& table, const Centroids& centroids, const ActionGrid& grid) {
  return [table, centroids, grid](const env::Observation& obs) {
    return grid[table.argmax(assign_cluster(obs.latest_features(), centroids))];
  };
}

// --- checkpoint ---

namespace {

constexpr std::string_view kMagic = "# tidealloc-qtable v";
constexpr int kVersion = 1;

std::istringstream expect_line(std::istream& in, std::string_view tag) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("q checkpoint: unexpected end before " + std::string(tag));
  std::istringstream tokens(line);
  std::string t;
  tokens >> t;
  if (t != tag) throw SchemaError("q checkpoint: expected '" + std::string(tag) + "', found '" + t + "'");
  return tokens;
}

std::string value_of(std::istringstream& tokens, std::string_view key) {
  std::string tok;
  tokens >> tok;
  const std::string prefix = std::string(key) + "=";
  if (tok.rfind(prefix, 0) != 0) throw SchemaError("q checkpoint: expected " + prefix);
  return tok.substr(prefix.size());
}

std::vector<double> read_numbers(std::istream& in, std::size_t count) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("q checkpoint: missing row");
  std::istringstream tokens(line);
  std::vector<double> out;
  std::string tok;
  while (tokens >> tok) {
    double v = 0.0;
    if (!parse_double(tok, v)) throw SchemaError("q checkpoint: bad number '" + tok + "'");
    out.push_back(v);
  }
  if (out.size() != count) throw SchemaError("q checkpoint: row has wrong length");
  return out;
}

void write_numbers(std::ostream& out, std::span<const double> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    out << (i ? " " : "") << format_double(values[i]);
  }
  out << '\n';
}

}  // namespace

void write_checkpoint(std::ostream& out, const Centroids& centroids, const ActionGrid& grid,
                      const QTable& table, std::string_view manifest_hash) {
  out << kMagic << kVersion << " manifest=" << manifest_hash << '\n';
  out << "centroids k=" << centroids.k << " dim=" << centroids.dim << " seed=" << centroids.seed
      << '\n';
  for (std::size_t c = 0; c < centroids.k; ++c) write_numbers(out, centroids.row(c));
  out << "grid n=" << grid.size() << '\n';
  write_numbers(out, grid.weights());
  out << "table states=" << table.states() << " actions=" << table.actions() << '\n';
  std::vector<double> row(table.actions());
  for (std::size_t s = 0; s < table.states(); ++s) {
    for (std::size_t a = 0; a < table.actions(); ++a) row[a] = table.value(s, a);
    write_numbers(out, row);
  }
  out << "visits\n";
  for (std::size_t s = 0; s < table.states(); ++s) {
    for (std::size_t a = 0; a < table.actions(); ++a) {
      out << (a ? " " : "") << table.visits(s, a);
    }
    out << '\n';
  }
}

Checkpoint read_checkpoint(std::istream& in) {
  Checkpoint cp;
  std::string line;
  if (!std::getline(in, line) || line.rfind(kMagic, 0) != 0) {
    throw VersionError("q checkpoint: missing versioned header");
  }
  {
    std::istringstream rest(line.substr(kMagic.size()));
    int version = 0;
    rest >> version;
    if (version != kVersion) throw VersionError("q checkpoint: unsupported version " + std::to_string(version));
    cp.manifest_hash = value_of(rest, "manifest");
  }
  auto header = expect_line(in, "centroids");
  cp.centroids.k = std::stoul(value_of(header, "k"));
  cp.centroids.dim = std::stoul(value_of(header, "dim"));
  cp.centroids.seed = std::stoull(value_of(header, "seed"));
  for (std::size_t c = 0; c < cp.centroids.k; ++c) {
    const auto row = read_numbers(in, cp.centroids.dim);
    cp.centroids.values.insert(cp.centroids.values.end(), row.begin(), row.end());
  }
  auto grid_header = expect_line(in, "grid");
  cp.grid = ActionGrid(read_numbers(in, std::stoul(value_of(grid_header, "n"))));
  auto table_header = expect_line(in, "table");
  const std::size_t states = std::stoul(value_of(table_header, "states"));
  const std::size_t actions = std::stoul(value_of(table_header, "actions"));
  if (states != cp.centroids.k || actions != cp.grid.size()) {
    throw SchemaError("q checkpoint: table shape does not match centroids/grid");
  }
  cp.table = QTable(states, actions);
  for (std::size_t s = 0; s < states; ++s) {
    const auto row = read_numbers(in, actions);
    for (std::size_t a = 0; a < actions; ++a) cp.table.value(s, a) = row[a];
  }
  expect_line(in, "visits");
  for (std::size_t s = 0; s < states; ++s) {
    std::getline(in, line);
    std::istringstream tokens(line);
    for (std::size_t a = 0; a < actions; ++a) {
      std::uint64_t n = 0;
      if (!(tokens >> n)) throw SchemaError("q checkpoint: bad visit row");
      cp.table.set_visits(s, a, n);
    }
  }
  return cp;
}

}  // namespace tidealloc::qlearn
