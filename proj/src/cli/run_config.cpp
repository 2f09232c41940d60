#include <fstream>
#include <set>
#include <sstream>

#include "tidealloc/cli.hpp"

namespace tidealloc::cli {

using nlohmann::json;

std::string_view to_string(Command command) {
  switch (command) {
    case Command::prepare: return "prepare";
    case Command::train: return "train";
    case Command::gridsearch: return "gridsearch";
    case Command::evaluate: return "evaluate";
    case Command::report: return "report";
  }
  return "?";
}

Command command_from_string(std::string_view text) {
  for (Command c : {Command::prepare, Command::train, Command::gridsearch, Command::evaluate,
                    Command::report}) {
    if (text == to_string(c)) return c;
  }
  throw ValidationError("unknown command '" + std::string(text) + "'");
}

std::string_view to_string(Algo algo) {
  switch (algo) {
    case Algo::q: return "q";
    case Algo::ddpg: return "ddpg";
    case Algo::buyhold: return "buyhold";
  }
  return "?";
}

Algo algo_from_string(std::string_view text) {
  for (Algo a : {Algo::q, Algo::ddpg, Algo::buyhold}) {
    if (text == to_string(a)) return a;
  }
  throw ValidationError("unknown algorithm '" + std::string(text) + "' (expected q, ddpg or buyhold)");
}

env::EnvConfig RunConfig::env_config() const {
  env::EnvConfig e;
  e.max_weight = max_weight();
  e.window = window;
  return e;
}

qlearn::QConfig RunConfig::q_config() const {
  qlearn::QConfig c = q;
  c.seed = seed;
  return c;
}

ddpg::DdpgConfig RunConfig::ddpg_config() const {
  ddpg::DdpgConfig c = ddpg;
  c.seed = seed;
  c.max_weight = max_weight();
  return c;
}

void RunConfig::validate() const {
  env_config().validate();
  q_config().validate();
  ddpg_config().validate();
  if (clusters == 0) throw ValidationError("q.clusters must be positive");
  if (workers == 0) throw ValidationError("workers must be positive");
}

namespace {

// Reads the keys of one JSON object and rejects any it was not asked for.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError("config: '" + display() + "' must be an object");
  }

  template <typename T>
  bool read(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return false;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ValidationError("");
        out = it->template get<bool>();
      } else if constexpr (std::is_integral_v<T>) {
        const bool ok = it->is_number_unsigned() ||
                        (it->is_number_integer() && it->template get<std::int64_t>() >= 0);
        if (!ok) throw ValidationError("");
        out = it->template get<T>();
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ValidationError("");
        out = it->template get<T>();
      } else {
        out = it->template get<T>();
      }
    } catch (const std::exception&) {
      throw ValidationError("config: '" + path_ + key + "' has the wrong type");
    }
    return true;
  }

  const json* child(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string child_path(const char* key) const { return path_ + key + "."; }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ValidationError("config: unknown key '" + path_ + item.key() + "'");
    }
  }

 private:
  std::string display() const { return path_.empty() ? "<root>" : path_.substr(0, path_.size() - 1); }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename Enum, typename Parse>
void read_enum(ObjectReader& r, const char* key, Enum& out, Parse parse) {
  std::string text;
  if (r.read(key, text)) out = parse(text);
}

}  // namespace

RunConfig config_from_json(const json& j) {
  RunConfig c;
  ObjectReader r(j, "");
  read_enum(r, "command", c.command, command_from_string);
  if (const json* d = r.child("data")) {
    ObjectReader dr(*d, r.child_path("data"));
    dr.read("factors_monthly", c.data.factors_monthly);
    dr.read("factors_daily", c.data.factors_daily);
    dr.read("predictors", c.data.predictors);
    dr.read("payout", c.data.payout);
    dr.read("payout_column", c.data.payout_column);
    dr.read("prepared", c.data.prepared);
    dr.finish();
  }
  read_enum(r, "split", c.split, data::split_from_string);
  read_enum(r, "algo", c.algo, algo_from_string);
  r.read("leverage", c.leverage);
  r.read("seed", c.seed);
  r.read("out", c.out);
  read_enum(r, "sharpe", c.sharpe, eval::sharpe_convention_from_string);
  if (const json* e = r.child("env")) {
    ObjectReader er(*e, r.child_path("env"));
    er.read("window", c.window);
    er.finish();
  }
  if (const json* q = r.child("q")) {
    ObjectReader qr(*q, r.child_path("q"));
    qr.read("alpha", c.q.alpha);
    qr.read("alpha_decay", c.q.alpha_decay);
    qr.read("gamma_td", c.q.gamma_td);
    qr.read("epsilon_start", c.q.epsilon_start);
    qr.read("epsilon_end", c.q.epsilon_end);
    qr.read("epsilon_decay", c.q.epsilon_decay);
    qr.read("episodes", c.q.episodes);
    qr.read("clusters", c.clusters);
    qr.finish();
  }
  if (const json* dd = r.child("ddpg")) {
    ObjectReader ddr(*dd, r.child_path("ddpg"));
    ddr.read("gamma_td", c.ddpg.gamma_td);
    ddr.read("tau", c.ddpg.tau);
    ddr.read("actor_lr", c.ddpg.actor_lr);
    ddr.read("critic_lr", c.ddpg.critic_lr);
    ddr.read("batch_size", c.ddpg.batch_size);
    ddr.read("buffer_capacity", c.ddpg.buffer_capacity);
    ddr.read("n_step", c.ddpg.n_step);
    ddr.read("episodes", c.ddpg.episodes);
    ddr.read("projection_width", c.ddpg.projection_width);
    ddr.read("latent_width", c.ddpg.latent_width);
    ddr.read("critic_width", c.ddpg.critic_width);
    ddr.read("ou_theta", c.ddpg.ou_theta);
    ddr.read("ou_sigma", c.ddpg.ou_sigma);
    ddr.finish();
  }
  if (const json* g = r.child("grid")) {
    if (!g->is_object()) throw ValidationError("config: 'grid' must map keys to value lists");
    for (const auto& item : g->items()) {
      if (!item.value().is_array()) {
        throw ValidationError("config: grid entry '" + item.key() + "' must be a list");
      }
      GridAxis axis{item.key(), {}};
      for (const json& v : item.value()) axis.values.push_back(v);
      c.grid.push_back(std::move(axis));
    }
  }
  r.read("runs", c.runs);
  r.read("workers", c.workers);
  r.finish();
  return c;
}

json config_to_json(const RunConfig& c) {
  json j;
  j["command"] = std::string(to_string(c.command));
  j["data"] = {{"factors_monthly", c.data.factors_monthly}, {"factors_daily", c.data.factors_daily},
               {"predictors", c.data.predictors},           {"payout", c.data.payout},
               {"payout_column", c.data.payout_column},     {"prepared", c.data.prepared}};
  j["split"] = std::string(data::to_string(c.split));
  j["algo"] = std::string(to_string(c.algo));
  j["leverage"] = c.leverage;
  j["seed"] = c.seed;
  j["out"] = c.out;
  j["sharpe"] = std::string(eval::to_string(c.sharpe));
  j["env"] = {{"window", c.window}};
  j["q"] = {{"alpha", c.q.alpha},
            {"alpha_decay", c.q.alpha_decay},
            {"gamma_td", c.q.gamma_td},
            {"epsilon_start", c.q.epsilon_start},
            {"epsilon_end", c.q.epsilon_end},
            {"epsilon_decay", c.q.epsilon_decay},
            {"episodes", c.q.episodes},
            {"clusters", c.clusters}};
  j["ddpg"] = {{"gamma_td", c.ddpg.gamma_td},
               {"tau", c.ddpg.tau},
               {"actor_lr", c.ddpg.actor_lr},
               {"critic_lr", c.ddpg.critic_lr},
               {"batch_size", c.ddpg.batch_size},
               {"buffer_capacity", c.ddpg.buffer_capacity},
               {"n_step", c.ddpg.n_step},
               {"episodes", c.ddpg.episodes},
               {"projection_width", c.ddpg.projection_width},
               {"latent_width", c.ddpg.latent_width},
               {"critic_width", c.ddpg.critic_width},
               {"ou_theta", c.ddpg.ou_theta},
               {"ou_sigma", c.ddpg.ou_sigma}};
  json grid = json::object();
  for (const GridAxis& axis : c.grid) grid[axis.key] = axis.values;
  j["grid"] = grid;
  j["runs"] = c.runs;
  j["workers"] = c.workers;
  return j;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing config file: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

std::string manifest_hash(const RunConfig& config, const json& extra) {
  json j = config_to_json(config);
  j.erase("out");
  j.erase("workers");
  j.erase("runs");
  const json whole = {{"config", j}, {"extra", extra}};
  return fnv1a_hex(whole.dump());
}

std::vector<RunConfig> expand_grid(const RunConfig& config) {
  if (config.grid.empty()) throw ValidationError("gridsearch: the grid is empty");
  json base = config_to_json(config);
  base["command"] = "train";
  base["grid"] = json::object();
  for (const GridAxis& axis : config.grid) {
    if (axis.values.empty()) throw ValidationError("gridsearch: no values for '" + axis.key + "'");
    const json::json_pointer ptr("/" + [&] {
      std::string p = axis.key;
      for (char& ch : p) {
        if (ch == '.') ch = '/';
      }
      return p;
    }());
    const std::string top = axis.key.substr(0, axis.key.find('.'));
    if (top == "command" || top == "grid" || top == "runs" || top == "out" || top == "workers" ||
        !base.contains(ptr)) {
      throw ValidationError("gridsearch: '" + axis.key + "' is not a tunable config key");
    }
  }

  std::vector<RunConfig> out;
  std::vector<std::size_t> idx(config.grid.size(), 0);
  for (;;) {
    json point = base;
    for (std::size_t a = 0; a < config.grid.size(); ++a) {
      std::string p = config.grid[a].key;
      for (char& ch : p) {
        if (ch == '.') ch = '/';
      }
      point[json::json_pointer("/" + p)] = config.grid[a].values[idx[a]];
    }
    RunConfig rc = config_from_json(point);
    rc.validate();
    out.push_back(std::move(rc));

    std::size_t a = config.grid.size();
    while (a > 0) {
      --a;
      if (++idx[a] < config.grid[a].values.size()) break;
      idx[a] = 0;
      if (a == 0) return out;
    }
  }
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ValidationError*>(&e)) return 1;
  if (dynamic_cast<const DataError*>(&e)) return 2;
  return 3;
}

}  // namespace tidealloc::cli
