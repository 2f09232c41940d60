// Acceptance checks that run without external data. One PASS/FAIL line per criterion;
// extra INFO lines carry the measured numbers. Exit status is nonzero if anything fails.
//
//   acceptance            run everything
//   acceptance 3 5        run only the listed criteria

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <json.hpp>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "support/finite_mdp.hpp"
#include "support/fixtures.hpp"
#include "tidealloc/ddpg.hpp"
#include "tidealloc/evaluation.hpp"
#include "tidealloc/nn.hpp"
#include "tidealloc/tabular_q.hpp"

using namespace tidealloc;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

template <typename... Args>
std::string format(const char* fmt, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

void info(const std::string& text) { std::printf("INFO  %s\n", text.c_str()); std::fflush(stdout); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// --- 2: reward-wealth identity -----------------------------------------------

Outcome reward_wealth_identity() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0, worst_backtest = 0.0;
  for (int c = 0; c < 1000; ++c) {
    const env::SyntheticMarketSpec spec{-0.01 + 0.03 * u(rng), 0.01 + 0.09 * u(rng), 0.004 * u(rng)};
    const std::size_t months = 24 + static_cast<std::size_t>(u(rng) * 300);
    const auto split = env::synthetic_market(spec, months, 100000 + c, data::SplitName::test);
    env::EnvConfig ec;
    ec.max_weight = c % 2 ? 1.5 : 1.0;
    env::MarketEnv market(split, ec);
    market.reset();
    std::vector<double> weights;
    double total = 0.0;
    while (!market.done()) {
      weights.push_back(u(rng) * ec.max_weight);
      total += market.step(weights.back()).reward;
    }
    worst = std::max(worst, std::abs(total - std::log(market.wealth())));

    std::size_t i = 0;
    const auto report = eval::run_backtest([&](const env::Observation&) { return weights[i++]; },
                                           "random", split, ec);
    worst_backtest = std::max(worst_backtest,
                              std::abs(report.log_utility - std::log(report.portfolio_value)));
  }
  return {worst < 1e-10 && worst_backtest < 1e-10,
          format("1000 random weight sequences, max |sum rewards - ln PV| = %.2e (env), %.2e (backtest)",
                 worst, worst_backtest)};
}

// --- 3: gradient correctness -------------------------------------------------

nn::Tensor2 normal_tensor(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  nn::Tensor2 t(rows, cols);
  for (double& v : t.data()) v = n(rng);
  return t;
}

double weighted_sum(const nn::Tensor2& a, const nn::Tensor2& b) { return a.mat().cwiseProduct(b.mat()).sum(); }

// Parameter and input gradients of sum(R .* net(x)) against central differences.
// Returns -1 when no input kept every ReLU clear of the perturbation.
double network_error(nn::Network& net, std::mt19937_64& rng, std::size_t rows, double h) {
  for (int attempt = 0; attempt < 50; ++attempt) {
    nn::Tensor2 x = normal_tensor(rows, net.input_dim(), rng);
    const nn::Tensor2 probe = normal_tensor(rows, net.output_dim(), rng);
    net.params().zero_grad();
    net.forward(x);
    if (net.min_relu_margin() < 1e-3) continue;
    const nn::Tensor2 grad_x = net.backward(probe);
    auto loss = [&] { return weighted_sum(net.forward(x), probe); };
    double worst = nn::finite_difference_check(net.params(), loss, h).max_rel_error;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double saved = x.data()[i];
      x.data()[i] = saved + h;
      const double up = loss();
      x.data()[i] = saved - h;
      const double down = loss();
      x.data()[i] = saved;
      worst = std::max(worst, nn::relative_error(grad_x.data()[i], (up - down) / (2.0 * h)));
    }
    return worst;
  }
  return -1.0;
}

Outcome gradient_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  const double h = 1e-5;
  constexpr int kSeeds = 100;
  std::map<std::string, double> worst;
  int skipped = 0;
  auto record = [&](const std::string& name, double err) {
    if (err < 0) {
      ++skipped;
      return;
    }
    worst[name] = std::max(worst[name], err);
  };

  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t rows = 1 + seed % 4, in = 1 + seed % 7, out = 1 + seed % 5;
    const std::size_t width = 4 + seed % 10;
    auto single = [&](nn::LayerSpec spec) {
      const std::vector<nn::LayerSpec> specs{spec};
      return nn::Network::build(specs, seed);
    };
    auto linear = single(nn::LayerSpec::linear(in, out));
    record("linear", network_error(linear, rng, rows, h));
    const std::vector<nn::LayerSpec> two_linear{nn::LayerSpec::linear(in, width), nn::LayerSpec::linear(width, out)};
    auto stacked = nn::Network::build(two_linear, seed);
    record("linear stack", network_error(stacked, rng, rows, h));
    auto relu = single(nn::LayerSpec::relu(width));
    record("relu", network_error(relu, rng, rows, h));
    auto sigmoid = single(nn::LayerSpec::sigmoid(width));
    record("sigmoid", network_error(sigmoid, rng, rows, h));
    auto norm = single(nn::LayerSpec::layer_norm(width));
    record("layer norm", network_error(norm, rng, rows, h));
    auto block = single(nn::LayerSpec::residual_block(width));
    record("residual block", network_error(block, rng, rows, h));

    // agent networks on the full 228-wide observation, narrow hidden widths
    const ddpg::NetworkShape shape{env::Observation::size_for(env::kDefaultWindow), 16, 8, 8};
    ddpg::Actor actor(shape, seed % 2 ? 1.5 : 1.0, seed);
    bool actor_checked = false, critic_checked = false;
    for (int attempt = 0; attempt < 50 && !actor_checked; ++attempt) {
      const auto states = normal_tensor(3, shape.input_dim, rng);
      const auto probe = normal_tensor(3, 1, rng);
      actor.params().zero_grad();
      actor.forward(states);
      if (actor.network().min_relu_margin() < 1e-3) continue;
      actor.backward(probe);
      const auto r = nn::finite_difference_check(
          actor.params(), [&] { return weighted_sum(actor.forward(states), probe); }, h);
      record("actor", r.max_rel_error);
      actor_checked = true;
    }
    if (!actor_checked) record("actor", -1.0);

    ddpg::Critic critic(shape, seed);
    for (int attempt = 0; attempt < 50 && !critic_checked; ++attempt) {
      const auto states = normal_tensor(3, shape.input_dim, rng);
      nn::Tensor2 actions(3, 1);
      for (double& v : actions.data()) v = std::uniform_real_distribution<double>(0.0, 1.5)(rng);
      const auto probe = normal_tensor(3, 1, rng);
      critic.zero_grad();
      critic.forward(states, actions);
      if (critic.min_relu_margin() < 1e-3) continue;
      const auto grad_a = critic.backward(probe);
      auto loss = [&] { return weighted_sum(critic.forward(states, actions), probe); };
      double err = 0.0;
      for (auto* set : critic.parameter_sets()) {
        err = std::max(err, nn::finite_difference_check(*set, loss, h).max_rel_error);
      }
      for (std::size_t i = 0; i < 3; ++i) {
        const double saved = actions(i, 0);
        actions(i, 0) = saved + h;
        const double up = loss();
        actions(i, 0) = saved - h;
        const double down = loss();
        actions(i, 0) = saved;
        err = std::max(err, nn::relative_error(grad_a(i, 0), (up - down) / (2.0 * h)));
      }
      record("critic", err);
      critic_checked = true;
    }
    if (!critic_checked) record("critic", -1.0);
  }

  // one check at the default widths
  {
    const ddpg::NetworkShape full;
    std::mt19937_64 rng(99);
    ddpg::Actor actor(full, 1.0, 99);
    double err = -1.0;
    for (int attempt = 0; attempt < 50 && err < 0; ++attempt) {
      const auto states = normal_tensor(1, full.input_dim, rng);
      const auto probe = normal_tensor(1, 1, rng);
      actor.params().zero_grad();
      actor.forward(states);
      if (actor.network().min_relu_margin() < 1e-3) continue;
      actor.backward(probe);
      err = nn::finite_difference_check(actor.params(),
                                        [&] { return weighted_sum(actor.forward(states), probe); }, h)
                .max_rel_error;
    }
    record("actor default widths", err);
  }

  bool pass = skipped == 0;
  std::string detail;
  for (const auto& [name, err] : worst) {
    const double tol = name.rfind("linear", 0) == 0 ? 1e-6 : 1e-4;
    pass = pass && err < tol;
    info(format("grad check %-22s max rel err %.2e (tol %.0e)", name.c_str(), err, tol));
  }
  const double elapsed = seconds_since(t0);
  pass = pass && elapsed < 60.0 && worst.count("actor") && worst.count("critic");
  return {pass, format("%d seeds, %zu layer/network kinds, %d kink-bound skips, %.1f s", kSeeds,
                       worst.size(), skipped, elapsed)};
}

// --- 4: Q-learning vs value iteration ----------------------------------------

Outcome q_learning_oracle() {
  int policy_ok = 0, mdps = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t states = 2 + seed % 4, actions = 2 + seed % 2;
    const auto m = fixtures::random_mdp(states, actions, 0.9, seed, true);
    const auto oracle = fixtures::value_iteration(m);
    fixtures::FiniteMdpEnv env(m, 50, seed + 100);
    qlearn::QConfig c;
    c.alpha = 0.5;
    c.gamma_td = 0.9;
    c.epsilon_start = 1.0;
    c.epsilon_end = 0.5;
    c.epsilon_decay = 0.999;
    c.episodes = 2000;
    c.seed = seed;
    const auto r = qlearn::train_discrete(env, c);
    bool same = true;
    for (std::size_t s = 0; s < states; ++s) {
      same = same && r.table.argmax(s) == oracle.policy[s];
      for (std::size_t a = 0; a < actions; ++a) {
        worst = std::max(worst, std::abs(r.table.value(s, a) - oracle.q[s][a]));
      }
    }
    policy_ok += same;
    ++mdps;
  }

  // sampled transitions, reported only
  int stoch_policy = 0, stoch_within = 0;
  double stoch_worst = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::size_t states = 2 + seed % 4, actions = 2 + seed % 2;
    const auto m = fixtures::random_mdp(states, actions, 0.5, seed + 1000);
    const auto oracle = fixtures::value_iteration(m);
    fixtures::FiniteMdpEnv env(m, 20, seed + 200);
    qlearn::QConfig c;
    c.alpha = 1.0;
    c.alpha_decay = 0.9;
    c.gamma_td = 0.5;
    c.epsilon_start = 1.0;
    c.epsilon_end = 1.0;
    c.episodes = 20000;
    c.seed = seed;
    const auto r = qlearn::train_discrete(env, c);
    bool same = true;
    double err = 0.0;
    for (std::size_t s = 0; s < states; ++s) {
      same = same && r.table.argmax(s) == oracle.policy[s];
      for (std::size_t a = 0; a < actions; ++a) err = std::max(err, std::abs(r.table.value(s, a) - oracle.q[s][a]));
    }
    stoch_policy += same;
    stoch_within += err < 1e-3;
    stoch_worst = std::max(stoch_worst, err);
  }
  info(format("stochastic-transition MDPs (gamma 0.5, 20000 episodes): policy %d/10, values within 1e-3 %d/10, "
              "max err %.2e",
              stoch_policy, stoch_within, stoch_worst));
  return {policy_ok == mdps && worst < 1e-3,
          format("%d deterministic-transition MDPs (2-5 states, 2-3 actions): policy match %d/%d, max |Q - Q*| = %.2e",
                 mdps, policy_ok, mdps, worst)};
}

// --- 5: Kelly recovery -------------------------------------------------------

Outcome kelly_recovery() {
  constexpr double kSigma = 0.2;
  const std::vector<double> targets{0.4, 0.6, 0.8};
  bool pass = true;
  std::string detail;
  for (unsigned seed = 1; seed <= 3; ++seed) {
    int hits = 0;
    for (double target : targets) {
      const auto t0 = std::chrono::steady_clock::now();
      const env::SyntheticMarketSpec spec{target * kSigma * kSigma, kSigma, 0.0};
      const auto train = env::synthetic_market(spec, 15000, 1000 + seed, data::SplitName::train);
      const auto test = env::synthetic_market(spec, 240, 5000 + seed, data::SplitName::test);
      ddpg::DdpgConfig c;
      c.gamma_td = 0.0;
      c.n_step = 1;
      c.episodes = 1;
      c.seed = seed;
      c.projection_width = 32;
      c.latent_width = 16;
      c.critic_width = 32;
      env::MarketEnv market(train, env::EnvConfig{});
      const auto result = ddpg::train(market, c);
      const auto report = eval::run_backtest(result.agent.policy(), "ddpg_tide", test, env::EnvConfig{});
      double mean = 0.0;
      for (const auto& m : report.months) mean += m.weight;
      mean /= static_cast<double>(report.months.size());
      const bool hit = std::abs(mean - target) <= 0.15;
      hits += hit;
      info(format("kelly seed %u target %.1f mean test weight %.3f %s (%.0f s)", seed, target, mean,
                  hit ? "within" : "outside", seconds_since(t0)));
    }
    pass = pass && hits >= 2;
    detail += format("seed %u: %d/3  ", seed, hits);
  }
  return {pass, detail + "(need >= 2/3 within +-0.15 on every seed)"};
}

// --- 8: n-step buffer --------------------------------------------------------

Outcome n_step_buffer() {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> reward(0.0, 1.0);
  const std::size_t obs = env::Observation::size_for(1);
  auto tagged = [&](double t) {
    std::vector<double> v(obs, 0.0);
    v[0] = t;
    return env::Observation(1, std::move(v));
  };
  int bad = 0;
  double worst = 0.0;
  for (int episode = 0; episode < 1000; ++episode) {
    const std::size_t n = 1 + rng() % 6;
    const std::size_t len = 1 + rng() % 40;
    const double gamma = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    // small capacities wrap around
    const std::size_t capacity = episode % 3 == 0 ? 1 + rng() % len : 1000;
    ddpg::ReplayBuffer buf(capacity, n, gamma);
    std::vector<double> r(len);
    std::vector<env::Observation> s;
    for (std::size_t t = 0; t <= len; ++t) s.push_back(tagged(static_cast<double>(t)));
    for (std::size_t t = 0; t < len; ++t) {
      r[t] = reward(rng);
      buf.push(s[t], 0.1 * t, r[t], t + 1 < len ? &s[t + 1] : nullptr, t + 1 == len);
    }
    const auto c = buf.contents();
    const std::size_t kept = std::min(capacity, len);
    if (c.size() != kept) {
      ++bad;
      continue;
    }
    for (std::size_t k = 0; k < kept; ++k) {
      const std::size_t t = len - kept + k;
      double expected = 0.0, g = 1.0;
      for (std::size_t i = t; i < std::min(len, t + n); ++i) {
        expected += g * r[i];
        g *= gamma;
      }
      const auto& tr = *c[k];
      worst = std::max(worst, std::abs(tr.reward - expected));
      const bool done = t + n >= len;
      bool ok = tr.episode_step == t && tr.steps == std::min(n, len - t) && tr.done == done &&
                tr.state == s[t] && tr.action == 0.1 * t && std::abs(tr.reward - expected) < 1e-12;
      if (!done) ok = ok && tr.next_state == s[t + n];
      bad += !ok;
    }
  }
  return {bad == 0, format("1000 random episodes (n 1-6, length 1-40), %d mismatches, max reward err %.1e", bad,
                           worst)};
}

// --- 9: determinism ----------------------------------------------------------

int run_cli(const fs::path& dir, const std::string& args) {
  const std::string cmd = std::string("\"") + TIDEALLOC_CLI_PATH + "\" " + args + " >\"" +
                          (dir / "stdout.txt").string() + "\" 2>\"" + (dir / "stderr.txt").string() + "\"";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Relative paths of every regular file below `root`.
std::set<fs::path> tree(const fs::path& root) {
  std::set<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out.insert(fs::relative(e.path(), root));
  }
  return out;
}

bool same_tree(const fs::path& a, const fs::path& b, int& compared) {
  const auto ta = tree(a);
  if (ta.empty() || ta != tree(b)) return false;
  for (const auto& f : ta) {
    ++compared;
    if (fixtures::read_text(a / f) != fixtures::read_text(b / f)) {
      info("determinism: differs " + (a / f).string());
      return false;
    }
  }
  return true;
}

Outcome determinism() {
  const fs::path dir = fixtures::scratch_dir("acceptance_det");
  const auto src = fixtures::write_sources(dir / "src", 31);
  const std::string prepare = "prepare --factors-monthly " + src.monthly.string() + " --factors-daily " +
                              src.daily.string() + " --predictors " + src.predictors.string() +
                              " --payout " + src.payout.string() + " --out ";
  if (run_cli(dir, prepare + (dir / "data_a").string()) != 0 ||
      run_cli(dir, prepare + (dir / "data_b").string()) != 0) {
    return {false, "prepare failed: " + fixtures::read_text(dir / "stderr.txt")};
  }
  int compared = 0;
  bool pass = same_tree(dir / "data_a", dir / "data_b", compared);
  const fs::path data = dir / "data_a";

  const json cfg = {{"seed", 9},
                    {"q", {{"episodes", 4}, {"clusters", 8}}},
                    {"ddpg",
                     {{"episodes", 2},
                      {"projection_width", 16},
                      {"latent_width", 8},
                      {"critic_width", 8},
                      {"batch_size", 16},
                      {"buffer_capacity", 512}}},
                    {"grid", {{"ddpg.actor_lr", {1e-4, 1e-3}}}},
                    {"algo", "ddpg"},
                    {"workers", 2}};
  fixtures::write_text(dir / "config.json", cfg.dump(2));
  const std::string base = "--config " + (dir / "config.json").string() + " --data " + data.string();

  std::string runs;
  for (const char* algo : {"buyhold", "q", "ddpg"}) {
    for (const char* copy : {"_a", "_b"}) {
      const fs::path out = dir / (std::string(algo) + copy);
      if (run_cli(dir, "train " + base + " --algo " + algo + " --out " + out.string()) != 0) {
        return {false, std::string("train failed: ") + fixtures::read_text(dir / "stderr.txt")};
      }
    }
    pass = same_tree(dir / (std::string(algo) + "_a"), dir / (std::string(algo) + "_b"), compared) && pass;
    runs += " --run " + (dir / (std::string(algo) + "_a")).string();
  }
  for (const char* split : {"validation", "test"}) {
    for (const char* copy : {"_a", "_b"}) {
      const fs::path out = dir / (std::string("eval") + copy);
      if (run_cli(dir, "evaluate --data " + data.string() + " --split " + split + " --out " + out.string() +
                           runs) != 0) {
        return {false, std::string("evaluate failed: ") + fixtures::read_text(dir / "stderr.txt")};
      }
    }
  }
  pass = same_tree(dir / "eval_a", dir / "eval_b", compared) && pass;

  for (const char* copy : {"_a", "_b"}) {
    if (run_cli(dir, "gridsearch " + base + " --out " + (dir / (std::string("grid") + copy)).string()) != 0) {
      return {false, std::string("gridsearch failed: ") + fixtures::read_text(dir / "stderr.txt")};
    }
  }
  pass = same_tree(dir / "grid_a", dir / "grid_b", compared) && pass;
  return {pass, format("prepare, train (buyhold, q, ddpg), evaluate and gridsearch rerun: %d files compared byte for byte",
                       compared)};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  fixtures::QuietLog quiet;
  const std::vector<Criterion> all{
      {2, "reward-wealth identity", reward_wealth_identity},
      {3, "gradient correctness", gradient_correctness},
      {4, "Q-learning oracle equivalence", q_learning_oracle},
      {5, "Kelly recovery", kelly_recovery},
      {8, "n-step buffer oracle", n_step_buffer},
      {9, "determinism suite", determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s  [%d] %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("BLOCKED [1] [6] [7] need the real data sets; see acceptance_real_data\n");
  return failed == 0 ? 0 : 1;
}
