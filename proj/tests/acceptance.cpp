// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Tolerances are fixed below.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wpr/behavior_prior.hpp"
#include "wpr/evaluation.hpp"
#include "wpr/policy.hpp"
#include "wpr/ppo.hpp"
#include "wpr/refiner.hpp"
#include "wpr/vehicle.hpp"

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

constexpr double kFdTolerance = 1e-4;
constexpr int kFdCases = 100;
constexpr double kShiftTolerance = 1e-12;
constexpr double kSumTolerance = 1e-9;
constexpr int kScoreVectors = 1000;
constexpr int kChiSquareDraws = 10000;
// 0.99 quantile of chi-square with 9 degrees of freedom (10 categories).
constexpr double kChiSquareCritical = 21.666;
constexpr double kHitThreshold = 0.9;
constexpr long kTrainingBudget = 200000;
constexpr std::size_t kPriorSamples = 100;
constexpr std::size_t kPosteriorDraws = 20;
constexpr int kCellsRequired = 14;
constexpr double kSpearmanThreshold = 0.3;
constexpr double kOneMinute = 60.0;
constexpr double kTenMinutes = 600.0;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  std::cout << (pass ? "PASS" : "FAIL") << " criterion " << id << ": " << detail << std::endl;
}

std::string sci(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2e", x);
  return buf;
}

std::string fixed(double x, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, x);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. Finite-difference gradient checks

double relative_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric) {
  const double scale = std::max({analytic.norm(), numeric.norm(), 1e-12});
  return (analytic - numeric).norm() / scale;
}

template <typename Net, typename Objective>
Eigen::VectorXd numeric_gradient(const Net& net, const Objective& f) {
  const Eigen::VectorXd theta = net.parameters();
  Eigen::VectorXd g(theta.size());
  const double h = 1e-6;
  Net probe = net;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Eigen::VectorXd t = theta;
    t[i] = theta[i] + h;
    probe.set_parameters(t);
    const double up = f(probe);
    t[i] = theta[i] - h;
    probe.set_parameters(t);
    g[i] = (up - f(probe)) / (2 * h);
  }
  return g;
}

void criterion_gradients() {
  const auto start = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> horizon_dist(2, 4), width_dist(4, 10), batch_dist(3, 8);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  for (int c = 0; c < kFdCases; ++c) {
    const wpr::NetworkShape shape{horizon_dist(rng), width_dist(rng), width_dist(rng)};
    const Eigen::Index n = batch_dist(rng);
    const Eigen::Index obs_size = wpr::observation_size(shape.horizon);
    wpr::GaussianPolicy policy(shape, -0.5 + 0.3 * normal(rng));
    wpr::ValueNet value(shape, 10.0);
    policy.randomize(rng);
    value.randomize(rng);
    Eigen::MatrixXd obs(obs_size, n);
    for (auto& x : obs.reshaped()) x = normal(rng);
    Eigen::MatrixXd actions(2, n);
    for (auto& x : actions.reshaped()) x = normal(rng);
    Eigen::VectorXd weights(n);
    for (auto& x : weights) x = normal(rng);

    double err = 0.0;
    switch (c % 3) {
      case 0: {  // policy log-prob
        const Eigen::Vector2d wstd(normal(rng), normal(rng));
        const auto f = [&](const wpr::GaussianPolicy& p) {
          return weights.dot(wpr::policy_log_prob_forward(p, obs, actions).log_probs) +
                 wstd.dot(p.log_std());
        };
        const Eigen::VectorXd analytic = wpr::policy_log_prob_backward(
            policy, wpr::policy_log_prob_forward(policy, obs, actions), weights, wstd);
        err = relative_error(analytic, numeric_gradient(policy, f));
        break;
      }
      case 1: {  // value output
        const auto f = [&](const wpr::ValueNet& v) {
          return weights.dot(wpr::value_forward(v, obs).values);
        };
        const Eigen::VectorXd analytic =
            wpr::value_backward(value, wpr::value_forward(value, obs), weights);
        err = relative_error(analytic, numeric_gradient(value, f));
        break;
      }
      default: {  // PPO losses
        wpr::PpoConfig config;
        config.entropy_coef = 0.01;
        wpr::RolloutBatch batch;
        batch.observations = obs;
        batch.actions = actions;
        batch.log_probs_old = wpr::policy_log_prob_forward(policy, obs, actions).log_probs;
        for (auto& x : batch.log_probs_old) x += 0.3 * normal(rng);
        batch.advantages = weights;
        batch.returns = Eigen::VectorXd(n);
        for (auto& x : batch.returns) x = 5.0 * normal(rng);
        batch.rewards = Eigen::VectorXd::Zero(n);
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
        const auto lg = wpr::ppo_loss_gradient(policy, value, batch, idx, config);
        const auto policy_f = [&](const wpr::GaussianPolicy& p) {
          const auto l = wpr::ppo_loss_gradient(p, value, batch, idx, config).losses;
          return l.policy_loss - config.entropy_coef * l.entropy;
        };
        const auto value_f = [&](const wpr::ValueNet& v) {
          return config.value_coef *
                 wpr::ppo_loss_gradient(policy, v, batch, idx, config).losses.value_loss;
        };
        err = std::max(relative_error(lg.policy_grad, numeric_gradient(policy, policy_f)),
                       relative_error(lg.value_grad, numeric_gradient(value, value_f)));
        break;
      }
    }
    worst = std::max(worst, err);
  }
  const double elapsed = seconds_since(start);
  report(1, worst <= kFdTolerance && elapsed < kOneMinute,
         std::to_string(kFdCases) + " cases, worst relative error " + sci(worst) + " (tol " +
             sci(kFdTolerance) + "), " + fixed(elapsed, 1) + " s");
}

// ---------------------------------------------------------------------------
// 2. Importance weights, evidence and resampling

void criterion_inference() {
  const auto start = Clock::now();
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> size_dist(1, 200);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> shift_dist(-500.0, 500.0);
  double worst_shift = 0.0, worst_sum = 0.0;
  int jensen_violations = 0;
  for (int k = 0; k < kScoreVectors; ++k) {
    const auto n = static_cast<std::size_t>(size_dist(rng));
    const double scale = std::exp(2.0 * normal(rng));
    std::vector<double> s(n), shifted(n);
    const double c = shift_dist(rng);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = scale * normal(rng);
      shifted[i] = s[i] + c;
    }
    const auto w = wpr::importance_weights(s);
    const auto ws = wpr::importance_weights(shifted);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      worst_shift = std::max(worst_shift, std::abs(w[i] - ws[i]));
      sum += w[i];
    }
    worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
    double mean = 0.0;
    for (double x : s) mean += x;
    mean /= static_cast<double>(n);
    if (wpr::log_evidence(s) < mean - 1e-12 * std::max(1.0, std::abs(mean))) ++jensen_violations;
  }

  std::vector<double> scores(10);
  for (auto& x : scores) x = normal(rng);
  const auto w = wpr::importance_weights(scores);
  std::vector<int> counts(w.size(), 0);
  for (auto i : wpr::resample(w, rng, kChiSquareDraws)) ++counts[i];
  double chi2 = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double expected = w[i] * kChiSquareDraws;
    chi2 += (counts[i] - expected) * (counts[i] - expected) / expected;
  }
  const double elapsed = seconds_since(start);
  const bool pass = worst_shift <= kShiftTolerance && worst_sum <= kSumTolerance &&
                    jensen_violations == 0 && chi2 < kChiSquareCritical && elapsed < kOneMinute;
  std::ostringstream d;
  d << "shift " << worst_shift << ", sum " << worst_sum << ", jensen violations "
    << jensen_violations << "/" << kScoreVectors << ", chi2 " << fixed(chi2, 2) << " < "
    << kChiSquareCritical << ", " << fixed(elapsed, 1) << " s";
  report(2, pass, d.str());
}

// ---------------------------------------------------------------------------
// 3. GAE

void criterion_gae() {
  bool ok = true;
  const std::vector<double> r1{1, 1, 1}, v1{0, 0, 0};
  const auto ex = wpr::compute_gae(r1, v1, 0.0, 0.5, 1.0);
  ok = ok && ex.advantages[0] == 1.75 && ex.advantages[1] == 1.5 && ex.advantages[2] == 1.0;

  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const std::size_t n = 1 + static_cast<std::size_t>(k % 20);
    std::vector<double> r(n), v(n);
    for (auto& x : r) x = normal(rng);
    for (auto& x : v) x = normal(rng);
    const double boot = normal(rng), gamma = 0.9 + 0.1 * (k % 2);
    const auto g0 = wpr::compute_gae(r, v, boot, gamma, 0.0);
    const auto g1 = wpr::compute_gae(r, v, boot, gamma, 1.0);
    for (std::size_t t = 0; t < n; ++t) {
      const double next = t + 1 < n ? v[t + 1] : boot;
      worst = std::max(worst, std::abs(g0.advantages[static_cast<Eigen::Index>(t)] -
                                       (r[t] + gamma * next - v[t])));
      double ret = 0.0;
      for (std::size_t j = n; j-- > t;) ret = r[j] + gamma * (j + 1 < n ? ret : boot);
      worst = std::max(worst, std::abs(g1.advantages[static_cast<Eigen::Index>(t)] - (ret - v[t])));
    }
  }
  ok = ok && worst <= 1e-12;
  report(3, ok, "example [1.75, 1.5, 1] exact; lambda 0/1 closed forms max error " + sci(worst));
}

// ---------------------------------------------------------------------------
// 4. Controller training

struct Trained {
  wpr::TrainingResult result;
  std::vector<std::string> names;
  std::vector<double> hits;
};

Trained train_vehicle(const wpr::VehicleParams& vehicle, double epsilon, std::uint64_t seed) {
  // Alphabetical scenario order, as the CLI reads them from a directory.
  std::vector<wpr::ScenarioSpec> specs = wpr::builtin_scenario_specs(vehicle);
  std::sort(specs.begin(), specs.end(), [](const auto& a, const auto& b) {
    return wpr::to_string(a.kind) < wpr::to_string(b.kind);
  });
  std::vector<wpr::TargetTrajectory> scenarios;
  Trained t;
  for (const auto& s : specs) {
    scenarios.push_back(wpr::generate_scenario(s, vehicle));
    t.names.emplace_back(wpr::to_string(s.kind));
  }
  wpr::PpoConfig config;
  config.total_steps = kTrainingBudget;
  config.epsilon = epsilon;
  t.result = wpr::train(vehicle, scenarios, config, seed);
  t.hits = wpr::scenario_hit_fractions(t.result.policy, vehicle, scenarios, epsilon);
  const long steps = t.result.log.records.empty() ? 0 : t.result.log.records.back().env_steps;
  std::cout << "  trained " << vehicle.name << " seed " << seed << " (" << steps << " steps):";
  for (std::size_t i = 0; i < t.hits.size(); ++i) std::cout << ' ' << t.names[i] << '=' << fixed(t.hits[i]);
  std::cout << std::endl;
  return t;
}

/// Scenarios passed by a majority of seeds.
std::vector<std::string> majority_passes(const std::vector<Trained>& runs) {
  std::map<std::string, int> passes;
  for (const auto& r : runs) {
    for (std::size_t i = 0; i < r.hits.size(); ++i) {
      if (r.hits[i] >= kHitThreshold) ++passes[r.names[i]];
    }
  }
  std::vector<std::string> out;
  for (const auto& [name, n] : passes) {
    if (2 * n > static_cast<int>(runs.size())) out.push_back(name);
  }
  return out;
}

bool contains(const std::vector<std::string>& v, const std::string& x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

// ---------------------------------------------------------------------------
// 7. Determinism of the CLI pipeline

int run(const std::string& command) {
  const int status = std::system((command + " > /dev/null").c_str());
  if (status != 0) std::cout << "  command failed (" << status << "): " << command << std::endl;
  return status;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool pipeline(const std::string& cli, const fs::path& dir) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string d = dir.string();
  const std::string q = "\"" + cli + "\"";
  // Reduced budget; a wide corridor keeps the weak controller inside it.
  std::ofstream(dir / "ppo.json") << R"({"total_steps": 8192, "horizon": 10, "encoder_width": 16,)"
                                  << R"( "hidden_width": 16})" << '\n';
  std::ofstream(dir / "exp.json")
      << R"({"vehicles": [{"name": "box_truck", "policy": "model/policy.json",)"
      << R"( "value": "model/value.json", "training_log": "model/training_log.csv",)"
      << R"( "epsilon": 3.0}],)"
      << R"( "seeds": [0, 1], "L": 20, "num_posterior_draws": 5})" << '\n';
  return run(q + " gen-scenarios --vehicle box_truck --out " + d + "/scenarios") == 0 &&
         run(q + " gen-burnins --out " + d + "/burnins") == 0 &&
         run(q + " train --vehicle box_truck --scenarios " + d + "/scenarios --config " + d +
             "/ppo.json --out " + d + "/model --seed 5") == 0 &&
         run(q + " refine --vehicle box_truck --policy " + d + "/model/policy.json --value " + d +
             "/model/value.json --burnin " + d + "/burnins/straight_cruise.csv --L 20 --seed 3 --epsilon 3 --out " +
             d + "/refine") == 0 &&
         run(q + " evaluate --config " + d + "/exp.json --out " + d + "/report") == 0;
}

void criterion_determinism(const std::string& cli, const fs::path& work) {
  if (cli.empty()) {
    report(7, false, "no CLI path given (--cli)");
    return;
  }
  const fs::path a = work / "determinism_a", b = work / "determinism_b";
  if (!pipeline(cli, a) || !pipeline(cli, b)) {
    report(7, false, "pipeline command failed");
    return;
  }
  std::size_t compared = 0, differing = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file() || e.path().extension() != ".csv") continue;
    const fs::path rel = fs::relative(e.path(), a);
    ++compared;
    if (!fs::exists(b / rel) || read_bytes(e.path()) != read_bytes(b / rel)) {
      ++differing;
      std::cout << "  differs: " << rel.string() << std::endl;
    }
  }
  const bool has_report = fs::exists(a / "report" / "comparison.csv");
  report(7, has_report && compared > 0 && differing == 0,
         std::to_string(compared) + " CSV files compared across two runs, " +
             std::to_string(differing) + " differ");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  std::string cli;
  fs::path work = fs::temp_directory_path() / "wpr_acceptance";
  app.add_option("--cli", cli, "Path to the wpr executable");
  app.add_option("--work", work, "Scratch directory");
  CLI11_PARSE(app, argc, argv);

  criterion_gradients();
  criterion_inference();
  criterion_gae();

  // 4. Training: three seeds per archetype, plus one run each for the middle
  // two vehicles used in the comparison table.
  const auto fleet = wpr::builtin_fleet();
  const auto train_start = Clock::now();
  std::vector<Trained> sporty, heavy;
  for (std::uint64_t s = 0; s < 3; ++s) sporty.push_back(train_vehicle(wpr::find_vehicle(fleet, "sporty"), 1.0, s));
  for (std::uint64_t s = 0; s < 3; ++s) heavy.push_back(train_vehicle(wpr::find_vehicle(fleet, "heavy_truck"), 1.5, s));
  const Trained offroad = train_vehicle(wpr::find_vehicle(fleet, "offroad"), 1.0, 0);
  const Trained box = train_vehicle(wpr::find_vehicle(fleet, "box_truck"), 1.0, 0);
  {
    const auto sp = majority_passes(sporty);
    const auto hv = majority_passes(heavy);
    const bool sporty_ok =
        contains(sp, "straight") && contains(sp, "left_turn") && contains(sp, "right_turn");
    int heavy_count = 0;
    for (const char* k : {"left_turn", "right_turn", "full_stop", "s_shape"}) heavy_count += contains(hv, k);
    std::ostringstream d;
    d << "sporty majority-pass {";
    for (const auto& s : sp) d << ' ' << s;
    d << " }, heavy_truck " << heavy_count << "/4 of the turn/stop scenarios, budget "
      << kTrainingBudget << " steps, " << fixed(seconds_since(train_start) / 8.0, 1)
      << " s per run";
    report(4, sporty_ok && heavy_count >= 3, d.str());
  }

  // 5 and 6. Prior vs posterior with training-seed-0 artifacts.
  wpr::Experiment e;
  const auto add = [&](const Trained& t, const char* name, double epsilon) {
    e.vehicles.push_back({wpr::find_vehicle(fleet, name), t.result.policy, t.result.value, epsilon, {}});
  };
  add(sporty[0], "sporty", 1.0);
  add(offroad, "offroad", 1.0);
  add(box, "box_truck", 1.0);
  add(heavy[0], "heavy_truck", 1.5);
  e.initial_conditions = wpr::builtin_initial_conditions();
  e.seeds = {0, 1, 2};
  e.num_samples = kPriorSamples;
  e.num_posterior_draws = kPosteriorDraws;
  const auto eval_start = Clock::now();
  const wpr::ComparisonReport r = wpr::run_experiment(e);
  const double eval_seconds = seconds_since(eval_start);
  std::cout << wpr::format_summary(r);
  {
    int improved = 0;
    bool heavy_positive = true;
    for (const auto& c : r.cells) {
      if (c.posterior_mean_hit >= c.prior_mean_hit) ++improved;
      if (c.vehicle == "heavy_truck" && !(c.posterior_mean_hit > c.prior_mean_hit)) heavy_positive = false;
    }
    report(5, improved >= kCellsRequired && heavy_positive && eval_seconds < kTenMinutes,
           std::to_string(improved) + "/" + std::to_string(r.cells.size()) +
               " cells with posterior >= prior (need " + std::to_string(kCellsRequired) +
               "), heavy_truck strictly positive on every IC: " + (heavy_positive ? "yes" : "no") +
               ", " + fixed(eval_seconds, 1) + " s");
  }
  {
    bool ok = true;
    int batches = 0;
    std::ostringstream d;
    d << "heavy_truck spearman at evaluation seed 0:";
    for (const auto& s : r.seeds) {
      if (s.vehicle != "heavy_truck" || s.seed != 0) continue;
      ++batches;
      d << ' ' << s.ic << '=' << fixed(s.spearman);
      if (!(s.spearman > kSpearmanThreshold)) ok = false;
    }
    d << " (need > " << kSpearmanThreshold << ")";
    report(6, ok && batches == 4, d.str());
  }

  criterion_determinism(cli, work);

  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
