#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wpr/behavior_prior.hpp"
#include "wpr/csv_io.hpp"
#include "wpr/evaluation.hpp"
#include "wpr/policy.hpp"
#include "wpr/ppo.hpp"
#include "wpr/refiner.hpp"
#include "wpr/vehicle.hpp"

namespace fs = std::filesystem;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = wpr::open_output(path);
  out << text;
  if (text.empty() || text.back() != '\n') out << '\n';
}

std::vector<wpr::VehicleParams> fleet_from(const std::string& path) {
  return path.empty() ? wpr::builtin_fleet() : wpr::load_fleet_json(path);
}

std::vector<fs::path> csv_files(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".csv") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw std::runtime_error("no scenario CSV files in " + dir.string());
  return out;
}

std::string sample_name(std::size_t i) {
  std::string s = std::to_string(i);
  return "sample_" + std::string(s.size() < 3 ? 3 - s.size() : 0, '0') + s + ".csv";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vehicle-specific waypoint followers and feasibility refinement"};
  app.require_subcommand(1);

  std::string fleet_path;
  app.add_option("--fleet", fleet_path, "Fleet JSON (defaults to the built-in fleet)");

  // gen-scenarios
  auto* gen = app.add_subcommand("gen-scenarios", "Write the expert scenarios for a vehicle");
  std::string gen_vehicle;
  fs::path gen_out;
  gen->add_option("--vehicle", gen_vehicle)->required();
  gen->add_option("--out", gen_out)->required();

  // gen-burnins
  auto* burn = app.add_subcommand("gen-burnins", "Write the built-in initial conditions");
  fs::path burn_out;
  burn->add_option("--out", burn_out)->required();

  // train
  auto* train = app.add_subcommand("train", "Train a waypoint follower with PPO");
  std::string train_vehicle;
  fs::path train_scenarios, train_config, train_out;
  std::uint64_t train_seed = 0;
  int train_threads = 0;
  train->add_option("--vehicle", train_vehicle)->required();
  train->add_option("--scenarios", train_scenarios)->required();
  train->add_option("--config", train_config, "PPO config JSON");
  train->add_option("--out", train_out)->required();
  train->add_option("--seed", train_seed);
  train->add_option("--threads", train_threads, "Rollout threads (results do not depend on it)");

  // sample-prior
  auto* sample = app.add_subcommand("sample-prior", "Draw trajectories from the behavior prior");
  fs::path sample_burnin, sample_config, sample_out;
  std::size_t sample_n = 100;
  std::uint64_t sample_seed = 0;
  sample->add_option("--burnin", sample_burnin)->required();
  sample->add_option("--config", sample_config, "Prior config JSON");
  sample->add_option("--n", sample_n);
  sample->add_option("--seed", sample_seed);
  sample->add_option("--out", sample_out)->required();

  // refine
  auto* refine = app.add_subcommand("refine", "Importance-resample prior samples");
  std::string refine_vehicle;
  fs::path refine_policy, refine_value, refine_burnin, refine_prior, refine_out;
  std::size_t refine_l = 100;
  std::uint64_t refine_seed = 0;
  double refine_epsilon = 1.0;
  refine->add_option("--vehicle", refine_vehicle)->required();
  refine->add_option("--policy", refine_policy)->required();
  refine->add_option("--value", refine_value)->required();
  refine->add_option("--burnin", refine_burnin)->required();
  refine->add_option("--prior-config", refine_prior);
  refine->add_option("--L", refine_l);
  refine->add_option("--seed", refine_seed);
  refine->add_option("--epsilon", refine_epsilon);
  refine->add_option("--out", refine_out)->required();

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Prior vs posterior comparison");
  fs::path eval_config, eval_out;
  evaluate->add_option("--config", eval_config)->required();
  evaluate->add_option("--out", eval_out)->required();

  // report
  auto* report = app.add_subcommand("report", "Print a comparison report");
  fs::path report_in;
  report->add_option("--in", report_in)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const auto fleet = fleet_from(fleet_path);
      const auto& vehicle = wpr::find_vehicle(fleet, gen_vehicle);
      for (const auto& spec : wpr::builtin_scenario_specs(vehicle)) {
        const std::string name(wpr::to_string(spec.kind));
        wpr::write_trajectory_csv(gen_out / (name + ".csv"), wpr::generate_scenario(spec, vehicle));
        write_text(gen_out / (name + ".spec.json"), wpr::scenario_spec_to_json(spec));
      }
    } else if (*burn) {
      for (const auto& b : wpr::builtin_initial_conditions()) {
        wpr::write_burnin_csv(burn_out / (b.name + ".csv"), b);
      }
    } else if (*train) {
      const auto fleet = fleet_from(fleet_path);
      const auto& vehicle = wpr::find_vehicle(fleet, train_vehicle);
      wpr::PpoConfig config;
      if (!train_config.empty()) config = wpr::ppo_config_from_json(read_text(train_config));
      if (train_threads > 0) config.num_threads = train_threads;
      std::vector<wpr::TargetTrajectory> scenarios;
      std::vector<std::string> names;
      for (const auto& p : csv_files(train_scenarios)) {
        scenarios.push_back(wpr::read_trajectory_csv(p));
        names.push_back(p.stem().string());
      }
      const wpr::TrainingResult result = wpr::train(vehicle, scenarios, config, train_seed);
      wpr::save_policy(result.policy, train_out / "policy.json");
      wpr::save_value(result.value, train_out / "value.json");
      result.log.write_csv(train_out / "training_log.csv");
      write_text(train_out / "ppo_config.json", wpr::ppo_config_to_json(config));
      const auto hits =
          wpr::scenario_hit_fractions(result.policy, vehicle, scenarios, config.epsilon);
      auto out = wpr::open_output(train_out / "scenario_hits.csv");
      out << "scenario,hit_fraction\n";
      for (std::size_t i = 0; i < hits.size(); ++i) {
        out << names[i] << ',' << wpr::format_number(hits[i]) << '\n';
        std::cout << names[i] << ' ' << hits[i] << '\n';
      }
      if (!result.log.abort_reason.empty()) {
        std::cerr << "training aborted: " << result.log.abort_reason << '\n';
        return 2;
      }
    } else if (*sample) {
      const wpr::BurnIn b = wpr::read_burnin_csv(sample_burnin);
      wpr::PriorConfig config;
      if (!sample_config.empty()) config = wpr::prior_config_from_json(read_text(sample_config));
      std::mt19937_64 rng(sample_seed);
      for (std::size_t i = 0; i < sample_n; ++i) {
        wpr::write_trajectory_csv(sample_out / sample_name(i), wpr::sample_prior(b, config, rng));
      }
    } else if (*refine) {
      const auto fleet = fleet_from(fleet_path);
      const auto& vehicle = wpr::find_vehicle(fleet, refine_vehicle);
      const wpr::GaussianPolicy policy = wpr::load_policy(refine_policy);
      const wpr::ValueNet value = wpr::load_value(refine_value);
      const wpr::BurnIn b = wpr::read_burnin_csv(refine_burnin);
      wpr::PriorConfig config;
      if (!refine_prior.empty()) config = wpr::prior_config_from_json(read_text(refine_prior));
      std::mt19937_64 rng(refine_seed);
      const wpr::RefineResult r = wpr::refine(wpr::make_prior_sampler(b, config), policy, value,
                                              vehicle, b, refine_l, refine_epsilon, rng);
      auto out = wpr::open_output(refine_out / "candidates.csv");
      out << "sample_id,s0_value,weight,selected_flag\n";
      for (std::size_t i = 0; i < r.candidates.size(); ++i) {
        const auto& c = r.candidates[i];
        out << i << ',' << wpr::format_number(c.s0_value) << ',' << wpr::format_number(c.weight)
            << ',' << (i == r.selected ? 1 : 0) << '\n';
        wpr::write_trajectory_csv(refine_out / "candidates" / sample_name(i), c.trajectory);
      }
      wpr::write_trajectory_csv(refine_out / "selected.csv", r.trajectory);
      std::cout << "selected " << r.selected << " log_evidence "
                << wpr::format_number(r.log_evidence) << '\n';
    } else if (*evaluate) {
      const wpr::ComparisonReport r = wpr::compare(wpr::load_experiment_config(eval_config));
      wpr::emit_report(r, eval_out);
      std::cout << wpr::format_summary(r);
    } else if (*report) {
      std::cout << wpr::format_summary(wpr::read_report(report_in));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
