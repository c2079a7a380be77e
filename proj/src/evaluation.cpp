#include "wpr/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "wpr/csv_io.hpp"
#include "wpr/refiner.hpp"

namespace wpr {

EpisodeTrace execute_follower(const GaussianPolicy& policy, const VehicleParams& vehicle,
                              const TargetTrajectory& trajectory, const VehicleState& s0,
                              double epsilon) {
  EnvConfig config;
  config.epsilon = epsilon;
  config.horizon = policy.horizon();
  WaypointEnv env(vehicle, trajectory, config);
  env.reset(s0);
  while (!env.done()) env.step(policy.mean_action(env.observation()));
  return env.trace();
}

std::vector<double> scenario_hit_fractions(const GaussianPolicy& policy,
                                           const VehicleParams& vehicle,
                                           std::span<const TargetTrajectory> scenarios,
                                           double epsilon) {
  std::vector<double> out;
  for (const auto& s : scenarios) {
    out.push_back(hit_fraction(
        execute_follower(policy, vehicle, s, start_state(s, vehicle), epsilon), epsilon));
  }
  return out;
}

namespace {

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman: length mismatch");
  if (x.size() < 2) throw std::invalid_argument("spearman: need at least two points");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nan("");
  return sxy / std::sqrt(sxx * syy);
}

// ---------------------------------------------------------------------------
// Configuration

void ExperimentConfig::validate() const {
  if (vehicles.empty()) throw std::invalid_argument("experiment: no vehicles");
  if (seeds.empty()) throw std::invalid_argument("experiment: at least one seed required");
  if (num_samples == 0) throw std::invalid_argument("experiment: L must be >= 1");
  if (num_posterior_draws == 0) {
    throw std::invalid_argument("experiment: num_posterior_draws must be >= 1");
  }
  for (const auto& v : vehicles) {
    if (!(v.epsilon > 0.0)) throw std::invalid_argument("experiment: epsilon must be > 0");
  }
  prior.validate();
}

ExperimentConfig parse_experiment_config(const std::string& text,
                                         const std::filesystem::path& base_dir) {
  const auto j = nlohmann::json::parse(text);
  if (!j.is_object()) throw std::invalid_argument("experiment config must be a JSON object");
  static const std::vector<std::string> known{
      "vehicles", "fleet", "seeds", "L", "num_posterior_draws", "initial_conditions", "prior"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw std::invalid_argument("unknown experiment config field '" + key + "'");
    }
  }
  const auto resolve = [&](const std::string& p) -> std::filesystem::path {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };
  ExperimentConfig c;
  for (const auto& v : j.at("vehicles")) {
    VehicleEntry e;
    e.name = v.at("name").get<std::string>();
    e.policy = resolve(v.at("policy").get<std::string>());
    e.value = resolve(v.at("value").get<std::string>());
    if (v.contains("training_log")) e.training_log = resolve(v.at("training_log").get<std::string>());
    if (v.contains("epsilon")) v.at("epsilon").get_to(e.epsilon);
    c.vehicles.push_back(std::move(e));
  }
  if (j.contains("fleet")) c.fleet = resolve(j.at("fleet").get<std::string>());
  if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  if (j.contains("L")) j.at("L").get_to(c.num_samples);
  if (j.contains("num_posterior_draws")) j.at("num_posterior_draws").get_to(c.num_posterior_draws);
  if (j.contains("initial_conditions")) {
    for (const auto& p : j.at("initial_conditions")) {
      c.initial_conditions.push_back(resolve(p.get<std::string>()));
    }
  }
  if (j.contains("prior")) {
    const auto& p = j.at("prior");
    if (p.is_string()) {
      std::ifstream in(resolve(p.get<std::string>()));
      if (!in) throw std::runtime_error("cannot open prior config " + p.get<std::string>());
      std::stringstream ss;
      ss << in.rdbuf();
      c.prior = prior_config_from_json(ss.str());
    } else {
      c.prior = prior_config_from_json(p.dump());
    }
  }
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str(), path.parent_path());
}

Experiment load_experiment(const ExperimentConfig& config) {
  config.validate();
  std::vector<std::filesystem::path> required;
  if (!config.fleet.empty()) required.push_back(config.fleet);
  for (const auto& v : config.vehicles) {
    required.push_back(v.policy);
    required.push_back(v.value);
    if (!v.training_log.empty()) required.push_back(v.training_log);
  }
  for (const auto& p : config.initial_conditions) required.push_back(p);
  for (const auto& p : required) {
    if (!std::filesystem::exists(p)) {
      throw std::invalid_argument("missing artifact: " + p.string());
    }
  }

  const std::vector<VehicleParams> fleet =
      config.fleet.empty() ? builtin_fleet() : load_fleet_json(config.fleet);
  Experiment e;
  for (const auto& v : config.vehicles) {
    VehicleModel m;
    m.params = find_vehicle(fleet, v.name);
    m.policy = load_policy(v.policy);
    m.value = load_value(v.value);
    m.epsilon = v.epsilon;
    m.training_log = v.training_log;
    if (m.policy.horizon() != m.value.horizon()) {
      throw std::invalid_argument("policy and value horizons differ for " + v.name);
    }
    e.vehicles.push_back(std::move(m));
  }
  if (config.initial_conditions.empty()) {
    e.initial_conditions = builtin_initial_conditions();
  } else {
    for (const auto& p : config.initial_conditions) e.initial_conditions.push_back(read_burnin_csv(p));
  }
  e.seeds = config.seeds;
  e.num_samples = config.num_samples;
  e.num_posterior_draws = config.num_posterior_draws;
  e.prior = config.prior;
  return e;
}

// ---------------------------------------------------------------------------
// Comparison

SeedResult evaluate_seed(const VehicleModel& model, const BurnIn& ic, std::size_t ic_index,
                         std::uint64_t seed, std::size_t num_samples,
                         std::size_t num_posterior_draws, const PriorConfig& prior,
                         std::vector<SampleRow>* samples) {
  std::seed_seq prior_seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(ic_index)};
  std::mt19937_64 prior_rng(prior_seq);
  std::seed_seq post_seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                         static_cast<std::uint32_t>(ic_index), 1u};
  std::mt19937_64 post_rng(post_seq);

  const RefineResult refined =
      refine(make_prior_sampler(ic, prior), model.policy, model.value, model.params, ic,
             num_samples, model.epsilon, prior_rng);

  std::vector<double> scores, weights, hits;
  for (const auto& c : refined.candidates) {
    scores.push_back(c.s0_value);
    weights.push_back(c.weight);
    hits.push_back(hit_fraction(
        execute_follower(model.policy, model.params, c.trajectory, refined.s0, model.epsilon),
        model.epsilon));
  }
  const std::vector<std::size_t> drawn = resample(weights, post_rng, num_posterior_draws);
  std::vector<std::size_t> counts(num_samples, 0);
  double posterior = 0.0;
  for (std::size_t i : drawn) {
    posterior += hits[i];
    ++counts[i];
  }

  SeedResult r;
  r.vehicle = model.params.name;
  r.ic = ic.name;
  r.seed = seed;
  r.prior_mean_hit = std::accumulate(hits.begin(), hits.end(), 0.0) / static_cast<double>(num_samples);
  r.posterior_mean_hit = posterior / static_cast<double>(num_posterior_draws);
  r.weighted_mean_hit = 0.0;
  for (std::size_t i = 0; i < num_samples; ++i) r.weighted_mean_hit += weights[i] * hits[i];
  r.spearman = num_samples >= 2 ? spearman(scores, hits) : std::nan("");
  r.log_evidence = refined.log_evidence;
  if (samples) {
    for (std::size_t i = 0; i < num_samples; ++i) {
      samples->push_back({r.vehicle, r.ic, seed, i, scores[i], weights[i], hits[i], counts[i]});
    }
  }
  return r;
}

namespace {

/// Cell means from per-seed rows; shared by run_experiment and read_report so
/// both produce identical values.
void fill_cell_from_seeds(CellResult& cell, const std::vector<SeedResult>& seeds) {
  double weighted = 0.0;
  std::size_t n = 0;
  for (const auto& s : seeds) {
    if (s.vehicle == cell.vehicle && s.ic == cell.ic) {
      weighted += s.weighted_mean_hit;
      ++n;
    }
  }
  cell.weighted_mean_hit = n > 0 ? weighted / static_cast<double>(n) : std::nan("");
}

}  // namespace

ComparisonReport run_experiment(const Experiment& e) {
  if (e.seeds.empty()) throw std::invalid_argument("experiment: at least one seed required");
  if (e.initial_conditions.empty()) {
    throw std::invalid_argument("experiment: at least one initial condition required");
  }
  ComparisonReport report;
  for (const auto& model : e.vehicles) {
    if (!model.training_log.empty()) report.training_logs.emplace_back(model.params.name, model.training_log);
    for (std::size_t ici = 0; ici < e.initial_conditions.size(); ++ici) {
      const BurnIn& ic = e.initial_conditions[ici];
      CellResult cell;
      cell.vehicle = model.params.name;
      cell.ic = ic.name;
      cell.seeds = e.seeds;
      cell.epsilon = model.epsilon;
      double prior_sum = 0.0, post_sum = 0.0;
      for (std::uint64_t seed : e.seeds) {
        std::vector<SampleRow> rows;
        const SeedResult r = evaluate_seed(model, ic, ici, seed, e.num_samples,
                                           e.num_posterior_draws, e.prior, &rows);
        for (const auto& row : rows) prior_sum += row.hit_fraction;
        for (const auto& row : rows) post_sum += row.hit_fraction * static_cast<double>(row.posterior_draws);
        report.seeds.push_back(r);
        report.samples.insert(report.samples.end(), rows.begin(), rows.end());
      }
      cell.prior_n = e.seeds.size() * e.num_samples;
      cell.posterior_n = e.seeds.size() * e.num_posterior_draws;
      cell.prior_mean_hit = prior_sum / static_cast<double>(cell.prior_n);
      cell.posterior_mean_hit = post_sum / static_cast<double>(cell.posterior_n);
      fill_cell_from_seeds(cell, report.seeds);
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

ComparisonReport compare(const ExperimentConfig& config) {
  return run_experiment(load_experiment(config));
}

// ---------------------------------------------------------------------------
// Report files

namespace {

std::string join_seeds(const std::vector<std::uint64_t>& seeds) {
  std::string out;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (i > 0) out += ';';
    out += std::to_string(seeds[i]);
  }
  return out;
}

std::vector<std::uint64_t> split_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';')) out.push_back(std::stoull(item));
  return out;
}

std::size_t parse_count(const std::string& text) {
  const double v = parse_number(text);
  if (v < 0 || v != std::floor(v)) throw std::invalid_argument("not a count: " + text);
  return static_cast<std::size_t>(v);
}

}  // namespace

std::string format_summary(const ComparisonReport& report) {
  std::ostringstream out;
  out << "vehicle          ic                 prior  posterior  weighted  delta\n";
  char line[160];
  for (const auto& c : report.cells) {
    std::snprintf(line, sizeof(line), "%-16s %-18s %5.3f  %9.3f  %8.3f  %+6.3f\n",
                  c.vehicle.c_str(), c.ic.c_str(), c.prior_mean_hit, c.posterior_mean_hit,
                  c.weighted_mean_hit, c.posterior_mean_hit - c.prior_mean_hit);
    out << line;
  }
  if (!report.cells.empty()) {
    const auto& c = report.cells.front();
    out << "\nprior n = " << c.prior_n << ", posterior n = " << c.posterior_n
        << ", seeds = " << join_seeds(c.seeds) << "\n";
  }
  out << "\nper-seed spearman(s0_value, hit_fraction)\n";
  for (const auto& s : report.seeds) {
    std::snprintf(line, sizeof(line), "%-16s %-18s seed %-4llu %+6.3f\n", s.vehicle.c_str(),
                  s.ic.c_str(), static_cast<unsigned long long>(s.seed), s.spearman);
    out << line;
  }
  return out.str();
}

void emit_report(const ComparisonReport& report, const std::filesystem::path& dir) {
  {
    auto out = open_output(dir / "comparison.csv");
    out << "vehicle,ic,distribution,mean_hit,n,seeds,epsilon\n";
    for (const auto& c : report.cells) {
      const std::string seeds = join_seeds(c.seeds);
      out << c.vehicle << ',' << c.ic << ",prior," << format_number(c.prior_mean_hit) << ','
          << c.prior_n << ',' << seeds << ',' << format_number(c.epsilon) << '\n';
      out << c.vehicle << ',' << c.ic << ",posterior," << format_number(c.posterior_mean_hit)
          << ',' << c.posterior_n << ',' << seeds << ',' << format_number(c.epsilon) << '\n';
    }
  }
  {
    auto out = open_output(dir / "seeds.csv");
    out << "vehicle,ic,seed,prior_mean_hit,posterior_mean_hit,weighted_mean_hit,spearman,"
           "log_evidence\n";
    for (const auto& s : report.seeds) {
      out << s.vehicle << ',' << s.ic << ',' << s.seed << ',' << format_number(s.prior_mean_hit)
          << ',' << format_number(s.posterior_mean_hit) << ','
          << format_number(s.weighted_mean_hit) << ',' << format_number(s.spearman) << ','
          << format_number(s.log_evidence) << '\n';
    }
  }
  {
    auto out = open_output(dir / "samples.csv");
    out << "vehicle,ic,seed,sample_id,s0_value,weight,hit_fraction,posterior_draws\n";
    for (const auto& s : report.samples) {
      out << s.vehicle << ',' << s.ic << ',' << s.seed << ',' << s.sample_id << ','
          << format_number(s.s0_value) << ',' << format_number(s.weight) << ','
          << format_number(s.hit_fraction) << ',' << s.posterior_draws << '\n';
    }
  }
  {
    auto out = open_output(dir / "summary.txt");
    out << format_summary(report);
  }
  for (const auto& [vehicle, path] : report.training_logs) {
    const auto target = dir / "training" / (vehicle + ".csv");
    std::filesystem::create_directories(target.parent_path());
    std::filesystem::copy_file(path, target, std::filesystem::copy_options::overwrite_existing);
  }
}

ComparisonReport read_report(const std::filesystem::path& dir) {
  ComparisonReport report;
  {
    const CsvTable t = read_csv(dir / "comparison.csv");
    const auto cv = t.column("vehicle"), ci = t.column("ic"), cd = t.column("distribution"),
               cm = t.column("mean_hit"), cn = t.column("n"), cs = t.column("seeds"),
               ce = t.column("epsilon");
    for (const auto& row : t.rows) {
      auto it = std::find_if(report.cells.begin(), report.cells.end(), [&](const CellResult& c) {
        return c.vehicle == row[cv] && c.ic == row[ci];
      });
      if (it == report.cells.end()) {
        CellResult c;
        c.vehicle = row[cv];
        c.ic = row[ci];
        c.seeds = split_seeds(row[cs]);
        c.epsilon = parse_number(row[ce]);
        report.cells.push_back(std::move(c));
        it = std::prev(report.cells.end());
      }
      if (row[cd] == "prior") {
        it->prior_mean_hit = parse_number(row[cm]);
        it->prior_n = parse_count(row[cn]);
      } else if (row[cd] == "posterior") {
        it->posterior_mean_hit = parse_number(row[cm]);
        it->posterior_n = parse_count(row[cn]);
      } else {
        throw std::invalid_argument("unknown distribution '" + row[cd] + "'");
      }
    }
  }
  if (std::filesystem::exists(dir / "seeds.csv")) {
    const CsvTable t = read_csv(dir / "seeds.csv");
    for (const auto& row : t.rows) {
      SeedResult s;
      s.vehicle = row[t.column("vehicle")];
      s.ic = row[t.column("ic")];
      s.seed = std::stoull(row[t.column("seed")]);
      s.prior_mean_hit = parse_number(row[t.column("prior_mean_hit")]);
      s.posterior_mean_hit = parse_number(row[t.column("posterior_mean_hit")]);
      s.weighted_mean_hit = parse_number(row[t.column("weighted_mean_hit")]);
      s.spearman = parse_number(row[t.column("spearman")]);
      s.log_evidence = parse_number(row[t.column("log_evidence")]);
      report.seeds.push_back(std::move(s));
    }
  }
  for (auto& c : report.cells) fill_cell_from_seeds(c, report.seeds);
  if (std::filesystem::exists(dir / "samples.csv")) {
    const CsvTable t = read_csv(dir / "samples.csv");
    for (const auto& row : t.rows) {
      SampleRow s;
      s.vehicle = row[t.column("vehicle")];
      s.ic = row[t.column("ic")];
      s.seed = std::stoull(row[t.column("seed")]);
      s.sample_id = parse_count(row[t.column("sample_id")]);
      s.s0_value = parse_number(row[t.column("s0_value")]);
      s.weight = parse_number(row[t.column("weight")]);
      s.hit_fraction = parse_number(row[t.column("hit_fraction")]);
      s.posterior_draws = parse_count(row[t.column("posterior_draws")]);
      report.samples.push_back(std::move(s));
    }
  }
  if (std::filesystem::exists(dir / "training")) {
    std::vector<std::filesystem::path> logs;
    for (const auto& entry : std::filesystem::directory_iterator(dir / "training")) {
      logs.push_back(entry.path());
    }
    std::sort(logs.begin(), logs.end());
    for (const auto& p : logs) report.training_logs.emplace_back(p.stem().string(), p);
  }
  return report;
}

}  // namespace wpr
