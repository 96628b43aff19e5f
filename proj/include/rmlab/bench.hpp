//
// Copyright 2026 The rmlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#pragma once

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "rmlab/classic.hpp"
#include "rmlab/dataset.hpp"
#include "rmlab/dp.hpp"
#include "rmlab/filter.hpp"
#include "rmlab/mom.hpp"
#include "rmlab/parallel.hpp"
#include "rmlab/synth.hpp"

namespace rmlab::bench {

// Configuration problems exit the CLI with code 2; keep them distinguishable.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Estimator selection

enum class EstimatorKind {
  empirical_mean,
  median,
  coordinate_wise_median,
  geometric_median,
  filter_mean,
  mom,
  clipped_mean,
  private_mom,
};

struct EstimatorSpec {
  EstimatorKind kind = EstimatorKind::empirical_mean;
  // filter_mean
  double eta = 0.1;
  filter::TailModel tail_model = filter::TailModel::gaussian;
  double threshold_constant = 9.0;
  double tail_slack = 0.01;
  double removal_cap_multiplier = 3.0;
  // mom
  double beta = 0.05;
  mom::Aggregator aggregator = mom::Aggregator::stability;
  double k_constant = 3.0;
  double lambda_constant = 36.0;
  // dp
  double epsilon = 1.0;
  double delta = 0.0;
  double tau = 0.0;  // 0 = derive via choose_tau
  double c1 = 10.0;
  double c2 = 8.0;
  // geometric_median
  double tol = 1e-7;
  std::size_t max_iters = 1000;
};

inline EstimatorReport apply_estimator(const EstimatorSpec& spec, const Dataset& x,
                                       RngStream& rng) {
  switch (spec.kind) {
    case EstimatorKind::empirical_mean: {
      EstimatorReport r;
      r.estimate = empirical_mean(x);
      return r;
    }
    case EstimatorKind::median:
    case EstimatorKind::coordinate_wise_median: {
      if (spec.kind == EstimatorKind::median && x.dim() != 1)
        throw ConfigError("estimator 'median' needs d = 1");
      EstimatorReport r;
      r.estimate = classic::coordinate_wise_median(x);
      return r;
    }
    case EstimatorKind::geometric_median:
      return classic::geometric_median(x, spec.tol, spec.max_iters);
    case EstimatorKind::filter_mean: {
      filter::FilterConfig cfg;
      cfg.eta = spec.eta;
      cfg.tail_model = spec.tail_model;
      cfg.threshold_constant = spec.threshold_constant;
      cfg.tail_slack = spec.tail_slack;
      cfg.removal_cap_multiplier = spec.removal_cap_multiplier;
      return filter::filter_mean(x, cfg, rng);
    }
    case EstimatorKind::mom: {
      mom::MoMConfig cfg;
      cfg.beta = spec.beta;
      cfg.eta = spec.eta <= 0 ? 0.0 : spec.eta;
      cfg.k_constant = spec.k_constant;
      cfg.lambda_constant = spec.lambda_constant;
      cfg.aggregator = spec.aggregator;
      return mom::heavy_tailed_mean(x, cfg, rng).report;
    }
    case EstimatorKind::clipped_mean: {
      dp::PrivacyBudget budget{spec.epsilon, spec.delta};
      const double tau =
          spec.tau > 0 ? spec.tau : dp::choose_tau(x.n(), x.dim(), budget);
      return dp::clipped_mean(x, dp::ClipConfig::for_dataset(tau, x.n(), x.dim()),
                              budget, rng);
    }
    case EstimatorKind::private_mom: {
      dp::PrivacyBudget budget{spec.epsilon, 0.0};
      dp::PrivateMoMConfig cfg;
      cfg.c1 = spec.c1;
      cfg.c2 = spec.c2;
      return dp::private_mom_mean(x, budget, cfg, rng).report;
    }
  }
  throw ConfigError("unknown estimator kind");
}

// ---------------------------------------------------------------------------
// Experiment configuration

struct ExperimentConfig {
  synth::DistributionSpec distribution;
  synth::AttackSpec attack;
  EstimatorSpec estimator;
  std::size_t n = 0;
  std::size_t d = 0;
  std::size_t trials = 1;
  std::uint64_t master_seed = 0;
  std::string output_path;
  std::size_t workers = 0;
};

struct TrialRecord {
  std::size_t trial = 0;
  std::uint64_t seed = 0;  // stream id used with the master seed
  double error = 0;
  double runtime_ms = 0;
  std::uint32_t warnings = 0;
  bool ok = true;
  std::string failure;
};

struct Summary {
  std::size_t trials = 0;
  std::size_t failures = 0;
  double mean = 0;
  double median = 0;
  double p95 = 0;
  double p99 = 0;
  double p999 = 0;
};

// Nearest-rank quantile of a sorted sample: value at rank ceil(q*N).
inline double nearest_rank(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("nearest_rank: empty sample");
  const double nf = static_cast<double>(sorted.size());
  std::size_t rank = static_cast<std::size_t>(std::ceil(q * nf - 1e-12));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

inline Summary summarize(const std::vector<TrialRecord>& records) {
  Summary s;
  s.trials = records.size();
  std::vector<double> errors;
  errors.reserve(records.size());
  for (const auto& r : records) {
    if (!r.ok) {
      ++s.failures;
      continue;
    }
    errors.push_back(r.error);
  }
  if (errors.empty()) return s;
  std::sort(errors.begin(), errors.end());
  double total = 0;
  for (double e : errors) total += e;
  s.mean = total / static_cast<double>(errors.size());
  s.median = nearest_rank(errors, 0.5);
  s.p95 = nearest_rank(errors, 0.95);
  s.p99 = nearest_rank(errors, 0.99);
  s.p999 = nearest_rank(errors, 0.999);
  return s;
}

struct RunResult {
  std::vector<TrialRecord> records;
  Summary summary;
};

// One Monte Carlo experiment: trial t draws from RngStream(master_seed, t)
// (sub-streams for data, attack, and estimator), so records do not depend on
// execution order or worker count, and extending `trials` never perturbs
// existing trials. A failing estimator produces a flagged record; the run
// carries on.
inline RunResult run_trials(const ExperimentConfig& cfg) {
  if (cfg.trials == 0) throw ConfigError("trials must be >= 1");
  if (cfg.n == 0 || cfg.d == 0) throw ConfigError("n and d must be >= 1");
  cfg.distribution.validate();
  cfg.attack.validate();

  RunResult out;
  out.records.resize(cfg.trials);
  parallel_for(cfg.trials, cfg.workers, [&](std::size_t t) {
    TrialRecord rec;
    rec.trial = t;
    rec.seed = t;
    RngStream base(cfg.master_seed, t);
    RngStream data_rng = base.substream(0);
    RngStream attack_rng = base.substream(1);
    RngStream est_rng = base.substream(2);
    try {
      const Dataset clean = synth::sample(cfg.distribution, cfg.n, data_rng);
      synth::ContaminationResult contaminated =
          synth::contaminate(clean, cfg.attack, attack_rng);
      const auto t0 = std::chrono::steady_clock::now();
      const EstimatorReport report =
          apply_estimator(cfg.estimator, contaminated.data, est_rng);
      const auto t1 = std::chrono::steady_clock::now();
      rec.runtime_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
      rec.warnings = report.warnings;
      rec.error = distance(report.estimate, cfg.distribution.mean);
    } catch (const std::exception& e) {
      rec.ok = false;
      rec.failure = e.what();
    }
    out.records[t] = std::move(rec);
  });
  out.summary = summarize(out.records);
  return out;
}

inline void write_records_csv(std::ostream& out, const std::vector<TrialRecord>& records) {
  out << "trial,seed,error,runtime_ms,warnings\n" << std::setprecision(17);
  for (const auto& r : records) {
    out << r.trial << ',' << r.seed << ',';
    if (r.ok)
      out << r.error;
    else
      out << "nan";
    out << ',' << r.runtime_ms << ',';
    if (!r.ok)
      out << "failed:" << r.failure;
    else
      out << warnings_to_string(r.warnings);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Config file parsing: flat "[section] / key = value" text, or the same
// structure as a JSON object. Values may be scalars or comma lists.

struct RawConfig {
  // Section -> key -> value, plus sweep entries in file order.
  std::map<std::string, std::map<std::string, std::string>> sections;
  std::vector<std::pair<std::string, std::string>> sweep;  // (section.key, values)

  std::optional<std::string> get(const std::string& section, const std::string& key) const {
    const auto s = sections.find(section);
    if (s == sections.end()) return std::nullopt;
    const auto k = s->second.find(key);
    if (k == s->second.end()) return std::nullopt;
    return k->second;
  }

  void set_path(const std::string& path, const std::string& value) {
    const auto dotpos = path.find('.');
    if (dotpos == std::string::npos)
      throw ConfigError("sweep key must look like section.key: " + path);
    sections[path.substr(0, dotpos)][path.substr(dotpos + 1)] = value;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad number for " + what + ": '" + s + "'");
  }
}

inline std::uint64_t to_u64(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad integer for " + what + ": '" + s + "'");
  }
}

inline std::vector<double> to_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(to_double(trim(cell), what));
  if (out.empty()) throw ConfigError("empty list for " + what);
  return out;
}

// Scalar broadcast or explicit list of length d.
inline Vector expand(const std::string& s, std::size_t d, const std::string& what) {
  const std::vector<double> vals = to_list(s, what);
  if (vals.size() == 1) return Vector(d, vals[0]);
  if (vals.size() != d)
    throw ConfigError(what + " must have 1 or d entries, got " +
                      std::to_string(vals.size()));
  return vals;
}

}  // namespace detail

inline RawConfig parse_raw_config(const std::string& text) {
  RawConfig raw;
  // JSON form: an object of objects.
  std::size_t first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("bad json config: ") + e.what());
    }
    for (const auto& [section, obj] : j.items()) {
      if (!obj.is_object()) throw ConfigError("json section must be an object: " + section);
      for (const auto& [key, value] : obj.items()) {
        std::string str;
        if (value.is_string()) {
          str = value.get<std::string>();
        } else if (value.is_array()) {
          for (std::size_t i = 0; i < value.size(); ++i) {
            if (i) str += ',';
            str += value[i].dump();
          }
        } else {
          str = value.dump();
        }
        if (section == "sweep")
          raw.sweep.emplace_back(key, str);
        else
          raw.sections[section][key] = str;
      }
    }
    return raw;
  }
  // INI form.
  std::stringstream ss(text);
  std::string line;
  std::string section;
  while (std::getline(ss, line)) {
    line = detail::trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("bad section line: " + line);
      section = detail::trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value: " + line);
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (section.empty()) throw ConfigError("key outside any [section]: " + line);
    if (section == "sweep")
      raw.sweep.emplace_back(key, value);
    else
      raw.sections[section][key] = value;
  }
  return raw;
}

inline RawConfig load_raw_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_raw_config(buf.str());
}

inline EstimatorKind parse_estimator_kind(const std::string& s) {
  if (s == "empirical_mean") return EstimatorKind::empirical_mean;
  if (s == "median") return EstimatorKind::median;
  if (s == "coordinate_wise_median") return EstimatorKind::coordinate_wise_median;
  if (s == "geometric_median") return EstimatorKind::geometric_median;
  if (s == "filter_mean") return EstimatorKind::filter_mean;
  if (s == "mom") return EstimatorKind::mom;
  if (s == "clipped_mean") return EstimatorKind::clipped_mean;
  if (s == "private_mom") return EstimatorKind::private_mom;
  throw ConfigError("unknown estimator kind: " + s);
}

// Builds the typed experiment from raw key/value sections.
inline ExperimentConfig interpret_config(const RawConfig& raw) {
  ExperimentConfig cfg;
  const auto need = [&](const std::string& sec, const std::string& key) {
    const auto v = raw.get(sec, key);
    if (!v) throw ConfigError("missing [" + sec + "] " + key);
    return *v;
  };

  cfg.n = static_cast<std::size_t>(detail::to_u64(need("experiment", "n"), "n"));
  cfg.d = static_cast<std::size_t>(detail::to_u64(need("experiment", "d"), "d"));
  if (auto v = raw.get("experiment", "trials"))
    cfg.trials = static_cast<std::size_t>(detail::to_u64(*v, "trials"));
  if (auto v = raw.get("experiment", "master_seed"))
    cfg.master_seed = detail::to_u64(*v, "master_seed");
  if (auto v = raw.get("experiment", "workers"))
    cfg.workers = static_cast<std::size_t>(detail::to_u64(*v, "workers"));
  if (auto v = raw.get("experiment", "output")) cfg.output_path = *v;

  // Distribution.
  std::string kind = raw.get("distribution", "kind").value_or("gaussian");
  const Vector mean =
      detail::expand(raw.get("distribution", "mean").value_or("0"), cfg.d, "mean");
  if (kind == "gaussian") {
    const Vector variance = detail::expand(
        raw.get("distribution", "variance").value_or("1"), cfg.d, "variance");
    cfg.distribution = synth::DistributionSpec::gaussian(mean, variance);
  } else if (kind == "student_t") {
    const double dof =
        detail::to_double(need("distribution", "dof"), "dof");
    cfg.distribution = synth::DistributionSpec::student_t(mean, dof);
  } else {
    throw ConfigError("unknown distribution kind: " + kind);
  }

  // Attack.
  const std::string akind = raw.get("attack", "kind").value_or("none");
  if (akind != "none") {
    synth::AttackKind parsed;
    if (akind == "mean_shift") parsed = synth::AttackKind::mean_shift;
    else if (akind == "spike_first_coordinate") parsed = synth::AttackKind::spike_first_coordinate;
    else if (akind == "variance_inflation") parsed = synth::AttackKind::variance_inflation;
    else if (akind == "subtractive_tail") parsed = synth::AttackKind::subtractive_tail;
    else throw ConfigError("unknown attack kind: " + akind);
    const double eta = detail::to_double(need("attack", "eta"), "eta");
    const double magnitude =
        detail::to_double(raw.get("attack", "magnitude").value_or("0"), "magnitude");
    Vector direction;
    const std::string dir = raw.get("attack", "direction").value_or("e1");
    if (!dir.empty() && dir[0] == 'e') {
      const std::size_t axis =
          static_cast<std::size_t>(detail::to_u64(dir.substr(1), "direction axis"));
      if (axis == 0 || axis > cfg.d) throw ConfigError("direction axis out of range: " + dir);
      direction.assign(cfg.d, 0.0);
      direction[axis - 1] = 1.0;
    } else {
      direction = detail::expand(dir, cfg.d, "direction");
      const double norm = norm2(direction);
      if (norm <= 0) throw ConfigError("direction must be nonzero");
      for (auto& v : direction) v /= norm;
    }
    try {
      cfg.attack = synth::AttackSpec::make(parsed, eta, magnitude, direction);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  }

  // Estimator.
  EstimatorSpec est;
  est.kind = parse_estimator_kind(need("estimator", "kind"));
  const auto opt_num = [&](const char* key, double& slot) {
    if (auto v = raw.get("estimator", key)) slot = detail::to_double(*v, key);
  };
  opt_num("eta", est.eta);
  opt_num("threshold_constant", est.threshold_constant);
  opt_num("tail_slack", est.tail_slack);
  opt_num("removal_cap_multiplier", est.removal_cap_multiplier);
  opt_num("beta", est.beta);
  opt_num("k_constant", est.k_constant);
  opt_num("lambda_constant", est.lambda_constant);
  opt_num("epsilon", est.epsilon);
  opt_num("delta", est.delta);
  opt_num("tau", est.tau);
  opt_num("c1", est.c1);
  opt_num("c2", est.c2);
  opt_num("tol", est.tol);
  if (auto v = raw.get("estimator", "max_iters"))
    est.max_iters = static_cast<std::size_t>(detail::to_u64(*v, "max_iters"));
  if (auto v = raw.get("estimator", "tail_model")) {
    if (*v == "gaussian") est.tail_model = filter::TailModel::gaussian;
    else if (*v == "bounded_covariance") est.tail_model = filter::TailModel::bounded_covariance;
    else throw ConfigError("unknown tail_model: " + *v);
  }
  if (auto v = raw.get("estimator", "aggregator")) {
    if (*v == "simple_median") est.aggregator = mom::Aggregator::simple_median;
    else if (*v == "stability") est.aggregator = mom::Aggregator::stability;
    else if (*v == "descent") est.aggregator = mom::Aggregator::descent;
    else throw ConfigError("unknown aggregator: " + *v);
  }
  cfg.estimator = est;
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  return interpret_config(load_raw_config(path));
}

// ---------------------------------------------------------------------------
// Parameter sweeps: cross-product of the [sweep] entries in file order, each
// entry "section.key = v1,v2,...". Rows keep the grid's lexicographic order.

struct SweepRow {
  std::vector<std::pair<std::string, std::string>> assignment;
  Summary summary;
  bool ok = true;
  std::string failure;
};

inline std::vector<SweepRow> sweep(const RawConfig& base) {
  if (base.sweep.empty()) throw ConfigError("sweep: empty grid");
  std::vector<std::pair<std::string, std::vector<std::string>>> axes;
  for (const auto& [path, values] : base.sweep) {
    std::vector<std::string> items;
    std::stringstream ss(values);
    std::string cell;
    while (std::getline(ss, cell, ',')) items.push_back(detail::trim(cell));
    if (items.empty()) throw ConfigError("sweep: empty values for " + path);
    axes.emplace_back(path, std::move(items));
  }
  std::size_t total = 1;
  for (const auto& [path, items] : axes) total *= items.size();

  std::vector<SweepRow> rows;
  rows.reserve(total);
  for (std::size_t cell = 0; cell < total; ++cell) {
    RawConfig raw = base;
    raw.sweep.clear();
    SweepRow row;
    std::size_t rem = cell;
    for (std::size_t axis = axes.size(); axis-- > 0;) {
      const auto& [path, items] = axes[axis];
      const std::string& value = items[rem % items.size()];
      rem /= items.size();
      raw.set_path(path, value);
      row.assignment.emplace_back(path, value);
    }
    std::reverse(row.assignment.begin(), row.assignment.end());
    try {
      const ExperimentConfig cfg = interpret_config(raw);
      row.summary = run_trials(cfg).summary;
    } catch (const std::exception& e) {
      row.ok = false;
      row.failure = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  if (rows.empty()) return;
  for (const auto& [path, value] : rows.front().assignment) out << path << ',';
  out << "trials,failures,mean,median,p95,p99,p999,status\n" << std::setprecision(12);
  for (const auto& row : rows) {
    for (const auto& [path, value] : row.assignment) out << value << ',';
    const Summary& s = row.summary;
    out << s.trials << ',' << s.failures << ',' << s.mean << ',' << s.median << ','
        << s.p95 << ',' << s.p99 << ',' << s.p999 << ','
        << (row.ok ? "ok" : row.failure) << '\n';
  }
}

}  // namespace rmlab::bench
