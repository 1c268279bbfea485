// Benchmark harness: experiment presets, the seeded Monte Carlo runner with
// a bounded worker pool, quartile summaries, and the records/summary/config
// file formats used by the CLI.
#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "lebid/estimator.hpp"
#include "lebid/lti.hpp"
#include "lebid/sampler.hpp"
#include "lebid/trunc_gauss.hpp"

namespace lebid {

/// Full description of one Monte Carlo experiment.
struct ExperimentConfig {
  std::string system = "msd";       // preset name, or "custom" with explicit tf
  RationalTF tf{{1.0}, {0.05, 0.2, 1.0}};
  double h = 1.0;                   // threshold spacing
  double delta = 0.1;               // fine grid period
  double delta_u = 3.0;             // input ZOH period (integer multiple of delta)
  double sigma_noise = 0.05;        // output noise stddev
  double sigma_input = 5.0;         // input sample stddev
  double duration = 15.0;           // record length [s]
  std::vector<double> h_sweep;      // non-empty for threshold-sweep presets
  int n_runs = 20;
  std::uint64_t seed = 1;
  std::vector<Method> methods{Method::lebesgue, Method::riemann, Method::oracle};
  int q = 1;
  int m_iter_hyper = 15;
  int m_iter_weights = 40;
  double eps_hyper = 1e-3;
  double eps_weights = 1e-4;
  int gibbs_samples = 1000;
  int gibbs_burn_in = 100;
  bool full = false;
  bool diagnostics = false;         // adds measured timings to records.csv
};

/// Per-run, per-method outcome.
struct RunRecord {
  std::uint64_t seed = 0;
  Method method = Method::lebesgue;
  double fit = 0.0;
  int n_events = 0;
  HyperParams rho;
  double wall_ms = 0.0;
};

/// Named benchmark presets. Desk-scale runtime knobs by default; full = true
/// switches duration / run counts / iteration caps to the full study scale.
inline ExperimentConfig preset(const std::string& name, bool full = false) {
  ExperimentConfig c;
  c.system = name;
  c.full = full;
  if (name == "msd" || name == "msd_h_sweep") {
    c.tf = {{1.0}, {0.05, 0.2, 1.0}};
    c.delta = 0.1;
    c.delta_u = 3.0;
    c.sigma_input = 5.0;
    c.h = 1.0;
    c.sigma_noise = 0.05;
    c.duration = full ? 30.0 : 15.0;
    if (name == "msd_h_sweep") {
      c.sigma_noise = 0.1;
      c.h_sweep = full ? std::vector<double>{1.0, 1.2, 1.5, 1.8, 2.0, 2.5}
                       : std::vector<double>{1.0, 1.5, 2.5};
    }
  } else if (name == "GA") {
    c.tf = {{-6400.0, 1600.0}, {1.0, 5.0, 408.0, 416.0, 1600.0}};
    c.delta = 0.01;
    c.h = 2.5;
    c.sigma_noise = 0.3;
    c.delta_u = 3.0;
    c.sigma_input = 1.0;
    c.duration = full ? 30.0 : 3.0;
  } else if (name == "GB") {
    c.tf = {{27.0 / 20.0 * -2000.0, 27.0 / 20.0 * -3600.0, 27.0 / 20.0 * -2095.0,
             27.0 / 20.0 * -396.0},
            {1350.0, 7695.0, 12852.0, 7796.0, 1520.0}};
    c.delta = 0.03;
    c.h = 0.2;
    c.sigma_noise = 0.03;
    c.delta_u = 3.0;
    c.sigma_input = 1.0;
    c.duration = full ? 30.0 : 9.0;
  } else if (name == "GC") {
    c.tf = {{-3.025, -15.676, -32.802, -88.827},
            {1.0, 16.52, 65.534, 235.01, 292.948}};
    c.delta = 0.03;
    c.h = 0.2;
    c.sigma_noise = 0.03;
    c.delta_u = 3.0;
    c.sigma_input = 1.0;
    c.duration = full ? 30.0 : 9.0;
  } else {
    throw std::invalid_argument("unknown preset: " + name);
  }
  c.n_runs = full ? 100 : 20;
  c.m_iter_hyper = full ? 40 : 15;
  return c;
}

/// One simulated run before estimation: noiseless output, noisy output
/// (index 0 included), input signal, and the Lebesgue dataset.
struct SimulatedRun {
  std::vector<double> x;        // noiseless output, i = 1..N
  std::vector<double> z;        // noisy output, i = 0..N
  ZohSignal input;
  LebesgueDataset dataset;
};

namespace detail {

constexpr std::uint64_t kNoiseSalt = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kGibbsSalt = 0xd1b54a32d192ed03ULL;

}  // namespace detail

/// Deterministic per-run data generation. Input draws are seeded with
/// base_seed + run_index; the noise stream is salted independently.
inline SimulatedRun simulate_run(const ExperimentConfig& cfg, int run_index) {
  const int n_steps = static_cast<int>(std::llround(cfg.duration / cfg.delta));
  if (n_steps < 1) throw std::invalid_argument("simulate_run: duration too short");
  const StateSpace ss = tf_to_ss(cfg.tf);

  SimulatedRun run;
  Rng input_rng(cfg.seed + static_cast<std::uint64_t>(run_index));
  const int n_u = static_cast<int>(std::ceil(cfg.duration / cfg.delta_u));
  run.input.period = cfg.delta_u;
  run.input.values.resize(static_cast<std::size_t>(n_u));
  for (auto& v : run.input.values) v = input_rng.normal(0.0, cfg.sigma_input);

  run.x = simulate_zoh(ss, run.input, cfg.delta, n_steps);

  Rng noise_rng((cfg.seed ^ detail::kNoiseSalt) + static_cast<std::uint64_t>(run_index));
  run.z.resize(static_cast<std::size_t>(n_steps) + 1);
  run.z[0] = noise_rng.normal(0.0, cfg.sigma_noise);
  for (int i = 1; i <= n_steps; ++i)
    run.z[static_cast<std::size_t>(i)] =
        run.x[static_cast<std::size_t>(i - 1)] + noise_rng.normal(0.0, cfg.sigma_noise);

  run.dataset = sample_events(run.z, cfg.h, cfg.delta);
  return run;
}

inline EstimatorConfig estimator_config(const ExperimentConfig& cfg, int run_index) {
  EstimatorConfig ec;
  ec.q = cfg.q;
  ec.hyper.m_iter = cfg.m_iter_hyper;
  ec.hyper.eps = cfg.eps_hyper;
  ec.hyper.gibbs_samples = cfg.gibbs_samples;
  ec.hyper.gibbs_burn_in = cfg.gibbs_burn_in;
  ec.hyper.seed = (cfg.seed ^ detail::kGibbsSalt) + static_cast<std::uint64_t>(run_index);
  ec.weights.m_iter = cfg.m_iter_weights;
  ec.weights.eps = cfg.eps_weights;
  return ec;
}

/// Run one method on one simulated run and score it against the noiseless
/// output.
inline RunRecord run_single(const ExperimentConfig& cfg, const SimulatedRun& run,
                            Method method, int run_index) {
  const EstimatorConfig ec = estimator_config(cfg, run_index);
  const auto t0 = std::chrono::steady_clock::now();
  EstimateResult est;
  switch (method) {
    case Method::lebesgue:
      est = estimate_lebesgue(run.input, run.dataset, ec);
      break;
    case Method::riemann:
      est = estimate_riemann(run.input, run.dataset, ec);
      break;
    case Method::oracle:
      est = estimate_oracle(run.input, std::span(run.z).subspan(1), cfg.delta, ec);
      break;
  }
  const Vector xhat = predict_output(est, run.dataset.n());
  const double wall =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  RunRecord rec;
  rec.seed = cfg.seed + static_cast<std::uint64_t>(run_index);
  rec.method = method;
  rec.fit = fit_metric(std::span(xhat.data(), static_cast<std::size_t>(xhat.size())),
                       std::span(run.x))
                .fit;
  rec.n_events = static_cast<int>(run.dataset.events.size());
  rec.rho = est.rho;
  rec.wall_ms = cfg.diagnostics ? wall : 0.0;  // timings are non-reproducible
  return rec;
}

/// Monte Carlo experiment over cfg.n_runs independent runs. Runs execute on
/// a bounded worker pool; records come back ordered by (run, method), so the
/// output is identical for any worker count. Failed runs are skipped.
inline std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg, int n_threads = 0) {
  if (n_threads <= 0)
    n_threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  n_threads = std::min(n_threads, std::max(cfg.n_runs, 1));

  const std::size_t per_run = cfg.methods.size();
  std::vector<RunRecord> records(static_cast<std::size_t>(cfg.n_runs) * per_run);
  std::vector<char> valid(records.size(), 0);

  std::atomic<int> next{0};
  auto worker = [&] {
    for (;;) {
      const int idx = next.fetch_add(1);
      if (idx >= cfg.n_runs) return;
      try {
        const SimulatedRun run = simulate_run(cfg, idx);
        for (std::size_t m = 0; m < per_run; ++m) {
          const std::size_t slot = static_cast<std::size_t>(idx) * per_run + m;
          try {
            records[slot] = run_single(cfg, run, cfg.methods[m], idx);
            valid[slot] = 1;
          } catch (const std::exception&) {
            // per-run failure: record dropped, experiment continues
          }
        }
      } catch (const std::exception&) {
      }
    }
  };

  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::vector<RunRecord> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i)
    if (valid[i]) out.push_back(records[i]);
  return out;
}

/// Five-number fit summary per method.
struct MethodSummary {
  Method method = Method::lebesgue;
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
  double mean_events = 0.0;
  double mean_wall_ms = 0.0;
};

namespace detail {

// linear-interpolation quantile on a sorted vector
inline double quantile_sorted(const std::vector<double>& v, double p) {
  if (v.empty()) throw std::invalid_argument("quantile of empty set");
  const double pos = p * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double w = pos - static_cast<double>(lo);
  return (1.0 - w) * v[lo] + w * v[hi];
}

}  // namespace detail

inline std::vector<MethodSummary> summarize(const std::vector<RunRecord>& records) {
  if (records.empty()) throw std::invalid_argument("summarize: no records");
  std::map<Method, std::vector<const RunRecord*>> by_method;
  for (const auto& r : records) by_method[r.method].push_back(&r);
  std::vector<MethodSummary> out;
  for (auto& [method, recs] : by_method) {
    std::vector<double> fits;
    fits.reserve(recs.size());
    MethodSummary s;
    s.method = method;
    for (const auto* r : recs) {
      fits.push_back(r->fit);
      s.mean_events += r->n_events;
      s.mean_wall_ms += r->wall_ms;
    }
    s.mean_events /= static_cast<double>(recs.size());
    s.mean_wall_ms /= static_cast<double>(recs.size());
    std::sort(fits.begin(), fits.end());
    s.min = fits.front();
    s.max = fits.back();
    s.q1 = detail::quantile_sorted(fits, 0.25);
    s.median = detail::quantile_sorted(fits, 0.5);
    s.q3 = detail::quantile_sorted(fits, 0.75);
    out.push_back(s);
  }
  return out;
}

inline double median_fit(const std::vector<RunRecord>& records, Method m) {
  for (const auto& s : summarize(records))
    if (s.method == m) return s.median;
  throw std::invalid_argument("median_fit: no records for method");
}

// ---------------------------------------------------------------------------
// file formats

inline void write_records_csv(std::ostream& os, const std::vector<RunRecord>& records) {
  os << "seed,method,fit,n_events,gamma_tilde,beta,sigma2,wall_ms\n";
  for (const auto& r : records) {
    os << r.seed << ',' << to_string(r.method) << ',' << detail::fmt_g17(r.fit) << ','
       << r.n_events << ',' << detail::fmt_g17(r.rho.gamma_tilde) << ','
       << detail::fmt_g17(r.rho.beta) << ',' << detail::fmt_g17(r.rho.sigma2) << ','
       << detail::fmt_g17(r.wall_ms) << '\n';
  }
}

inline void write_summary_csv(std::ostream& os, const std::vector<MethodSummary>& summaries) {
  os << "method,min,q1,median,q3,max,mean_events\n";
  for (const auto& s : summaries) {
    os << to_string(s.method) << ',' << detail::fmt_g17(s.min) << ',' << detail::fmt_g17(s.q1)
       << ',' << detail::fmt_g17(s.median) << ',' << detail::fmt_g17(s.q3) << ','
       << detail::fmt_g17(s.max) << ',' << detail::fmt_g17(s.mean_events) << '\n';
  }
}

namespace detail {

inline std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ' ';
    s += fmt_g17(v[i]);
  }
  return s;
}

inline std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  double v;
  while (ss >> v) out.push_back(v);
  return out;
}

}  // namespace detail

/// key = value config format; section headers group related keys and are
/// cosmetic (keys are globally unique). '#' starts a comment.
inline void write_config_file(std::ostream& os, const ExperimentConfig& c) {
  os << "[system]\n";
  os << "system = " << c.system << '\n';
  os << "num = " << detail::join_doubles(c.tf.num) << '\n';
  os << "den = " << detail::join_doubles(c.tf.den) << '\n';
  os << "\n[sampling]\n";
  os << "h = " << detail::fmt_g17(c.h) << '\n';
  if (!c.h_sweep.empty()) os << "h_sweep = " << detail::join_doubles(c.h_sweep) << '\n';
  os << "delta = " << detail::fmt_g17(c.delta) << '\n';
  os << "delta_u = " << detail::fmt_g17(c.delta_u) << '\n';
  os << "sigma_noise = " << detail::fmt_g17(c.sigma_noise) << '\n';
  os << "sigma_input = " << detail::fmt_g17(c.sigma_input) << '\n';
  os << "duration = " << detail::fmt_g17(c.duration) << '\n';
  os << "\n[experiment]\n";
  os << "runs = " << c.n_runs << '\n';
  os << "seed = " << c.seed << '\n';
  os << "methods =";
  for (const auto m : c.methods) os << ' ' << to_string(m);
  os << '\n';
  os << "full = " << (c.full ? "true" : "false") << '\n';
  os << "diagnostics = " << (c.diagnostics ? "true" : "false") << '\n';
  os << "\n[estimator]\n";
  os << "q = " << c.q << '\n';
  os << "m_iter_hyper = " << c.m_iter_hyper << '\n';
  os << "m_iter_weights = " << c.m_iter_weights << '\n';
  os << "eps_hyper = " << detail::fmt_g17(c.eps_hyper) << '\n';
  os << "eps_weights = " << detail::fmt_g17(c.eps_weights) << '\n';
  os << "gibbs_samples = " << c.gibbs_samples << '\n';
  os << "gibbs_burn_in = " << c.gibbs_burn_in << '\n';
}

inline ExperimentConfig read_config_file(std::istream& is) {
  ExperimentConfig c;
  c.methods.clear();
  bool methods_seen = false;
  std::string line;
  while (std::getline(is, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto ltrim = line.find_first_not_of(" \t\r");
    if (ltrim == std::string::npos) continue;
    auto rtrim = line.find_last_not_of(" \t\r");
    line = line.substr(ltrim, rtrim - ltrim + 1);
    if (line.empty() || line.front() == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: expected key = value, got: " + line);
    auto strip = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t");
      return (a == std::string::npos) ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = strip(line.substr(0, eq));
    const std::string val = strip(line.substr(eq + 1));
    if (key == "system") c.system = val;
    else if (key == "num") c.tf.num = detail::parse_doubles(val);
    else if (key == "den") c.tf.den = detail::parse_doubles(val);
    else if (key == "h") c.h = std::stod(val);
    else if (key == "h_sweep") c.h_sweep = detail::parse_doubles(val);
    else if (key == "delta") c.delta = std::stod(val);
    else if (key == "delta_u") c.delta_u = std::stod(val);
    else if (key == "sigma_noise") c.sigma_noise = std::stod(val);
    else if (key == "sigma_input") c.sigma_input = std::stod(val);
    else if (key == "duration") c.duration = std::stod(val);
    else if (key == "runs") c.n_runs = std::stoi(val);
    else if (key == "seed") c.seed = std::stoull(val);
    else if (key == "methods") {
      methods_seen = true;
      std::stringstream ss(val);
      std::string tok;
      while (ss >> tok) c.methods.push_back(method_from_string(tok));
    } else if (key == "full") c.full = (val == "true" || val == "1");
    else if (key == "diagnostics") c.diagnostics = (val == "true" || val == "1");
    else if (key == "q") c.q = std::stoi(val);
    else if (key == "m_iter_hyper") c.m_iter_hyper = std::stoi(val);
    else if (key == "m_iter_weights") c.m_iter_weights = std::stoi(val);
    else if (key == "eps_hyper") c.eps_hyper = std::stod(val);
    else if (key == "eps_weights") c.eps_weights = std::stod(val);
    else if (key == "gibbs_samples") c.gibbs_samples = std::stoi(val);
    else if (key == "gibbs_burn_in") c.gibbs_burn_in = std::stoi(val);
    else throw std::runtime_error("config: unknown key: " + key);
  }
  if (!methods_seen)
    c.methods = {Method::lebesgue, Method::riemann, Method::oracle};
  return c;
}

}  // namespace lebid
