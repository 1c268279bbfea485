// Command-line front end: benchmark presets, single-run simulation and
// identification, and the seeded Monte Carlo experiment runner.
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lebid/lebid.hpp"

namespace fs = std::filesystem;
using namespace lebid;

namespace {

struct CommonArgs {
  std::string preset_name;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> runs;
  bool full = false;
  bool diagnostics = false;
  std::string out_dir = "out";
  std::vector<std::string> methods;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool with_runs) {
  cmd->add_option("--preset", a.preset_name, "preset name (msd, msd_h_sweep, GA, GB, GC)");
  cmd->add_option("--config", a.config_path, "config file (key = value format)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", a.seed, "base seed");
  if (with_runs) cmd->add_option("--runs", a.runs, "number of Monte Carlo runs");
  cmd->add_flag("--full", a.full, "full study scale instead of desk scale");
  cmd->add_flag("--diagnostics", a.diagnostics, "emit optimizer traces and timings");
  cmd->add_option("--out-dir", a.out_dir, "output directory");
  cmd->add_option("--methods", a.methods, "estimators to run (lebesgue riemann oracle)");
}

ExperimentConfig resolve_config(const CommonArgs& a) {
  ExperimentConfig cfg;
  if (!a.config_path.empty()) {
    std::ifstream in(a.config_path);
    if (!in) throw std::runtime_error("cannot open config: " + a.config_path);
    cfg = read_config_file(in);
    if (a.full) cfg.full = true;
  } else {
    cfg = preset(a.preset_name.empty() ? "msd" : a.preset_name, a.full);
  }
  if (a.seed) cfg.seed = *a.seed;
  if (a.runs) cfg.n_runs = *a.runs;
  if (!a.methods.empty()) {
    cfg.methods.clear();
    for (const auto& m : a.methods) cfg.methods.push_back(method_from_string(m));
  }
  cfg.diagnostics = a.diagnostics;
  return cfg;
}

void write_file(const fs::path& p, const std::function<void(std::ostream&)>& fn) {
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  fn(os);
}

int cmd_presets() {
  for (const char* name : {"msd", "msd_h_sweep", "GA", "GB", "GC"}) {
    const ExperimentConfig c = preset(name);
    std::cout << name << ": h=" << c.h << " delta=" << c.delta << " delta_u=" << c.delta_u
              << " sigma_noise=" << c.sigma_noise << " sigma_input=" << c.sigma_input
              << " duration=" << c.duration << "s runs=" << c.n_runs;
    if (!c.h_sweep.empty()) {
      std::cout << " h_sweep=[";
      for (std::size_t i = 0; i < c.h_sweep.size(); ++i)
        std::cout << (i ? " " : "") << c.h_sweep[i];
      std::cout << "]";
    }
    std::cout << "\n";
  }
  return 0;
}

int cmd_simulate(const CommonArgs& args) {
  const ExperimentConfig cfg = resolve_config(args);
  const SimulatedRun run = simulate_run(cfg, 0);
  fs::create_directories(args.out_dir);
  const fs::path dir(args.out_dir);

  write_file(dir / "config.ini", [&](std::ostream& os) { write_config_file(os, cfg); });
  write_file(dir / "bands.csv", [&](std::ostream& os) { write_bands_csv(os, run.dataset); });
  write_file(dir / "events.csv", [&](std::ostream& os) { write_events_csv(os, run.dataset); });
  write_file(dir / "input.csv", [&](std::ostream& os) {
    os << "k,t,u\n";
    for (std::size_t k = 0; k < run.input.values.size(); ++k)
      os << k << ',' << detail::fmt_g17(cfg.delta_u * static_cast<double>(k)) << ','
         << detail::fmt_g17(run.input.values[k]) << '\n';
  });
  write_file(dir / "output.csv", [&](std::ostream& os) {
    os << "i,t,x,z\n";
    for (std::size_t i = 1; i < run.z.size(); ++i)
      os << i << ',' << detail::fmt_g17(cfg.delta * static_cast<double>(i)) << ','
         << detail::fmt_g17(run.x[i - 1]) << ',' << detail::fmt_g17(run.z[i]) << '\n';
  });
  std::cout << "simulated " << run.dataset.n() << " steps, " << run.dataset.events.size()
            << " events -> " << args.out_dir << "\n";
  return 0;
}

int cmd_identify(const CommonArgs& args, const std::string& data_dir) {
  const ExperimentConfig cfg = resolve_config(args);
  SimulatedRun run;
  bool have_truth = true;
  if (!data_dir.empty()) {
    // consume a dataset previously written by `simulate`
    std::ifstream bands(fs::path(data_dir) / "bands.csv");
    if (!bands) throw std::runtime_error("missing bands.csv in " + data_dir);
    run.dataset = read_bands_csv(bands, cfg.h);
    std::ifstream input(fs::path(data_dir) / "input.csv");
    if (!input) throw std::runtime_error("missing input.csv in " + data_dir);
    std::string line;
    std::getline(input, line);
    run.input.period = cfg.delta_u;
    while (std::getline(input, line)) {
      if (line.empty()) continue;
      const auto f = detail::split_csv_line(line);
      run.input.values.push_back(std::stod(f.at(2)));
    }
    std::ifstream output(fs::path(data_dir) / "output.csv");
    have_truth = static_cast<bool>(output);
    if (have_truth) {
      std::getline(output, line);
      while (std::getline(output, line)) {
        if (line.empty()) continue;
        const auto f = detail::split_csv_line(line);
        run.x.push_back(std::stod(f.at(2)));
        run.z.push_back(std::stod(f.at(3)));
      }
      run.z.insert(run.z.begin(), 0.0);  // stand-in for the discarded t=0 sample
    }
  } else {
    run = simulate_run(cfg, 0);
  }

  fs::create_directories(args.out_dir);
  const fs::path dir(args.out_dir);
  const EstimatorConfig ec = estimator_config(cfg, 0);
  const auto omegas = log_frequency_grid();

  for (const Method m : cfg.methods) {
    if (m == Method::oracle && run.z.size() != static_cast<std::size_t>(run.dataset.n()) + 1) {
      std::cerr << "oracle method needs the noisy output; skipping\n";
      continue;
    }
    EstimateResult est;
    switch (m) {
      case Method::lebesgue: est = estimate_lebesgue(run.input, run.dataset, ec); break;
      case Method::riemann: est = estimate_riemann(run.input, run.dataset, ec); break;
      case Method::oracle:
        est = estimate_oracle(run.input, std::span(run.z).subspan(1), cfg.delta, ec);
        break;
    }
    double fit = std::numeric_limits<double>::quiet_NaN();
    if (have_truth && !run.x.empty()) {
      const Vector xhat = predict_output(est, run.dataset.n());
      fit = fit_metric(std::span(xhat.data(), static_cast<std::size_t>(xhat.size())),
                       std::span(run.x)).fit;
    }
    const std::string name = to_string(m);
    write_file(dir / ("result_" + name + ".json"),
               [&](std::ostream& os) { write_result_json(os, est, fit, omegas); });
    if (cfg.diagnostics && m == Method::lebesgue) {
      write_file(dir / "hyper_trace.csv", [&](std::ostream& os) {
        os << "iteration,gamma_tilde,beta,sigma2,objective\n";
        for (std::size_t j = 0; j < est.hyper_iterates.size(); ++j)
          os << j + 1 << ',' << detail::fmt_g17(est.hyper_iterates[j].gamma_tilde) << ','
             << detail::fmt_g17(est.hyper_iterates[j].beta) << ','
             << detail::fmt_g17(est.hyper_iterates[j].sigma2) << ','
             << detail::fmt_g17(est.hyper_trace[j]) << '\n';
      });
      write_file(dir / "weight_trace.csv", [&](std::ostream& os) {
        os << "iteration,objective,relative_step\n";
        for (std::size_t j = 0; j < est.weight_steps.size(); ++j)
          os << j + 1 << ',' << detail::fmt_g17(est.weight_trace[j + 1]) << ','
             << detail::fmt_g17(est.weight_steps[j]) << '\n';
      });
    }
    std::cout << name << ": fit=" << std::setprecision(6) << fit
              << " gamma_tilde=" << est.rho.gamma_tilde << " beta=" << est.rho.beta
              << " sigma2=" << est.rho.sigma2 << "\n";
  }
  return 0;
}

void print_summary(const std::vector<MethodSummary>& sums) {
  std::cout << std::left << std::setw(10) << "method" << std::right << std::setw(9) << "min"
            << std::setw(9) << "q1" << std::setw(9) << "median" << std::setw(9) << "q3"
            << std::setw(9) << "max" << std::setw(12) << "mean_events" << std::setw(12)
            << "mean_ms" << "\n";
  for (const auto& s : sums) {
    std::cout << std::left << std::setw(10) << to_string(s.method) << std::right << std::fixed
              << std::setprecision(2) << std::setw(9) << s.min << std::setw(9) << s.q1
              << std::setw(9) << s.median << std::setw(9) << s.q3 << std::setw(9) << s.max
              << std::setw(12) << std::setprecision(1) << s.mean_events << std::setw(12)
              << std::setprecision(0) << s.mean_wall_ms << "\n";
  }
  std::cout.unsetf(std::ios::fixed);
  std::cout << std::setprecision(6);
}

// ordering assertions applied under --check
int check_records(const ExperimentConfig& cfg, const std::vector<RunRecord>& records) {
  int failures = 0;
  auto has = [&](Method m) {
    return std::find(cfg.methods.begin(), cfg.methods.end(), m) != cfg.methods.end();
  };
  auto require = [&](bool ok, const std::string& what) {
    std::cout << (ok ? "[ok]   " : "[FAIL] ") << what << "\n";
    if (!ok) ++failures;
  };
  if (has(Method::lebesgue) && has(Method::riemann))
    require(median_fit(records, Method::lebesgue) > median_fit(records, Method::riemann),
            "median fit(lebesgue) > median fit(riemann)");
  if (has(Method::lebesgue) && has(Method::oracle))
    require(median_fit(records, Method::oracle) >= median_fit(records, Method::lebesgue),
            "median fit(oracle) >= median fit(lebesgue)");
  if (cfg.system == "msd" && has(Method::lebesgue))
    require(median_fit(records, Method::lebesgue) >= 70.0, "median fit(lebesgue) >= 70");
  return failures;
}

int cmd_montecarlo(const CommonArgs& args, bool check, int threads) {
  ExperimentConfig cfg = resolve_config(args);
  fs::create_directories(args.out_dir);
  int failures = 0;

  std::vector<double> h_values = cfg.h_sweep.empty() ? std::vector<double>{cfg.h} : cfg.h_sweep;
  for (double h : h_values) {
    ExperimentConfig run_cfg = cfg;
    run_cfg.h = h;
    run_cfg.h_sweep.clear();
    fs::path dir(args.out_dir);
    if (h_values.size() > 1) {
      std::ostringstream sub;
      sub << "h_" << h;
      dir /= sub.str();
      fs::create_directories(dir);
      std::cout << "== h = " << h << " ==\n";
    }
    const auto records = run_experiment(run_cfg, threads);
    if (records.empty()) {
      std::cerr << "no successful runs\n";
      return 1;
    }
    write_file(dir / "records.csv", [&](std::ostream& os) { write_records_csv(os, records); });
    const auto sums = summarize(records);
    write_file(dir / "summary.csv", [&](std::ostream& os) { write_summary_csv(os, sums); });
    print_summary(sums);
    if (check) failures += check_records(run_cfg, records);
  }
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kernel-based identification from Lebesgue-sampled data"};
  app.require_subcommand(1);

  auto* presets_cmd = app.add_subcommand("presets", "list benchmark presets");

  CommonArgs sim_args;
  auto* sim_cmd = app.add_subcommand("simulate", "simulate one run and write its dataset");
  add_common(sim_cmd, sim_args, false);

  CommonArgs id_args;
  std::string data_dir;
  auto* id_cmd = app.add_subcommand("identify", "run the estimators on one seeded run");
  add_common(id_cmd, id_args, false);
  id_cmd->add_option("--data-dir", data_dir, "read dataset written by `simulate`")
      ->check(CLI::ExistingDirectory);

  CommonArgs mc_args;
  bool check = false;
  int threads = 0;
  auto* mc_cmd = app.add_subcommand("montecarlo", "seeded Monte Carlo experiment");
  add_common(mc_cmd, mc_args, true);
  mc_cmd->add_flag("--check", check, "apply ordering assertions; nonzero exit on failure");
  mc_cmd->add_option("--threads", threads, "worker threads (0 = hardware)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (presets_cmd->parsed()) return cmd_presets();
    if (sim_cmd->parsed()) return cmd_simulate(sim_args);
    if (id_cmd->parsed()) return cmd_identify(id_args, data_dir);
    if (mc_cmd->parsed()) return cmd_montecarlo(mc_args, check, threads);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
