// Lebesgue sampling of a fine-grid signal: the set-valued quantizer Q_h,
// event extraction, per-step bands, and the dataset CSV formats.
#pragma once

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lebid {

/// One threshold-crossing event. `m` is the index of the band entered at
/// time `t`; the band is [m*h, (m+1)*h). The first event carries the band of
/// the first retained sample.
struct LebesgueEvent {
  double t;
  long long m;
};

/// Event stream plus the per-step band data consumed by the estimator.
/// eta[i-1] is the lower band edge at grid time i*delta, i = 1..n().
struct LebesgueDataset {
  double h = 1.0;
  double delta = 1.0;
  std::vector<double> eta;
  std::vector<LebesgueEvent> events;

  int n() const { return static_cast<int>(eta.size()); }
};

/// Lower edge of the band containing z: h*floor(z/h). A value exactly on a
/// threshold belongs to the band above it.
inline double quantize(double z, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("quantize: h must be positive");
  if (!std::isfinite(z)) throw std::invalid_argument("quantize: non-finite value");
  return h * std::floor(z / h);
}

/// Extract bands and events from a fine-grid record z(0), z(delta), ...
/// The sample at t = 0 is discarded (the system is strictly causal); bands
/// cover i = 1..N with N = len-1. Events sit on the grid: one initial event
/// at the first retained sample, then one whenever the band changes.
inline LebesgueDataset sample_events(std::span<const double> z_fine, double h, double delta) {
  if (z_fine.empty()) throw std::invalid_argument("sample_events: empty signal");
  if (!(delta > 0.0)) throw std::invalid_argument("sample_events: delta must be positive");
  LebesgueDataset ds;
  ds.h = h;
  ds.delta = delta;
  const std::size_t n = z_fine.size() - 1;
  ds.eta.resize(n);
  long long prev = 0;
  for (std::size_t i = 1; i <= n; ++i) {
    const long long band = static_cast<long long>(std::floor(z_fine[i] / h));
    ds.eta[i - 1] = h * static_cast<double>(band);
    if (i == 1 || band != prev)
      ds.events.push_back({delta * static_cast<double>(i), band});
    prev = band;
  }
  return ds;
}

/// Band midpoints eta_i + h/2, the "best worst-case" output surrogate.
inline std::vector<double> midpoints(const LebesgueDataset& ds) {
  std::vector<double> out(ds.eta.size());
  for (std::size_t i = 0; i < ds.eta.size(); ++i) out[i] = ds.eta[i] + ds.h / 2.0;
  return out;
}

/// Rebuild the band sequence from the event stream alone (Assumption 1:
/// the bands are deducible from the events). Inverse of sample_events.
inline std::vector<double> eta_from_events(const std::vector<LebesgueEvent>& events,
                                           double h, double delta, int n) {
  std::vector<double> eta(static_cast<std::size_t>(n));
  std::size_t next = 0;
  long long band = 0;
  bool seeded = false;
  for (int i = 1; i <= n; ++i) {
    const double t = delta * static_cast<double>(i);
    while (next < events.size() && events[next].t <= t + 1e-9 * delta) {
      band = events[next].m;
      seeded = true;
      ++next;
    }
    if (!seeded) throw std::invalid_argument("eta_from_events: no event at or before first step");
    eta[static_cast<std::size_t>(i - 1)] = h * static_cast<double>(band);
  }
  return eta;
}

namespace detail {

inline std::string fmt_g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) fields.push_back(f);
  return fields;
}

}  // namespace detail

/// Band table: header `i,t,eta` then one row per retained grid step.
inline void write_bands_csv(std::ostream& os, const LebesgueDataset& ds) {
  os << "i,t,eta\n";
  for (int i = 1; i <= ds.n(); ++i)
    os << i << ',' << detail::fmt_g17(ds.delta * i) << ','
       << detail::fmt_g17(ds.eta[static_cast<std::size_t>(i - 1)]) << '\n';
}

/// Event table: header `t,m` then one row per event.
inline void write_events_csv(std::ostream& os, const LebesgueDataset& ds) {
  os << "t,m\n";
  for (const auto& e : ds.events) os << detail::fmt_g17(e.t) << ',' << e.m << '\n';
}

/// Parse a band table written by write_bands_csv. h and delta are not part
/// of the table; delta is inferred from the first row, h must be supplied.
inline LebesgueDataset read_bands_csv(std::istream& is, double h) {
  LebesgueDataset ds;
  ds.h = h;
  std::string line;
  if (!std::getline(is, line) || line.rfind("i,t,eta", 0) != 0)
    throw std::runtime_error("read_bands_csv: missing header row");
  bool first = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 3) throw std::runtime_error("read_bands_csv: malformed row: " + line);
    const double t = std::stod(f[1]);
    if (first) {
      ds.delta = t;
      first = false;
    }
    ds.eta.push_back(std::stod(f[2]));
  }
  if (ds.eta.empty()) throw std::runtime_error("read_bands_csv: no data rows");
  // regenerate the event view of the band sequence
  long long prev = 0;
  for (std::size_t i = 0; i < ds.eta.size(); ++i) {
    const long long band = static_cast<long long>(std::llround(ds.eta[i] / h));
    if (i == 0 || band != prev)
      ds.events.push_back({ds.delta * static_cast<double>(i + 1), band});
    prev = band;
  }
  return ds;
}

}  // namespace lebid
