#pragma once

#include <cstdio>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "sdae/simulate.hpp"

namespace sdae {

inline constexpr const char* kVersion = "sdae 0.1.0";

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Shortest rendering for moment orders in column names: 2 -> "2", 2.5 -> "2.5".
inline std::string format_order(double p) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", p);
  return buf;
}

using Metadata = std::vector<std::pair<std::string, std::string>>;

inline void write_metadata(std::ostream& out, const Metadata& meta) {
  out << "# version: " << kVersion << '\n';
  for (const auto& [k, v] : meta) out << "# " << k << ": " << v << '\n';
}

// t, then mean/stderr per moment order, the grid sup-moment of the first order and the
// number of paths diverged by that time.
inline void write_ensemble_csv(std::ostream& out, const EnsembleResult& r, const Metadata& meta) {
  write_metadata(out, meta);
  out << 't';
  for (const MomentSeries& s : r.moments) {
    const std::string p = format_order(s.p);
    out << ",mean_norm_p" << p << ",stderr_p" << p;
  }
  out << ",sup_estimate,divergent\n";
  for (std::size_t k = 0; k < r.times.size(); ++k) {
    out << format_double(r.times[k]);
    for (const MomentSeries& s : r.moments) out << ',' << format_double(s.mean[k]) << ',' << format_double(s.std_error[k]);
    out << ',' << (r.moments.empty() ? std::string("0") : format_double(r.moments.front().sup_mean[k])) << ','
        << r.divergent_by_step[k] << '\n';
  }
}

inline void write_convergence_csv(std::ostream& out, const ConvergenceResult& r, const Metadata& meta) {
  write_metadata(out, meta);
  out << "# reference_level: " << r.reference_level << '\n';
  out << "# paths_used: " << r.paths_used << '\n';
  out << "# paths_excluded: " << r.paths_excluded << '\n';
  out << "# fitted_order: " << format_double(r.order) << '\n';
  out << "level,dt,rms_error\n";
  for (const ConvergenceLevel& l : r.levels)
    out << l.level << ',' << format_double(l.dt) << ',' << format_double(l.rms_error) << '\n';
}

}  // namespace sdae
