#pragma once

#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>

#include "esigo/errors.hpp"
#include "esigo/flow.hpp"

namespace esigo {

namespace detail {

/// Shortest round-trip decimal form, locale-independent.
inline std::string format_g17(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace detail

/// CSV schema: header `t,m_1..m_d,v,V,gv_over_v`, one row per record with
/// %.17g formatting, and a trailing `# status: ...` comment line.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
  if (tr.records.empty()) throw DomainError("write_trajectory_csv: empty trajectory");
  const int d = tr.records.front().theta.dim();
  os << "t";
  for (int c = 1; c <= d; ++c) os << ",m_" << c;
  os << ",v,V,gv_over_v\n";
  for (const TrajectoryRecord& rec : tr.records) {
    os << detail::format_g17(rec.t);
    for (int c = 0; c < d; ++c) os << ',' << detail::format_g17(rec.theta.m(c));
    os << ',' << detail::format_g17(rec.theta.v) << ',' << detail::format_g17(rec.lyapunov)
       << ',' << detail::format_g17(rec.gv_over_v) << '\n';
  }
  os << "# status: " << to_string(tr.status) << '\n';
}

inline void write_trajectory_csv(const std::string& path, const Trajectory& tr) {
  std::ofstream os(path, std::ios::binary);  // binary: byte-identical across platforms
  if (!os) throw ConfigError("cannot open for writing: " + path);
  write_trajectory_csv(os, tr);
  if (!os) throw ConfigError("write failed: " + path);
}

}  // namespace esigo
