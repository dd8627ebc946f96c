#include "microtopt/io/export.hpp"

#include <cstdio>
#include <fstream>

#include "microtopt/error.hpp"

namespace microtopt::io {

std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_error(ErrorKind::Io, "cannot open '" + path + "' for writing");
  return out;
}

std::string footer(const std::string& reason) {
  std::string r = reason;
  for (char& ch : r)
    if (ch == '\n' || ch == '\r') ch = ' ';
  return "# FAILED: " + r + "\n";
}

}  // namespace

void write_stress_strain_csv(const std::string& path, const std::vector<PathSample>& samples,
                             const std::optional<std::string>& failure) {
  std::ofstream out = open_out(path);
  out << "step,load_factor,E11,E22,E12_eng,S11,S22,S12,dS22_dE22\n";
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const PathSample& s = samples[k];
    out << k << ',' << format_double(s.load_factor);
    for (int i = 0; i < 3; ++i) out << ',' << format_double(s.E[i]);
    for (int i = 0; i < 3; ++i) out << ',' << format_double(s.S_int[i]);
    out << ',' << (s.C_eff ? format_double((*s.C_eff)(1, 1)) : std::string("nan")) << '\n';
  }
  if (failure) out << footer(*failure);
}

void write_tangent_csv(const std::string& path, const std::vector<PathSample>& samples) {
  std::ofstream out = open_out(path);
  out << "step,load_factor,E22,C11,C12,C13,C21,C22,C23,C31,C32,C33\n";
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const PathSample& s = samples[k];
    if (!s.C_eff) continue;
    out << k << ',' << format_double(s.load_factor) << ',' << format_double(s.E[1]);
    for (int i = 0; i < 9; ++i) out << ',' << format_double((*s.C_eff)(i / 3, i % 3));
    out << '\n';
  }
}

std::string history_header() {
  return "iteration,z,g,beta,non_discreteness,max_change,newton_iterations,beta_updated";
}

std::string history_row(const HistoryRecord& r) {
  return std::to_string(r.iteration) + ',' + format_double(r.z) + ',' + format_double(r.g) + ',' +
         format_double(r.beta) + ',' + format_double(r.non_discreteness) + ',' +
         format_double(r.max_change) + ',' + std::to_string(r.newton_iterations) + ',' +
         (r.beta_updated ? "1" : "0");
}

void write_history_csv(const std::string& path, const std::vector<HistoryRecord>& history,
                       const std::optional<std::string>& failure) {
  std::ofstream out = open_out(path);
  out << history_header() << '\n';
  for (const auto& r : history) out << history_row(r) << '\n';
  if (failure) out << footer(*failure);
}

}  // namespace microtopt::io
