#pragma once

#include <optional>
#include <string>
#include <vector>

#include "microtopt/optimizer.hpp"
#include "microtopt/solver.hpp"

namespace microtopt::io {

/// Columns: step, load_factor, E11, E22, E12_eng, S11, S22, S12, dS22_dE22.
/// A failed run ends with a "# FAILED: <reason>" footer row.
void write_stress_strain_csv(const std::string& path, const std::vector<PathSample>& samples,
                             const std::optional<std::string>& failure = std::nullopt);

/// Columns: step, load_factor, E22, C11 ... C33 (row-major).
void write_tangent_csv(const std::string& path, const std::vector<PathSample>& samples);

/// Columns: iteration, z, g, beta, non_discreteness, max_change,
/// newton_iterations, beta_updated.
std::string history_header();
std::string history_row(const HistoryRecord& record);
void write_history_csv(const std::string& path, const std::vector<HistoryRecord>& history,
                       const std::optional<std::string>& failure = std::nullopt);

/// 17 significant digits, enough to read back the same double.
std::string format_double(double value);

}  // namespace microtopt::io
