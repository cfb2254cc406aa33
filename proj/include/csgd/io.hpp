#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include <json.hpp>

#include "csgd/cluster.hpp"
#include "csgd/planner.hpp"

namespace csgd {

/// Shortest round-trip form with at most 17 significant digits, '.' decimal,
/// independent of the locale. NaN and infinities print as nan, inf, -inf.
std::string format_real(double v);

/// Columns t,f,grad_norm,err_norm,y_drift,bits,reset.
void write_trace_csv(std::ostream& out, const RunTrace& trace);

nlohmann::json to_json(const CompressorSpec& spec);
nlohmann::json to_json(const HyperParams& hp);
nlohmann::json to_json(const CommEstimate& est);
/// Totals, checkpoint list and the planner echo of one run.
nlohmann::json run_summary(const RunTrace& trace, const HyperParams& hp,
                           const CompressorSpec& spec);

/// Creates parent directories as needed.
void write_file(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

} // namespace csgd
