#include "csgd/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>

#include "csgd/errors.hpp"

namespace csgd {

std::string format_real(double v) {
  if (std::isnan(v)) {
    return "nan";
  }
  if (std::isinf(v)) {
    return v > 0 ? "inf" : "-inf";
  }
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_trace_csv(std::ostream& out, const RunTrace& trace) {
  out << "t,f,grad_norm,err_norm,y_drift,bits,reset\n";
  for (const auto& r : trace.records) {
    out << r.t << ',' << format_real(r.f) << ',' << format_real(r.grad_norm) << ','
        << format_real(r.err_norm) << ',' << format_real(r.y_drift) << ',' << r.bits << ','
        << (r.reset ? 1 : 0) << '\n';
  }
}

nlohmann::json to_json(const CompressorSpec& spec) {
  nlohmann::json j{{"kind", to_string(spec.kind)}, {"d", spec.d}};
  if (spec.kind == CompressorKind::RandomK || spec.kind == CompressorKind::TopK) {
    j["k"] = spec.k;
  }
  if (spec.kind == CompressorKind::Quantization) {
    j["s"] = spec.s;
  }
  j["mu"] = compression_factor(spec);
  j["linear"] = is_linear(spec);
  return j;
}

nlohmann::json to_json(const HyperParams& hp) {
  return {
      {"eps", hp.eps},
      {"L", hp.L},
      {"rho", hp.rho},
      {"sigma", hp.sigma},
      {"ell_tilde", hp.ell_tilde},
      {"d", hp.d},
      {"alpha", hp.alpha},
      {"mu", hp.mu},
      {"linear_compressor", hp.linear_compressor},
      {"eta_sigma", hp.eta_sigma},
      {"eta_mu", std::isinf(hp.eta_mu) ? nlohmann::json("inf") : nlohmann::json(hp.eta_mu)},
      {"eta", hp.eta},
      {"eta_clamped", hp.eta_clamped},
      {"I", hp.I},
      {"escape_iterations", hp.escape_iterations()},
      {"R", hp.R},
      {"F", hp.F},
      {"r", hp.r},
      {"chi_sq", hp.chi_sq},
      {"T", hp.T},
      {"f_max", hp.f_max},
      {"constants",
       {{"c_eta", hp.c_eta},
        {"c_I", hp.c_I},
        {"c_R", hp.c_R},
        {"c_F", hp.c_F},
        {"c_r", hp.c_r},
        {"c_T", hp.c_T}}},
  };
}

nlohmann::json to_json(const CommEstimate& est) {
  return {
      {"iterations", est.iterations},
      {"baseline_iterations", est.baseline_iterations},
      {"bits_per_round", est.bits_per_round},
      {"baseline_bits_per_round", est.baseline_bits_per_round},
      {"total_bits", est.total_bits},
      {"baseline_total_bits", est.baseline_total_bits},
      {"improvement", est.improvement},
  };
}

nlohmann::json run_summary(const RunTrace& trace, const HyperParams& hp,
                           const CompressorSpec& spec) {
  nlohmann::json cps = nlohmann::json::array();
  for (const auto& c : trace.checkpoints) {
    cps.push_back({{"t", c.t}, {"x", c.x.values()}});
  }
  nlohmann::json j{
      {"iterations", trace.iterations},
      {"total_bits", trace.total_bits},
      {"resets", trace.resets},
      {"fosp_visited", trace.fosp_visited},
      {"fosp_fraction", trace.fosp_fraction()},
      {"grad_sq_sum", trace.grad_sq_sum},
      {"stopped_early", trace.stopped_early},
      {"aborted", trace.aborted},
      {"checkpoints", std::move(cps)},
      {"x_final", trace.x_final.values()},
      {"compressor", to_json(spec)},
      {"planner", to_json(hp)},
  };
  if (trace.aborted) {
    j["abort_reason"] = trace.abort_reason;
  }
  if (!trace.records.empty()) {
    j["f_final"] = trace.records.back().f;
    j["grad_norm_final"] = trace.records.back().grad_norm;
  }
  return j;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_file(path, j.dump(2) + "\n");
}

} // namespace csgd
