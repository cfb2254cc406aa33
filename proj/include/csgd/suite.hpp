#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "csgd/parallel.hpp"

namespace csgd {

struct SuiteOptions {
  std::uint64_t seed = 1; // seeds of criterion experiments are seed, seed+1, ...
  Exec exec = Exec::Parallel;
};

struct CriterionResult {
  int id = 0;
  std::string name;
  bool property_passed = false;
  double seconds = 0.0;
  double budget_seconds = 0.0;
  std::string detail;   // one-line summary of the measured quantities
  nlohmann::json metrics;

  bool within_budget() const { return seconds < budget_seconds; }
  bool passed() const { return property_passed && within_budget(); }
};

struct CriterionInfo {
  int id = 0;
  std::string name;
  double budget_seconds = 0.0;
};

/// The twelve acceptance criteria in order.
const std::vector<CriterionInfo>& suite_criteria();

/// Runs one criterion; thresholds and tolerances are fixed inside.
CriterionResult run_criterion(int id, const SuiteOptions& opt);

/// Runs the listed criteria (all when empty), reporting each as it finishes.
std::vector<CriterionResult> run_suite(const SuiteOptions& opt, const std::vector<int>& ids = {},
                                       const std::function<void(const CriterionResult&)>& on_done = {});

/// "PASS  3 name (1.2 s / 30 s): detail"
std::string format_result(const CriterionResult& r);
nlohmann::json to_json(const CriterionResult& r);

} // namespace csgd
