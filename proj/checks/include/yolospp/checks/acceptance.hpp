#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "yolospp/box.hpp"

namespace yolospp::checks {

struct AcceptanceOptions {
  std::uint64_t seed = 20190807;
  /// Adds 1e-2 to one analytic gradient so the gradient check must fail.
  bool inject_fault = false;
};

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string measured;
  std::string tolerance;
  std::vector<std::string> details;
  double seconds = 0;
  double budget_seconds = 0;  // 0 = no runtime budget
};

using CheckFunction = CheckResult (*)(const AcceptanceOptions&);

struct AcceptanceCheck {
  std::string_view name;
  std::string_view summary;
  CheckFunction run;
  double budget_seconds = 0;
};

/// The acceptance criteria in a fixed order.
std::span<const AcceptanceCheck> acceptance_checks();

/// Runs one check, timing it and turning exceptions into failures. A check that exceeds its
/// runtime budget fails.
CheckResult run_check(const AcceptanceCheck& check, const AcceptanceOptions& options);

/// `PASS name: measured (tolerance) [1.2 s]`
std::string format_result_line(const CheckResult& result);

struct EvalInstance {
  std::vector<Detection> detections;
  std::vector<GroundTruthBox> ground_truth;
  int num_classes = 1;
};

/// Up to 5 images, 10 ground-truth boxes (some ignore-flagged) and 3 classes, with detections
/// jittered around the boxes plus clutter. Scores are continuous, so no two are equal.
EvalInstance random_eval_instance(std::uint64_t seed);

}  // namespace yolospp::checks
