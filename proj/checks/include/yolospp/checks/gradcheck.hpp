#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "yolospp/loss.hpp"
#include "yolospp/network.hpp"

namespace yolospp::checks {

inline constexpr double kFiniteDifferenceStep = 1e-5;
inline constexpr double kGradientTolerance = 1e-4;
/// Denominator floor of the relative error, so that two gradients that are both ~0 compare equal.
inline constexpr double kRelativeErrorFloor = 1e-6;

/// |a - n| / max(|a|, |n|, floor)
double relative_error(double analytic, double numeric);

/// Discrete state of the piecewise-linear parts of a taped pass: the sign of every leaky output
/// and the winning cell of every max-pool window. Central differences are only meaningful when
/// both probes see the same state as the base point.
std::vector<std::uint8_t> kink_signature(const Network& net, const GradTape& tape);

struct GradCheckResult {
  std::size_t checked = 0;
  std::size_t skipped_at_kink = 0;
  double max_relative_error = 0;
  std::string worst;  // label of the parameter with the largest error

  void merge(const GradCheckResult& other);
};

/// One scalar to check. `value` is perturbed in place by the finite-difference probes.
struct Probe {
  Real* value = nullptr;
  double analytic = 0;
  std::string label;
};

/// Evaluates the loss at the current parameter values and optionally its kink signature.
using LossFunction = std::function<double(std::vector<std::uint8_t>* signature)>;

/// Central differences for every probe against its analytic value.
GradCheckResult compare_gradients(std::vector<Probe>& probes, const LossFunction& loss);

struct MicroNetCase {
  ModelGraph graph;
  Network net;
  Tensor image;
  Tensor upstream;  // loss = sum(upstream * output)
};

/// A random graph of 2..5 layers mixing conv (with and without batch-norm), max-pool, upsample,
/// route and shortcut on a small odd-sized input, with randomized parameters and statistics.
MicroNetCase random_micro_net(std::uint64_t seed);

/// Checks every parameter and input gradient of a micro net. `fault` is added to the first
/// analytic gradient when non-zero.
GradCheckResult check_micro_net(MicroNetCase& c, double fault = 0);

/// Loss gradient w.r.t. raw head values on random two-head fixtures that hold responsible,
/// no-object and ignored slots. Targets are assigned once and held fixed.
GradCheckResult check_loss_gradients(std::uint64_t seed, int fixtures);

/// End-to-end: loss gradient w.r.t. the parameters of the micro detector on a synthetic image.
/// Weights of layers with more than `max_per_layer` entries are sampled.
GradCheckResult check_detector_gradients(std::uint64_t seed, std::size_t max_per_layer);

}  // namespace yolospp::checks
