#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "yolospp/network.hpp"

namespace yolospp {

/// Bytes taken by a header of the given version.
std::size_t header_size(const WeightsHeader& header);

/// Reads a darknet `.weights` stream. For each conv layer in graph order the file holds
/// little-endian float32s: with batch-norm beta, gamma, rolling mean, rolling variance, weights;
/// otherwise biases, weights. The stream must end exactly after the last layer.
/// Throws LoadError naming the layer on truncation, trailing bytes, non-finite values or
/// non-positive variances.
Network load_weights(const ModelGraph& graph, std::span<const std::byte> bytes);
Network load_weights_file(const ModelGraph& graph, const std::string& path);

/// Inverse of load_weights. Always writes a (0, 2, 0) header with a 64-bit `seen`.
std::vector<std::byte> save_weights(const Network& net);
void save_weights_file(const Network& net, const std::string& path);

/// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], zero biases, and batch-norm
/// gamma = 1, beta = 0, mean = 0, variance = 1. Deterministic for a seed on every platform.
Network random_init(const ModelGraph& graph, std::uint64_t seed);

}  // namespace yolospp
