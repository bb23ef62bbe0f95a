#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "yolospp/box.hpp"
#include "yolospp/loss.hpp"
#include "yolospp/network.hpp"

namespace yolospp {

/// Momentum buffers, one per learnable parameter.
struct SgdState {
  NetworkGradients velocity;
};

/// v <- momentum * v + g; p <- p - lr * v for every conv weight, bias and batch-norm gamma.
/// Running batch-norm statistics are never touched.
void sgd_step(Network& net, const NetworkGradients& grads, SgdState& state, Real learning_rate, Real momentum);

struct SyntheticImage {
  std::string id;
  Tensor pixels;  // 3 x size x size in [0, 1]
  std::vector<GroundTruthBox> objects;
};

/// Seeded rectangles on uniform noise. Class c has a fixed hue; each image holds one or two
/// objects with exact pixel labels that stay inside the frame.
std::vector<SyntheticImage> make_synthetic_set(int count, int size, int num_classes, std::uint64_t seed);

/// Six compute layers (conv s2, maxpool, conv s2, maxpool, conv s2, 1x1 head) and one yolo layer
/// with a single stride-32 head whose anchors suit `input_size`.
ModelGraph micro_detector_graph(int num_classes, int input_size = 64);

struct TrainConfig {
  Real learning_rate = 0.01;
  Real momentum = 0.9;
  int batch = 16;  // images per SGD step, accumulated one at a time
  int steps = 200;
  std::uint64_t seed = 0;
  LossWeights weights;
};

/// Loss and gradient for one image, through a full taped forward/backward pass.
struct ImageStep {
  LossBreakdown loss;
  NetworkGradients grads;
};
ImageStep image_loss_and_gradients(const Network& net, const SyntheticImage& image, const LossWeights& weights);

/// Trains a randomly initialised network (seeded by config.seed) and returns the mean total loss
/// of each step's batch, measured before that step's update. Throws NumericError on divergence.
std::vector<Real> train_toy(const std::vector<SyntheticImage>& dataset, const ModelGraph& graph,
                            const TrainConfig& config, Network* trained = nullptr);

}  // namespace yolospp
