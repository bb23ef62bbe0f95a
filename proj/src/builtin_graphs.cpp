#include <array>

#include "yolospp/errors.hpp"
#include "yolospp/netdef.hpp"

namespace yolospp {

namespace {

constexpr std::array<Anchor, 9> kCocoAnchors{{
    {10, 13}, {16, 30}, {33, 23}, {30, 61}, {62, 45}, {59, 119}, {116, 90}, {156, 198}, {373, 326}}};
constexpr std::array<Anchor, 6> kTinyAnchors{{
    {10, 14}, {23, 27}, {37, 58}, {81, 82}, {135, 169}, {344, 319}}};

class Builder {
 public:
  Builder& conv(int filters, int size, int stride = 1) {
    LayerSpec l;
    l.kind = LayerKind::convolutional;
    l.filters = filters;
    l.size = size;
    l.stride = stride;
    l.batch_normalize = true;
    l.activation = Activation::leaky;
    return push(l);
  }
  // Final 1x1 projection feeding a yolo layer: bias, no batch-norm, linear.
  Builder& head_conv(int filters) {
    LayerSpec l;
    l.kind = LayerKind::convolutional;
    l.filters = filters;
    l.size = 1;
    l.stride = 1;
    l.activation = Activation::linear;
    return push(l);
  }
  Builder& maxpool(int size, int stride) {
    LayerSpec l;
    l.kind = LayerKind::maxpool;
    l.size = size;
    l.stride = stride;
    l.padding = size - 1;
    return push(l);
  }
  Builder& shortcut(int from) {
    LayerSpec l;
    l.kind = LayerKind::shortcut;
    l.from = from;
    l.activation = Activation::linear;
    return push(l);
  }
  Builder& route(std::vector<int> refs) {
    LayerSpec l;
    l.kind = LayerKind::route;
    l.layers = std::move(refs);
    return push(l);
  }
  Builder& upsample() {
    LayerSpec l;
    l.kind = LayerKind::upsample;
    l.stride = 2;
    return push(l);
  }
  Builder& yolo(std::vector<int> mask, std::span<const Anchor> anchors, int classes) {
    LayerSpec l;
    l.kind = LayerKind::yolo;
    l.mask = std::move(mask);
    l.anchors.assign(anchors.begin(), anchors.end());
    l.classes = classes;
    return push(l);
  }
  Builder& residual_blocks(int filters, int repeats) {
    for (int r = 0; r < repeats; ++r) conv(filters / 2, 1).conv(filters, 3).shortcut(-3);
    return *this;
  }
  // Three SPP max-pools over a shared input, merged as route -1,-3,-5,-6.
  Builder& spp() {
    return maxpool(5, 1).route({-2}).maxpool(9, 1).route({-4}).maxpool(13, 1).route({-1, -3, -5, -6});
  }

  int last() const { return static_cast<int>(layers_.size()) - 1; }
  std::vector<LayerSpec> take() { return std::move(layers_); }

 private:
  Builder& push(LayerSpec l) {
    layers_.push_back(std::move(l));
    return *this;
  }
  std::vector<LayerSpec> layers_;
};

// Darknet-53 without its classifier: 52 convolutions, residual repeats 1, 2, 8, 8, 4.
// Returns the indices of the stride-8 and stride-16 taps.
std::pair<int, int> darknet53(Builder& b) {
  b.conv(32, 3);
  b.conv(64, 3, 2).residual_blocks(64, 1);
  b.conv(128, 3, 2).residual_blocks(128, 2);
  b.conv(256, 3, 2).residual_blocks(256, 8);
  const int stride8 = b.last();
  b.conv(512, 3, 2).residual_blocks(512, 8);
  const int stride16 = b.last();
  b.conv(1024, 3, 2).residual_blocks(1024, 4);
  return {stride8, stride16};
}

std::vector<LayerSpec> yolov3_layers(int classes, bool with_spp) {
  Builder b;
  const auto [stride8, stride16] = darknet53(b);
  const int head = 3 * (5 + classes);
  const auto anchors = std::span<const Anchor>(kCocoAnchors);

  b.conv(512, 1).conv(1024, 3).conv(512, 1);
  if (with_spp) b.spp().conv(512, 1);
  b.conv(1024, 3).conv(512, 1).conv(1024, 3).head_conv(head).yolo({6, 7, 8}, anchors, classes);

  b.route({-4}).conv(256, 1).upsample().route({-1, stride16});
  b.conv(256, 1).conv(512, 3).conv(256, 1).conv(512, 3).conv(256, 1).conv(512, 3);
  b.head_conv(head).yolo({3, 4, 5}, anchors, classes);

  b.route({-4}).conv(128, 1).upsample().route({-1, stride8});
  b.conv(128, 1).conv(256, 3).conv(128, 1).conv(256, 3).conv(128, 1).conv(256, 3);
  b.head_conv(head).yolo({0, 1, 2}, anchors, classes);
  return b.take();
}

std::vector<LayerSpec> tiny_layers(int classes) {
  Builder b;
  const int head = 3 * (5 + classes);
  const auto anchors = std::span<const Anchor>(kTinyAnchors);
  b.conv(16, 3).maxpool(2, 2);
  b.conv(32, 3).maxpool(2, 2);
  b.conv(64, 3).maxpool(2, 2);
  b.conv(128, 3).maxpool(2, 2);
  b.conv(256, 3);
  const int stride16 = b.last();
  b.maxpool(2, 2);
  b.conv(512, 3).maxpool(2, 1);
  b.conv(1024, 3).conv(256, 1).conv(512, 3).head_conv(head).yolo({3, 4, 5}, anchors, classes);
  b.route({-4}).conv(128, 1).upsample().route({-1, stride16});
  b.conv(256, 3).head_conv(head).yolo({0, 1, 2}, anchors, classes);
  return b.take();
}

}  // namespace

std::span<const Anchor> coco_anchors() { return kCocoAnchors; }
std::span<const Anchor> tiny_anchors() { return kTinyAnchors; }

ModelGraph builtin_graph(Variant variant, int num_classes, int input_size) {
  if (num_classes < 1) throw ValidationError("num_classes must be >= 1");
  const NetSpec net{input_size, input_size, 3};
  switch (variant) {
    case Variant::yolov3: return ModelGraph::from_layers(net, yolov3_layers(num_classes, false));
    case Variant::yolov3_spp: return ModelGraph::from_layers(net, yolov3_layers(num_classes, true));
    case Variant::yolov3_tiny: return ModelGraph::from_layers(net, tiny_layers(num_classes));
  }
  throw ValidationError("unknown variant");
}

}  // namespace yolospp
