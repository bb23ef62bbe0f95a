#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "yolospp/kernels.hpp"

namespace yolospp {

enum class LayerKind { net, convolutional, maxpool, upsample, route, shortcut, yolo };

std::string_view to_string(LayerKind kind);

struct Anchor {
  double width = 0;
  double height = 0;
  bool operator==(const Anchor&) const = default;
};

/// One cfg section. Only the fields relevant to `kind` are meaningful; the rest keep their defaults.
/// Defaults follow darknet so that sparse sections mean the same thing they do there.
struct LayerSpec {
  LayerKind kind = LayerKind::convolutional;
  int source_line = 0;  // diagnostics only; ignored by ==

  // convolutional, maxpool, upsample
  int filters = 1;
  int size = 1;
  int stride = 1;
  bool batch_normalize = false;
  Activation activation = Activation::sigmoid;
  // maxpool: total padding, split floor(p/2) before and the rest after
  int padding = 0;
  // route: indices as written (negative = relative)
  std::vector<int> layers;
  // shortcut
  int from = 0;
  // yolo
  std::vector<int> mask;
  std::vector<Anchor> anchors;
  int classes = 0;

  bool operator==(const LayerSpec& other) const;
};

struct NetSpec {
  int width = 416;
  int height = 416;
  int channels = 3;
  bool operator==(const NetSpec&) const = default;
};

struct LayerShape {
  int channels = 0;
  int height = 0;
  int width = 0;
  bool operator==(const LayerShape&) const = default;
};

/// Validated layer DAG. References always point strictly backwards, so the graph is acyclic.
class ModelGraph {
 public:
  /// Resolves references and shapes at the net size; throws ParseError for bad references and
  /// ValidationError for inconsistent shapes, both carrying the section's line when known.
  static ModelGraph from_layers(NetSpec net, std::vector<LayerSpec> layers);

  const NetSpec& net() const noexcept { return net_; }
  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  const LayerSpec& layer(int i) const { return layers_.at(static_cast<std::size_t>(i)); }
  int size() const noexcept { return static_cast<int>(layers_.size()); }

  /// Per-layer output shapes at the net's width and height.
  const std::vector<LayerShape>& shapes() const noexcept { return shapes_; }
  LayerShape input_shape() const { return {net_.channels, net_.height, net_.width}; }
  /// Absolute indices of a layer's inputs; -1 denotes the network input.
  const std::vector<int>& sources(int layer) const { return sources_.at(static_cast<std::size_t>(layer)); }
  /// Channel count entering layer `i` (for a conv, its weights' in_channels).
  int input_channels(int i) const;

  std::vector<int> conv_layers() const;
  std::vector<int> yolo_layers() const;
  /// Class count shared by every yolo layer, 0 when the graph has none.
  int num_classes() const;

  bool operator==(const ModelGraph& other) const {
    return net_ == other.net_ && layers_ == other.layers_;
  }

 private:
  NetSpec net_;
  std::vector<LayerSpec> layers_;
  std::vector<std::vector<int>> sources_;
  std::vector<LayerShape> shapes_;
};

/// Parses the darknet-style cfg dialect. First section must be [net]; `#` and `;` start comments.
ModelGraph parse_cfg(std::string_view text);
ModelGraph load_cfg_file(const std::string& path);

/// Canonical cfg text; parse_cfg(render_cfg(g)) == g.
std::string render_cfg(const ModelGraph& graph);

/// Per-layer shapes for a width x height input without the divisibility requirement.
std::vector<LayerShape> resolve_shapes(const ModelGraph& graph, int width, int height);

/// Like resolve_shapes, but requires both sides divisible by 32 and every yolo tap at a distinct
/// stride from {8, 16, 32}. Throws ValidationError.
std::vector<LayerShape> shape_check(const ModelGraph& graph, int width, int height);

enum class Variant { yolov3, yolov3_spp, yolov3_tiny };

std::string_view to_string(Variant v);
/// Accepts `yolov3`, `yolov3_spp` and `yolov3_tiny`, with `-` in place of `_` as well.
std::optional<Variant> parse_variant(std::string_view name);

/// Reference anchor sets in input pixels, ordered fine to coarse.
std::span<const Anchor> coco_anchors();
std::span<const Anchor> tiny_anchors();

/// Builds the named network for `num_classes` classes at the given input size (default 640).
ModelGraph builtin_graph(Variant variant, int num_classes, int input_size = 640);

/// Number of convolutional layers in the darknet-53 feature extractor of the builtin graphs.
inline constexpr int kDarknet53Convolutions = 52;
/// Index of the last backbone layer in the yolov3 / yolov3_spp graphs.
inline constexpr int kDarknet53LastLayer = 74;

/// If `extended` equals `base` with one contiguous block of layers inserted, returns that block
/// as [first, last) indices into `extended`.
std::optional<std::pair<int, int>> inserted_block(const ModelGraph& base, const ModelGraph& extended);

}  // namespace yolospp
