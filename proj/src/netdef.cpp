#include "yolospp/netdef.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "yolospp/errors.hpp"

namespace yolospp {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::net: return "net";
    case LayerKind::convolutional: return "convolutional";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::upsample: return "upsample";
    case LayerKind::route: return "route";
    case LayerKind::shortcut: return "shortcut";
    case LayerKind::yolo: return "yolo";
  }
  return "?";
}

bool LayerSpec::operator==(const LayerSpec& o) const {
  if (kind != o.kind) return false;
  switch (kind) {
    case LayerKind::convolutional:
      return filters == o.filters && size == o.size && stride == o.stride &&
             batch_normalize == o.batch_normalize && activation == o.activation;
    case LayerKind::maxpool:
      return size == o.size && stride == o.stride && padding == o.padding;
    case LayerKind::upsample: return stride == o.stride;
    case LayerKind::route: return layers == o.layers;
    case LayerKind::shortcut: return from == o.from && activation == o.activation;
    case LayerKind::yolo: return mask == o.mask && anchors == o.anchors && classes == o.classes;
    case LayerKind::net: return true;
  }
  return false;
}

namespace {

std::string describe(const LayerSpec& l, int index) {
  std::string s = "[" + std::string(to_string(l.kind)) + "] layer " + std::to_string(index);
  if (l.source_line > 0) s += " (line " + std::to_string(l.source_line) + ")";
  return s;
}

std::vector<std::vector<int>> resolve_sources(const std::vector<LayerSpec>& layers) {
  std::vector<std::vector<int>> sources(layers.size());
  for (int i = 0; i < static_cast<int>(layers.size()); ++i) {
    const LayerSpec& l = layers[static_cast<std::size_t>(i)];
    auto absolute = [&](int ref) {
      const int target = ref < 0 ? i + ref : ref;
      if (target < 0 || target >= i)
        throw ParseError("layer " + std::to_string(i) + " references layer " + std::to_string(ref) +
                             ", which is not an earlier layer",
                         l.source_line);
      return target;
    };
    switch (l.kind) {
      case LayerKind::route:
        if (l.layers.empty()) throw ParseError("[route] needs at least one layer", l.source_line);
        for (int ref : l.layers) sources[static_cast<std::size_t>(i)].push_back(absolute(ref));
        break;
      case LayerKind::shortcut:
        if (i == 0) throw ParseError("[shortcut] cannot be the first layer", l.source_line);
        sources[static_cast<std::size_t>(i)] = {i - 1, absolute(l.from)};
        break;
      case LayerKind::net: throw ParseError("[net] may only appear first", l.source_line);
      default: sources[static_cast<std::size_t>(i)] = {i - 1}; break;
    }
  }
  return sources;
}

std::vector<LayerShape> compute_shapes(const NetSpec& net, const std::vector<LayerSpec>& layers,
                                       const std::vector<std::vector<int>>& sources, int width,
                                       int height) {
  if (width < 1 || height < 1 || net.channels < 1)
    throw ValidationError("input extents must be positive");
  const LayerShape input{net.channels, height, width};
  std::vector<LayerShape> shapes;
  shapes.reserve(layers.size());
  auto shape_of = [&](int idx) { return idx < 0 ? input : shapes[static_cast<std::size_t>(idx)]; };
  for (int i = 0; i < static_cast<int>(layers.size()); ++i) {
    const LayerSpec& l = layers[static_cast<std::size_t>(i)];
    const auto& src = sources[static_cast<std::size_t>(i)];
    const LayerShape in = shape_of(src.front());
    LayerShape out = in;
    switch (l.kind) {
      case LayerKind::convolutional: {
        const int pad = (l.size - 1) / 2;
        out = {l.filters, conv_output_extent(in.height, l.size, l.stride, pad),
               conv_output_extent(in.width, l.size, l.stride, pad)};
        break;
      }
      case LayerKind::maxpool: {
        const PoolWindow w = PoolWindow::darknet(l.size, l.stride, l.padding);
        if (in.height + l.padding < l.size || in.width + l.padding < l.size)
          throw ValidationError(describe(l, i) + ": window larger than padded input");
        out = {in.channels, w.output_extent(in.height), w.output_extent(in.width)};
        break;
      }
      case LayerKind::upsample: out = {in.channels, in.height * l.stride, in.width * l.stride}; break;
      case LayerKind::route: {
        out.channels = 0;
        for (int s : src) {
          const LayerShape part = shape_of(s);
          if (part.height != in.height || part.width != in.width)
            throw ValidationError(describe(l, i) + ": cannot concatenate " +
                                  std::to_string(part.height) + "x" + std::to_string(part.width) +
                                  " with " + std::to_string(in.height) + "x" +
                                  std::to_string(in.width));
          out.channels += part.channels;
        }
        break;
      }
      case LayerKind::shortcut: {
        const LayerShape other = shape_of(src[1]);
        if (!(other == in))
          throw ValidationError(describe(l, i) + ": shortcut source shape differs from previous layer");
        break;
      }
      case LayerKind::yolo: {
        const int expected = static_cast<int>(l.mask.size()) * (5 + l.classes);
        if (in.channels != expected)
          throw ValidationError(describe(l, i) + ": expects " + std::to_string(expected) +
                                " input channels (" + std::to_string(l.mask.size()) +
                                " x (4 + 1 + " + std::to_string(l.classes) + ")), got " +
                                std::to_string(in.channels));
        break;
      }
      case LayerKind::net: break;
    }
    if (out.height < 1 || out.width < 1)
      throw ValidationError(describe(l, i) + ": output would be empty");
    shapes.push_back(out);
  }
  return shapes;
}

void validate_layer(const LayerSpec& l, int index) {
  auto fail = [&](const std::string& msg) { throw ParseError(describe(l, index) + ": " + msg, l.source_line); };
  switch (l.kind) {
    case LayerKind::convolutional:
      if (l.filters < 1) fail("filters must be >= 1");
      if (l.size < 1 || l.size % 2 == 0) fail("size must be odd");
      if (l.stride != 1 && l.stride != 2) fail("stride must be 1 or 2");
      break;
    case LayerKind::maxpool:
      if (l.size < 1 || l.stride < 1) fail("size and stride must be >= 1");
      if (l.padding < 0 || l.padding > 2 * (l.size - 1)) fail("padding out of range");
      break;
    case LayerKind::upsample:
      if (l.stride != 2) fail("only stride=2 upsampling is supported");
      break;
    case LayerKind::shortcut:
      if (l.activation == Activation::sigmoid) fail("shortcut activation must be linear or leaky");
      break;
    case LayerKind::yolo:
      if (l.classes < 1) fail("classes must be >= 1");
      if (l.anchors.empty()) fail("anchors are required");
      if (l.mask.empty()) fail("mask is empty");
      for (int m : l.mask)
        if (m < 0 || m >= static_cast<int>(l.anchors.size())) fail("mask entry out of range");
      for (const Anchor& a : l.anchors)
        if (!(a.width > 0) || !(a.height > 0)) fail("anchors must be positive");
      break;
    default: break;
  }
}

// ---------------------------------------------------------------------------
// cfg text

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

int parse_int(std::string_view v, int line, std::string_view key) {
  v = trim(v);
  int out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ParseError("'" + std::string(key) + "' expects an integer, got '" + std::string(v) + "'", line);
  return out;
}

double parse_double(std::string_view v, int line, std::string_view key) {
  v = trim(v);
  double out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ParseError("'" + std::string(key) + "' expects a number, got '" + std::string(v) + "'", line);
  return out;
}

std::vector<std::string_view> split_list(std::string_view v) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = v.find(',');
    out.push_back(trim(v.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  return out;
}

std::vector<int> parse_int_list(std::string_view v, int line, std::string_view key) {
  std::vector<int> out;
  for (auto item : split_list(v)) out.push_back(parse_int(item, line, key));
  return out;
}

// Keys that darknet files carry for training or augmentation; accepted and dropped.
const std::map<LayerKind, std::set<std::string, std::less<>>>& ignored_keys() {
  static const std::map<LayerKind, std::set<std::string, std::less<>>> keys{
      {LayerKind::net,
       {"batch", "subdivisions", "momentum", "decay", "angle", "saturation", "exposure", "hue",
        "learning_rate", "burn_in", "max_batches", "policy", "steps", "scales"}},
      {LayerKind::yolo, {"num", "jitter", "ignore_thresh", "truth_thresh", "random"}},
  };
  return keys;
}

std::optional<LayerKind> section_kind(std::string_view name) {
  static constexpr std::array<std::pair<std::string_view, LayerKind>, 7> kinds{{
      {"net", LayerKind::net},
      {"convolutional", LayerKind::convolutional},
      {"maxpool", LayerKind::maxpool},
      {"upsample", LayerKind::upsample},
      {"route", LayerKind::route},
      {"shortcut", LayerKind::shortcut},
      {"yolo", LayerKind::yolo},
  }};
  for (const auto& [n, k] : kinds)
    if (n == name) return k;
  return std::nullopt;
}

LayerSpec default_layer(LayerKind kind, int line) {
  LayerSpec l;
  l.kind = kind;
  l.source_line = line;
  if (kind == LayerKind::shortcut) l.activation = Activation::linear;
  if (kind == LayerKind::upsample) l.stride = 2;
  if (kind == LayerKind::maxpool) l.padding = -1;  // resolved to size-1 when the section closes
  if (kind == LayerKind::yolo) l.classes = 20;
  return l;
}

struct Section {
  LayerSpec layer;
  NetSpec net;
  bool size_seen = false;
  int num = -1;
  int num_line = 0;
  int unpadded_line = 0;  // line of a conv `pad=0`, if any
};

void apply_key(Section& s, std::string_view key, std::string_view value, int line) {
  LayerSpec& l = s.layer;
  auto is = [&](std::string_view k) { return key == k; };
  switch (l.kind) {
    case LayerKind::net:
      if (is("width")) return void(s.net.width = parse_int(value, line, key));
      if (is("height")) return void(s.net.height = parse_int(value, line, key));
      if (is("channels")) return void(s.net.channels = parse_int(value, line, key));
      break;
    case LayerKind::convolutional:
      if (is("filters")) return void(l.filters = parse_int(value, line, key));
      if (is("size")) return void(l.size = parse_int(value, line, key));
      if (is("stride")) return void(l.stride = parse_int(value, line, key));
      if (is("batch_normalize")) return void(l.batch_normalize = parse_int(value, line, key) != 0);
      if (is("activation")) {
        try {
          l.activation = parse_activation(value);
        } catch (const ValidationError& e) {
          throw ParseError(e.what(), line);
        }
        return;
      }
      if (is("pad")) {
        const int pad = parse_int(value, line, key);
        if (pad != 0 && pad != 1) throw ParseError("pad must be 0 or 1", line);
        if (pad == 0) s.unpadded_line = line;  // checked against size when the section closes
        return;
      }
      break;
    case LayerKind::maxpool:
      if (is("size")) {
        s.size_seen = true;
        return void(l.size = parse_int(value, line, key));
      }
      if (is("stride")) return void(l.stride = parse_int(value, line, key));
      if (is("padding")) return void(l.padding = parse_int(value, line, key));
      break;
    case LayerKind::upsample:
      if (is("stride")) return void(l.stride = parse_int(value, line, key));
      break;
    case LayerKind::route:
      if (is("layers")) return void(l.layers = parse_int_list(value, line, key));
      break;
    case LayerKind::shortcut:
      if (is("from")) return void(l.from = parse_int(value, line, key));
      if (is("activation")) {
        try {
          l.activation = parse_activation(value);
        } catch (const ValidationError& e) {
          throw ParseError(e.what(), line);
        }
        return;
      }
      break;
    case LayerKind::yolo:
      if (is("mask")) return void(l.mask = parse_int_list(value, line, key));
      if (is("classes")) return void(l.classes = parse_int(value, line, key));
      if (is("anchors")) {
        const auto items = split_list(value);
        if (items.size() % 2) throw ParseError("anchors must come in width,height pairs", line);
        l.anchors.clear();
        for (std::size_t i = 0; i < items.size(); i += 2)
          l.anchors.push_back({parse_double(items[i], line, key), parse_double(items[i + 1], line, key)});
        return;
      }
      if (is("num")) {
        s.num = parse_int(value, line, key);
        s.num_line = line;
        return;
      }
      break;
  }
  const auto& ignored = ignored_keys();
  if (auto it = ignored.find(l.kind); it != ignored.end() && it->second.contains(key)) return;
  throw ParseError("unknown key '" + std::string(key) + "' in [" + std::string(to_string(l.kind)) + "]",
                   line);
}

void close_section(Section& s) {
  LayerSpec& l = s.layer;
  if (l.kind == LayerKind::maxpool) {
    if (!s.size_seen) l.size = l.stride;
    if (l.padding < 0) l.padding = l.size - 1;
  }
  if (l.kind == LayerKind::convolutional && s.unpadded_line > 0 && l.size != 1)
    throw ParseError("pad=0 is only supported for size=1 convolutions", s.unpadded_line);
  if (l.kind == LayerKind::yolo) {
    if (s.num >= 0 && s.num != static_cast<int>(l.anchors.size()))
      throw ParseError("num=" + std::to_string(s.num) + " disagrees with " +
                           std::to_string(l.anchors.size()) + " anchors",
                       s.num_line);
    if (l.mask.empty())
      for (int i = 0; i < static_cast<int>(l.anchors.size()); ++i) l.mask.push_back(i);
  }
}

std::string format_number(double v) {
  std::array<char, 32> buf{};
  const auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), p);
}

std::string join(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

}  // namespace

ModelGraph ModelGraph::from_layers(NetSpec net, std::vector<LayerSpec> layers) {
  for (int i = 0; i < static_cast<int>(layers.size()); ++i)
    validate_layer(layers[static_cast<std::size_t>(i)], i);
  ModelGraph g;
  g.net_ = net;
  g.layers_ = std::move(layers);
  g.sources_ = resolve_sources(g.layers_);
  g.shapes_ = compute_shapes(g.net_, g.layers_, g.sources_, net.width, net.height);
  const int classes = g.num_classes();
  for (int i : g.yolo_layers())
    if (g.layer(i).classes != classes)
      throw ValidationError(describe(g.layer(i), i) + ": all yolo layers must share one class count");
  return g;
}

int ModelGraph::input_channels(int i) const {
  const int src = sources(i).front();
  return src < 0 ? net_.channels : shapes_[static_cast<std::size_t>(src)].channels;
}

std::vector<int> ModelGraph::conv_layers() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i)
    if (layers_[static_cast<std::size_t>(i)].kind == LayerKind::convolutional) out.push_back(i);
  return out;
}

std::vector<int> ModelGraph::yolo_layers() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i)
    if (layers_[static_cast<std::size_t>(i)].kind == LayerKind::yolo) out.push_back(i);
  return out;
}

int ModelGraph::num_classes() const {
  for (const LayerSpec& l : layers_)
    if (l.kind == LayerKind::yolo) return l.classes;
  return 0;
}

ModelGraph parse_cfg(std::string_view text) {
  std::optional<Section> current;
  std::optional<NetSpec> net;
  std::vector<LayerSpec> layers;

  auto flush = [&] {
    if (!current) return;
    close_section(*current);
    if (current->layer.kind == LayerKind::net)
      net = current->net;
    else
      layers.push_back(current->layer);
    current.reset();
  };

  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    if (const auto c = line.find_first_of("#;"); c != std::string_view::npos) line = line.substr(0, c);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError("malformed section header '" + std::string(line) + "'", line_no);
      const auto name = trim(line.substr(1, line.size() - 2));
      const auto kind = section_kind(name);
      if (!kind) throw ParseError("unknown section [" + std::string(name) + "]", line_no);
      flush();
      if (*kind == LayerKind::net && (net || !layers.empty()))
        throw ParseError("[net] may only appear once, as the first section", line_no);
      if (*kind != LayerKind::net && !net) throw ParseError("first section must be [net]", line_no);
      current = Section{};
      current->layer = default_layer(*kind, line_no);
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected key=value, got '" + std::string(line) + "'", line_no);
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ParseError("expected key=value, got '" + std::string(line) + "'", line_no);
    if (!current) throw ParseError("key outside of any section", line_no);
    apply_key(*current, key, value, line_no);
  }
  flush();
  if (!net) throw ParseError("missing [net] section", 0);
  return ModelGraph::from_layers(*net, std::move(layers));
}

ModelGraph load_cfg_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open cfg file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_cfg(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), e.line());
  }
}

std::string render_cfg(const ModelGraph& graph) {
  std::ostringstream out;
  out << "[net]\nwidth=" << graph.net().width << "\nheight=" << graph.net().height
      << "\nchannels=" << graph.net().channels << "\n";
  for (const LayerSpec& l : graph.layers()) {
    out << "\n[" << to_string(l.kind) << "]\n";
    switch (l.kind) {
      case LayerKind::convolutional:
        if (l.batch_normalize) out << "batch_normalize=1\n";
        out << "filters=" << l.filters << "\nsize=" << l.size << "\nstride=" << l.stride
            << "\npad=1\nactivation=" << to_string(l.activation) << "\n";
        break;
      case LayerKind::maxpool:
        out << "size=" << l.size << "\nstride=" << l.stride << "\n";
        if (l.padding != l.size - 1) out << "padding=" << l.padding << "\n";
        break;
      case LayerKind::upsample: out << "stride=" << l.stride << "\n"; break;
      case LayerKind::route: out << "layers=" << join(l.layers) << "\n"; break;
      case LayerKind::shortcut:
        out << "from=" << l.from << "\nactivation=" << to_string(l.activation) << "\n";
        break;
      case LayerKind::yolo: {
        out << "mask=" << join(l.mask) << "\nanchors=";
        for (std::size_t i = 0; i < l.anchors.size(); ++i)
          out << (i ? ", " : "") << format_number(l.anchors[i].width) << ","
              << format_number(l.anchors[i].height);
        out << "\nclasses=" << l.classes << "\nnum=" << l.anchors.size() << "\n";
        break;
      }
      case LayerKind::net: break;
    }
  }
  return out.str();
}

std::vector<LayerShape> resolve_shapes(const ModelGraph& graph, int width, int height) {
  std::vector<std::vector<int>> sources;
  for (int i = 0; i < graph.size(); ++i) sources.push_back(graph.sources(i));
  return compute_shapes(graph.net(), graph.layers(), sources, width, height);
}

std::vector<LayerShape> shape_check(const ModelGraph& graph, int width, int height) {
  if (width <= 0 || height <= 0 || width % 32 || height % 32)
    throw ValidationError("input size " + std::to_string(width) + "x" + std::to_string(height) +
                          " is not divisible by 32");
  auto shapes = resolve_shapes(graph, width, height);
  std::set<int> strides;
  for (int i : graph.yolo_layers()) {
    const LayerShape& s = shapes[static_cast<std::size_t>(i)];
    if (width % s.width || height % s.height || width / s.width != height / s.height)
      throw ValidationError(describe(graph.layer(i), i) + ": grid does not tile the input evenly");
    const int stride = width / s.width;
    if (stride != 8 && stride != 16 && stride != 32)
      throw ValidationError(describe(graph.layer(i), i) + ": head stride " + std::to_string(stride) +
                            " is not one of 8, 16, 32");
    if (!strides.insert(stride).second)
      throw ValidationError(describe(graph.layer(i), i) + ": two heads share stride " +
                            std::to_string(stride));
  }
  return shapes;
}

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::yolov3: return "yolov3";
    case Variant::yolov3_spp: return "yolov3_spp";
    case Variant::yolov3_tiny: return "yolov3_tiny";
  }
  return "?";
}

std::optional<Variant> parse_variant(std::string_view name) {
  std::string normalized(name);
  std::replace(normalized.begin(), normalized.end(), '-', '_');
  for (Variant v : {Variant::yolov3, Variant::yolov3_spp, Variant::yolov3_tiny})
    if (to_string(v) == normalized) return v;
  return std::nullopt;
}

std::optional<std::pair<int, int>> inserted_block(const ModelGraph& base, const ModelGraph& extended) {
  if (!(base.net() == extended.net())) return std::nullopt;
  const auto& a = base.layers();
  const auto& b = extended.layers();
  if (b.size() < a.size()) return std::nullopt;
  std::size_t prefix = 0;
  while (prefix < a.size() && a[prefix] == b[prefix]) ++prefix;
  std::size_t suffix = 0;
  while (suffix < a.size() - prefix && a[a.size() - 1 - suffix] == b[b.size() - 1 - suffix]) ++suffix;
  if (prefix + suffix != a.size()) return std::nullopt;
  return std::pair<int, int>{static_cast<int>(prefix), static_cast<int>(b.size() - suffix)};
}

}  // namespace yolospp
