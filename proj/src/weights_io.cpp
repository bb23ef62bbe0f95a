#include "yolospp/weights_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>

#include "yolospp/errors.hpp"

namespace yolospp {

namespace {

static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

template <typename T>
T from_little_endian(const std::byte* p) {
  std::array<std::byte, sizeof(T)> buf;
  std::memcpy(buf.data(), p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf.begin(), buf.end());
  return std::bit_cast<T>(buf);
}

template <typename T>
void append_little_endian(std::vector<std::byte>& out, T value) {
  auto buf = std::bit_cast<std::array<std::byte, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf.begin(), buf.end());
  out.insert(out.end(), buf.begin(), buf.end());
}

class Reader {
 public:
  explicit Reader(std::span<const std::byte> bytes) : bytes_(bytes) {}

  template <typename T>
  T read(int layer, const char* what) {
    if (remaining() < sizeof(T))
      throw LoadError(std::string("file truncated while reading ") + what, layer);
    T v = from_little_endian<T>(bytes_.data() + pos_);
    pos_ += sizeof(T);
    return v;
  }

  void read_floats(std::vector<Real>& dst, int layer, const char* what) {
    if (remaining() / 4 < dst.size())
      throw LoadError(std::string("file truncated while reading ") + what + " (" +
                          std::to_string(dst.size()) + " floats needed, " + std::to_string(remaining() / 4) +
                          " available)",
                      layer);
    for (Real& v : dst) {
      const float f = from_little_endian<float>(bytes_.data() + pos_);
      pos_ += 4;
      if (!std::isfinite(f)) throw LoadError(std::string("non-finite value in ") + what, layer);
      v = static_cast<Real>(f);
    }
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::byte> bytes_;
  std::size_t pos_ = 0;
};

void write_floats(std::vector<std::byte>& out, const std::vector<Real>& values) {
  for (Real v : values) append_little_endian(out, static_cast<float>(v));
}

// Top 53 bits of a 64-bit draw mapped onto [0, 1).
double unit_interval(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

std::size_t header_size(const WeightsHeader& h) { return 12 + (h.wide_seen() ? 8 : 4); }

Network load_weights(const ModelGraph& graph, std::span<const std::byte> bytes) {
  Reader in(bytes);
  Network net(graph);
  WeightsHeader& h = net.header();
  h.major = in.read<std::int32_t>(-1, "header");
  h.minor = in.read<std::int32_t>(-1, "header");
  h.revision = in.read<std::int32_t>(-1, "header");
  h.seen = h.wide_seen() ? in.read<std::uint64_t>(-1, "header") : in.read<std::uint32_t>(-1, "header");

  for (int i : graph.conv_layers()) {
    ConvParams& p = net.conv(i);
    if (p.batch_normalize) {
      in.read_floats(p.biases, i, "batch-norm beta");
      in.read_floats(p.scales, i, "batch-norm gamma");
      in.read_floats(p.rolling_mean, i, "rolling mean");
      in.read_floats(p.rolling_variance, i, "rolling variance");
      for (Real v : p.rolling_variance)
        if (!(v > 0)) throw LoadError("rolling variance must be positive", i);
    } else {
      in.read_floats(p.biases, i, "biases");
    }
    in.read_floats(p.weights, i, "weights");
  }
  if (in.remaining() != 0) {
    const auto convs = graph.conv_layers();
    throw LoadError(std::to_string(in.remaining()) + " trailing bytes after the last convolutional layer",
                    convs.empty() ? -1 : convs.back());
  }
  net.mark_parameterized();
  return net;
}

Network load_weights_file(const ModelGraph& graph, const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw LoadError("cannot open weights file '" + path + "'", -1);
  std::vector<char> raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return load_weights(graph, std::as_bytes(std::span<const char>(raw)));
}

std::vector<std::byte> save_weights(const Network& net) {
  std::vector<std::byte> out;
  out.reserve(20 + 4 * count_parameters(net).total);
  append_little_endian<std::int32_t>(out, 0);
  append_little_endian<std::int32_t>(out, 2);
  append_little_endian<std::int32_t>(out, 0);
  append_little_endian<std::uint64_t>(out, net.header().seen);
  for (int i : net.graph().conv_layers()) {
    const ConvParams& p = net.conv(i);
    write_floats(out, p.biases);
    if (p.batch_normalize) {
      write_floats(out, p.scales);
      write_floats(out, p.rolling_mean);
      write_floats(out, p.rolling_variance);
    }
    write_floats(out, p.weights);
  }
  return out;
}

void save_weights_file(const Network& net, const std::string& path) {
  const auto bytes = save_weights(net);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write weights file '" + path + "'");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error("failed writing weights file '" + path + "'");
}

Network random_init(const ModelGraph& graph, std::uint64_t seed) {
  Network net(graph);
  std::mt19937_64 rng(seed);
  for (int i : graph.conv_layers()) {
    ConvParams& p = net.conv(i);
    const double bound = 1.0 / std::sqrt(static_cast<double>(p.in_channels * p.size * p.size));
    // Stored as float32 so that save/load round-trips are exact.
    for (Real& w : p.weights)
      w = static_cast<Real>(static_cast<float>((2.0 * unit_interval(rng) - 1.0) * bound));
    std::fill(p.biases.begin(), p.biases.end(), Real(0));
    if (p.batch_normalize) {
      std::fill(p.scales.begin(), p.scales.end(), Real(1));
      std::fill(p.rolling_mean.begin(), p.rolling_mean.end(), Real(0));
      std::fill(p.rolling_variance.begin(), p.rolling_variance.end(), Real(1));
    }
  }
  net.mark_parameterized();
  return net;
}

}  // namespace yolospp
