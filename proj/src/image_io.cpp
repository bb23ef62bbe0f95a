#include "yolospp/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

#include "yolospp/errors.hpp"

namespace yolospp {

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(std::span<const std::byte> bytes) : bytes_(bytes) {}

  int next_int(const char* what) {
    skip_space_and_comments();
    long value = 0;
    std::size_t digits = 0;
    while (pos_ < bytes_.size() && std::isdigit(peek())) {
      value = value * 10 + (peek() - '0');
      if (value > 1 << 24) throw ParseError(std::string("PPM ") + what + " too large", line_);
      ++pos_;
      ++digits;
    }
    if (digits == 0) throw ParseError(std::string("PPM header: expected ") + what, line_);
    return static_cast<int>(value);
  }

  // Exactly one whitespace byte separates the header from the raster.
  std::size_t raster_offset() {
    if (pos_ >= bytes_.size() || !std::isspace(peek())) throw ParseError("PPM header: missing raster separator", line_);
    return pos_ + 1;
  }

  std::size_t pos_ = 0;
  int line_ = 1;

 private:
  unsigned char peek() const { return static_cast<unsigned char>(bytes_[pos_]); }

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (peek() == '#') {
        while (pos_ < bytes_.size() && peek() != '\n') ++pos_;
      } else if (std::isspace(peek())) {
        line_ += peek() == '\n';
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::byte> bytes_;
};

std::vector<std::byte> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::vector<char> chars((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::byte> out(chars.size());
  std::transform(chars.begin(), chars.end(), out.begin(), [](char c) { return static_cast<std::byte>(c); });
  return out;
}

constexpr std::array<Color, 10> kPalette{{
    {1.00, 0.22, 0.22},  // red
    {0.20, 0.55, 1.00},  // blue
    {0.20, 0.85, 0.25},  // green
    {1.00, 0.80, 0.10},  // yellow
    {0.85, 0.30, 0.95},  // magenta
    {0.10, 0.90, 0.90},  // cyan
    {1.00, 0.55, 0.10},  // orange
    {0.55, 0.35, 0.15},  // brown
    {1.00, 1.00, 1.00},  // white
    {0.50, 0.50, 0.50},  // gray
}};

}  // namespace

Tensor decode_ppm(std::span<const std::byte> bytes) {
  if (bytes.size() < 2 || bytes[0] != std::byte{'P'} || bytes[1] != std::byte{'6'})
    throw ParseError("not a binary PPM (expected magic 'P6')", 1);
  HeaderReader r(bytes);
  r.pos_ = 2;
  const int width = r.next_int("width");
  const int height = r.next_int("height");
  const int maxval = r.next_int("maxval");
  if (width < 1 || height < 1) throw ParseError("PPM dimensions must be positive", r.line_);
  if (maxval < 1 || maxval > 65535) throw ParseError("PPM maxval must lie in 1..65535", r.line_);
  const std::size_t offset = r.raster_offset();
  const std::size_t sample_bytes = maxval > 255 ? 2 : 1;
  const std::size_t pixels = static_cast<std::size_t>(width) * height;
  if (bytes.size() - offset < pixels * 3 * sample_bytes)
    throw ParseError("PPM raster truncated: expected " + std::to_string(pixels * 3 * sample_bytes) + " bytes", r.line_);

  Tensor out = Tensor::feature_map(3, height, width);
  const std::byte* p = bytes.data() + offset;
  for (std::size_t i = 0; i < pixels; ++i)
    for (int c = 0; c < 3; ++c) {
      unsigned v = std::to_integer<unsigned>(*p++);
      if (sample_bytes == 2) v = (v << 8) | std::to_integer<unsigned>(*p++);
      out.data()[static_cast<std::size_t>(c) * pixels + i] = static_cast<Real>(std::min<unsigned>(v, maxval)) / static_cast<Real>(maxval);
    }
  return out;
}

Tensor read_ppm(const std::string& path) {
  const auto bytes = read_file(path);
  try {
    return decode_ppm(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), e.line());
  }
}

std::vector<std::byte> encode_ppm(const Tensor& image) {
  require_feature_map(image, "encode_ppm");
  if (image.channels() != 3) throw ShapeError("encode_ppm: image must have 3 channels, got " + to_string(image.shape()));
  const std::string header =
      "P6\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n255\n";
  const std::size_t pixels = static_cast<std::size_t>(image.width()) * image.height();
  std::vector<std::byte> out;
  out.reserve(header.size() + 3 * pixels);
  for (char ch : header) out.push_back(static_cast<std::byte>(ch));
  for (std::size_t i = 0; i < pixels; ++i)
    for (int c = 0; c < 3; ++c) {
      const Real v = std::clamp(image.data()[static_cast<std::size_t>(c) * pixels + i], Real(0), Real(1));
      out.push_back(static_cast<std::byte>(static_cast<unsigned>(std::lround(v * 255))));
    }
  return out;
}

void write_ppm(const std::string& path, const Tensor& image) {
  const auto bytes = encode_ppm(image);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing '" + path + "'");
}

const std::array<Color, 10>& class_palette() { return kPalette; }

void draw_box(Tensor& image, const Box& box, const Color& color, int thickness) {
  require_feature_map(image, "draw_box");
  const int h = image.height();
  const int w = image.width();
  const int x0 = static_cast<int>(std::lround(box.left()));
  const int y0 = static_cast<int>(std::lround(box.top()));
  const int x1 = static_cast<int>(std::lround(box.right())) - 1;
  const int y1 = static_cast<int>(std::lround(box.bottom())) - 1;
  if (x1 < x0 || y1 < y0) return;
  auto paint = [&](int y, int x) {
    if (y < 0 || y >= h || x < 0 || x >= w) return;
    for (int c = 0; c < std::min(3, image.channels()); ++c) image.at(c, y, x) = color[static_cast<std::size_t>(c)];
  };
  for (int t = 0; t < thickness; ++t) {
    for (int x = x0; x <= x1; ++x) {
      paint(y0 + t, x);
      paint(y1 - t, x);
    }
    for (int y = y0; y <= y1; ++y) {
      paint(y, x0 + t);
      paint(y, x1 - t);
    }
  }
}

void render_detections(Tensor& image, std::span<const Detection> detections) {
  for (const Detection& d : detections)
    draw_box(image, d.box, kPalette[static_cast<std::size_t>(std::max(d.class_index, 0)) % kPalette.size()]);
}

}  // namespace yolospp
