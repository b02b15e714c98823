#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "qsvr/error.hpp"

namespace qsvr {

/// 8-bit raster, row-major, channels interleaved (1 = gray, 3 = RGB).
struct RawImage {
  std::size_t width = 0;
  std::size_t height = 0;
  int channels = 1;
  std::vector<std::uint8_t> pixels;

  RawImage() = default;
  RawImage(std::size_t w, std::size_t h, int ch, std::uint8_t fill = 0)
      : width(w), height(h), channels(ch), pixels(w * h * static_cast<std::size_t>(ch), fill) {
    if (w == 0 || h == 0) throw InvalidInput("RawImage: zero dimension");
    if (ch != 1 && ch != 3) throw InvalidInput("RawImage: channels must be 1 or 3");
  }

  bool gray() const noexcept { return channels == 1; }

  std::uint8_t& at(std::size_t r, std::size_t c, int ch = 0) {
    return pixels[(r * width + c) * static_cast<std::size_t>(channels) + static_cast<std::size_t>(ch)];
  }
  std::uint8_t at(std::size_t r, std::size_t c, int ch = 0) const {
    return pixels[(r * width + c) * static_cast<std::size_t>(channels) + static_cast<std::size_t>(ch)];
  }

  friend bool operator==(const RawImage&, const RawImage&) = default;
};

inline constexpr std::size_t kNormSide = 90;

/// Gray face crop resampled to kNormSide x kNormSide.
class NormalizedImage {
 public:
  NormalizedImage() : pixels_(kNormSide * kNormSide, 0) {}
  explicit NormalizedImage(const RawImage& img) {
    if (!img.gray() || img.width != kNormSide || img.height != kNormSide)
      throw InvalidInput("NormalizedImage: expected a 90x90 gray image");
    pixels_ = img.pixels;
  }

  static constexpr std::size_t side() { return kNormSide; }
  std::uint8_t operator()(std::size_t r, std::size_t c) const { return pixels_[r * kNormSide + c]; }
  std::uint8_t& operator()(std::size_t r, std::size_t c) { return pixels_[r * kNormSide + c]; }
  const std::vector<std::uint8_t>& pixels() const noexcept { return pixels_; }

  friend bool operator==(const NormalizedImage&, const NormalizedImage&) = default;

 private:
  std::vector<std::uint8_t> pixels_;
};

namespace detail {

class PnmCursor {
 public:
  PnmCursor(std::string_view data, const std::string& name) : data_(data), name_(name) {}

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(name_, pos_, what); }

  void skip_space_and_comments() {
    while (pos_ < data_.size()) {
      const char ch = data_[pos_];
      if (ch == '#') {
        while (pos_ < data_.size() && data_[pos_] != '\n' && data_[pos_] != '\r') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(ch))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t read_uint(const char* field) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    std::size_t v = 0;
    while (pos_ < data_.size() && std::isdigit(static_cast<unsigned char>(data_[pos_]))) {
      v = v * 10 + static_cast<std::size_t>(data_[pos_] - '0');
      if (v > (1u << 24)) fail(std::string(field) + " too large");
      ++pos_;
    }
    if (pos_ == start) fail(std::string("expected ") + field);
    return v;
  }

  std::size_t pos_ = 0;
  std::string_view data_;
  std::string name_;
};

}  // namespace detail

/// Parses binary PGM (P5) or PPM (P6) with maxval 255.
inline RawImage parse_pnm(std::string_view data, const std::string& name = "<pnm>") {
  detail::PnmCursor cur(data, name);
  if (data.size() < 2 || data[0] != 'P' || (data[1] != '5' && data[1] != '6'))
    cur.fail("not a binary PGM/PPM (expected P5 or P6)");
  const int channels = data[1] == '5' ? 1 : 3;
  cur.pos_ = 2;
  const std::size_t w = cur.read_uint("width");
  const std::size_t h = cur.read_uint("height");
  const std::size_t maxval = cur.read_uint("maxval");
  if (w == 0 || h == 0) cur.fail("zero image dimension");
  if (maxval != 255) cur.fail("unsupported maxval " + std::to_string(maxval) + " (expected 255)");
  if (cur.pos_ >= data.size() || !std::isspace(static_cast<unsigned char>(data[cur.pos_])))
    cur.fail("expected whitespace after maxval");
  ++cur.pos_;
  const std::size_t need = w * h * static_cast<std::size_t>(channels);
  if (data.size() - cur.pos_ < need)
    cur.fail("truncated raster: need " + std::to_string(need) + " bytes, have " + std::to_string(data.size() - cur.pos_));
  RawImage img(w, h, channels);
  std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(cur.pos_), need, img.pixels.begin());
  return img;
}

inline RawImage read_pnm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidInput("cannot read " + path);
  const std::string data((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return parse_pnm(data, path);
}

inline std::string encode_pnm(const RawImage& img) {
  std::string out = (img.gray() ? "P5\n" : "P6\n") + std::to_string(img.width) + ' ' + std::to_string(img.height) + "\n255\n";
  out.append(img.pixels.begin(), img.pixels.end());
  return out;
}

inline void write_pnm(const std::string& path, const RawImage& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidInput("cannot write " + path);
  const std::string data = encode_pnm(img);
  os.write(data.data(), static_cast<std::streamsize>(data.size()));
}

/// BT.601 luma, round(0.299 R + 0.587 G + 0.114 B). Gray input is returned unchanged.
inline RawImage to_gray(const RawImage& img) {
  if (img.gray()) return img;
  RawImage out(img.width, img.height, 1);
  for (std::size_t r = 0; r < img.height; ++r)
    for (std::size_t c = 0; c < img.width; ++c) {
      const double y = 0.299 * img.at(r, c, 0) + 0.587 * img.at(r, c, 1) + 0.114 * img.at(r, c, 2);
      out.at(r, c) = static_cast<std::uint8_t>(std::clamp(std::lround(y), 0L, 255L));
    }
  return out;
}

/// Bilinear resize with half-pixel centres: source coordinate (i + 0.5) * scale - 0.5,
/// clamped at the borders.
inline RawImage resize_bilinear(const RawImage& img, std::size_t out_w, std::size_t out_h) {
  if (!img.gray()) throw InvalidInput("resize_bilinear: gray input required");
  if (out_w == 0 || out_h == 0) throw InvalidInput("resize_bilinear: zero output size");

  struct Tap {
    std::size_t i0, i1;
    double f;
  };
  const auto taps = [](std::size_t in, std::size_t out) {
    std::vector<Tap> t(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t i = 0; i < out; ++i) {
      const double s = (static_cast<double>(i) + 0.5) * scale - 0.5;
      double fl = std::floor(s);
      double f = s - fl;
      if (fl < 0) {
        fl = 0;
        f = 0;
      }
      if (fl >= static_cast<double>(in - 1)) {
        fl = static_cast<double>(in - 1);
        f = 0;
      }
      const auto i0 = static_cast<std::size_t>(fl);
      t[i] = {i0, std::min(i0 + 1, in - 1), f};
    }
    return t;
  };
  const auto tx = taps(img.width, out_w);
  const auto ty = taps(img.height, out_h);

  RawImage out(out_w, out_h, 1);
  for (std::size_t r = 0; r < out_h; ++r)
    for (std::size_t c = 0; c < out_w; ++c) {
      const double v00 = img.at(ty[r].i0, tx[c].i0), v01 = img.at(ty[r].i0, tx[c].i1);
      const double v10 = img.at(ty[r].i1, tx[c].i0), v11 = img.at(ty[r].i1, tx[c].i1);
      const double top = v00 + tx[c].f * (v01 - v00);
      const double bot = v10 + tx[c].f * (v11 - v10);
      const double v = top + ty[r].f * (bot - top);
      out.at(r, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  return out;
}

/// Face box as (x1, y1, x2, y2) in pixel units, top-left origin.
using Box = std::array<double, 4>;

/// Integer crop window: floor of each coordinate, far corner exclusive.
struct CropWindow {
  long x0, y0, x1, y1;
  long width() const { return x1 - x0; }
  long height() const { return y1 - y0; }
};

inline CropWindow crop_window(const Box& box) {
  for (double v : box)
    if (!std::isfinite(v)) throw InvalidInput("face box: non-finite coordinate");
  return {static_cast<long>(std::floor(box[0])), static_cast<long>(std::floor(box[1])),
          static_cast<long>(std::floor(box[2])), static_cast<long>(std::floor(box[3]))};
}

inline NormalizedImage crop_resize(const RawImage& img, const Box& box) {
  if (!img.gray()) throw InvalidInput("crop_resize: gray input required");
  const CropWindow w = crop_window(box);
  if (w.width() <= 0 || w.height() <= 0) throw InvalidInput("crop_resize: empty face box");
  if (w.x0 < 0 || w.y0 < 0 || w.x1 > static_cast<long>(img.width) || w.y1 > static_cast<long>(img.height))
    throw InvalidInput("crop_resize: face box outside the image");

  RawImage crop(static_cast<std::size_t>(w.width()), static_cast<std::size_t>(w.height()), 1);
  for (std::size_t r = 0; r < crop.height; ++r)
    for (std::size_t c = 0; c < crop.width; ++c)
      crop.at(r, c) = img.at(static_cast<std::size_t>(w.y0) + r, static_cast<std::size_t>(w.x0) + c);
  return NormalizedImage(resize_bilinear(crop, kNormSide, kNormSide));
}

}  // namespace qsvr
