#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qsvr/annotations.hpp"
#include "qsvr/dense.hpp"
#include "qsvr/error.hpp"
#include "qsvr/image.hpp"
#include "qsvr/lbp.hpp"

namespace qsvr {

/// Maps a raw coordinate into the normalised frame: (v - origin) * 90 / extent.
inline double scale_coord(double v, double origin, double extent) {
  if (!(extent > 0.0)) throw InvalidInput("scale_coord: extent must be > 0");
  return (v - origin) * static_cast<double>(kNormSide) / extent;
}

inline double rescale_coord(double s, double origin, double extent) {
  if (!(extent > 0.0)) throw InvalidInput("rescale_coord: extent must be > 0");
  return s * extent / static_cast<double>(kNormSide) + origin;
}

/// Scaled landmark coordinates s_0..s_{2L-1} in the crop frame of the face box.
inline Vector scale_shape(const Vector& shape, const Box& box) {
  const CropWindow w = crop_window(box);
  if (w.width() <= 0 || w.height() <= 0) throw InvalidInput("scale_shape: empty face box");
  Vector s(shape.size());
  for (std::size_t i = 0; i < shape.size(); ++i)
    s[i] = i % 2 == 0 ? scale_coord(shape[i], static_cast<double>(w.x0), static_cast<double>(w.width()))
                      : scale_coord(shape[i], static_cast<double>(w.y0), static_cast<double>(w.height()));
  return s;
}

inline Vector rescale_shape(const Vector& s, const Box& box) {
  const CropWindow w = crop_window(box);
  if (w.width() <= 0 || w.height() <= 0) throw InvalidInput("rescale_shape: empty face box");
  Vector raw(s.size());
  for (std::size_t i = 0; i < s.size(); ++i)
    raw[i] = i % 2 == 0 ? rescale_coord(s[i], static_cast<double>(w.x0), static_cast<double>(w.width()))
                        : rescale_coord(s[i], static_cast<double>(w.y0), static_cast<double>(w.height()));
  return raw;
}

/// One preprocessed image: raw annotation, scaled targets and full features.
struct FeatureRow {
  std::string image;
  Box box{};
  Vector shape;
  Vector targets;
  Vector features;
};

struct FeatureStore {
  std::size_t landmarks = 0;
  std::size_t feature_count = kFeatureCount;
  std::vector<FeatureRow> rows;

  std::size_t subtasks() const noexcept { return 2 * landmarks; }

  std::vector<Vector> feature_matrix() const {
    std::vector<Vector> m;
    m.reserve(rows.size());
    for (const auto& r : rows) m.push_back(r.features);
    return m;
  }

  Vector target_column(std::size_t ell) const {
    detail::require(ell < subtasks(), "FeatureStore: sub-task index out of range");
    Vector v;
    v.reserve(rows.size());
    for (const auto& r : rows) v.push_back(r.targets[ell]);
    return v;
  }

  FeatureStore subset(std::span<const std::size_t> idx) const {
    FeatureStore s{landmarks, feature_count, {}};
    for (std::size_t i : idx) {
      detail::require(i < rows.size(), "FeatureStore::subset: index out of range");
      s.rows.push_back(rows[i]);
    }
    return s;
  }
};

/// normalise then extract: gray, crop to the face box, resize, LBP histogram.
inline FeatureRow preprocess_image(const RawImage& img, const FaceAnnotation& a) {
  validate_annotation(a);
  FeatureRow row;
  row.image = a.image;
  row.box = a.box;
  row.shape = a.shape;
  row.targets = scale_shape(a.shape, a.box);
  row.features = lbp_features(crop_resize(to_gray(img), a.box)).values;
  return row;
}

inline std::string feature_store_header(std::size_t landmarks, std::size_t features) {
  std::string h = "image,bx1,by1,bx2,by2";
  for (std::size_t k = 1; k <= landmarks; ++k) h += ",lx" + std::to_string(k) + ",ly" + std::to_string(k);
  for (std::size_t l = 0; l < 2 * landmarks; ++l) h += ",s" + std::to_string(l);
  for (std::size_t f = 0; f < features; ++f) h += ",f" + std::to_string(f);
  return h;
}

inline std::string format_feature_store(const FeatureStore& store) {
  std::string out = feature_store_header(store.landmarks, store.feature_count);
  out += '\n';
  for (const auto& r : store.rows) {
    out += r.image;
    for (double v : r.box) out += ',' + format_number(v);
    for (double v : r.shape) out += ',' + format_number(v);
    for (double v : r.targets) out += ',' + format_number(v);
    for (double v : r.features) out += ',' + format_number(v);
    out += '\n';
  }
  return out;
}

inline void write_feature_store(const std::string& path, const FeatureStore& store) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidInput("cannot write " + path);
  os << format_feature_store(store);
}

inline FeatureStore parse_feature_store(std::string_view text, const std::string& name = "<features>") {
  const auto lines = detail::split_csv(text);
  if (lines.empty()) throw ParseError(name, 0, "empty feature store");
  const auto& head = lines.front();
  std::size_t landmarks = 0;
  for (const auto f : head.fields)
    if (f.starts_with("lx")) ++landmarks;
  std::size_t features = 0;
  for (const auto f : head.fields)
    if (f.starts_with("f")) ++features;
  std::string joined;
  for (std::size_t i = 0; i < head.fields.size(); ++i) joined += (i ? "," : "") + std::string(head.fields[i]);
  if (landmarks == 0 || features == 0 || joined != feature_store_header(landmarks, features))
    throw ParseError(name, head.offset, "unrecognised feature store header");

  FeatureStore store{landmarks, features, {}};
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto& l = lines[li];
    if (l.fields.size() != head.fields.size()) throw ParseError(name, l.offset, "wrong field count");
    FeatureRow r;
    r.image = std::string(l.fields[0]);
    std::size_t k = 1;
    const auto num = [&] { return detail::parse_double(l.fields[k++], name, l.offset); };
    for (auto& v : r.box) v = num();
    for (std::size_t i = 0; i < 2 * landmarks; ++i) r.shape.push_back(num());
    for (std::size_t i = 0; i < 2 * landmarks; ++i) r.targets.push_back(num());
    for (std::size_t i = 0; i < features; ++i) r.features.push_back(num());
    store.rows.push_back(std::move(r));
  }
  return store;
}

inline FeatureStore read_feature_store(const std::string& path) {
  return parse_feature_store(detail::read_text(path), path);
}

/// 64-bit FNV-1a, used for artifact checksums and provenance tags.
inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace qsvr
