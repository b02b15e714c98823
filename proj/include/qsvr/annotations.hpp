#pragma once

#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "qsvr/dense.hpp"
#include "qsvr/error.hpp"
#include "qsvr/image.hpp"

namespace qsvr {

/// Landmarks (x, y interleaved, pixels, top-left origin) and face box for one image.
struct FaceAnnotation {
  std::string image;
  Vector shape;  // 2L values
  Box box{};

  std::size_t landmarks() const noexcept { return shape.size() / 2; }
};

namespace detail {

struct CsvLine {
  std::size_t offset;  // byte offset of the line start
  std::vector<std::string_view> fields;
};

/// Splits on newlines and commas; no quoting. Blank lines are dropped.
inline std::vector<CsvLine> split_csv(std::string_view text) {
  std::vector<CsvLine> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) {
      CsvLine l{pos, {}};
      std::size_t f = 0;
      while (true) {
        const std::size_t comma = line.find(',', f);
        l.fields.push_back(line.substr(f, comma == std::string_view::npos ? std::string_view::npos : comma - f));
        if (comma == std::string_view::npos) break;
        f = comma + 1;
      }
      lines.push_back(std::move(l));
    }
    pos = end + 1;
  }
  return lines;
}

inline double parse_double(std::string_view s, const std::string& file, std::size_t offset) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw ParseError(file, offset, "not a number: '" + std::string(s) + "'");
  return v;
}

inline std::string read_text(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidInput("cannot read " + path);
  return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

}  // namespace detail

inline std::string annotation_header(std::size_t landmarks) {
  std::string h = "image";
  for (std::size_t k = 1; k <= landmarks; ++k) h += ",lx" + std::to_string(k) + ",ly" + std::to_string(k);
  return h + ",bx1,by1,bx2,by2";
}

inline void validate_annotation(const FaceAnnotation& a) {
  if (a.shape.empty() || a.shape.size() % 2 != 0) throw InvalidInput("annotation: shape length must be 2L > 0");
  if (!(a.box[0] <= a.box[2] && a.box[1] <= a.box[3]))
    throw InvalidInput("annotation: face box corners out of order for " + a.image);
}

/// Parses `image,lx1,ly1,...,lxL,lyL,bx1,by1,bx2,by2`; L is taken from the header.
inline std::vector<FaceAnnotation> parse_annotations(std::string_view text, const std::string& name = "<csv>") {
  const auto lines = detail::split_csv(text);
  if (lines.empty()) throw ParseError(name, 0, "empty annotation file");
  const auto& head = lines.front();
  if (head.fields.size() < 7 || (head.fields.size() - 5) % 2 != 0)
    throw ParseError(name, head.offset, "unexpected header column count");
  const std::size_t landmarks = (head.fields.size() - 5) / 2;
  std::string joined;
  for (std::size_t i = 0; i < head.fields.size(); ++i) joined += (i ? "," : "") + std::string(head.fields[i]);
  if (joined != annotation_header(landmarks))
    throw ParseError(name, head.offset, "expected header '" + annotation_header(landmarks) + "'");

  std::vector<FaceAnnotation> out;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto& l = lines[li];
    if (l.fields.size() != head.fields.size())
      throw ParseError(name, l.offset,
                       "expected " + std::to_string(head.fields.size()) + " fields, got " + std::to_string(l.fields.size()));
    FaceAnnotation a;
    a.image = std::string(l.fields[0]);
    if (a.image.empty()) throw ParseError(name, l.offset, "empty image name");
    for (std::size_t k = 0; k < 2 * landmarks; ++k) a.shape.push_back(detail::parse_double(l.fields[1 + k], name, l.offset));
    for (std::size_t k = 0; k < 4; ++k) a.box[k] = detail::parse_double(l.fields[1 + 2 * landmarks + k], name, l.offset);
    try {
      validate_annotation(a);
    } catch (const InvalidInput& e) {
      throw ParseError(name, l.offset, e.what());
    }
    for (const auto& prev : out)
      if (prev.image == a.image) throw ParseError(name, l.offset, "duplicate row for " + a.image);
    out.push_back(std::move(a));
  }
  return out;
}

inline std::vector<FaceAnnotation> read_annotations(const std::string& path) {
  return parse_annotations(detail::read_text(path), path);
}

inline std::string format_number(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline void write_annotations(const std::string& path, const std::vector<FaceAnnotation>& rows) {
  if (rows.empty()) throw InvalidInput("write_annotations: no rows");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidInput("cannot write " + path);
  os << annotation_header(rows.front().landmarks()) << '\n';
  for (const auto& a : rows) {
    os << a.image;
    for (double v : a.shape) os << ',' << format_number(v);
    for (double v : a.box) os << ',' << format_number(v);
    os << '\n';
  }
}

}  // namespace qsvr
