// Copyright 2026 The MSDNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "msdnet/errors.hpp"
#include "msdnet/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

namespace msdnet {

namespace {

struct PnmHeader
{
  Index       width = 0;
  Index       height = 0;
  std::size_t payload = 0; // offset of the first pixel byte
};

bool is_space(std::uint8_t c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

class HeaderReader
{
public:
  explicit HeaderReader(std::span<std::uint8_t const> bytes)
    : bytes_(bytes)
  {
  }

  void skip_space_and_comments()
  {
    while (pos_ < bytes_.size()) {
      if (is_space(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  Index number(char const *field)
  {
    skip_space_and_comments();
    std::size_t const start = pos_;
    Index             value = 0;
    while (pos_ < bytes_.size() && bytes_[pos_] >= '0' && bytes_[pos_] <= '9') {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > (Index{1} << 30)) throw ParseError(std::string("PNM ") + field + " too large", start);
      ++pos_;
    }
    if (pos_ == start) throw ParseError(std::string("PNM header: expected ") + field, pos_);
    return value;
  }

  std::size_t pos() const { return pos_; }
  void        advance() { ++pos_; }
  bool        at_end() const { return pos_ >= bytes_.size(); }
  std::uint8_t peek() const { return bytes_[pos_]; }

private:
  std::span<std::uint8_t const> bytes_;
  std::size_t                   pos_ = 0;
};

PnmHeader parse_header(std::span<std::uint8_t const> bytes, char kind, Index channels)
{
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != static_cast<std::uint8_t>(kind)) {
    throw ParseError(std::string("expected binary PNM magic 'P") + kind + "'", 0);
  }
  HeaderReader reader(bytes.subspan(0));
  reader.advance();
  reader.advance();
  PnmHeader h;
  h.width = reader.number("width");
  h.height = reader.number("height");
  reader.skip_space_and_comments();
  std::size_t const maxval_at = reader.pos();
  Index const       maxval = reader.number("maxval");
  if (maxval != 255) throw ParseError("PNM maxval must be 255, got " + std::to_string(maxval), maxval_at);
  if (reader.at_end() || !is_space(reader.peek())) {
    throw ParseError("PNM header must end with a single whitespace byte", reader.pos());
  }
  reader.advance();
  h.payload = reader.pos();
  if (h.width <= 0 || h.height <= 0) throw ParseError("PNM image has zero extent", h.payload);
  std::size_t const need = static_cast<std::size_t>(h.width * h.height * channels);
  if (bytes.size() - h.payload < need) {
    throw ParseError("truncated PNM payload: expected " + std::to_string(need) + " bytes, found " +
                       std::to_string(bytes.size() - h.payload),
                     bytes.size());
  }
  return h;
}

std::vector<std::uint8_t> header_bytes(char kind, Index w, Index h)
{
  std::string const s = std::string("P") + kind + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  return {s.begin(), s.end()};
}

std::uint8_t to_byte(Scalar v)
{
  Scalar const c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

} // namespace

Tensor parse_ppm(std::span<std::uint8_t const> bytes)
{
  PnmHeader const h = parse_header(bytes, '6', 3);
  Index const     plane = h.width * h.height;
  Vector          v(3 * plane);
  for (Index p = 0; p < plane; ++p) {
    for (Index c = 0; c < 3; ++c) v[c * plane + p] = bytes[h.payload + static_cast<std::size_t>(3 * p + c)] / 255.0;
  }
  return Tensor({3, h.height, h.width}, std::move(v));
}

Tensor parse_mask_pgm(std::span<std::uint8_t const> bytes)
{
  PnmHeader const h = parse_header(bytes, '5', 1);
  Index const     plane = h.width * h.height;
  Vector          v(plane);
  for (Index p = 0; p < plane; ++p) v[p] = bytes[h.payload + static_cast<std::size_t>(p)] >= 128 ? 1.0 : 0.0;
  return Tensor({1, h.height, h.width}, std::move(v));
}

std::vector<std::uint8_t> encode_ppm(Tensor const &image)
{
  if (image.rank() != 3 || image.dim(0) != 3) throw DimensionError("PPM image must be [3,H,W]");
  Index const h = image.dim(1), w = image.dim(2), plane = h * w;
  auto        out = header_bytes('6', w, h);
  out.reserve(out.size() + static_cast<std::size_t>(3 * plane));
  for (Index p = 0; p < plane; ++p) {
    for (Index c = 0; c < 3; ++c) out.push_back(to_byte(image.values()[c * plane + p]));
  }
  return out;
}

std::vector<std::uint8_t> encode_mask_pgm(Tensor const &mask)
{
  if (mask.rank() != 3 || mask.dim(0) != 1) throw DimensionError("PGM mask must be [1,H,W]");
  Index const h = mask.dim(1), w = mask.dim(2);
  auto        out = header_bytes('5', w, h);
  for (Index p = 0; p < h * w; ++p) out.push_back(mask.values()[p] != 0.0 ? 255 : 0);
  return out;
}

std::vector<std::uint8_t> read_file(std::filesystem::path const &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(std::filesystem::path const &path, std::span<std::uint8_t const> bytes)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<char const *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

namespace {

template <class Parse>
Tensor parse_file(std::filesystem::path const &path, Parse parse)
{
  auto const bytes = read_file(path);
  try {
    return parse(bytes);
  } catch (ParseError const &e) {
    throw ParseError(path.string() + ": " + e.detail(), e.offset());
  }
}

} // namespace

Tensor read_image_ppm(std::filesystem::path const &path) { return parse_file(path, parse_ppm); }
Tensor read_mask_pgm(std::filesystem::path const &path) { return parse_file(path, parse_mask_pgm); }

void write_image_ppm(std::filesystem::path const &path, Tensor const &image) { write_file(path, encode_ppm(image)); }
void write_mask_pgm(std::filesystem::path const &path, Tensor const &mask) { write_file(path, encode_mask_pgm(mask)); }

Tensor resize_bilinear(Tensor const &image, Index out_h, Index out_w)
{
  if (image.rank() != 3) throw DimensionError("resize_bilinear: expected [C,H,W]");
  Index const c = image.dim(0), h = image.dim(1), w = image.dim(2);
  if (h == out_h && w == out_w) return image;
  auto source = [](Index o, Index in, Index out, Index &i0, Index &i1, Scalar &frac) {
    Scalar s = (static_cast<Scalar>(o) + 0.5) * static_cast<Scalar>(in) / static_cast<Scalar>(out) - 0.5;
    s = std::clamp(s, 0.0, static_cast<Scalar>(in - 1));
    i0 = static_cast<Index>(std::floor(s));
    i1 = std::min(i0 + 1, in - 1);
    frac = s - static_cast<Scalar>(i0);
  };
  Vector v(c * out_h * out_w);
  for (Index y = 0; y < out_h; ++y) {
    Index  y0, y1;
    Scalar fy;
    source(y, h, out_h, y0, y1, fy);
    for (Index x = 0; x < out_w; ++x) {
      Index  x0, x1;
      Scalar fx;
      source(x, w, out_w, x0, x1, fx);
      for (Index k = 0; k < c; ++k) {
        Scalar const *p = image.values().data() + k * h * w;
        Scalar const  top = (1 - fx) * p[y0 * w + x0] + fx * p[y0 * w + x1];
        Scalar const  bot = (1 - fx) * p[y1 * w + x0] + fx * p[y1 * w + x1];
        v[(k * out_h + y) * out_w + x] = (1 - fy) * top + fy * bot;
      }
    }
  }
  return Tensor({c, out_h, out_w}, std::move(v));
}

Tensor resize_nearest(Tensor const &mask, Index out_h, Index out_w)
{
  if (mask.rank() != 3) throw DimensionError("resize_nearest: expected [C,H,W]");
  Index const c = mask.dim(0), h = mask.dim(1), w = mask.dim(2);
  if (h == out_h && w == out_w) return mask;
  Vector v(c * out_h * out_w);
  for (Index y = 0; y < out_h; ++y) {
    Index const sy = std::min(h - 1, static_cast<Index>((static_cast<Scalar>(y) + 0.5) * h / out_h));
    for (Index x = 0; x < out_w; ++x) {
      Index const sx = std::min(w - 1, static_cast<Index>((static_cast<Scalar>(x) + 0.5) * w / out_w));
      for (Index k = 0; k < c; ++k) v[(k * out_h + y) * out_w + x] = mask.values()[(k * h + sy) * w + sx];
    }
  }
  return Tensor({c, out_h, out_w}, std::move(v));
}

} // namespace msdnet
