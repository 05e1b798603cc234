#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "ijscc/errors.hpp"
#include "ijscc/tensor.hpp"

namespace ijscc {

namespace detail {

// Reads one whitespace-delimited token, skipping '#' comment lines.
inline std::string pnm_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (!std::isspace(c)) {
      tok.push_back(static_cast<char>(c));
      while ((c = in.peek()) != EOF && !std::isspace(c)) {
        tok.push_back(static_cast<char>(in.get()));
      }
      return tok;
    }
  }
  throw ParseError("unexpected end of PNM header");
}

inline int pnm_int(std::istream& in) {
  const std::string tok = pnm_token(in);
  for (char ch : tok)
    if (!std::isdigit(static_cast<unsigned char>(ch)))
      throw ParseError("malformed PNM header token '" + tok + "'");
  return std::stoi(tok);
}

}  // namespace detail

// Binary PPM (P6) or PGM (P5), 8-bit only. Returns a channel-major tensor
// with values v/255 in [0,1]; grayscale gives C=1.
inline Var load_image(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open image file " + path);
  const std::string magic = detail::pnm_token(f);
  int channels;
  if (magic == "P6")
    channels = 3;
  else if (magic == "P5")
    channels = 1;
  else
    throw ParseError("unsupported image format '" + magic + "' (need P5/P6)");
  const int w = detail::pnm_int(f);
  const int h = detail::pnm_int(f);
  const int maxval = detail::pnm_int(f);
  if (w < 1 || h < 1) throw ParseError("bad PNM dimensions");
  if (maxval != 255) throw ParseError("only maxval 255 is supported");
  f.get();  // single whitespace after maxval

  const std::size_t npix = static_cast<std::size_t>(h) * w;
  std::vector<std::uint8_t> raw(npix * channels);
  f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(f.gcount()) != raw.size())
    throw ParseError("PNM pixel data truncated");

  auto t = Tensor::make({channels, h, w});
  // Interleaved file order -> channel-major tensor.
  for (std::size_t p = 0; p < npix; ++p)
    for (int c = 0; c < channels; ++c)
      t->data[c * npix + p] = raw[p * channels + c] / 255.0;
  return t;
}

// Writes P6 for C=3 and P5 for C=1, rounding clamped [0,1] values to 8 bits.
inline void save_image(const std::string& path, const Var& img) {
  const int channels = img->shape.c;
  if (channels != 1 && channels != 3)
    throw ConfigError("save_image: only 1- or 3-channel images");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open " + path + " for writing");
  f << (channels == 3 ? "P6" : "P5") << "\n"
    << img->shape.w << " " << img->shape.h << "\n255\n";
  const std::size_t npix = static_cast<std::size_t>(img->shape.h) * img->shape.w;
  std::vector<std::uint8_t> raw(npix * channels);
  for (std::size_t p = 0; p < npix; ++p)
    for (int c = 0; c < channels; ++c) {
      const double v = std::clamp(img->data[c * npix + p], 0.0, 1.0);
      raw[p * channels + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  f.write(reinterpret_cast<const char*>(raw.data()),
          static_cast<std::streamsize>(raw.size()));
}

// Replicate-pads on the right/bottom to the requested dims.
inline Var replicate_pad(const Var& img, int new_h, int new_w) {
  if (new_h < img->shape.h || new_w < img->shape.w)
    throw ShapeError("replicate_pad: target smaller than source");
  auto out = Tensor::make({img->shape.c, new_h, new_w});
  for (int c = 0; c < img->shape.c; ++c)
    for (int y = 0; y < new_h; ++y)
      for (int x = 0; x < new_w; ++x)
        out->at(c, y, x) = img->at(c, std::min(y, img->shape.h - 1),
                                   std::min(x, img->shape.w - 1));
  return out;
}

inline Var crop(const Var& img, int h, int w) {
  if (h > img->shape.h || w > img->shape.w)
    throw ShapeError("crop: target larger than source");
  auto out = Tensor::make({img->shape.c, h, w});
  for (int c = 0; c < img->shape.c; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out->at(c, y, x) = img->at(c, y, x);
  return out;
}

inline Var clamp01(const Var& img) {
  auto out = Tensor::make(img->shape);
  for (std::size_t i = 0; i < img->data.size(); ++i)
    out->data[i] = std::clamp(img->data[i], 0.0, 1.0);
  return out;
}

}  // namespace ijscc
