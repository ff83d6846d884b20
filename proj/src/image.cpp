#include "lfsal/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <vector>

namespace lfsal {

namespace {

// Reads the next header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      c = in.get();
    } else {
      break;
    }
  }
  while (c != EOF && !std::isspace(c)) {
    tok.push_back(static_cast<char>(c));
    c = in.get();
  }
  return tok;
}

}  // namespace

void write_pgm(const std::string& path, const Tensor& img) {
  const Tensor* m = &img;
  Tensor squeezed;
  if (img.ndim() == 3 && img.dim(0) == 1) {
    squeezed = Tensor::from({img.dim(1), img.dim(2)},
                            std::vector<double>(img.data(), img.data() + img.size()));
    m = &squeezed;
  }
  if (m->ndim() != 2) {
    throw ShapeError("pgm image must be (h,w) or (1,h,w), got " + img.shape_string());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "P5\n" << m->dim(1) << ' ' << m->dim(0) << "\n255\n";
  std::vector<unsigned char> bytes(static_cast<std::size_t>(m->size()));
  for (std::int64_t i = 0; i < m->size(); ++i) {
    const double v = std::clamp((*m)[i], 0.0, 1.0);
    bytes[static_cast<std::size_t>(i)] = static_cast<unsigned char>(std::floor(v * 255.0 + 0.5));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing image '" + path + "'");
}

Tensor read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image '" + path + "'");
  if (next_token(in) != "P5") throw IoError("'" + path + "' is not a binary PGM (P5)");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(next_token(in));
    h = std::stoi(next_token(in));
    maxval = std::stoi(next_token(in));
  } catch (const std::exception&) {
    throw IoError("malformed PGM header in '" + path + "'");
  }
  if (w <= 0 || h <= 0) throw IoError("bad dimensions in PGM '" + path + "'");
  if (maxval != 255) {
    throw IoError("unsupported maxval " + std::to_string(maxval) + " in '" + path +
                  "' (expected 255)");
  }
  std::vector<unsigned char> bytes(static_cast<std::size_t>(w) * h);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw IoError("truncated PGM payload in '" + path + "'");
  }
  Tensor img({h, w});
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    img[static_cast<std::int64_t>(i)] = bytes[i] / 255.0;
  }
  return img;
}

}  // namespace lfsal
