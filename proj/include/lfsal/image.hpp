#pragma once

#include <string>

#include "lfsal/tensor.hpp"

namespace lfsal {

// Writes a (h,w) or (1,h,w) map as binary PGM (P5, maxval 255). Values are
// clamped to [0,1] and scaled to [0,255], rounding half up.
void write_pgm(const std::string& path, const Tensor& img);

// Reads a binary PGM (P5, maxval 255) into a (h,w) tensor with values in
// [0,1] (byte/255). '#' comments in the header are tolerated. Malformed or
// truncated files raise IoError naming the path.
Tensor read_pgm(const std::string& path);

}  // namespace lfsal
