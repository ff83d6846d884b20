#include <fstream>

#include "doctest.h"
#include "lfsal/image.hpp"
#include "lfsal/rng.hpp"
#include "testutil.hpp"

using lfsal::IoError;
using lfsal::Tensor;
using lfsal_test::TempDir;

TEST_SUITE("image") {

TEST_CASE("constant maps hit the exact byte values") {
  TempDir tmp("pgm");
  const std::string ones = (tmp.path() / "ones.pgm").string();
  const std::string half = (tmp.path() / "half.pgm").string();
  lfsal::write_pgm(ones, Tensor::ones({4, 6}));
  lfsal::write_pgm(half, Tensor::full({4, 6}, 0.5));

  std::ifstream raw(ones, std::ios::binary);
  std::string contents((std::istreambuf_iterator<char>(raw)),
                       std::istreambuf_iterator<char>());
  CHECK(contents.substr(0, 3) == "P5\n");
  CHECK(static_cast<unsigned char>(contents.back()) == 255);

  const Tensor h = lfsal::read_pgm(half);
  CHECK(h[0] == 128.0 / 255.0);  // 0.5 rounds half-up to byte 128
}

TEST_CASE("round trip stays within one quantization step") {
  TempDir tmp("pgm");
  lfsal::Rng rng(4);
  Tensor img({8, 8});
  for (std::int64_t i = 0; i < img.size(); ++i) img[i] = rng.uniform();
  const std::string path = (tmp.path() / "img.pgm").string();
  lfsal::write_pgm(path, img);
  const Tensor back = lfsal::read_pgm(path);
  REQUIRE(back.same_shape(img));
  for (std::int64_t i = 0; i < img.size(); ++i) {
    CHECK(std::abs(back[i] - img[i]) <= 1.0 / 255.0);
  }
}

TEST_CASE("a (1,h,w) image is squeezed on write") {
  TempDir tmp("pgm");
  const std::string path = (tmp.path() / "chw.pgm").string();
  lfsal::write_pgm(path, Tensor::full({1, 3, 5}, 0.25));
  const Tensor back = lfsal::read_pgm(path);
  CHECK(back.shape() == std::vector<int>{3, 5});
}

TEST_CASE("header comments are tolerated") {
  TempDir tmp("pgm");
  const std::string path = (tmp.path() / "c.pgm").string();
  std::ofstream out(path, std::ios::binary);
  out << "P5\n# a comment line\n2 2\n# another\n255\n";
  out.write("\x00\x40\x80\xff", 4);
  out.close();
  const Tensor img = lfsal::read_pgm(path);
  CHECK(img.at(0, 0) == 0.0);
  CHECK(img.at(1, 1) == 1.0);
}

TEST_CASE("malformed files raise errors naming the path") {
  TempDir tmp("pgm");
  const std::string missing = (tmp.path() / "nope.pgm").string();
  CHECK_THROWS_WITH_AS(lfsal::read_pgm(missing), doctest::Contains("nope.pgm"), IoError);

  const std::string bad_magic = (tmp.path() / "p2.pgm").string();
  {
    std::ofstream out(bad_magic);
    out << "P2\n2 2\n255\n0 1 2 3\n";
  }
  CHECK_THROWS_AS(lfsal::read_pgm(bad_magic), IoError);

  const std::string bad_maxval = (tmp.path() / "m.pgm").string();
  {
    std::ofstream out(bad_maxval, std::ios::binary);
    out << "P5\n2 2\n65535\n";
    out.write("\x00\x00\x00\x00\x00\x00\x00\x00", 8);
  }
  CHECK_THROWS_WITH_AS(lfsal::read_pgm(bad_maxval), doctest::Contains("65535"), IoError);

  const std::string truncated = (tmp.path() / "t.pgm").string();
  {
    std::ofstream out(truncated, std::ios::binary);
    out << "P5\n4 4\n255\n";
    out.write("\x01\x02\x03", 3);  // 13 bytes short
  }
  CHECK_THROWS_WITH_AS(lfsal::read_pgm(truncated), doctest::Contains("t.pgm"), IoError);
}

TEST_CASE("only 2d maps can be written") {
  TempDir tmp("pgm");
  CHECK_THROWS_AS(lfsal::write_pgm((tmp.path() / "x.pgm").string(), Tensor::ones({2, 3, 4})),
                  lfsal::ShapeError);
}

}  // TEST_SUITE
