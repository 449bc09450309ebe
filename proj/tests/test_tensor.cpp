#include <doctest.h>

#include <sstream>

#include "helpers.hpp"
#include "tinydl/errors.hpp"
#include "tinydl/tensor.hpp"

using namespace tinydl;
using tinydl::test::random_tensor;

TEST_SUITE("tensor") {

TEST_CASE("matmul of 2x2 matrices") {
  const Tensor a = Tensor::matrix({{1, 2}, {3, 4}});
  const Tensor b = Tensor::matrix({{5, 6}, {7, 8}});
  CHECK(matmul(a, b).identical(Tensor::matrix({{19, 22}, {43, 50}})));
}

TEST_CASE("matmul rejects inner extent mismatch") {
  CHECK_THROWS_AS(matmul(Tensor({2, 3}), Tensor({2, 3})), DimensionError);
}

TEST_CASE("affine") {
  const Tensor w = Tensor::matrix({{1, 1}, {2, 2}});
  CHECK(affine(w, Tensor::vector({1, 1}), Tensor::vector({0, 1})).identical(Tensor::vector({2, 5})));
  CHECK_THROWS_AS(affine(w, Tensor::vector({1, 1, 1}), Tensor::vector({0, 1})), DimensionError);
  CHECK_THROWS_AS(affine(w, Tensor::vector({1, 1}), Tensor::vector({0})), DimensionError);
}

TEST_CASE("flatten of an image") {
  const Tensor img({3, 227, 227});
  CHECK(flatten(img).shape() == Shape{154587});
  CHECK(flatten(Tensor({2, 3})).shape() == Shape{6});
}

TEST_CASE("reshape and flatten are exact inverses") {
  Rng rng(3);
  const Tensor t = random_tensor({2, 3, 4}, rng);
  CHECK(reshape(flatten(t), t.shape()).identical(t));
  const Tensor f = flatten(t);
  CHECK(flatten(reshape(f, {4, 6})).identical(f));
  CHECK_THROWS_AS(reshape(t, {5, 5}), DimensionError);
}

TEST_CASE("zero padding") {
  const Tensor one({1, 1, 1}, 7.0);
  const Tensor p = zero_pad2d(one, 1);
  CHECK(p.shape() == Shape{1, 3, 3});
  for (std::size_t h = 0; h < 3; ++h)
    for (std::size_t w = 0; w < 3; ++w) CHECK(p.at(0, h, w) == (h == 1 && w == 1 ? 7.0 : 0.0));
  CHECK(zero_pad2d(Tensor({3, 5, 5}), 1).shape() == Shape{3, 7, 7});
  Rng rng(4);
  const Tensor t = random_tensor({2, 4, 3}, rng);
  CHECK(zero_pad2d(t, 0).identical(t));
}

TEST_CASE("zero padding preserves the sum exactly") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor t = random_tensor({1 + rng.below(3), 1 + rng.below(6), 1 + rng.below(6)}, rng);
    const std::size_t p = rng.below(3);
    const Tensor padded = zero_pad2d(t, p);
    CHECK(sum(padded) == sum(t));
    for (std::size_t c = 0; c < t.extent(0); ++c)
      for (std::size_t h = 0; h < t.extent(1); ++h)
        for (std::size_t w = 0; w < t.extent(2); ++w) CHECK(padded.at(c, h + p, w + p) == t.at(c, h, w));
  }
}

TEST_CASE("elementwise operations") {
  CHECK(mul(Tensor::vector({1, 2}), Tensor::vector({3, 4})).identical(Tensor::vector({3, 8})));
  Rng rng(6);
  const Tensor t = random_tensor({3, 2}, rng);
  CHECK(add(t, Tensor({3, 2})).identical(t));
  CHECK(tinydl::test::all_zero(scale(t, 0.0)));
  CHECK(sub(t, t).identical(Tensor({3, 2})));
  CHECK_THROWS_AS(add(t, Tensor({2, 3})), DimensionError);
  CHECK_THROWS_AS(mul(t, Tensor({6})), DimensionError);
}

TEST_CASE("identity matrix is exact") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 1 + rng.below(6), n = 1 + rng.below(6);
    const Tensor a = random_tensor({m, n}, rng);
    CHECK(matmul(Tensor::identity(m), a).identical(a));
    CHECK(matmul(a, Tensor::identity(n)).identical(a));
  }
}

TEST_CASE("matmul distributes over addition") {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 1 + rng.below(8), k = 1 + rng.below(8), n = 1 + rng.below(8);
    const Tensor a = random_tensor({m, k}, rng);
    const Tensor b = random_tensor({k, n}, rng);
    const Tensor c = random_tensor({k, n}, rng);
    CHECK(max_abs_diff(matmul(a, add(b, c)), add(matmul(a, b), matmul(a, c))) <= 1e-12);
  }
}

TEST_CASE("SGT1 round trip is bitwise") {
  Rng rng(9);
  const Tensor t = random_tensor({2, 3, 5}, rng, -1e3, 1e3);
  std::stringstream buf;
  write_sgt1(buf, t);
  const std::string bytes = buf.str();
  CHECK(bytes.substr(0, 4) == "SGT1");
  CHECK(bytes.size() == 4 + 4 + 3 * 4 + 30 * 8);
  CHECK(read_sgt1(buf).identical(t));
}

TEST_CASE("SGT1 rejects bad magic and truncation") {
  std::stringstream bad("XXXX0000");
  CHECK_THROWS_AS(read_sgt1(bad), LoadError);
  std::stringstream full;
  write_sgt1(full, Tensor({4}, 1.0));
  std::string cut = full.str();
  cut.resize(cut.size() - 3);
  std::stringstream truncated(cut);
  try {
    read_sgt1(truncated);
    FAIL("expected LoadError");
  } catch (const LoadError& e) {
    CHECK(e.kind() == LoadError::Kind::truncated);
  }
}

TEST_CASE("stack and unstack") {
  const Tensor a = Tensor::vector({1, 2});
  const Tensor b = Tensor::vector({3, 4});
  const Tensor s = stack(std::vector<Tensor>{a, b});
  CHECK(s.shape() == Shape{2, 2});
  CHECK(unstack_one(s, 1).identical(b));
  CHECK_THROWS_AS(stack(std::vector<Tensor>{a, Tensor({3})}), DimensionError);
}

TEST_CASE("tensors never have zero extents") {
  CHECK_THROWS(Tensor(Shape{0}));
  CHECK_THROWS(Tensor(Shape{}));
}

}
