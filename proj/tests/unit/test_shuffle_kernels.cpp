#include <gtest/gtest.h>

#include <map>
#include <random>

#include "premir/kernels.hpp"
#include "premir/shuffle.hpp"

using namespace premir;

namespace {

std::map<std::string, int> dinucleotides(const std::string& s) {
  std::map<std::string, int> m;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) ++m[s.substr(i, 2)];
  return m;
}

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

}  // namespace

TEST(Shuffle, PreservesDinucleotidesAndEnds) {
  std::mt19937_64 gen(1);
  for (int trial = 0; trial < 300; ++trial) {
    std::string s;
    const std::size_t len = 1 + gen() % 120;
    for (std::size_t i = 0; i < len; ++i) s += "ACGU"[gen() % 4];
    Rng rng(gen());
    const std::string t = dinucleotide_shuffle(s, rng);
    ASSERT_EQ(t.size(), s.size());
    EXPECT_EQ(t.front(), s.front());
    EXPECT_EQ(t.back(), s.back());
    EXPECT_EQ(dinucleotides(t), dinucleotides(s)) << s << " -> " << t;
  }
}

TEST(Shuffle, ActuallyPermutesAndIsSeeded) {
  const std::string s = "ACGUACGGAUCCGAUUAGCAGCUAGCUAGGAUCGAUCGAU";
  Rng a(5), b(5);
  EXPECT_EQ(dinucleotide_shuffle(s, a), dinucleotide_shuffle(s, b));
  std::set<std::string> seen;
  Rng rng(6);
  for (int k = 0; k < 50; ++k) seen.insert(dinucleotide_shuffle(s, rng));
  EXPECT_GT(seen.size(), 10u);
}

TEST(Kernels, ConvSerialEqualsParallel) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    kernels::ConvShape s{1 + rng() % 12, 20 + rng() % 150, 1 + rng() % 20, 1 + rng() % 18, 1 + rng() % 5};
    auto in = random_vector(rng, s.channels * s.length);
    auto w = random_vector(rng, s.filters * s.channels * s.window);
    auto b = random_vector(rng, s.filters);
    std::vector<double> o1(s.filters * s.out_length()), o2(o1.size());
    kernels::conv1d_forward_serial(s, in, w, b, o1);
    kernels::conv1d_forward(s, in, w, b, o2);
    EXPECT_EQ(o1, o2);
  }
}

TEST(Kernels, DenseSerialEqualsParallel) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t rows = 1 + rng() % 100, cols = 1 + rng() % 700;
    auto x = random_vector(rng, cols);
    auto w = random_vector(rng, rows * cols);
    auto b = random_vector(rng, rows);
    std::vector<double> o1(rows), o2(rows);
    kernels::dense_forward_serial(rows, cols, x, w, b, o1);
    kernels::dense_forward(rows, cols, x, w, b, o2);
    EXPECT_EQ(o1, o2);
  }
}

TEST(Kernels, AssignNearestSerialEqualsParallel) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + rng() % 500, k = 1 + rng() % 8, dim = 1 + rng() % 20;
    auto pts = random_vector(rng, n * dim);
    auto cen = random_vector(rng, k * dim);
    std::vector<std::size_t> l1(n), l2(n);
    std::vector<double> d1(n), d2(n);
    const double s1 = kernels::assign_nearest_serial(n, k, dim, pts, cen, l1, d1);
    const double s2 = kernels::assign_nearest(n, k, dim, pts, cen, l2, d2);
    EXPECT_EQ(s1, s2);
    EXPECT_EQ(l1, l2);
    EXPECT_EQ(d1, d2);
  }
}

TEST(Kernels, ConvMatchesDefinition) {
  kernels::ConvShape s{2, 10, 3, 4, 2};
  std::mt19937_64 rng(5);
  auto in = random_vector(rng, 20);
  auto w = random_vector(rng, 24);
  auto b = random_vector(rng, 3);
  std::vector<double> out(3 * s.out_length());
  kernels::conv1d_forward(s, in, w, b, out);
  for (std::size_t f = 0; f < 3; ++f) {
    for (std::size_t t = 0; t < s.out_length(); ++t) {
      double acc = b[f];
      for (std::size_t c = 0; c < 2; ++c) {
        for (std::size_t k = 0; k < 4; ++k) acc += w[(f * 2 + c) * 4 + k] * in[c * 10 + t * 2 + k];
      }
      EXPECT_NEAR(out[f * s.out_length() + t], acc, 1e-14);
    }
  }
}
