#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "premir/encoding.hpp"
#include "premir/errors.hpp"

using namespace premir;

TEST(OneHot, AcguColumns) {
  auto m = one_hot_encode({"x", "ACGU"});
  EXPECT_EQ(m.width, 160u);
  EXPECT_EQ(m.valid_length, 4u);
  for (std::size_t col = 0; col < 4; ++col) {
    for (std::size_t row = 0; row < 4; ++row) EXPECT_EQ(m.at(row, col), row == col ? 1 : 0);
  }
  for (std::size_t col = 4; col < 160; ++col) {
    for (std::size_t row = 0; row < 4; ++row) EXPECT_EQ(m.at(row, col), 0);
  }
}

TEST(OneHot, WidthOne) {
  auto m = one_hot_encode({"x", "A"}, 1);
  EXPECT_EQ(m.valid_length, 1u);
  EXPECT_EQ(m.at(0, 0), 1);
  EXPECT_EQ(m.at(3, 0), 0);
}

TEST(OneHot, Saturated) {
  auto m = one_hot_encode({"x", std::string(160, 'A')});
  for (std::size_t col = 0; col < 160; ++col) {
    EXPECT_EQ(m.at(0, col), 1);
    EXPECT_EQ(m.at(1, col) + m.at(2, col) + m.at(3, col), 0);
  }
}

TEST(OneHot, TooLongRejected) {
  EXPECT_THROW(one_hot_encode({"x", "ACGUA"}, 4), DataError);
}

TEST(OneHot, SumAndDecodeProperty) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::string bases;
    const std::size_t len = 1 + rng() % 160;
    for (std::size_t i = 0; i < len; ++i) bases += "ACGU"[rng() % 4];
    auto m = one_hot_encode({"r", bases});
    std::size_t total = 0;
    for (auto v : m.values) total += v;
    EXPECT_EQ(total, len);
    EXPECT_EQ(decode(m), bases);
    auto t = to_tensor(m);
    EXPECT_EQ(t.shape, (Shape{4, 160}));
  }
}

TEST(OneHot, CacheRoundTrip) {
  std::vector<OneHotMatrix> ms = {one_hot_encode({"a", "ACGU"}), one_hot_encode({"b", "GGGAAACCC"})};
  std::stringstream buf;
  write_onehot_cache(buf, ms);
  EXPECT_EQ(buf.str().substr(0, 4), "PMOH");
  EXPECT_EQ(read_onehot_cache(buf), ms);
}

TEST(OneHot, CacheTruncatedRejected) {
  std::vector<OneHotMatrix> ms = {one_hot_encode({"a", "ACGU"})};
  std::stringstream buf;
  write_onehot_cache(buf, ms);
  std::string text = buf.str();
  std::stringstream cut(text.substr(0, text.size() / 2));
  EXPECT_THROW(read_onehot_cache(cut), DataError);
}
