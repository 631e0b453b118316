#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "premir/sequence_io.hpp"
#include "premir/tensor.hpp"

namespace premir {

// 4 x width one-hot code, rows in the fixed order A, C, G, U. Columns past
// valid_length are zero padding.
struct OneHotMatrix {
  static constexpr std::size_t kRows = 4;

  std::size_t width = 0;
  std::size_t valid_length = 0;
  std::vector<std::uint8_t> values;  // row-major, kRows * width

  std::uint8_t at(std::size_t row, std::size_t col) const { return values[row * width + col]; }
  bool operator==(const OneHotMatrix&) const = default;
};

// Row index of a base in the one-hot code; throws DataError for non-ACGU.
std::size_t base_index(char base);
char index_base(std::size_t row);

OneHotMatrix one_hot_encode(const RnaSequence& seq, std::size_t width = kMaxSequenceLength);

// Argmax per valid column.
std::string decode(const OneHotMatrix& m);

Tensor to_tensor(const OneHotMatrix& m);

// Cache format, little-endian:
//   "PMOH" | u32 version (1) | u32 count | u32 width
//   count x { u32 valid_length | 4*width bytes of {0,1} row-major }
void write_onehot_cache(std::ostream& out, std::span<const OneHotMatrix> matrices);
std::vector<OneHotMatrix> read_onehot_cache(std::istream& in);

}  // namespace premir
