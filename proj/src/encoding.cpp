#include "premir/encoding.hpp"

#include <array>
#include <istream>
#include <ostream>

#include "premir/errors.hpp"

namespace premir {

namespace {

constexpr std::array<char, 4> kMagic{'P', 'M', 'O', 'H'};
constexpr std::uint32_t kCacheVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                        static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b.data(), 4);
}

std::uint32_t get_u32(std::istream& in) {
  std::array<unsigned char, 4> b{};
  in.read(reinterpret_cast<char*>(b.data()), 4);
  if (!in) throw DataError("one-hot cache truncated");
  return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

std::size_t base_index(char base) {
  switch (base) {
    case 'A': return 0;
    case 'C': return 1;
    case 'G': return 2;
    case 'U': return 3;
    default: throw DataError(std::string("not an RNA base: '") + base + "'");
  }
}

char index_base(std::size_t row) { return "ACGU"[row]; }

OneHotMatrix one_hot_encode(const RnaSequence& seq, std::size_t width) {
  if (seq.length() > width) {
    throw DataError("sequence '" + seq.id + "' of length " + std::to_string(seq.length()) +
                    " does not fit encoder width " + std::to_string(width));
  }
  OneHotMatrix m;
  m.width = width;
  m.valid_length = seq.length();
  m.values.assign(OneHotMatrix::kRows * width, 0);
  for (std::size_t col = 0; col < seq.length(); ++col) {
    m.values[base_index(seq.bases[col]) * width + col] = 1;
  }
  return m;
}

std::string decode(const OneHotMatrix& m) {
  std::string out;
  out.reserve(m.valid_length);
  for (std::size_t col = 0; col < m.valid_length; ++col) {
    std::size_t best = 0;
    for (std::size_t row = 1; row < OneHotMatrix::kRows; ++row) {
      if (m.at(row, col) > m.at(best, col)) best = row;
    }
    out.push_back(index_base(best));
  }
  return out;
}

Tensor to_tensor(const OneHotMatrix& m) {
  Tensor t({OneHotMatrix::kRows, m.width});
  for (std::size_t i = 0; i < m.values.size(); ++i) t.values[i] = m.values[i];
  return t;
}

void write_onehot_cache(std::ostream& out, std::span<const OneHotMatrix> matrices) {
  const std::uint32_t width = matrices.empty() ? 0 : static_cast<std::uint32_t>(matrices[0].width);
  out.write(kMagic.data(), 4);
  put_u32(out, kCacheVersion);
  put_u32(out, static_cast<std::uint32_t>(matrices.size()));
  put_u32(out, width);
  for (const auto& m : matrices) {
    if (m.width != width) throw DataError("one-hot cache requires a uniform width");
    put_u32(out, static_cast<std::uint32_t>(m.valid_length));
    out.write(reinterpret_cast<const char*>(m.values.data()),
              static_cast<std::streamsize>(m.values.size()));
  }
}

std::vector<OneHotMatrix> read_onehot_cache(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), 4);
  if (!in || magic != kMagic) throw DataError("not a one-hot cache (bad magic)");
  if (get_u32(in) != kCacheVersion) throw DataError("unsupported one-hot cache version");
  const std::uint32_t count = get_u32(in);
  const std::uint32_t width = get_u32(in);
  std::vector<OneHotMatrix> out(count);
  for (auto& m : out) {
    m.width = width;
    m.valid_length = get_u32(in);
    if (m.valid_length > width) throw DataError("one-hot cache record exceeds width");
    m.values.resize(OneHotMatrix::kRows * width);
    in.read(reinterpret_cast<char*>(m.values.data()), static_cast<std::streamsize>(m.values.size()));
    if (!in) throw DataError("one-hot cache truncated");
  }
  return out;
}

}  // namespace premir
