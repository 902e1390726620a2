#include "hex_codec.hpp"

#include "frdw/types.hpp"

#include <bit>
#include <cstdint>

namespace frdw::detail {

namespace {

constexpr char kDigits[] = "0123456789abcdef";

int nibble(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

} // namespace

std::string encode_f32_hex(const std::vector<double>& values) {
  std::string out;
  out.reserve(values.size() * 8);
  for (double v : values) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    for (int byte = 0; byte < 4; ++byte) {
      const auto b = static_cast<unsigned>((bits >> (8 * byte)) & 0xFFu);
      out.push_back(kDigits[b >> 4]);
      out.push_back(kDigits[b & 0xFu]);
    }
  }
  return out;
}

std::vector<double> decode_f32_hex(const std::string& hex) {
  if (hex.size() % 8 != 0) throw DataError("hex payload length is not a multiple of 8");
  std::vector<double> out;
  out.reserve(hex.size() / 8);
  for (std::size_t i = 0; i < hex.size(); i += 8) {
    std::uint32_t bits = 0;
    for (int byte = 0; byte < 4; ++byte) {
      const int hi = nibble(hex[i + 2 * byte]);
      const int lo = nibble(hex[i + 2 * byte + 1]);
      if (hi < 0 || lo < 0) throw DataError("invalid hex digit in payload");
      bits |= static_cast<std::uint32_t>((hi << 4) | lo) << (8 * byte);
    }
    out.push_back(static_cast<double>(std::bit_cast<float>(bits)));
  }
  return out;
}

} // namespace frdw::detail
