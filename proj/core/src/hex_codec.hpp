#pragma once

#include <string>
#include <vector>

namespace frdw::detail {

// Each value is rounded to IEEE-754 binary32 and written as 8 lowercase hex digits of
// its little-endian byte sequence.
std::string encode_f32_hex(const std::vector<double>& values);
std::vector<double> decode_f32_hex(const std::string& hex);

} // namespace frdw::detail
