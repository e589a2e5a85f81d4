#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace otbp {

// Shortest decimal string that parses back to the same double.
std::string format_double(double x);

// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(const void* data, std::size_t size,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex_digest(std::uint64_t digest);

}  // namespace otbp
