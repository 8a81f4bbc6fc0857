#include "scriptboard/hashing.hpp"

#include "scriptboard/error.hpp"

#include <charconv>

namespace scriptboard {

std::string to_hex(std::uint64_t value) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[value & 0xF];
        value >>= 4;
    }
    return out;
}

std::uint64_t from_hex(std::string_view hex) {
    std::uint64_t value = 0;
    auto [ptr, ec] = std::from_chars(hex.data(), hex.data() + hex.size(), value, 16);
    if (ec != std::errc{} || ptr != hex.data() + hex.size())
        throw Error(Errc::InvalidInput, "bad hex value '" + std::string(hex) + "'");
    return value;
}

} // namespace scriptboard
