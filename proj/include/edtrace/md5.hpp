#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace edtrace {

// RFC 1321 MD5. Streaming: update() any number of times, then digest().
class Md5 {
public:
    Md5();
    void update(const void* data, std::size_t len);
    void update(std::string_view s) { update(s.data(), s.size()); }
    std::array<std::uint8_t, 16> digest();

    static std::array<std::uint8_t, 16> of(std::string_view s);
    static std::string hex_of(std::string_view s);

private:
    void block(const std::uint8_t* p);

    std::array<std::uint32_t, 4> state_;
    std::uint64_t length_ = 0;
    std::array<std::uint8_t, 64> buffer_{};
    std::size_t buffered_ = 0;
};

} // namespace edtrace
