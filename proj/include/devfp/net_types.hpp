#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace devfp {

struct MacAddress {
    std::array<std::uint8_t, 6> octets{};

    auto operator<=>(const MacAddress&) const = default;

    /// Lowercase colon-hex, e.g. "00:1a:2b:3c:4d:5e".
    std::string to_string() const;
    static std::optional<MacAddress> parse(std::string_view text);
};

struct Ipv4Address {
    std::uint32_t value = 0; // host order

    auto operator<=>(const Ipv4Address&) const = default;

    std::string to_string() const;
    static std::optional<Ipv4Address> parse(std::string_view text);
};

struct Endpoint {
    Ipv4Address ip;
    std::uint16_t port = 0;

    auto operator<=>(const Endpoint&) const = default;
};

} // namespace devfp
