#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace flowforge {

using MacAddress = std::array<std::uint8_t, 6>;

/// "aa:bb:cc:dd:ee:ff", lower-case hex.
std::string format_mac(const MacAddress& mac);

/// Vendor prefix of a MAC address, e.g. "aa:bb:cc".
std::string mac_oui(const MacAddress& mac);

std::optional<MacAddress> parse_mac(std::string_view text);

/// IPv4 or IPv6 address. IPv4 occupies the first four bytes of `bytes`.
class IpAddress {
public:
    enum class Family : std::uint8_t { none = 0, v4 = 4, v6 = 6 };

    IpAddress() = default;

    static IpAddress v4(std::uint32_t host_order);
    static IpAddress from_v4_bytes(const std::uint8_t* network_order);
    static IpAddress from_v6_bytes(const std::uint8_t* network_order);
    static std::optional<IpAddress> parse(std::string_view text);

    Family family() const { return family_; }
    const std::array<std::uint8_t, 16>& bytes() const { return bytes_; }
    std::string to_string() const;

    std::size_t hash() const;

    friend bool operator==(const IpAddress&, const IpAddress&) = default;
    friend std::strong_ordering operator<=>(const IpAddress&, const IpAddress&) = default;

private:
    Family family_ = Family::none;
    std::array<std::uint8_t, 16> bytes_{};
};

/// Text name used in CSV output: "tcp", "udp", "icmp", "ipv6-icmp", else the number.
std::string protocol_name(std::uint8_t proto);

/// Inverse of protocol_name; also accepts plain numbers. Case-insensitive.
std::optional<std::uint8_t> parse_protocol(std::string_view text);

}  // namespace flowforge
