#include "flowforge/address.hpp"

#include <arpa/inet.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstring>

namespace flowforge {

namespace {

constexpr char kHex[] = "0123456789abcdef";

void append_hex_byte(std::string& out, std::uint8_t b)
{
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 0xf]);
}

int hex_value(char c)
{
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

}  // namespace

std::string format_mac(const MacAddress& mac)
{
    std::string out;
    out.reserve(17);
    for (std::size_t i = 0; i < mac.size(); ++i) {
        if (i) out.push_back(':');
        append_hex_byte(out, mac[i]);
    }
    return out;
}

std::string mac_oui(const MacAddress& mac)
{
    return format_mac(mac).substr(0, 8);
}

std::optional<MacAddress> parse_mac(std::string_view text)
{
    if (text.size() != 17) return std::nullopt;
    MacAddress mac{};
    for (std::size_t i = 0; i < 6; ++i) {
        const std::size_t at = i * 3;
        if (i && text[at - 1] != ':') return std::nullopt;
        int hi = hex_value(text[at]);
        int lo = hex_value(text[at + 1]);
        if (hi < 0 || lo < 0) return std::nullopt;
        mac[i] = static_cast<std::uint8_t>(hi * 16 + lo);
    }
    return mac;
}

IpAddress IpAddress::v4(std::uint32_t host_order)
{
    std::uint8_t raw[4] = {
        static_cast<std::uint8_t>(host_order >> 24), static_cast<std::uint8_t>(host_order >> 16),
        static_cast<std::uint8_t>(host_order >> 8), static_cast<std::uint8_t>(host_order)};
    return from_v4_bytes(raw);
}

IpAddress IpAddress::from_v4_bytes(const std::uint8_t* network_order)
{
    IpAddress a;
    a.family_ = Family::v4;
    std::memcpy(a.bytes_.data(), network_order, 4);
    return a;
}

IpAddress IpAddress::from_v6_bytes(const std::uint8_t* network_order)
{
    IpAddress a;
    a.family_ = Family::v6;
    std::memcpy(a.bytes_.data(), network_order, 16);
    return a;
}

std::optional<IpAddress> IpAddress::parse(std::string_view text)
{
    std::string s(text);
    std::uint8_t buf[16];
    if (inet_pton(AF_INET, s.c_str(), buf) == 1) return from_v4_bytes(buf);
    if (inet_pton(AF_INET6, s.c_str(), buf) == 1) return from_v6_bytes(buf);
    return std::nullopt;
}

std::string IpAddress::to_string() const
{
    char buf[INET6_ADDRSTRLEN] = {};
    switch (family_) {
    case Family::v4:
        inet_ntop(AF_INET, bytes_.data(), buf, sizeof buf);
        return buf;
    case Family::v6:
        inet_ntop(AF_INET6, bytes_.data(), buf, sizeof buf);
        return buf;
    case Family::none:
        break;
    }
    return {};
}

std::size_t IpAddress::hash() const
{
    // FNV-1a over the family tag and the used address bytes.
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](std::uint8_t b) {
        h ^= b;
        h *= 1099511628211ULL;
    };
    mix(static_cast<std::uint8_t>(family_));
    const std::size_t n = family_ == Family::v6 ? 16 : 4;
    for (std::size_t i = 0; i < n; ++i) mix(bytes_[i]);
    return static_cast<std::size_t>(h);
}

std::string protocol_name(std::uint8_t proto)
{
    switch (proto) {
    case 1: return "icmp";
    case 6: return "tcp";
    case 17: return "udp";
    case 58: return "ipv6-icmp";
    default: return std::to_string(proto);
    }
}

std::optional<std::uint8_t> parse_protocol(std::string_view text)
{
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "icmp") return 1;
    if (lower == "tcp") return 6;
    if (lower == "udp") return 17;
    if (lower == "ipv6-icmp" || lower == "icmp6" || lower == "icmpv6") return 58;
    unsigned value = 0;
    auto [ptr, ec] = std::from_chars(lower.data(), lower.data() + lower.size(), value);
    if (ec != std::errc{} || ptr != lower.data() + lower.size() || value > 255 || lower.empty())
        return std::nullopt;
    return static_cast<std::uint8_t>(value);
}

}  // namespace flowforge
