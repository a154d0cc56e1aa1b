#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "flowforge/address.hpp"

namespace flowforge {

inline constexpr std::uint32_t kMagicMicro = 0xa1b2c3d4;
inline constexpr std::uint32_t kMagicMicroSwapped = 0xd4c3b2a1;
inline constexpr std::uint32_t kMagicNano = 0xa1b23c4d;
inline constexpr std::uint32_t kMagicNanoSwapped = 0x4d3cb2a1;

inline constexpr std::uint32_t kLinktypeEthernet = 1;

inline constexpr std::uint8_t kProtoIcmp = 1;
inline constexpr std::uint8_t kProtoTcp = 6;
inline constexpr std::uint8_t kProtoUdp = 17;
inline constexpr std::uint8_t kProtoIcmpV6 = 58;

namespace tcp_flag {
inline constexpr std::uint8_t fin = 0x01;
inline constexpr std::uint8_t syn = 0x02;
inline constexpr std::uint8_t rst = 0x04;
inline constexpr std::uint8_t psh = 0x08;
inline constexpr std::uint8_t ack = 0x10;
inline constexpr std::uint8_t urg = 0x20;
}  // namespace tcp_flag

class PcapError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class TimestampResolution : std::uint8_t { micro, nano };

struct CaptureHeader {
    std::uint32_t magic = kMagicMicro;  // as stored, read little-endian
    bool byte_swapped = false;          // file byte order differs from little-endian
    TimestampResolution resolution = TimestampResolution::micro;
    std::uint16_t version_major = 2;
    std::uint16_t version_minor = 4;
    std::uint32_t snaplen = 65535;
    std::uint32_t linktype = kLinktypeEthernet;
};

/// Parses the 24-byte global header. Throws PcapError("not a pcap file") on
/// an unrecognised magic.
CaptureHeader parse_capture_header(std::span<const std::uint8_t> bytes);

/// One decoded captured frame. Timestamps are integral microseconds since
/// the epoch; nanosecond captures are truncated at decode time.
struct Packet {
    std::int64_t ts_us = 0;
    MacAddress src_mac{};
    MacAddress dst_mac{};
    std::uint16_t ethertype = 0;
    std::uint8_t ip_version = 0;
    IpAddress src_addr;
    IpAddress dst_addr;
    std::uint8_t proto = 0;
    std::optional<std::uint16_t> sport;
    std::optional<std::uint16_t> dport;
    std::optional<std::uint8_t> tcp_flags;
    std::optional<std::uint32_t> tcp_seq;
    std::uint32_t payload_len = 0;
    std::uint32_t wire_len = 0;
    std::uint32_t cap_len = 0;

    double ts() const { return static_cast<double>(ts_us) / 1e6; }

    friend bool operator==(const Packet&, const Packet&) = default;
};

enum class SkipReason : std::uint8_t {
    non_ip,
    truncated,
    fragment,
    malformed,
    unsupported_linktype,
};

std::string_view to_string(SkipReason reason);

struct DecodeSkip {
    SkipReason reason = SkipReason::malformed;
    std::int64_t ts_us = 0;
    std::uint32_t wire_len = 0;
    std::uint32_t cap_len = 0;
    std::uint16_t ethertype = 0;  // 0 when the link header never got parsed
    std::uint32_t linktype = kLinktypeEthernet;
};

using DecodeResult = std::variant<Packet, DecodeSkip>;

/// Decodes an Ethernet frame (optionally 802.1Q/802.1ad tagged) carrying
/// IPv4 or IPv6. `frame` holds the captured bytes only; `wire_len` is the
/// original on-the-wire length. Never throws.
DecodeResult decode_ethernet_ip(std::span<const std::uint8_t> frame, std::uint32_t wire_len,
                                std::int64_t ts_us);

/// Sequential reader over a classic PCAP file.
///
/// Every record in the file comes back from next() as either a Packet or a
/// DecodeSkip. A record header or body cut short by EOF ends the stream and
/// bumps truncation_warnings(); it is never reported as a packet.
class CaptureReader {
public:
    explicit CaptureReader(const std::filesystem::path& path);

    CaptureReader(CaptureReader&&) noexcept = default;
    CaptureReader& operator=(CaptureReader&&) noexcept = default;

    const CaptureHeader& header() const { return header_; }
    const std::filesystem::path& path() const { return path_; }

    std::optional<DecodeResult> next();

    std::uint64_t records_read() const { return records_; }
    std::uint64_t truncation_warnings() const { return truncations_; }

private:
    struct FileCloser {
        void operator()(std::FILE* f) const { std::fclose(f); }
    };

    std::filesystem::path path_;
    std::unique_ptr<std::FILE, FileCloser> file_;
    std::vector<char> io_buffer_;
    std::vector<std::uint8_t> frame_;
    CaptureHeader header_;
    std::uint64_t records_ = 0;
    std::uint64_t truncations_ = 0;
    bool done_ = false;
};

/// Equivalent to constructing a CaptureReader.
CaptureReader open_capture(const std::filesystem::path& path);

struct CaptureWriterOptions {
    TimestampResolution resolution = TimestampResolution::micro;
    bool big_endian = false;
    std::uint32_t snaplen = 65535;
    std::uint32_t linktype = kLinktypeEthernet;
};

/// Writes classic PCAP files. Frames longer than snaplen are cut to snaplen
/// with the original length preserved in the record header.
class CaptureWriter {
public:
    explicit CaptureWriter(const std::filesystem::path& path, CaptureWriterOptions options = {});

    /// `ts_ns` is nanoseconds since the epoch; micro-resolution files drop the
    /// sub-microsecond part. `wire_len` defaults to the frame size.
    void write(std::int64_t ts_ns, std::span<const std::uint8_t> frame,
               std::optional<std::uint32_t> wire_len = std::nullopt);

    void close();

private:
    void put32(std::uint32_t v);
    void put16(std::uint16_t v);

    struct FileCloser {
        void operator()(std::FILE* f) const { std::fclose(f); }
    };

    std::filesystem::path path_;
    std::unique_ptr<std::FILE, FileCloser> file_;
    std::vector<char> io_buffer_;
    CaptureWriterOptions options_;
};

}  // namespace flowforge
