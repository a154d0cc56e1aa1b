#include "flowforge/pcap.hpp"

#include <algorithm>
#include <cstring>

namespace flowforge {

namespace {

constexpr std::size_t kGlobalHeaderLen = 24;
constexpr std::size_t kRecordHeaderLen = 16;
constexpr std::size_t kEthernetLen = 14;
constexpr std::uint32_t kMaxRecordLen = 256 * 1024;
constexpr std::size_t kIoBufferLen = 1 << 20;

constexpr std::uint16_t kEtherIpv4 = 0x0800;
constexpr std::uint16_t kEtherIpv6 = 0x86dd;

std::uint16_t be16(const std::uint8_t* p)
{
    return static_cast<std::uint16_t>((p[0] << 8) | p[1]);
}

std::uint32_t be32(const std::uint8_t* p)
{
    return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) |
           std::uint32_t{p[3]};
}

std::uint32_t le32(const std::uint8_t* p)
{
    return (std::uint32_t{p[3]} << 24) | (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[1]} << 8) |
           std::uint32_t{p[0]};
}

std::uint16_t le16(const std::uint8_t* p)
{
    return static_cast<std::uint16_t>((p[1] << 8) | p[0]);
}

bool is_vlan_tag(std::uint16_t ethertype)
{
    return ethertype == 0x8100 || ethertype == 0x88a8 || ethertype == 0x9100;
}

DecodeSkip make_skip(SkipReason reason, std::int64_t ts_us, std::uint32_t cap_len,
                     std::uint32_t wire_len, std::uint16_t ethertype = 0)
{
    DecodeSkip s;
    s.reason = reason;
    s.ts_us = ts_us;
    s.cap_len = cap_len;
    s.wire_len = wire_len;
    s.ethertype = ethertype;
    return s;
}

}  // namespace

std::string_view to_string(SkipReason reason)
{
    switch (reason) {
    case SkipReason::non_ip: return "non-IP";
    case SkipReason::truncated: return "truncated";
    case SkipReason::fragment: return "fragment";
    case SkipReason::malformed: return "malformed";
    case SkipReason::unsupported_linktype: return "unsupported linktype";
    }
    return "unknown";
}

CaptureHeader parse_capture_header(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < 4) throw PcapError("not a pcap file");
    CaptureHeader h;
    h.magic = le32(bytes.data());
    switch (h.magic) {
    case kMagicMicro: break;
    case kMagicNano: h.resolution = TimestampResolution::nano; break;
    case kMagicMicroSwapped: h.byte_swapped = true; break;
    case kMagicNanoSwapped:
        h.byte_swapped = true;
        h.resolution = TimestampResolution::nano;
        break;
    default: throw PcapError("not a pcap file");
    }
    if (bytes.size() < kGlobalHeaderLen) throw PcapError("truncated pcap global header");
    const std::uint8_t* p = bytes.data();
    auto u16 = [&](std::size_t at) { return h.byte_swapped ? be16(p + at) : le16(p + at); };
    auto u32 = [&](std::size_t at) { return h.byte_swapped ? be32(p + at) : le32(p + at); };
    h.version_major = u16(4);
    h.version_minor = u16(6);
    h.snaplen = u32(16);
    h.linktype = u32(20) & 0x0fffffff;  // upper bits carry FCS metadata
    return h;
}

DecodeResult decode_ethernet_ip(std::span<const std::uint8_t> frame, std::uint32_t wire_len,
                                std::int64_t ts_us)
{
    const auto cap_len = static_cast<std::uint32_t>(frame.size());
    const std::uint8_t* b = frame.data();
    if (cap_len > wire_len) return make_skip(SkipReason::malformed, ts_us, cap_len, wire_len);
    if (cap_len < kEthernetLen) return make_skip(SkipReason::truncated, ts_us, cap_len, wire_len);

    Packet p;
    p.ts_us = ts_us;
    p.cap_len = cap_len;
    p.wire_len = wire_len;
    std::memcpy(p.dst_mac.data(), b, 6);
    std::memcpy(p.src_mac.data(), b + 6, 6);

    std::size_t off = 12;
    std::uint16_t ethertype = be16(b + off);
    off += 2;
    while (is_vlan_tag(ethertype)) {
        if (off + 4 > cap_len) return make_skip(SkipReason::truncated, ts_us, cap_len, wire_len, ethertype);
        ethertype = be16(b + off + 2);
        off += 4;
    }
    p.ethertype = ethertype;

    std::size_t l4 = 0;
    std::uint32_t ip_payload = 0;  // bytes after the IP header(s), per the length fields

    if (ethertype == kEtherIpv4) {
        if (off + 20 > cap_len) return make_skip(SkipReason::truncated, ts_us, cap_len, wire_len, ethertype);
        const std::uint8_t* ip = b + off;
        if ((ip[0] >> 4) != 4) return make_skip(SkipReason::malformed, ts_us, cap_len, wire_len, ethertype);
        const std::size_t ihl = std::size_t{ip[0] & 0x0fu} * 4;
        if (ihl < 20) return make_skip(SkipReason::malformed, ts_us, cap_len, wire_len, ethertype);
        if (off + ihl > cap_len) return make_skip(SkipReason::truncated, ts_us, cap_len, wire_len, ethertype);
        if ((be16(ip + 6) & 0x1fff) != 0)
            return make_skip(SkipReason::fragment, ts_us, cap_len, wire_len, ethertype);
        const std::uint16_t total_len = be16(ip + 2);
        ip_payload = total_len > ihl ? static_cast<std::uint32_t>(total_len - ihl) : 0;
        p.ip_version = 4;
        p.proto = ip[9];
        p.src_addr = IpAddress::from_v4_bytes(ip + 12);
        p.dst_addr = IpAddress::from_v4_bytes(ip + 16);
        l4 = off + ihl;
    } else if (ethertype == kEtherIpv6) {
        if (off + 40 > cap_len) return make_skip(SkipReason::truncated, ts_us, cap_len, wire_len, ethertype);
        const std::uint8_t* ip = b + off;
        if ((ip[0] >> 4) != 6) return make_skip(SkipReason::malformed, ts_us, cap_len, wire_len, ethertype);
        std::uint32_t remaining = be16(ip + 4);
        std::uint8_t next = ip[6];
        p.ip_version = 6;
        p.src_addr = IpAddress::from_v6_bytes(ip + 8);
        p.dst_addr = IpAddress::from_v6_bytes(ip + 24);
        std::size_t at = off + 40;
        for (;;) {
            std::size_t ext_len = 0;
            if (next == 0 || next == 43 || next == 60) {
                if (at + 2 > cap_len) return make_skip(SkipReason::truncated, ts_us, cap_len, wire_len, ethertype);
                ext_len = (std::size_t{b[at + 1]} + 1) * 8;
            } else if (next == 44) {
                if (at + 8 > cap_len) return make_skip(SkipReason::truncated, ts_us, cap_len, wire_len, ethertype);
                if ((be16(b + at + 2) >> 3) != 0)
                    return make_skip(SkipReason::fragment, ts_us, cap_len, wire_len, ethertype);
                ext_len = 8;
            } else {
                break;
            }
            next = b[at];
            at += ext_len;
            remaining = remaining > ext_len ? remaining - static_cast<std::uint32_t>(ext_len) : 0;
        }
        p.proto = next;
        ip_payload = remaining;
        l4 = at;
    } else {
        return make_skip(SkipReason::non_ip, ts_us, cap_len, wire_len, ethertype);
    }

    std::uint32_t transport_len = 0;
    if (p.proto == kProtoTcp) {
        if (l4 + 20 > cap_len) return make_skip(SkipReason::truncated, ts_us, cap_len, wire_len, ethertype);
        const std::uint8_t* t = b + l4;
        transport_len = std::uint32_t{static_cast<std::uint8_t>(t[12] >> 4)} * 4;
        if (transport_len < 20) return make_skip(SkipReason::malformed, ts_us, cap_len, wire_len, ethertype);
        p.sport = be16(t);
        p.dport = be16(t + 2);
        p.tcp_seq = be32(t + 4);
        p.tcp_flags = t[13];
    } else if (p.proto == kProtoUdp) {
        if (l4 + 8 > cap_len) return make_skip(SkipReason::truncated, ts_us, cap_len, wire_len, ethertype);
        transport_len = 8;
        p.sport = be16(b + l4);
        p.dport = be16(b + l4 + 2);
    } else if (p.proto == kProtoIcmp || p.proto == kProtoIcmpV6) {
        transport_len = 8;
    }
    p.payload_len = ip_payload > transport_len ? ip_payload - transport_len : 0;
    return p;
}

CaptureReader::CaptureReader(const std::filesystem::path& path)
    : path_(path), file_(std::fopen(path.c_str(), "rb")), io_buffer_(kIoBufferLen)
{
    if (!file_) throw PcapError("cannot open capture: " + path.string());
    std::setvbuf(file_.get(), io_buffer_.data(), _IOFBF, io_buffer_.size());
    std::uint8_t raw[kGlobalHeaderLen];
    const std::size_t got = std::fread(raw, 1, sizeof raw, file_.get());
    header_ = parse_capture_header(std::span<const std::uint8_t>(raw, got));
    frame_.reserve(std::max<std::uint32_t>(header_.snaplen, 2048));
}

std::optional<DecodeResult> CaptureReader::next()
{
    if (done_) return std::nullopt;
    std::uint8_t rh[kRecordHeaderLen];
    const std::size_t got = std::fread(rh, 1, sizeof rh, file_.get());
    if (got == 0) {
        done_ = true;
        return std::nullopt;
    }
    if (got < kRecordHeaderLen) {
        ++truncations_;
        done_ = true;
        return std::nullopt;
    }
    const bool sw = header_.byte_swapped;
    auto u32 = [sw](const std::uint8_t* p) { return sw ? be32(p) : le32(p); };
    const std::uint32_t sec = u32(rh);
    const std::uint32_t frac = u32(rh + 4);
    const std::uint32_t incl = u32(rh + 8);
    const std::uint32_t orig = u32(rh + 12);
    if (incl > std::max(header_.snaplen, kMaxRecordLen)) {
        // Corrupt length field: nothing after this point can be trusted.
        ++truncations_;
        done_ = true;
        return std::nullopt;
    }
    frame_.resize(incl);
    if (incl && std::fread(frame_.data(), 1, incl, file_.get()) != incl) {
        ++truncations_;
        done_ = true;
        return std::nullopt;
    }
    ++records_;
    const std::int64_t micros =
        header_.resolution == TimestampResolution::nano ? frac / 1000 : frac;
    const std::int64_t ts_us = std::int64_t{sec} * 1'000'000 + micros;
    if (header_.linktype != kLinktypeEthernet) {
        DecodeSkip s = make_skip(SkipReason::unsupported_linktype, ts_us, incl, orig);
        s.linktype = header_.linktype;
        return DecodeResult{s};
    }
    return decode_ethernet_ip(frame_, orig, ts_us);
}

CaptureReader open_capture(const std::filesystem::path& path)
{
    return CaptureReader(path);
}

CaptureWriter::CaptureWriter(const std::filesystem::path& path, CaptureWriterOptions options)
    : path_(path), file_(std::fopen(path.c_str(), "wb")), io_buffer_(kIoBufferLen), options_(options)
{
    if (!file_) throw PcapError("cannot create capture: " + path.string());
    std::setvbuf(file_.get(), io_buffer_.data(), _IOFBF, io_buffer_.size());
    put32(options_.resolution == TimestampResolution::nano ? kMagicNano : kMagicMicro);
    put16(2);
    put16(4);
    put32(0);  // thiszone
    put32(0);  // sigfigs
    put32(options_.snaplen);
    put32(options_.linktype);
}

void CaptureWriter::put32(std::uint32_t v)
{
    std::uint8_t b[4];
    if (options_.big_endian) {
        b[0] = static_cast<std::uint8_t>(v >> 24);
        b[1] = static_cast<std::uint8_t>(v >> 16);
        b[2] = static_cast<std::uint8_t>(v >> 8);
        b[3] = static_cast<std::uint8_t>(v);
    } else {
        b[0] = static_cast<std::uint8_t>(v);
        b[1] = static_cast<std::uint8_t>(v >> 8);
        b[2] = static_cast<std::uint8_t>(v >> 16);
        b[3] = static_cast<std::uint8_t>(v >> 24);
    }
    if (std::fwrite(b, 1, 4, file_.get()) != 4) throw PcapError("write failed: " + path_.string());
}

void CaptureWriter::put16(std::uint16_t v)
{
    std::uint8_t b[2];
    if (options_.big_endian) {
        b[0] = static_cast<std::uint8_t>(v >> 8);
        b[1] = static_cast<std::uint8_t>(v);
    } else {
        b[0] = static_cast<std::uint8_t>(v);
        b[1] = static_cast<std::uint8_t>(v >> 8);
    }
    if (std::fwrite(b, 1, 2, file_.get()) != 2) throw PcapError("write failed: " + path_.string());
}

void CaptureWriter::write(std::int64_t ts_ns, std::span<const std::uint8_t> frame,
                          std::optional<std::uint32_t> wire_len)
{
    if (!file_) throw PcapError("capture already closed: " + path_.string());
    const auto orig = wire_len.value_or(static_cast<std::uint32_t>(frame.size()));
    const auto incl = std::min<std::uint32_t>(static_cast<std::uint32_t>(frame.size()), options_.snaplen);
    const std::int64_t sec = ts_ns / 1'000'000'000;
    const std::int64_t rem = ts_ns % 1'000'000'000;
    put32(static_cast<std::uint32_t>(sec));
    put32(static_cast<std::uint32_t>(options_.resolution == TimestampResolution::nano ? rem : rem / 1000));
    put32(incl);
    put32(orig);
    if (incl && std::fwrite(frame.data(), 1, incl, file_.get()) != incl)
        throw PcapError("write failed: " + path_.string());
}

void CaptureWriter::close()
{
    if (!file_) return;
    const bool ok = std::fflush(file_.get()) == 0;
    file_.reset();
    if (!ok) throw PcapError("write failed: " + path_.string());
}

}  // namespace flowforge
