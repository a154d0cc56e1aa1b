#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "flowforge/flow.hpp"
#include "flowforge/pcap.hpp"
#include "flowforge/synth.hpp"

namespace fftest {

using namespace flowforge;

/// Decoded packet built directly, without going through a frame.
Packet make_packet(double t_s, const std::string& src, const std::string& dst, std::uint16_t sport,
                   std::uint16_t dport, std::uint8_t proto = kProtoTcp, std::uint32_t wire_len = 100,
                   std::uint8_t tcp_flags = 0);

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

/// Every IP packet the reader decodes from `path`.
std::vector<Packet> read_packets(const std::filesystem::path& path);

/// The packets a capture written from `scenario` decodes to, without
/// touching the disk. Timestamps are truncated to microseconds like the
/// microsecond writer does.
std::vector<Packet> scenario_packets(const Scenario& scenario);

/// Runs packets through a FlowTable with a sweep every `sweep_us` of capture
/// time, as the exporter does, and returns every record.
std::vector<FlowRecord> run_engine(std::span<const Packet> packets, const FlowConfig& config,
                                   std::int64_t sweep_us = kMicrosPerSecond);

}  // namespace fftest
