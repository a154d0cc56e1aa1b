#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowforge/address.hpp"
#include "flowforge/pcap.hpp"

namespace flowforge {

class ScenarioError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One synthetic conversation. The first packet always travels src → dst.
/// TCP conversations open with SYN / SYN-ACK and close with FIN when they
/// have at least three packets.
struct Conversation {
    IpAddress src;
    IpAddress dst;
    std::uint16_t sport = 0;
    std::uint16_t dport = 0;
    std::uint8_t proto = kProtoTcp;
    std::uint32_t packets = 1;
    double mean_gap_s = 0.1;
    double jitter_s = 0;     // gaps are uniform in mean ± jitter, floored at 0
    std::uint32_t payload = 0;
    double start_s = 0;      // offset from the scenario base time
    double reply_ratio = 0.5;  // chance a later packet travels dst → src
    double loss = 0;           // chance a TCP data segment is preceded by a lost one
    std::string label = "Benign";
    MacAddress src_mac{0x02, 0, 0, 0, 0, 1};
    MacAddress dst_mac{0x02, 0, 0, 0, 0, 2};
};

struct Scenario {
    std::uint64_t seed = 1;
    double base_time_s = 1'700'000'000.0;
    std::uint32_t snaplen = 65535;
    std::uint32_t arp_frames = 0;  // non-IP frames spread across the capture
    TimestampResolution resolution = TimestampResolution::micro;
    bool big_endian = false;
    std::vector<Conversation> conversations;
};

/// Parses the JSON scenario format:
/// {"seed": 7, "base_time": 1700000000, "snaplen": 65535, "arp_frames": 0,
///  "conversations": [{"src": "10.0.0.1", "dst": "10.0.0.2", "sport": 1234,
///   "dport": 80, "proto": "tcp", "packets": 10, "mean_gap": 0.1, "jitter": 0,
///   "payload": 100, "start": 0, "reply_ratio": 0.5, "loss": 0, "label": "X"}]}
Scenario parse_scenario(const std::string& json_text);
Scenario load_scenario(const std::filesystem::path& path);

/// Throws ScenarioError describing the first invalid field.
void validate(const Scenario& scenario);

/// Randomised scenario with at most `max_packets` IP packets.
Scenario random_scenario(std::uint64_t seed, std::uint32_t max_packets);

/// Per-flow expected totals, keyed by the orientation-free flow id.
struct TruthFlow {
    std::string flow_id;
    std::string src_addr;
    std::string dst_addr;
    std::uint16_t sport = 0;
    std::uint16_t dport = 0;
    std::string proto;
    std::uint64_t packets = 0;
    std::uint64_t bytes = 0;
    std::uint64_t gap_bytes = 0;  // sequence bytes skipped by simulated loss
    std::int64_t first_us = 0;
    std::int64_t last_us = 0;
    std::string label;
};

struct SynthPacket {
    std::int64_t ts_ns = 0;
    std::vector<std::uint8_t> frame;
    bool is_ip = true;
};

/// Streams the scenario's frames in capture order.
class ScenarioStream {
public:
    explicit ScenarioStream(const Scenario& scenario);
    ~ScenarioStream();
    ScenarioStream(ScenarioStream&&) noexcept;
    ScenarioStream& operator=(ScenarioStream&&) noexcept;

    std::optional<SynthPacket> next();

    /// Valid once next() has returned nullopt.
    std::vector<TruthFlow> truth() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct GenOutputs {
    std::filesystem::path capture;
    std::filesystem::path truth_csv;
    std::filesystem::path rules_csv;
    std::uint64_t ip_packets = 0;
    std::uint64_t total_frames = 0;
    std::vector<TruthFlow> truth;
};

/// Writes the capture plus "<stem>.truth.csv" and "<stem>.rules.csv" next to it.
GenOutputs gen_capture(const Scenario& scenario, const std::filesystem::path& capture_path);

std::string truth_csv_header();

}  // namespace flowforge
