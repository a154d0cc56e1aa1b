#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "flowforge/address.hpp"
#include "flowforge/pcap.hpp"

namespace flowforge {

inline constexpr std::int64_t kMicrosPerSecond = 1'000'000;

enum class Direction : std::uint8_t { initiator, responder };

/// Transport state of a flow, in increasing precedence:
/// INT  one-directional traffic without a handshake
/// REQ  SYN seen, nothing from the responder yet
/// CON  traffic seen in both directions
/// FIN  either side sent FIN
/// RST  reset seen
enum class TransportState : std::uint8_t { INT, REQ, CON, FIN, RST };

std::string_view to_string(TransportState state);
std::optional<TransportState> parse_transport_state(std::string_view text);

/// Bidirectional 5-tuple, oriented so that the initiator is the sender of
/// the first packet seen. Ports are 0 for protocols without them.
struct FlowKey {
    IpAddress initiator_addr;
    IpAddress responder_addr;
    std::uint16_t initiator_port = 0;
    std::uint16_t responder_port = 0;
    std::uint8_t proto = 0;

    FlowKey reversed() const;

    /// True when both keys name the same unordered endpoint pair and protocol.
    bool same_flow(const FlowKey& other) const;

    /// Orientation-free identifier: the lower endpoint first, e.g.
    /// "10.0.0.1:1234-10.0.0.2:80-tcp".
    std::string flow_id() const;

    friend bool operator==(const FlowKey&, const FlowKey&) = default;
};

/// Key oriented as the packet travels (packet source is the initiator).
FlowKey oriented_key(const Packet& p);

/// Direction of `p` relative to `key`. A packet whose source endpoint equals
/// the initiator endpoint is `initiator`, everything else `responder`.
Direction direction_of(const FlowKey& key, const Packet& p);

/// One flow record: counters for a single status interval of a flow.
/// Times are integral microseconds; src_* means initiator→responder.
struct FlowRecord {
    FlowKey key;
    std::uint64_t seq = 0;
    std::int64_t start_us = 0;
    std::int64_t last_us = 0;
    std::uint64_t src_pkts = 0;
    std::uint64_t dst_pkts = 0;
    std::uint64_t src_bytes = 0;
    std::uint64_t dst_bytes = 0;
    MacAddress src_mac{};
    MacAddress dst_mac{};
    std::uint8_t src_flags = 0;
    std::uint8_t dst_flags = 0;
    TransportState state = TransportState::INT;
    std::int64_t src_iat_sum_us = 0;
    std::int64_t dst_iat_sum_us = 0;
    std::uint64_t src_iat_count = 0;
    std::uint64_t dst_iat_count = 0;
    std::uint64_t src_gap_bytes = 0;
    std::uint64_t dst_gap_bytes = 0;
    std::int64_t last_ts_src = 0;
    std::int64_t last_ts_dst = 0;
    std::optional<std::uint32_t> next_seq_src;
    std::optional<std::uint32_t> next_seq_dst;

    std::uint64_t packets() const { return src_pkts + dst_pkts; }
    std::uint64_t bytes() const { return src_bytes + dst_bytes; }
    std::int64_t duration_us() const { return last_us - start_us; }
    double start_time() const { return static_cast<double>(start_us) / 1e6; }
    double last_time() const { return static_cast<double>(last_us) / 1e6; }
    double duration() const { return static_cast<double>(duration_us()) / 1e6; }

    /// Same record seen from the other endpoint: key reversed, src/dst swapped.
    FlowRecord reversed() const;
};

/// How the flow interval closes records.
enum class IntervalMode : std::uint8_t {
    /// A record closes once a packet arrives >= interval after the record
    /// opened; flows idle for >= interval are dropped from the table too.
    status,
    /// Records close only after >= interval without packets.
    idle,
};

struct FlowConfig {
    std::int64_t interval_us = 60 * kMicrosPerSecond;
    IntervalMode interval_mode = IntervalMode::status;
    /// Packets older than the newest timestamp by more than this count as reordered.
    std::int64_t reorder_tolerance_us = kMicrosPerSecond;
};

/// Live flow table for one capture. Single writer.
class FlowTable {
public:
    explicit FlowTable(FlowConfig config = {});

    const FlowConfig& config() const { return config_; }

    /// Key and direction `p` would be filed under right now.
    std::pair<FlowKey, Direction> canonical_key(const Packet& p) const;

    void ingest(const Packet& p);

    /// Closes every live record that has spanned the interval as of the newest
    /// timestamp ingested, drops idle flows, and returns all records closed
    /// since the last call, ordered by start time then flow id, with fresh
    /// sequence numbers.
    std::vector<FlowRecord> flush_interval();

    /// Emits every remaining record and clears the table.
    std::vector<FlowRecord> finalize();

    std::size_t live_flows() const { return flows_.size(); }
    std::uint64_t packets_ingested() const { return packets_; }
    std::uint64_t reordered_packets() const { return reordered_; }
    std::int64_t newest_ts_us() const { return newest_us_; }

private:
    struct TupleKey {
        IpAddress lo_addr;
        IpAddress hi_addr;
        std::uint16_t lo_port = 0;
        std::uint16_t hi_port = 0;
        std::uint8_t proto = 0;

        static TupleKey of(const Packet& p);
        friend bool operator==(const TupleKey&, const TupleKey&) = default;
    };
    struct TupleHash {
        std::size_t operator()(const TupleKey& k) const;
    };
    struct Entry {
        FlowKey key;
        std::string flow_id;
        FlowRecord record;
        std::int64_t last_seen_us = 0;
        bool seen_initiator = false;
        bool seen_responder = false;
        bool syn = false;
        bool fin = false;
        bool rst = false;
        std::optional<std::uint32_t> next_seq[2];
    };
    struct Closed {
        FlowRecord record;
        std::string flow_id;
    };

    void open_record(Entry& e, const Packet& p);
    void close_record(Entry& e);
    static TransportState state_of(const Entry& e);
    std::vector<FlowRecord> drain_closed();

    FlowConfig config_;
    std::unordered_map<TupleKey, Entry, TupleHash> flows_;
    std::vector<Closed> closed_;
    std::uint64_t next_seq_ = 1;
    std::uint64_t packets_ = 0;
    std::uint64_t reordered_ = 0;
    std::int64_t newest_us_ = 0;
    bool any_packet_ = false;
};

/// Records of one flow id merged, with statistics over the member record
/// durations. Counters are expressed in the orientation of the first record.
struct AggregatedFlow {
    std::string flow_id;
    FlowKey key;
    std::vector<FlowRecord> records;  // in input order, aligned to `key`

    std::int64_t start_us = 0;
    std::int64_t last_us = 0;
    std::uint64_t src_pkts = 0;
    std::uint64_t dst_pkts = 0;
    std::uint64_t src_bytes = 0;
    std::uint64_t dst_bytes = 0;
    std::int64_t src_iat_sum_us = 0;
    std::int64_t dst_iat_sum_us = 0;
    std::uint64_t src_iat_count = 0;
    std::uint64_t dst_iat_count = 0;
    std::uint64_t src_gap_bytes = 0;
    std::uint64_t dst_gap_bytes = 0;
    std::uint8_t src_flags = 0;
    std::uint8_t dst_flags = 0;

    // Record-duration statistics, seconds. Standard deviation is population.
    double dur_sum = 0;
    double dur_min = 0;
    double dur_max = 0;
    double dur_mean = 0;
    double dur_stddev = 0;

    const FlowRecord& first() const { return records.front(); }
    const FlowRecord& last() const { return records.back(); }
};

/// Groups records by flow id, in order of each id's first appearance.
std::vector<AggregatedFlow> aggregate_by_flow_id(std::span<const FlowRecord> records);

/// A fixed-count chunk of consecutive packets from one capture.
struct PacketWindow {
    std::uint64_t window_index = 0;
    std::vector<Packet> packets;
    std::int64_t start_us = 0;
    std::int64_t end_us = 0;
    bool partial = false;  // fewer than the window size (only ever the last)
};

/// Splits `packets` into consecutive windows of `window_size`; the final
/// short window is kept and flagged. Throws std::invalid_argument on 0.
std::vector<PacketWindow> window_segment(std::span<const Packet> packets, std::size_t window_size);

/// Streaming form of window_segment.
class WindowSegmenter {
public:
    explicit WindowSegmenter(std::size_t window_size);

    /// Returns a window once `window_size` packets have accumulated.
    std::optional<PacketWindow> push(const Packet& p);

    /// Returns the trailing partial window, if any.
    std::optional<PacketWindow> finish();

private:
    PacketWindow take(bool partial);

    std::size_t window_size_;
    std::uint64_t next_index_ = 0;
    std::vector<Packet> pending_;
};

}  // namespace flowforge
