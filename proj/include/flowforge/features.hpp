#pragma once

#include <cstdint>
#include <string>

#include "flowforge/flow.hpp"

namespace flowforge {

enum class RateConvention : std::uint8_t {
    n_minus_one,  // (packets - 1) / duration
    n,            // packets / duration
};

struct FeatureOptions {
    RateConvention rate = RateConvention::n_minus_one;
};

/// Every exportable per-flow column. Times are epoch seconds, durations and
/// duration statistics are seconds, s_int_pkt/d_int_pkt are milliseconds,
/// rates are packets per second, gaps are bytes.
struct FlowFeatures {
    std::string flow_id;
    std::uint64_t rank = 0;
    std::uint64_t seq = 0;
    double start_time = 0;
    double last_time = 0;
    std::string proto;
    std::string src_addr;
    std::string dst_addr;
    std::uint32_t sport = 0;
    std::uint32_t dport = 0;
    std::string flgs;
    std::string state;
    std::uint64_t tot_pkts = 0;
    std::uint64_t src_pkts = 0;
    std::uint64_t dst_pkts = 0;
    std::uint64_t tot_bytes = 0;
    std::uint64_t src_bytes = 0;
    std::uint64_t dst_bytes = 0;
    double dur = 0;
    double mean = 0;
    double stddev = 0;
    double sum = 0;
    double min = 0;
    double max = 0;
    double rate = 0;
    double src_rate = 0;
    double dst_rate = 0;
    double s_int_pkt = 0;
    double d_int_pkt = 0;
    std::uint64_t src_gap = 0;
    std::uint64_t dst_gap = 0;
    std::string src_mac;
    std::string dst_mac;
    std::string src_oui;
    std::string dst_oui;
    std::string label;
};

/// Packets-per-second rate over `dur` seconds; 0 whenever undefined.
double packet_rate(std::uint64_t packets, double dur, RateConvention convention);

/// Mean gap in milliseconds from a microsecond sum; 0 when count is 0.
double mean_gap_ms(std::int64_t sum_us, std::uint64_t count);

/// "<src>_<dst>" where each side lists the TCP flags seen in the order
/// S A F R P U, e.g. "SA_SAF". Empty for non-TCP flows.
std::string render_flags(std::uint8_t proto, std::uint8_t src_flags, std::uint8_t dst_flags);

/// One row for a whole aggregated flow.
FlowFeatures features_from_flow(const AggregatedFlow& flow, const FeatureOptions& options = {});

/// One row for a single record; the duration statistics (Mean, StdDev, Sum,
/// Min, Max) come from the record's flow group.
FlowFeatures features_from_record(const FlowRecord& record, const AggregatedFlow& group,
                                  const FeatureOptions& options = {});

/// One row for a packet window. Duration statistics are taken over the
/// inter-arrival gaps inside the window. Endpoint fields come from the first
/// packet; packets sent by the first packet's source address count as src.
FlowFeatures features_from_window(const PacketWindow& window, const FeatureOptions& options = {});

}  // namespace flowforge
