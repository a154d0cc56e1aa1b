#include "flowforge/features.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace flowforge {

namespace {

double seconds(std::int64_t us)
{
    return static_cast<double>(us) / 1e6;
}

void fill_identity(FlowFeatures& f, const FlowKey& key)
{
    f.proto = protocol_name(key.proto);
    f.src_addr = key.initiator_addr.to_string();
    f.dst_addr = key.responder_addr.to_string();
    f.sport = key.initiator_port;
    f.dport = key.responder_port;
}

void fill_macs(FlowFeatures& f, const MacAddress& src, const MacAddress& dst)
{
    f.src_mac = format_mac(src);
    f.dst_mac = format_mac(dst);
    f.src_oui = mac_oui(src);
    f.dst_oui = mac_oui(dst);
}

void fill_rates(FlowFeatures& f, RateConvention convention)
{
    f.rate = packet_rate(f.tot_pkts, f.dur, convention);
    f.src_rate = packet_rate(f.src_pkts, f.dur, convention);
    f.dst_rate = packet_rate(f.dst_pkts, f.dur, convention);
}

}  // namespace

double packet_rate(std::uint64_t packets, double dur, RateConvention convention)
{
    if (!(dur > 0)) return 0;
    if (convention == RateConvention::n) return static_cast<double>(packets) / dur;
    if (packets < 2) return 0;
    return static_cast<double>(packets - 1) / dur;
}

double mean_gap_ms(std::int64_t sum_us, std::uint64_t count)
{
    if (count == 0) return 0;
    return static_cast<double>(sum_us) / 1e3 / static_cast<double>(count);
}

std::string render_flags(std::uint8_t proto, std::uint8_t src_flags, std::uint8_t dst_flags)
{
    if (proto != kProtoTcp) return {};
    static constexpr std::pair<std::uint8_t, char> kOrder[] = {
        {tcp_flag::syn, 'S'}, {tcp_flag::ack, 'A'}, {tcp_flag::fin, 'F'},
        {tcp_flag::rst, 'R'}, {tcp_flag::psh, 'P'}, {tcp_flag::urg, 'U'},
    };
    std::string out;
    for (auto [bit, ch] : kOrder)
        if (src_flags & bit) out.push_back(ch);
    out.push_back('_');
    for (auto [bit, ch] : kOrder)
        if (dst_flags & bit) out.push_back(ch);
    return out;
}

FlowFeatures features_from_flow(const AggregatedFlow& flow, const FeatureOptions& options)
{
    if (flow.records.empty()) throw std::invalid_argument("aggregated flow without records");
    FlowFeatures f;
    f.flow_id = flow.flow_id;
    f.seq = flow.first().seq;
    f.start_time = seconds(flow.start_us);
    f.last_time = seconds(flow.last_us);
    fill_identity(f, flow.key);
    f.flgs = render_flags(flow.key.proto, flow.src_flags, flow.dst_flags);
    f.state = std::string(to_string(flow.last().state));
    f.src_pkts = flow.src_pkts;
    f.dst_pkts = flow.dst_pkts;
    f.tot_pkts = flow.src_pkts + flow.dst_pkts;
    f.src_bytes = flow.src_bytes;
    f.dst_bytes = flow.dst_bytes;
    f.tot_bytes = flow.src_bytes + flow.dst_bytes;
    f.dur = seconds(flow.last_us - flow.start_us);
    f.mean = flow.dur_mean;
    f.stddev = flow.dur_stddev;
    f.sum = flow.dur_sum;
    f.min = flow.dur_min;
    f.max = flow.dur_max;
    fill_rates(f, options.rate);
    f.s_int_pkt = mean_gap_ms(flow.src_iat_sum_us, flow.src_iat_count);
    f.d_int_pkt = mean_gap_ms(flow.dst_iat_sum_us, flow.dst_iat_count);
    f.src_gap = flow.src_gap_bytes;
    f.dst_gap = flow.dst_gap_bytes;
    fill_macs(f, flow.first().src_mac, flow.first().dst_mac);
    return f;
}

FlowFeatures features_from_record(const FlowRecord& record, const AggregatedFlow& group,
                                  const FeatureOptions& options)
{
    const FlowRecord r = record.key == group.key || !record.key.same_flow(group.key) ? record : record.reversed();
    FlowFeatures f;
    f.flow_id = group.flow_id;
    f.seq = r.seq;
    f.start_time = r.start_time();
    f.last_time = r.last_time();
    fill_identity(f, r.key);
    f.flgs = render_flags(r.key.proto, r.src_flags, r.dst_flags);
    f.state = std::string(to_string(r.state));
    f.src_pkts = r.src_pkts;
    f.dst_pkts = r.dst_pkts;
    f.tot_pkts = r.packets();
    f.src_bytes = r.src_bytes;
    f.dst_bytes = r.dst_bytes;
    f.tot_bytes = r.bytes();
    f.dur = r.duration();
    f.mean = group.dur_mean;
    f.stddev = group.dur_stddev;
    f.sum = group.dur_sum;
    f.min = group.dur_min;
    f.max = group.dur_max;
    fill_rates(f, options.rate);
    f.s_int_pkt = mean_gap_ms(r.src_iat_sum_us, r.src_iat_count);
    f.d_int_pkt = mean_gap_ms(r.dst_iat_sum_us, r.dst_iat_count);
    f.src_gap = r.src_gap_bytes;
    f.dst_gap = r.dst_gap_bytes;
    fill_macs(f, r.src_mac, r.dst_mac);
    return f;
}

FlowFeatures features_from_window(const PacketWindow& window, const FeatureOptions& options)
{
    if (window.packets.empty()) throw std::invalid_argument("empty packet window");
    const Packet& first = window.packets.front();
    FlowFeatures f;
    f.flow_id = "window-" + std::to_string(window.window_index);
    f.rank = window.window_index + 1;
    f.start_time = seconds(window.start_us);
    f.last_time = seconds(window.end_us);
    fill_identity(f, oriented_key(first));

    std::uint8_t src_flags = 0;
    std::uint8_t dst_flags = 0;
    std::int64_t last_src = 0;
    std::int64_t last_dst = 0;
    std::int64_t src_iat = 0;
    std::int64_t dst_iat = 0;
    std::uint64_t src_iat_n = 0;
    std::uint64_t dst_iat_n = 0;
    MacAddress dst_mac = first.dst_mac;
    for (const Packet& p : window.packets) {
        const std::uint8_t flags = p.tcp_flags.value_or(0);
        if (p.src_addr == first.src_addr) {
            if (f.src_pkts) {
                src_iat += std::max<std::int64_t>(0, p.ts_us - last_src);
                ++src_iat_n;
            }
            last_src = f.src_pkts ? std::max(last_src, p.ts_us) : p.ts_us;
            ++f.src_pkts;
            f.src_bytes += p.wire_len;
            src_flags |= flags;
        } else {
            if (f.dst_pkts) {
                dst_iat += std::max<std::int64_t>(0, p.ts_us - last_dst);
                ++dst_iat_n;
            }
            last_dst = f.dst_pkts ? std::max(last_dst, p.ts_us) : p.ts_us;
            ++f.dst_pkts;
            f.dst_bytes += p.wire_len;
            dst_flags |= flags;
        }
    }
    f.tot_pkts = f.src_pkts + f.dst_pkts;
    f.tot_bytes = f.src_bytes + f.dst_bytes;
    f.flgs = render_flags(first.proto, src_flags, dst_flags);
    f.state = std::string(to_string(f.dst_pkts ? TransportState::CON : TransportState::INT));
    f.dur = seconds(window.end_us - window.start_us);
    fill_rates(f, options.rate);
    f.s_int_pkt = mean_gap_ms(src_iat, src_iat_n);
    f.d_int_pkt = mean_gap_ms(dst_iat, dst_iat_n);

    // Gap statistics over consecutive packets in arrival order.
    const std::size_t n_gaps = window.packets.size() - 1;
    if (n_gaps > 0) {
        double sum = 0;
        double lo = 0;
        double hi = 0;
        for (std::size_t i = 1; i < window.packets.size(); ++i) {
            const double g = seconds(std::max<std::int64_t>(
                0, window.packets[i].ts_us - window.packets[i - 1].ts_us));
            sum += g;
            lo = i == 1 ? g : std::min(lo, g);
            hi = i == 1 ? g : std::max(hi, g);
        }
        const double mean = sum / static_cast<double>(n_gaps);
        double sq = 0;
        for (std::size_t i = 1; i < window.packets.size(); ++i) {
            const double g = seconds(std::max<std::int64_t>(
                0, window.packets[i].ts_us - window.packets[i - 1].ts_us));
            sq += (g - mean) * (g - mean);
        }
        f.sum = sum;
        f.min = lo;
        f.max = hi;
        f.mean = std::clamp(mean, lo, hi);
        f.stddev = std::sqrt(sq / static_cast<double>(n_gaps));
    }
    fill_macs(f, first.src_mac, dst_mac);
    return f;
}

}  // namespace flowforge
