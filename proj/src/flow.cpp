#include "flowforge/flow.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

namespace flowforge {

namespace {

constexpr std::uint32_t kSeqWindow = 0x80000000u;

std::string endpoint_text(const IpAddress& addr, std::uint16_t port)
{
    if (addr.family() == IpAddress::Family::v6) return "[" + addr.to_string() + "]:" + std::to_string(port);
    return addr.to_string() + ":" + std::to_string(port);
}

bool lower_endpoint_first(const IpAddress& a, std::uint16_t ap, const IpAddress& b, std::uint16_t bp)
{
    return std::tie(a, ap) <= std::tie(b, bp);
}

/// Sequence-space advance of a segment: payload plus one for SYN and FIN each.
std::uint32_t seq_advance(const Packet& p)
{
    std::uint32_t adv = p.payload_len;
    const std::uint8_t flags = p.tcp_flags.value_or(0);
    if (flags & tcp_flag::syn) ++adv;
    if (flags & tcp_flag::fin) ++adv;
    return adv;
}

/// Returns the forward gap in bytes and updates the expected next sequence.
std::uint64_t track_sequence(std::optional<std::uint32_t>& expected, const Packet& p)
{
    if (!p.tcp_seq || (p.tcp_flags.value_or(0) & tcp_flag::rst)) return 0;
    const std::uint32_t seq = *p.tcp_seq;
    const std::uint32_t end = seq + seq_advance(p);
    if (!expected) {
        expected = end;
        return 0;
    }
    const std::uint32_t ahead = seq - *expected;
    if (ahead == 0) {
        expected = end;
        return 0;
    }
    if (ahead < kSeqWindow) {
        expected = end;
        return ahead;
    }
    // Retransmission or old data; keep whatever part extends past `expected`.
    const std::uint32_t tail = end - *expected;
    if (tail != 0 && tail < kSeqWindow) expected = end;
    return 0;
}

}  // namespace

std::string_view to_string(TransportState state)
{
    switch (state) {
    case TransportState::INT: return "INT";
    case TransportState::REQ: return "REQ";
    case TransportState::CON: return "CON";
    case TransportState::FIN: return "FIN";
    case TransportState::RST: return "RST";
    }
    return "INT";
}

std::optional<TransportState> parse_transport_state(std::string_view text)
{
    for (auto s : {TransportState::INT, TransportState::REQ, TransportState::CON, TransportState::FIN,
                   TransportState::RST}) {
        if (to_string(s) == text) return s;
    }
    return std::nullopt;
}

FlowKey FlowKey::reversed() const
{
    return FlowKey{responder_addr, initiator_addr, responder_port, initiator_port, proto};
}

bool FlowKey::same_flow(const FlowKey& other) const
{
    return *this == other || *this == other.reversed();
}

std::string FlowKey::flow_id() const
{
    const bool keep = lower_endpoint_first(initiator_addr, initiator_port, responder_addr, responder_port);
    const auto& a = keep ? initiator_addr : responder_addr;
    const auto& b = keep ? responder_addr : initiator_addr;
    const auto ap = keep ? initiator_port : responder_port;
    const auto bp = keep ? responder_port : initiator_port;
    return endpoint_text(a, ap) + "-" + endpoint_text(b, bp) + "-" + protocol_name(proto);
}

FlowKey oriented_key(const Packet& p)
{
    return FlowKey{p.src_addr, p.dst_addr, p.sport.value_or(0), p.dport.value_or(0), p.proto};
}

Direction direction_of(const FlowKey& key, const Packet& p)
{
    if (p.src_addr == key.initiator_addr && p.sport.value_or(0) == key.initiator_port)
        return Direction::initiator;
    return Direction::responder;
}

FlowRecord FlowRecord::reversed() const
{
    FlowRecord r = *this;
    r.key = key.reversed();
    std::swap(r.src_pkts, r.dst_pkts);
    std::swap(r.src_bytes, r.dst_bytes);
    std::swap(r.src_mac, r.dst_mac);
    std::swap(r.src_flags, r.dst_flags);
    std::swap(r.src_iat_sum_us, r.dst_iat_sum_us);
    std::swap(r.src_iat_count, r.dst_iat_count);
    std::swap(r.src_gap_bytes, r.dst_gap_bytes);
    std::swap(r.last_ts_src, r.last_ts_dst);
    std::swap(r.next_seq_src, r.next_seq_dst);
    return r;
}

FlowTable::TupleKey FlowTable::TupleKey::of(const Packet& p)
{
    const std::uint16_t sp = p.sport.value_or(0);
    const std::uint16_t dp = p.dport.value_or(0);
    if (lower_endpoint_first(p.src_addr, sp, p.dst_addr, dp)) return TupleKey{p.src_addr, p.dst_addr, sp, dp, p.proto};
    return TupleKey{p.dst_addr, p.src_addr, dp, sp, p.proto};
}

std::size_t FlowTable::TupleHash::operator()(const TupleKey& k) const
{
    std::size_t h = k.lo_addr.hash();
    h ^= k.hi_addr.hash() + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    const std::uint64_t tail = (std::uint64_t{k.lo_port} << 24) | (std::uint64_t{k.hi_port} << 8) | k.proto;
    h ^= std::hash<std::uint64_t>{}(tail) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
}

FlowTable::FlowTable(FlowConfig config) : config_(config)
{
    if (config_.interval_us <= 0) throw std::invalid_argument("flow interval must be > 0");
}

std::pair<FlowKey, Direction> FlowTable::canonical_key(const Packet& p) const
{
    auto it = flows_.find(TupleKey::of(p));
    if (it == flows_.end() || p.ts_us - it->second.last_seen_us >= config_.interval_us)
        return {oriented_key(p), Direction::initiator};
    return {it->second.key, direction_of(it->second.key, p)};
}

TransportState FlowTable::state_of(const Entry& e)
{
    if (e.key.proto == kProtoTcp) {
        if (e.rst) return TransportState::RST;
        if (e.fin) return TransportState::FIN;
        if (e.seen_initiator && e.seen_responder) return TransportState::CON;
        if (e.syn) return TransportState::REQ;
        return TransportState::INT;
    }
    return e.seen_initiator && e.seen_responder ? TransportState::CON : TransportState::INT;
}

void FlowTable::open_record(Entry& e, const Packet& p)
{
    e.record = FlowRecord{};
    e.record.key = e.key;
    e.record.start_us = p.ts_us;
    e.record.last_us = p.ts_us;
}

void FlowTable::close_record(Entry& e)
{
    if (e.record.packets() == 0) return;
    e.record.state = state_of(e);
    e.record.next_seq_src = e.next_seq[0];
    e.record.next_seq_dst = e.next_seq[1];
    closed_.push_back(Closed{e.record, e.flow_id});
    e.record = FlowRecord{};
}

void FlowTable::ingest(const Packet& p)
{
    if (any_packet_ && p.ts_us < newest_us_ - config_.reorder_tolerance_us) ++reordered_;
    if (!any_packet_ || p.ts_us > newest_us_) newest_us_ = p.ts_us;
    any_packet_ = true;
    ++packets_;

    const TupleKey tk = TupleKey::of(p);
    auto [it, inserted] = flows_.try_emplace(tk);
    Entry& e = it->second;
    if (inserted) {
        e.key = oriented_key(p);
        e.flow_id = e.key.flow_id();
        open_record(e, p);
    } else if (p.ts_us - e.last_seen_us >= config_.interval_us) {
        // Idle for a full interval: a new flow that may run the other way.
        close_record(e);
        std::string id = std::move(e.flow_id);
        e = Entry{};
        e.key = oriented_key(p);
        e.flow_id = std::move(id);
        open_record(e, p);
    } else if (e.record.packets() == 0) {
        open_record(e, p);
    } else if (config_.interval_mode == IntervalMode::status &&
               p.ts_us - e.record.start_us >= config_.interval_us) {
        close_record(e);
        open_record(e, p);
    }
    e.last_seen_us = std::max(e.last_seen_us, p.ts_us);

    FlowRecord& r = e.record;
    r.start_us = std::min(r.start_us, p.ts_us);
    r.last_us = std::max(r.last_us, p.ts_us);
    const std::uint8_t flags = p.tcp_flags.value_or(0);
    if (flags & tcp_flag::syn) e.syn = true;
    if (flags & tcp_flag::fin) e.fin = true;
    if (flags & tcp_flag::rst) e.rst = true;

    if (direction_of(e.key, p) == Direction::initiator) {
        if (r.src_pkts == 0) {
            r.src_mac = p.src_mac;
            if (r.dst_pkts == 0) r.dst_mac = p.dst_mac;
        } else {
            r.src_iat_sum_us += std::max<std::int64_t>(0, p.ts_us - r.last_ts_src);
            ++r.src_iat_count;
        }
        r.last_ts_src = r.src_pkts == 0 ? p.ts_us : std::max(r.last_ts_src, p.ts_us);
        ++r.src_pkts;
        r.src_bytes += p.wire_len;
        r.src_flags |= flags;
        r.src_gap_bytes += track_sequence(e.next_seq[0], p);
        e.seen_initiator = true;
    } else {
        if (r.dst_pkts == 0) {
            if (r.src_pkts == 0) {
                r.src_mac = p.dst_mac;
                r.dst_mac = p.src_mac;
            } else {
                r.dst_mac = p.src_mac;
            }
        } else {
            r.dst_iat_sum_us += std::max<std::int64_t>(0, p.ts_us - r.last_ts_dst);
            ++r.dst_iat_count;
        }
        r.last_ts_dst = r.dst_pkts == 0 ? p.ts_us : std::max(r.last_ts_dst, p.ts_us);
        ++r.dst_pkts;
        r.dst_bytes += p.wire_len;
        r.dst_flags |= flags;
        r.dst_gap_bytes += track_sequence(e.next_seq[1], p);
        e.seen_responder = true;
    }
}

std::vector<FlowRecord> FlowTable::drain_closed()
{
    std::sort(closed_.begin(), closed_.end(), [](const Closed& a, const Closed& b) {
        if (a.record.start_us != b.record.start_us) return a.record.start_us < b.record.start_us;
        return a.flow_id < b.flow_id;
    });
    std::vector<FlowRecord> out;
    out.reserve(closed_.size());
    for (auto& c : closed_) {
        c.record.seq = next_seq_++;
        out.push_back(std::move(c.record));
    }
    closed_.clear();
    return out;
}

std::vector<FlowRecord> FlowTable::flush_interval()
{
    const std::int64_t now = newest_us_;
    for (auto it = flows_.begin(); it != flows_.end();) {
        Entry& e = it->second;
        const bool idle = now - e.last_seen_us >= config_.interval_us;
        const bool spanned = config_.interval_mode == IntervalMode::status && e.record.packets() > 0 &&
                             now - e.record.start_us >= config_.interval_us;
        if (idle || spanned) close_record(e);
        if (idle) {
            it = flows_.erase(it);
        } else {
            ++it;
        }
    }
    return drain_closed();
}

std::vector<FlowRecord> FlowTable::finalize()
{
    for (auto& [tk, e] : flows_) close_record(e);
    flows_.clear();
    return drain_closed();
}

std::vector<AggregatedFlow> aggregate_by_flow_id(std::span<const FlowRecord> records)
{
    std::vector<AggregatedFlow> flows;
    std::unordered_map<std::string, std::size_t> index;
    for (const FlowRecord& rec : records) {
        std::string id = rec.key.flow_id();
        auto [it, inserted] = index.try_emplace(id, flows.size());
        if (inserted) {
            AggregatedFlow f;
            f.flow_id = std::move(id);
            f.key = rec.key;
            flows.push_back(std::move(f));
        }
        AggregatedFlow& f = flows[it->second];
        f.records.push_back(rec.key == f.key ? rec : rec.reversed());
    }

    for (AggregatedFlow& f : flows) {
        f.start_us = f.records.front().start_us;
        f.last_us = f.records.front().last_us;
        double sum = 0;
        f.dur_min = f.records.front().duration();
        f.dur_max = f.dur_min;
        for (const FlowRecord& r : f.records) {
            f.start_us = std::min(f.start_us, r.start_us);
            f.last_us = std::max(f.last_us, r.last_us);
            f.src_pkts += r.src_pkts;
            f.dst_pkts += r.dst_pkts;
            f.src_bytes += r.src_bytes;
            f.dst_bytes += r.dst_bytes;
            f.src_iat_sum_us += r.src_iat_sum_us;
            f.dst_iat_sum_us += r.dst_iat_sum_us;
            f.src_iat_count += r.src_iat_count;
            f.dst_iat_count += r.dst_iat_count;
            f.src_gap_bytes += r.src_gap_bytes;
            f.dst_gap_bytes += r.dst_gap_bytes;
            f.src_flags |= r.src_flags;
            f.dst_flags |= r.dst_flags;
            const double d = r.duration();
            sum += d;
            f.dur_min = std::min(f.dur_min, d);
            f.dur_max = std::max(f.dur_max, d);
        }
        const auto n = static_cast<double>(f.records.size());
        f.dur_sum = sum;
        f.dur_mean = sum / n;
        double sq = 0;
        for (const FlowRecord& r : f.records) {
            const double dev = r.duration() - f.dur_mean;
            sq += dev * dev;
        }
        f.dur_stddev = std::sqrt(sq / n);
        // Guard the ordering invariant against last-bit rounding in the mean.
        f.dur_mean = std::clamp(f.dur_mean, f.dur_min, f.dur_max);
    }
    return flows;
}

WindowSegmenter::WindowSegmenter(std::size_t window_size) : window_size_(window_size)
{
    if (window_size_ == 0) throw std::invalid_argument("window size must be >= 1");
    pending_.reserve(window_size_);
}

PacketWindow WindowSegmenter::take(bool partial)
{
    PacketWindow w;
    w.window_index = next_index_++;
    w.partial = partial;
    w.start_us = pending_.front().ts_us;
    w.end_us = pending_.front().ts_us;
    for (const Packet& p : pending_) {
        w.start_us = std::min(w.start_us, p.ts_us);
        w.end_us = std::max(w.end_us, p.ts_us);
    }
    w.packets = std::move(pending_);
    pending_ = {};
    pending_.reserve(window_size_);
    return w;
}

std::optional<PacketWindow> WindowSegmenter::push(const Packet& p)
{
    pending_.push_back(p);
    if (pending_.size() < window_size_) return std::nullopt;
    return take(false);
}

std::optional<PacketWindow> WindowSegmenter::finish()
{
    if (pending_.empty()) return std::nullopt;
    return take(true);
}

std::vector<PacketWindow> window_segment(std::span<const Packet> packets, std::size_t window_size)
{
    WindowSegmenter seg(window_size);
    std::vector<PacketWindow> out;
    out.reserve((packets.size() + window_size - 1) / window_size);
    for (const Packet& p : packets) {
        if (auto w = seg.push(p)) out.push_back(std::move(*w));
    }
    if (auto w = seg.finish()) out.push_back(std::move(*w));
    return out;
}

}  // namespace flowforge
