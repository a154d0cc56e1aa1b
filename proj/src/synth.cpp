#include "flowforge/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <queue>
#include <random>
#include <sstream>

#include <json.hpp>

#include "flowforge/csv.hpp"
#include "flowforge/flow.hpp"
#include "flowforge/labeller.hpp"

namespace flowforge {

namespace {

constexpr std::size_t kMinFrame = 60;

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Uniform in [0, 1) from the top 53 bits; avoids std distributions, whose
/// output differs between standard libraries.
double unit(std::mt19937_64& rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::uint64_t below(std::mt19937_64& rng, std::uint64_t n)
{
    return n ? rng() % n : 0;
}

void put16(std::vector<std::uint8_t>& b, std::size_t at, std::uint16_t v)
{
    b[at] = static_cast<std::uint8_t>(v >> 8);
    b[at + 1] = static_cast<std::uint8_t>(v);
}

void put32(std::vector<std::uint8_t>& b, std::size_t at, std::uint32_t v)
{
    put16(b, at, static_cast<std::uint16_t>(v >> 16));
    put16(b, at + 2, static_cast<std::uint16_t>(v));
}

std::uint16_t ipv4_checksum(const std::uint8_t* hdr)
{
    std::uint32_t sum = 0;
    for (int i = 0; i < 20; i += 2) sum += (std::uint32_t{hdr[i]} << 8) | hdr[i + 1];
    while (sum >> 16) sum = (sum & 0xffff) + (sum >> 16);
    return static_cast<std::uint16_t>(~sum);
}

struct Segment {
    bool from_src = true;
    std::uint8_t flags = 0;
    std::uint32_t seq = 0;
    std::uint32_t ack = 0;
    std::uint32_t payload = 0;
};

std::vector<std::uint8_t> build_frame(const Conversation& c, const Segment& s, std::uint16_t ip_id)
{
    const bool v6 = c.src.family() == IpAddress::Family::v6;
    const std::size_t ip_len = v6 ? 40 : 20;
    std::size_t l4_len = 0;
    std::uint8_t proto = c.proto;
    if (c.proto == kProtoTcp) {
        l4_len = 20;
    } else if (c.proto == kProtoUdp || c.proto == kProtoIcmp || c.proto == kProtoIcmpV6) {
        l4_len = 8;
        if (c.proto == kProtoIcmp && v6) proto = kProtoIcmpV6;
    }
    const std::size_t len = 14 + ip_len + l4_len + s.payload;
    std::vector<std::uint8_t> f(std::max(len, kMinFrame), 0);

    const MacAddress& smac = s.from_src ? c.src_mac : c.dst_mac;
    const MacAddress& dmac = s.from_src ? c.dst_mac : c.src_mac;
    std::copy(dmac.begin(), dmac.end(), f.begin());
    std::copy(smac.begin(), smac.end(), f.begin() + 6);
    put16(f, 12, v6 ? 0x86dd : 0x0800);

    const IpAddress& sa = s.from_src ? c.src : c.dst;
    const IpAddress& da = s.from_src ? c.dst : c.src;
    const std::size_t ip = 14;
    if (v6) {
        f[ip] = 0x60;
        put16(f, ip + 4, static_cast<std::uint16_t>(l4_len + s.payload));
        f[ip + 6] = proto;
        f[ip + 7] = 64;
        std::copy_n(sa.bytes().begin(), 16, f.begin() + ip + 8);
        std::copy_n(da.bytes().begin(), 16, f.begin() + ip + 24);
    } else {
        f[ip] = 0x45;
        put16(f, ip + 2, static_cast<std::uint16_t>(ip_len + l4_len + s.payload));
        put16(f, ip + 4, ip_id);
        put16(f, ip + 6, 0x4000);
        f[ip + 8] = 64;
        f[ip + 9] = proto;
        std::copy_n(sa.bytes().begin(), 4, f.begin() + ip + 12);
        std::copy_n(da.bytes().begin(), 4, f.begin() + ip + 16);
        put16(f, ip + 10, ipv4_checksum(&f[ip]));
    }

    const std::size_t l4 = ip + ip_len;
    const std::uint16_t sp = s.from_src ? c.sport : c.dport;
    const std::uint16_t dp = s.from_src ? c.dport : c.sport;
    if (c.proto == kProtoTcp) {
        put16(f, l4, sp);
        put16(f, l4 + 2, dp);
        put32(f, l4 + 4, s.seq);
        put32(f, l4 + 8, s.ack);
        f[l4 + 12] = 5 << 4;
        f[l4 + 13] = s.flags;
        put16(f, l4 + 14, 65535);
    } else if (c.proto == kProtoUdp) {
        put16(f, l4, sp);
        put16(f, l4 + 2, dp);
        put16(f, l4 + 4, static_cast<std::uint16_t>(8 + s.payload));
    } else if (l4_len == 8) {
        if (v6) {
            f[l4] = s.from_src ? 128 : 129;
        } else {
            f[l4] = s.from_src ? 8 : 0;
        }
        put16(f, l4 + 4, ip_id);
    }
    for (std::size_t i = 0; i < s.payload; ++i) f[l4 + l4_len + i] = static_cast<std::uint8_t>('a' + i % 26);
    return f;
}

std::vector<std::uint8_t> build_arp(std::uint32_t k)
{
    std::vector<std::uint8_t> f(kMinFrame, 0);
    std::fill_n(f.begin(), 6, 0xff);
    f[6] = 0x02;
    f[11] = static_cast<std::uint8_t>(k);
    put16(f, 12, 0x0806);
    put16(f, 14, 1);       // hardware type
    put16(f, 16, 0x0800);  // protocol type
    f[18] = 6;
    f[19] = 4;
    put16(f, 20, 1);  // request
    return f;
}

/// Generates one conversation's packets in time order.
class ConversationGen {
public:
    ConversationGen(const Conversation& c, std::uint64_t seed, double base_time_s)
        : conv_(c), rng_(seed)
    {
        ts_us_ = std::llround((base_time_s + c.start_s) * 1e6);
        mean_us_ = std::llround(c.mean_gap_s * 1e6);
        jitter_us_ = std::llround(c.jitter_s * 1e6);
        next_seq_[0] = static_cast<std::uint32_t>(rng_());
        next_seq_[1] = static_cast<std::uint32_t>(rng_());
    }

    bool done() const { return index_ >= conv_.packets; }
    std::int64_t peek_ts_us() const { return ts_us_; }

    /// Emits the next packet and accounts it in `truth`.
    SynthPacket emit(TruthFlow& truth)
    {
        Segment s;
        const std::uint32_t i = index_++;
        const bool tcp = conv_.proto == kProtoTcp;
        if (i == 0) {
            s.from_src = true;
        } else if (tcp && i == 1) {
            s.from_src = false;
        } else {
            s.from_src = unit(rng_) >= conv_.reply_ratio;
        }
        s.payload = conv_.payload;
        if (tcp) {
            const bool last = conv_.packets >= 3 && i + 1 == conv_.packets;
            if (i == 0) {
                s.flags = tcp_flag::syn;
                s.payload = 0;
            } else if (i == 1) {
                s.flags = tcp_flag::syn | tcp_flag::ack;
                s.payload = 0;
            } else if (last) {
                s.flags = tcp_flag::fin | tcp_flag::ack;
                s.payload = 0;
            } else {
                s.flags = tcp_flag::ack | (s.payload ? tcp_flag::psh : 0);
            }
            const int d = s.from_src ? 0 : 1;
            if (s.payload && conv_.loss > 0 && unit(rng_) < conv_.loss) {
                next_seq_[d] += s.payload;
                truth.gap_bytes += s.payload;
            }
            s.seq = next_seq_[d];
            s.ack = (s.flags & tcp_flag::ack) ? next_seq_[1 - d] : 0;
            next_seq_[d] += s.payload + ((s.flags & tcp_flag::syn) ? 1 : 0) + ((s.flags & tcp_flag::fin) ? 1 : 0);
        }
        SynthPacket p;
        p.ts_ns = ts_us_ * 1000;
        p.frame = build_frame(conv_, s, static_cast<std::uint16_t>(i));
        if (truth.packets == 0) truth.first_us = ts_us_;
        truth.last_us = ts_us_;
        ++truth.packets;
        truth.bytes += p.frame.size();

        std::int64_t gap = mean_us_;
        if (jitter_us_ > 0) gap += static_cast<std::int64_t>(std::floor((2 * unit(rng_) - 1) * static_cast<double>(jitter_us_)));
        ts_us_ += std::max<std::int64_t>(0, gap);
        return p;
    }

private:
    const Conversation& conv_;
    std::mt19937_64 rng_;
    std::uint32_t index_ = 0;
    std::int64_t ts_us_ = 0;
    std::int64_t mean_us_ = 0;
    std::int64_t jitter_us_ = 0;
    std::uint32_t next_seq_[2] = {};
};

FlowKey conversation_key(const Conversation& c)
{
    std::uint8_t proto = c.proto;
    if (proto == kProtoIcmp && c.src.family() == IpAddress::Family::v6) proto = kProtoIcmpV6;
    const bool ports = proto == kProtoTcp || proto == kProtoUdp;
    return FlowKey{c.src, c.dst, ports ? c.sport : std::uint16_t{0}, ports ? c.dport : std::uint16_t{0}, proto};
}

}  // namespace

struct ScenarioStream::Impl {
    Scenario scenario;
    std::vector<ConversationGen> gens;
    std::vector<TruthFlow> per_conv;
    std::uint32_t arp_emitted = 0;
    std::int64_t arp_base_us = 0;

    using Item = std::pair<std::int64_t, std::size_t>;  // (ts_us, stream index)
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
};

ScenarioStream::ScenarioStream(const Scenario& scenario) : impl_(std::make_unique<Impl>())
{
    validate(scenario);
    impl_->scenario = scenario;
    const auto& convs = impl_->scenario.conversations;
    impl_->gens.reserve(convs.size());
    impl_->per_conv.resize(convs.size());
    for (std::size_t i = 0; i < convs.size(); ++i) {
        impl_->gens.emplace_back(convs[i], splitmix64(scenario.seed ^ splitmix64(i + 1)), scenario.base_time_s);
        const FlowKey key = conversation_key(convs[i]);
        TruthFlow& t = impl_->per_conv[i];
        t.flow_id = key.flow_id();
        t.src_addr = key.initiator_addr.to_string();
        t.dst_addr = key.responder_addr.to_string();
        t.sport = key.initiator_port;
        t.dport = key.responder_port;
        t.proto = protocol_name(key.proto);
        t.label = convs[i].label;
        if (!impl_->gens.back().done()) impl_->heap.emplace(impl_->gens.back().peek_ts_us(), i);
    }
    impl_->arp_base_us = std::llround(scenario.base_time_s * 1e6);
    if (scenario.arp_frames) impl_->heap.emplace(impl_->arp_base_us, convs.size());
}

ScenarioStream::~ScenarioStream() = default;
ScenarioStream::ScenarioStream(ScenarioStream&&) noexcept = default;
ScenarioStream& ScenarioStream::operator=(ScenarioStream&&) noexcept = default;

std::optional<SynthPacket> ScenarioStream::next()
{
    auto& im = *impl_;
    if (im.heap.empty()) return std::nullopt;
    const auto [ts, idx] = im.heap.top();
    im.heap.pop();
    if (idx == im.gens.size()) {
        SynthPacket p;
        p.ts_ns = ts * 1000;
        p.frame = build_arp(im.arp_emitted);
        p.is_ip = false;
        if (++im.arp_emitted < im.scenario.arp_frames) im.heap.emplace(ts + 500'000, idx);
        return p;
    }
    ConversationGen& g = im.gens[idx];
    SynthPacket p = g.emit(im.per_conv[idx]);
    if (!g.done()) im.heap.emplace(g.peek_ts_us(), idx);
    return p;
}

std::vector<TruthFlow> ScenarioStream::truth() const
{
    std::map<std::string, TruthFlow> merged;
    for (const TruthFlow& t : impl_->per_conv) {
        if (t.packets == 0) continue;
        auto [it, inserted] = merged.try_emplace(t.flow_id, t);
        if (inserted) continue;
        TruthFlow& m = it->second;
        if (t.first_us < m.first_us) {
            m.src_addr = t.src_addr;
            m.dst_addr = t.dst_addr;
            m.sport = t.sport;
            m.dport = t.dport;
            m.label = t.label;
        }
        m.packets += t.packets;
        m.bytes += t.bytes;
        m.gap_bytes += t.gap_bytes;
        m.first_us = std::min(m.first_us, t.first_us);
        m.last_us = std::max(m.last_us, t.last_us);
    }
    std::vector<TruthFlow> out;
    out.reserve(merged.size());
    for (auto& [id, t] : merged) out.push_back(std::move(t));
    std::stable_sort(out.begin(), out.end(),
                     [](const TruthFlow& a, const TruthFlow& b) { return a.first_us < b.first_us; });
    return out;
}

void validate(const Scenario& s)
{
    if (s.snaplen < 64) throw ScenarioError("snaplen must be >= 64");
    if (!std::isfinite(s.base_time_s) || s.base_time_s < 0 || s.base_time_s > 4e9)
        throw ScenarioError("base_time must be within [0, 4e9]");
    for (std::size_t i = 0; i < s.conversations.size(); ++i) {
        const Conversation& c = s.conversations[i];
        const std::string at = "conversation " + std::to_string(i) + ": ";
        if (c.src.family() == IpAddress::Family::none || c.dst.family() == IpAddress::Family::none)
            throw ScenarioError(at + "src and dst addresses are required");
        if (c.src.family() != c.dst.family()) throw ScenarioError(at + "src and dst must share an address family");
        if (c.proto != kProtoTcp && c.proto != kProtoUdp && c.proto != kProtoIcmp && c.proto != kProtoIcmpV6)
            throw ScenarioError(at + "proto must be tcp, udp or icmp");
        if (c.packets == 0) throw ScenarioError(at + "packets must be >= 1");
        if (!(c.mean_gap_s >= 0) || !std::isfinite(c.mean_gap_s)) throw ScenarioError(at + "mean_gap must be >= 0");
        if (!(c.jitter_s >= 0) || !std::isfinite(c.jitter_s)) throw ScenarioError(at + "jitter must be >= 0");
        if (!(c.start_s >= 0) || !std::isfinite(c.start_s)) throw ScenarioError(at + "start must be >= 0");
        if (!(c.reply_ratio >= 0 && c.reply_ratio <= 1)) throw ScenarioError(at + "reply_ratio must be in [0, 1]");
        if (!(c.loss >= 0 && c.loss < 1)) throw ScenarioError(at + "loss must be in [0, 1)");
        if (c.payload > 1400) throw ScenarioError(at + "payload must be <= 1400 bytes");
        if (c.label.empty()) throw ScenarioError(at + "label must be non-empty");
    }
}

Scenario parse_scenario(const std::string& json_text)
{
    using nlohmann::json;
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ScenarioError(std::string("invalid scenario JSON: ") + e.what());
    }
    try {
        Scenario s;
        s.seed = doc.value("seed", std::uint64_t{1});
        s.base_time_s = doc.value("base_time", s.base_time_s);
        s.snaplen = doc.value("snaplen", s.snaplen);
        s.arp_frames = doc.value("arp_frames", s.arp_frames);
        const std::string res = doc.value("resolution", std::string("us"));
        if (res == "ns") {
            s.resolution = TimestampResolution::nano;
        } else if (res != "us") {
            throw ScenarioError("resolution must be \"us\" or \"ns\"");
        }
        s.big_endian = doc.value("big_endian", false);
        if (!doc.contains("conversations") || !doc["conversations"].is_array())
            throw ScenarioError("scenario needs a \"conversations\" array");
        for (const json& j : doc["conversations"]) {
            Conversation c;
            const auto src = IpAddress::parse(j.at("src").get<std::string>());
            const auto dst = IpAddress::parse(j.at("dst").get<std::string>());
            if (!src || !dst) throw ScenarioError("bad src/dst address");
            c.src = *src;
            c.dst = *dst;
            c.sport = j.value("sport", std::uint16_t{0});
            c.dport = j.value("dport", std::uint16_t{0});
            const auto proto = parse_protocol(j.value("proto", std::string("tcp")));
            if (!proto) throw ScenarioError("bad proto");
            c.proto = *proto;
            c.packets = j.value("packets", c.packets);
            c.mean_gap_s = j.value("mean_gap", c.mean_gap_s);
            c.jitter_s = j.value("jitter", c.jitter_s);
            c.payload = j.value("payload", c.payload);
            c.start_s = j.value("start", c.start_s);
            c.reply_ratio = j.value("reply_ratio", c.reply_ratio);
            c.loss = j.value("loss", c.loss);
            c.label = j.value("label", c.label);
            if (j.contains("src_mac")) {
                auto m = parse_mac(j["src_mac"].get<std::string>());
                if (!m) throw ScenarioError("bad src_mac");
                c.src_mac = *m;
            }
            if (j.contains("dst_mac")) {
                auto m = parse_mac(j["dst_mac"].get<std::string>());
                if (!m) throw ScenarioError("bad dst_mac");
                c.dst_mac = *m;
            }
            s.conversations.push_back(std::move(c));
        }
        validate(s);
        return s;
    } catch (const json::exception& e) {
        throw ScenarioError(std::string("invalid scenario: ") + e.what());
    }
}

Scenario load_scenario(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ScenarioError("cannot open scenario: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

Scenario random_scenario(std::uint64_t seed, std::uint32_t max_packets)
{
    std::mt19937_64 rng(splitmix64(seed));
    Scenario s;
    s.seed = seed;
    s.arp_frames = static_cast<std::uint32_t>(below(rng, 20));
    const std::uint32_t n_conv = 1 + static_cast<std::uint32_t>(below(rng, 40));
    std::uint32_t budget = std::max<std::uint32_t>(max_packets, n_conv);
    static constexpr const char* kLabels[] = {"Benign", "DoS", "Scan", "Mirai"};
    static constexpr std::uint16_t kPorts[] = {80, 443, 53, 22, 8080, 23};
    for (std::uint32_t i = 0; i < n_conv && budget > 0; ++i) {
        Conversation c;
        const bool v6 = unit(rng) < 0.1;
        const auto host = [&]() {
            const auto h = static_cast<std::uint8_t>(1 + below(rng, 12));
            if (v6) {
                std::uint8_t raw[16] = {0xfd, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, h};
                return IpAddress::from_v6_bytes(raw);
            }
            return IpAddress::v4(0x0a000000u | h);
        };
        c.src = host();
        c.dst = host();
        const double p = unit(rng);
        c.proto = p < 0.5 ? kProtoTcp : (p < 0.85 ? kProtoUdp : kProtoIcmp);
        c.sport = static_cast<std::uint16_t>(1024 + below(rng, 60000));
        c.dport = unit(rng) < 0.7 ? kPorts[below(rng, 6)] : static_cast<std::uint16_t>(1 + below(rng, 65535));
        const std::uint32_t remaining_convs = n_conv - i;
        const std::uint32_t cap = std::max<std::uint32_t>(1, 2 * budget / remaining_convs);
        c.packets = 1 + static_cast<std::uint32_t>(below(rng, cap));
        c.packets = std::min(c.packets, budget);
        budget -= c.packets;
        c.mean_gap_s = std::pow(10.0, -3.0 + 4.3 * unit(rng));  // 1 ms .. ~20 s
        c.jitter_s = c.mean_gap_s * 0.9 * unit(rng);
        c.payload = static_cast<std::uint32_t>(below(rng, 1201));
        c.start_s = 200.0 * unit(rng);
        c.reply_ratio = unit(rng);
        c.loss = c.proto == kProtoTcp ? 0.1 * unit(rng) : 0.0;
        c.label = kLabels[below(rng, 4)];
        c.src_mac = {0x02, 0x00, 0x5e, 0x10, 0x00, static_cast<std::uint8_t>(c.src.bytes()[3] | c.src.bytes()[15])};
        c.dst_mac = {0x02, 0x00, 0x5e, 0x10, 0x00, static_cast<std::uint8_t>(c.dst.bytes()[3] | c.dst.bytes()[15])};
        s.conversations.push_back(std::move(c));
    }
    return s;
}

std::string truth_csv_header()
{
    return "flow_id,src_addr,dst_addr,sport,dport,proto,packets,bytes,gap_bytes,first_time,last_time,label";
}

GenOutputs gen_capture(const Scenario& scenario, const std::filesystem::path& capture_path)
{
    ScenarioStream stream(scenario);
    CaptureWriterOptions opts;
    opts.resolution = scenario.resolution;
    opts.big_endian = scenario.big_endian;
    opts.snaplen = scenario.snaplen;
    CaptureWriter writer(capture_path, opts);

    GenOutputs out;
    out.capture = capture_path;
    while (auto p = stream.next()) {
        writer.write(p->ts_ns, p->frame);
        ++out.total_frames;
        if (p->is_ip) ++out.ip_packets;
    }
    writer.close();
    out.truth = stream.truth();

    const auto dir = capture_path.parent_path();
    const std::string stem = capture_stem(capture_path.filename().string());
    out.truth_csv = dir / (stem + ".truth.csv");
    out.rules_csv = dir / (stem + ".rules.csv");

    auto fixed6 = [](std::int64_t us) {
        std::string s = std::to_string(us / 1'000'000) + ".";
        std::string frac = std::to_string(us % 1'000'000);
        return s + std::string(6 - frac.size(), '0') + frac;
    };
    {
        std::ofstream t(out.truth_csv, std::ios::binary);
        t << truth_csv_header() << '\n';
        for (const TruthFlow& f : out.truth) {
            t << csv::format_row({f.flow_id, f.src_addr, f.dst_addr, std::to_string(f.sport), std::to_string(f.dport),
                                  f.proto, std::to_string(f.packets), std::to_string(f.bytes),
                                  std::to_string(f.gap_bytes), fixed6(f.first_us), fixed6(f.last_us), f.label});
        }
        if (!t) throw ScenarioError("cannot write " + out.truth_csv.string());
    }
    {
        std::ofstream r(out.rules_csv, std::ios::binary);
        r << kRulesHeader << '\n';
        for (const TruthFlow& f : out.truth) {
            if (f.label == kDefaultLabel) continue;
            const bool ports = f.proto == "tcp" || f.proto == "udp";
            r << csv::format_row({f.src_addr, f.dst_addr, ports ? std::to_string(f.sport) : "*",
                                  ports ? std::to_string(f.dport) : "*", f.proto, "*", "*", f.label, "true"});
        }
        if (!r) throw ScenarioError("cannot write " + out.rules_csv.string());
    }
    return out;
}

}  // namespace flowforge
