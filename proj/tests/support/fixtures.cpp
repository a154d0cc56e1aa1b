#include "fixtures.hpp"

#include <stdlib.h>

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fftest {

Packet make_packet(double t_s, const std::string& src, const std::string& dst, std::uint16_t sport,
                   std::uint16_t dport, std::uint8_t proto, std::uint32_t wire_len, std::uint8_t tcp_flags)
{
    Packet p;
    p.ts_us = std::llround(t_s * 1e6);
    p.src_addr = *IpAddress::parse(src);
    p.dst_addr = *IpAddress::parse(dst);
    p.ip_version = p.src_addr.family() == IpAddress::Family::v6 ? 6 : 4;
    p.ethertype = p.ip_version == 6 ? 0x86dd : 0x0800;
    p.proto = proto;
    if (proto == kProtoTcp || proto == kProtoUdp) {
        p.sport = sport;
        p.dport = dport;
    }
    if (proto == kProtoTcp) {
        p.tcp_flags = tcp_flags;
        p.tcp_seq = 0;
    }
    p.wire_len = wire_len;
    p.cap_len = wire_len;
    p.src_mac = {0x02, 0, 0, 0, 0, 1};
    p.dst_mac = {0x02, 0, 0, 0, 0, 2};
    return p;
}

TempDir::TempDir()
{
    std::string tmpl = (std::filesystem::temp_directory_path() / "flowforge-test-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
}

TempDir::~TempDir()
{
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << contents;
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::vector<Packet> read_packets(const std::filesystem::path& path)
{
    CaptureReader reader(path);
    std::vector<Packet> out;
    while (auto item = reader.next())
        if (auto* p = std::get_if<Packet>(&*item)) out.push_back(std::move(*p));
    return out;
}

std::vector<Packet> scenario_packets(const Scenario& scenario)
{
    ScenarioStream stream(scenario);
    std::vector<Packet> out;
    while (auto sp = stream.next()) {
        const std::uint32_t wire = static_cast<std::uint32_t>(sp->frame.size());
        std::span<const std::uint8_t> frame(sp->frame);
        if (frame.size() > scenario.snaplen) frame = frame.first(scenario.snaplen);
        auto r = decode_ethernet_ip(frame, wire, sp->ts_ns / 1000);
        if (auto* p = std::get_if<Packet>(&r)) out.push_back(std::move(*p));
    }
    return out;
}

std::vector<FlowRecord> run_engine(std::span<const Packet> packets, const FlowConfig& config, std::int64_t sweep_us)
{
    FlowTable table(config);
    std::vector<FlowRecord> out;
    bool started = false;
    std::int64_t last_sweep = 0;
    for (const Packet& p : packets) {
        table.ingest(p);
        if (!started) {
            started = true;
            last_sweep = table.newest_ts_us();
        } else if (table.newest_ts_us() - last_sweep >= sweep_us) {
            auto batch = table.flush_interval();
            out.insert(out.end(), batch.begin(), batch.end());
            last_sweep = table.newest_ts_us();
        }
    }
    auto rest = table.finalize();
    out.insert(out.end(), rest.begin(), rest.end());
    return out;
}

}  // namespace fftest
