// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "fixtures.hpp"
#include "flowforge/exporter.hpp"
#include "oracles.hpp"

using namespace fftest;

namespace {

constexpr int kScenarioCount = 50;
constexpr std::uint32_t kScenarioMaxPackets = 10'000;
constexpr double kConservationBudgetS = 30.0;
constexpr double kStatTol = 1e-9;
constexpr double kIdentityRelTol = 1e-9;
constexpr double kTimeRoundTripAbs = 1e-6;
constexpr double kMinPacketsPerSecond = 100'000;
constexpr std::uint64_t kThroughputPackets = 1'000'000;
constexpr int kLabelSets = 20;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = true;
    std::string detail;

    void fail(const std::string& why)
    {
        if (pass) detail = why;
        pass = false;
    }
};

bool rel_close(double a, double b, double tol)
{
    const double scale = std::max({1.0, std::abs(a), std::abs(b)});
    return std::abs(a - b) <= tol * scale;
}

/// Scenario captures shared by several criteria, generated once.
struct Corpus {
    TempDir dir;
    std::vector<std::filesystem::path> captures;
    std::vector<std::vector<Packet>> packets;
    double gen_seconds = 0;

    Corpus()
    {
        const auto t0 = Clock::now();
        for (int seed = 1; seed <= kScenarioCount; ++seed) {
            const auto path = dir / ("s" + std::to_string(seed) + ".pcap");
            gen_capture(random_scenario(static_cast<std::uint64_t>(seed), kScenarioMaxPackets), path);
            captures.push_back(path);
        }
        gen_seconds = seconds_since(t0);
        for (const auto& c : captures) packets.push_back(read_packets(c));
    }
};

Outcome conservation(const Corpus& corpus)
{
    Outcome o;
    const auto t0 = Clock::now();
    std::uint64_t total_packets = 0;
    for (std::size_t i = 0; i < corpus.captures.size(); ++i) {
        std::uint64_t ip_packets = 0, wire = 0;
        {
            CaptureReader r(corpus.captures[i]);
            while (auto item = r.next()) {
                if (auto* p = std::get_if<Packet>(&*item)) {
                    ++ip_packets;
                    wire += p->wire_len;
                }
            }
        }
        ExportConfig cfg;
        cfg.inputs = {corpus.captures[i]};
        FileSummary fs;
        const auto rows = extract_rows(corpus.captures[i], cfg, {}, fs);
        std::uint64_t pkts = 0, bytes = 0;
        for (const auto& r : rows) {
            pkts += r.tot_pkts;
            bytes += r.tot_bytes;
        }
        total_packets += ip_packets;
        if (ip_packets > kScenarioMaxPackets) o.fail("scenario " + std::to_string(i + 1) + " exceeds packet budget");
        if (pkts != ip_packets)
            o.fail("scenario " + std::to_string(i + 1) + ": TotPkts " + std::to_string(pkts) + " vs " +
                   std::to_string(ip_packets) + " IP packets");
        if (bytes != wire)
            o.fail("scenario " + std::to_string(i + 1) + ": TotBytes " + std::to_string(bytes) + " vs wire " +
                   std::to_string(wire));
    }
    const double elapsed = seconds_since(t0) + corpus.gen_seconds;
    if (elapsed >= kConservationBudgetS) o.fail("took " + std::to_string(elapsed) + " s");
    if (o.pass)
        o.detail = std::to_string(corpus.captures.size()) + " captures, " + std::to_string(total_packets) +
                   " packets, " + std::to_string(elapsed).substr(0, 5) + " s including generation";
    return o;
}

Outcome oracle_equivalence(const Corpus& corpus)
{
    Outcome o;
    std::size_t flows = 0;
    for (double interval : {1.0, 5.0, 60.0}) {
        FlowConfig cfg;
        cfg.interval_us = std::llround(interval * 1e6);
        for (std::size_t i = 0; i < corpus.packets.size(); ++i) {
            const auto& pkts = corpus.packets[i];
            const auto expected = oracle_partition(pkts, cfg.interval_us);
            const auto actual = engine_partition(run_engine(pkts, cfg));
            const auto diff = diff_partitions(expected, actual);
            if (!diff.empty())
                o.fail("interval " + std::to_string(interval) + " scenario " + std::to_string(i + 1) + ": " + diff);
            // Every packet lands in exactly one oracle record.
            std::size_t covered = 0;
            for (const auto& [id, recs] : expected)
                for (const auto& r : recs) covered += r.packets.size();
            if (covered != pkts.size()) o.fail("oracle lost packets");
            flows += expected.size();
        }
    }
    if (o.pass) o.detail = "3 intervals x " + std::to_string(corpus.packets.size()) + " scenarios, " +
                           std::to_string(flows) + " flow partitions identical";
    return o;
}

Outcome interval_splitting()
{
    Outcome o;
    std::vector<Packet> pkts;
    for (double t : {0.0, 50.0, 70.0, 130.0}) pkts.push_back(make_packet(t, "10.0.0.1", "10.0.0.2", 1234, 80));
    FlowConfig cfg;
    cfg.interval_us = 60 * kMicrosPerSecond;
    const auto recs = run_engine(pkts, cfg);
    const std::pair<double, double> want[] = {{0, 50}, {70, 70}, {130, 130}};
    if (recs.size() != 3) {
        o.fail(std::to_string(recs.size()) + " records instead of 3");
        return o;
    }
    for (int i = 0; i < 3; ++i)
        if (recs[i].start_time() != want[i].first || recs[i].last_time() != want[i].second)
            o.fail("record " + std::to_string(i) + " covers [" + std::to_string(recs[i].start_time()) + "," +
                   std::to_string(recs[i].last_time()) + "]");
    if (!diff_partitions(oracle_partition(pkts, cfg.interval_us), engine_partition(recs)).empty())
        o.fail("disagrees with oracle");

    std::vector<Packet> two;
    for (double t : {0.0, 2.0, 70.0, 74.0}) two.push_back(make_packet(t, "10.0.0.1", "10.0.0.2", 1234, 80));
    const auto groups = aggregate_by_flow_id(run_engine(two, cfg));
    if (groups.size() != 1 || groups[0].records.size() != 2) {
        o.fail("durations {2,4} did not form one flow of two records");
        return o;
    }
    const auto f = features_from_flow(groups[0]);
    if (std::abs(f.mean - 3.0) > kStatTol) o.fail("Mean " + std::to_string(f.mean));
    if (std::abs(f.stddev - 1.0) > kStatTol) o.fail("StdDev " + std::to_string(f.stddev));
    if (o.pass) o.detail = "records [0,50] [70,70] [130,130]; Mean 3 StdDev 1";
    return o;
}

Outcome window_mode()
{
    Outcome o;
    TempDir dir;
    auto window_sizes = [&](std::uint32_t packets, std::size_t w) {
        Scenario s;
        s.seed = 5;
        Conversation c;
        c.src = *IpAddress::parse("10.0.0.1");
        c.dst = *IpAddress::parse("10.0.0.2");
        c.sport = 5000;
        c.dport = 53;
        c.proto = kProtoUdp;
        c.packets = packets;
        c.mean_gap_s = 0.01;
        s.conversations.push_back(c);
        s.arp_frames = 3;
        const auto path = dir / ("w" + std::to_string(packets) + ".pcap");
        gen_capture(s, path);
        ExportConfig cfg;
        cfg.mode = AggregationMode::window;
        cfg.window_size = w;
        FileSummary fs;
        std::vector<std::uint64_t> sizes;
        for (const auto& r : extract_rows(path, cfg, {}, fs)) sizes.push_back(r.tot_pkts);
        return sizes;
    };
    const auto big = window_sizes(1000, 100);
    if (big != std::vector<std::uint64_t>(10, 100)) o.fail("1000/100 gave " + std::to_string(big.size()) + " windows");
    const auto small = window_sizes(25, 10);
    if (small != std::vector<std::uint64_t>{10, 10, 5}) o.fail("25/10 sizes wrong");
    if (o.pass) o.detail = "1000/100 -> 10 windows; 25/10 -> (10,10,5)";
    return o;
}

Outcome feature_identities(const Corpus& corpus)
{
    Outcome o;
    std::uint64_t rows = 0, zero_dur = 0;
    auto finite_row = [](const FlowFeatures& f) {
        for (double v : {f.start_time, f.last_time, f.dur, f.mean, f.stddev, f.sum, f.min, f.max, f.rate, f.src_rate,
                         f.dst_rate, f.s_int_pkt, f.d_int_pkt})
            if (!std::isfinite(v) || v < 0) return false;
        return true;
    };
    for (std::size_t i = 0; i < corpus.packets.size(); ++i) {
        FlowConfig cfg;
        cfg.interval_us = 5 * kMicrosPerSecond;
        const auto recs = run_engine(corpus.packets[i], cfg);
        const auto groups = aggregate_by_flow_id(recs);
        // Rows follow the group's orientation; group.records are aligned to it.
        std::vector<std::pair<const FlowRecord*, const AggregatedFlow*>> aligned;
        for (const auto& g : groups)
            for (const auto& r : g.records) aligned.emplace_back(&r, &g);
        if (aligned.size() != recs.size()) o.fail("aggregation lost records");
        for (const auto& [rp, gp] : aligned) {
            const FlowRecord& r = *rp;
            const auto f = features_from_record(r, *gp);
            ++rows;
            const std::string where = "scenario " + std::to_string(i + 1) + " " + f.flow_id;
            if (!finite_row(f)) o.fail(where + ": non-finite or negative value");
            if (f.dur > 0) {
                if (!rel_close(f.rate * f.dur, static_cast<double>(f.tot_pkts - 1), kIdentityRelTol))
                    o.fail(where + ": rate*dur != TotPkts-1");
            } else {
                ++zero_dur;
                if (f.rate != 0 || f.src_rate != 0 || f.dst_rate != 0) o.fail(where + ": zero duration with rate");
            }
            if (!rel_close(f.s_int_pkt * static_cast<double>(r.src_iat_count) / 1000.0,
                           static_cast<double>(r.src_iat_sum_us) / 1e6, kIdentityRelTol))
                o.fail(where + ": SIntPkt identity");
            if (!rel_close(f.d_int_pkt * static_cast<double>(r.dst_iat_count) / 1000.0,
                           static_cast<double>(r.dst_iat_sum_us) / 1e6, kIdentityRelTol))
                o.fail(where + ": DIntPkt identity");
            if (r.src_iat_count == 0 && f.s_int_pkt != 0) o.fail(where + ": SIntPkt without gaps");
        }
        for (const auto& g : groups) {
            const auto f = features_from_flow(g);
            if (!finite_row(f)) o.fail("flow row non-finite");
            if (f.dur > 0 && !rel_close(f.rate * f.dur, static_cast<double>(f.tot_pkts - 1), kIdentityRelTol))
                o.fail("flow row rate identity");
        }
    }
    if (o.pass) o.detail = std::to_string(rows) + " rows (" + std::to_string(zero_dur) + " zero-duration)";
    return o;
}

Outcome labelling_oracle()
{
    Outcome o;
    std::uint64_t checked = 0;
    for (int set = 1; set <= kLabelSets; ++set) {
        std::mt19937_64 rng(static_cast<std::uint64_t>(set));
        const auto rules = random_rules(rng, 1 + rng() % 40);
        const auto flows = random_flows(rng, 500);
        for (const auto& f : flows) {
            ++checked;
            const auto got = match_flow(f, rules);
            const auto want = oracle_label(f, rules);
            if (got != want) o.fail("set " + std::to_string(set) + ": " + got + " vs " + want);
        }
        for (const auto& f : flows)
            if (match_flow(f, {}) != "Benign") o.fail("empty rules did not give Benign");
    }
    if (o.pass) o.detail = std::to_string(kLabelSets) + " sets, " + std::to_string(checked) + " flows";
    return o;
}

Outcome determinism_round_trip(const Corpus& corpus)
{
    Outcome o;
    TempDir dir;
    const std::string ident = "FlowID,Rank,StartTime,LastTime,Proto,SrcAddr,DstAddr,";
    const std::map<std::string, std::string> headers = {
        {"botiot", ident + "Sport,Dport,Dur,SrcBytes,DstBytes,SrcPkts,DstPkts,Mean,StdDev,Max,Min,Rate,Label"},
        {"iot23", ident + "Sport,Dport,Dur,SrcBytes,DstBytes,SrcPkts,DstPkts,SIntPkt,DIntPkt,SrcGap,DstGap,Label"},
        {"ciciot23", ident + "Sport,Dport,Dur,Max,Min,Rate,Mean,StdDev,Label"},
        {"full", ident + "Sport,Dport,Flgs,State,Seq,TotPkts,SrcPkts,DstPkts,TotBytes,SrcBytes,DstBytes,Dur,Mean,"
                         "StdDev,Sum,Min,Max,Rate,SrcRate,DstRate,SIntPkt,DIntPkt,SrcGap,DstGap,SrcMac,DstMac,"
                         "SrcOui,DstOui,Label"},
    };
    std::size_t files = 0;
    for (const auto& profile : all_profiles()) {
        std::string header;
        for (const auto& h : profile.header()) header += (header.empty() ? "" : ",") + h;
        if (headers.at(profile.name) != header) o.fail(profile.name + " header: " + header);

        for (std::size_t i = 0; i < 5; ++i) {
            ExportConfig cfg;
            cfg.inputs = {corpus.captures[i]};
            cfg.profile = profile.name;
            cfg.rules_path = corpus.captures[i].parent_path() / (corpus.captures[i].stem().string() + ".rules.csv");
            cfg.out_dir = dir / "a";
            const auto a = cmd_export(cfg);
            cfg.out_dir = dir / "b";
            const auto b = cmd_export(cfg);
            const auto bytes_a = read_file(a.files[0].output);
            if (bytes_a != read_file(b.files[0].output)) o.fail(profile.name + ": exports differ");
            if (bytes_a.rfind(header + "\n", 0) != 0) o.fail(profile.name + ": file header");
            if (bytes_a.find('\r') != std::string::npos) o.fail(profile.name + ": CR in output");

            FileSummary fs;
            const auto rows = extract_rows(corpus.captures[i], cfg, parse_rules(*cfg.rules_path).rules, fs);
            const auto back = read_csv(a.files[0].output, profile);
            if (back.size() != rows.size()) {
                o.fail(profile.name + ": row count after read");
                continue;
            }
            for (std::size_t k = 0; k < rows.size(); ++k) {
                if (std::abs(back[k].start_time - rows[k].start_time) > kTimeRoundTripAbs ||
                    std::abs(back[k].last_time - rows[k].last_time) > kTimeRoundTripAbs)
                    o.fail(profile.name + ": time drift on " + rows[k].flow_id);
                if (back[k].label != rows[k].label || back[k].flow_id != rows[k].flow_id)
                    o.fail(profile.name + ": identity columns changed");
            }
            std::ostringstream again;
            emit_csv(back, profile, again);
            if (again.str() != bytes_a) o.fail(profile.name + ": re-emit differs");
            ++files;
        }
    }
    if (o.pass) o.detail = std::to_string(files) + " exports byte-identical across runs; 4 headers verbatim";
    return o;
}

Outcome throughput()
{
    Outcome o;
    TempDir dir;
    Scenario s;
    s.seed = 2024;
    s.arp_frames = 100;
    constexpr int kConversations = 400;
    for (int i = 0; i < kConversations; ++i) {
        Conversation c;
        c.src = IpAddress::v4(0x0a000000u + 1 + static_cast<std::uint32_t>(i % 50));
        c.dst = IpAddress::v4(0x0a010000u + 1 + static_cast<std::uint32_t>(i % 7));
        c.sport = static_cast<std::uint16_t>(20000 + i);
        c.dport = static_cast<std::uint16_t>(i % 3 == 0 ? 53 : 443);
        c.proto = i % 3 == 0 ? kProtoUdp : kProtoTcp;
        c.packets = static_cast<std::uint32_t>(kThroughputPackets / kConversations);
        c.mean_gap_s = 0.05 + 0.001 * (i % 20);
        c.jitter_s = 0.01;
        c.payload = static_cast<std::uint32_t>(64 + (i * 37) % 1200);
        c.start_s = i * 0.25;
        s.conversations.push_back(c);
    }
    const auto path = dir / "big.pcap";
    const auto gen = gen_capture(s, path);

    ExportConfig cfg;
    cfg.inputs = {path};
    cfg.out_dir = dir / "out";
    cfg.jobs = 1;
    const auto t0 = Clock::now();
    const auto summary = cmd_export(cfg);
    const double elapsed = seconds_since(t0);
    const double pps = static_cast<double>(summary.files[0].ip_packets) / elapsed;
    if (summary.files[0].ip_packets != gen.ip_packets || gen.ip_packets != kThroughputPackets)
        o.fail("packet count mismatch");
    if (pps < kMinPacketsPerSecond) o.fail(std::to_string(static_cast<long long>(pps)) + " packets/s");
    char buf[160];
    std::snprintf(buf, sizeof buf, "%llu packets in %.2f s = %.0f packets/s, %llu rows",
                  static_cast<unsigned long long>(summary.files[0].ip_packets), elapsed, pps,
                  static_cast<unsigned long long>(summary.rows));
    if (o.pass) o.detail = buf;
    else o.detail += " (" + std::string(buf) + ")";
    return o;
}

}  // namespace

int main()
{
    int failures = 0;
    auto report = [&failures](const char* name, const std::function<Outcome()>& check) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o.fail(std::string("exception: ") + e.what());
        }
        std::cout << (o.pass ? "PASS" : "FAIL") << "  " << name << "  " << o.detail << std::endl;
        if (!o.pass) ++failures;
    };

    Corpus corpus;
    report("conservation", [&] { return conservation(corpus); });
    report("oracle-equivalence", [&] { return oracle_equivalence(corpus); });
    report("interval-splitting", [] { return interval_splitting(); });
    report("window-mode", [] { return window_mode(); });
    report("feature-identities", [&] { return feature_identities(corpus); });
    report("labelling-oracle", [] { return labelling_oracle(); });
    report("determinism-round-trip", [&] { return determinism_round_trip(corpus); });
    report("throughput", [] { return throughput(); });
    return failures == 0 ? 0 : 1;
}
