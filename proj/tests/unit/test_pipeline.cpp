#include <doctest.h>

#include <map>

#include "fixtures.hpp"
#include "flowforge/exporter.hpp"
#include "oracles.hpp"

using namespace fftest;

namespace {

const char* kOneTcp = R"({"seed": 7, "conversations": [
  {"src": "10.0.0.1", "dst": "10.0.0.2", "sport": 40000, "dport": 80, "proto": "tcp",
   "packets": 10, "mean_gap": 0.1, "payload": 200, "label": "DoS"}]})";

ExportConfig config_for(const TempDir& dir, const std::filesystem::path& input, const std::string& profile)
{
    ExportConfig c;
    c.inputs = {input};
    c.profile = profile;
    c.out_dir = dir / "out";
    return c;
}

struct Totals {
    std::uint64_t pkts = 0;
    std::uint64_t bytes = 0;
    std::uint64_t gap = 0;
};

std::map<std::string, Totals> totals_by_flow(const std::vector<FlowFeatures>& rows)
{
    std::map<std::string, Totals> out;
    for (const auto& r : rows) {
        auto& t = out[r.flow_id];
        t.pkts += r.tot_pkts;
        t.bytes += r.tot_bytes;
        t.gap += r.src_gap + r.dst_gap;
    }
    return out;
}

}  // namespace

TEST_CASE("one TCP conversation exports as one flow of ten packets")
{
    TempDir dir;
    const auto gen = gen_capture(parse_scenario(kOneTcp), dir / "one.pcap");
    CHECK(gen.ip_packets == 10);
    REQUIRE(gen.truth.size() == 1);
    CHECK(gen.truth[0].packets == 10);
    CHECK(gen.truth[0].label == "DoS");

    auto cfg = config_for(dir, gen.capture, "full");
    const auto summary = cmd_export(cfg);
    REQUIRE(summary.files.size() == 1);
    CHECK(summary.files[0].output == dir / "out" / "one.full.csv");
    const auto rows = read_csv(summary.files[0].output, profile_by_name("full"));
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].tot_pkts == 10);
    CHECK(rows[0].tot_bytes == gen.truth[0].bytes);
    CHECK(rows[0].state == "FIN");
    CHECK(rows[0].flgs.substr(0, 2) == "SA");
    CHECK(summary.rows == stats_report(summary.files[0].output).total);
}

TEST_CASE("generator output is byte identical for a fixed seed")
{
    TempDir dir;
    const auto s = random_scenario(11, 3000);
    gen_capture(s, dir / "a.pcap");
    gen_capture(s, dir / "b.pcap");
    CHECK(read_file(dir / "a.pcap") == read_file(dir / "b.pcap"));
    CHECK(read_file(dir / "a.truth.csv") == read_file(dir / "b.truth.csv"));
    CHECK(read_file(dir / "a.rules.csv") == read_file(dir / "b.rules.csv"));
    const auto other = random_scenario(12, 3000);
    gen_capture(other, dir / "c.pcap");
    CHECK(read_file(dir / "a.pcap") != read_file(dir / "c.pcap"));
}

TEST_CASE("two conversations sharing endpoints but not ports are two flows")
{
    TempDir dir;
    auto s = parse_scenario(kOneTcp);
    auto c = s.conversations[0];
    c.sport = 40001;
    s.conversations.push_back(c);
    const auto gen = gen_capture(s, dir / "two.pcap");
    CHECK(gen.truth.size() == 2);
    const auto summary = cmd_export(config_for(dir, gen.capture, "botiot"));
    CHECK(summary.rows == 2);
}

TEST_CASE("sidecar truth matches exported per-flow totals")
{
    TempDir dir;
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        const auto gen = gen_capture(random_scenario(seed, 4000), dir / ("r" + std::to_string(seed) + ".pcap"));
        auto cfg = config_for(dir, gen.capture, "full");
        cfg.interval_s = 5;
        const auto summary = cmd_export(cfg);
        const auto totals = totals_by_flow(read_csv(summary.files[0].output, profile_by_name("full")));
        REQUIRE(totals.size() == gen.truth.size());
        for (const auto& t : gen.truth) {
            auto it = totals.find(t.flow_id);
            REQUIRE_MESSAGE(it != totals.end(), t.flow_id);
            CHECK(it->second.pkts == t.packets);
            CHECK(it->second.bytes == t.bytes);
        }
        CHECK(summary.files[0].ip_packets == gen.ip_packets);
        CHECK(summary.files[0].decode_skips == gen.total_frames - gen.ip_packets);
    }
}

TEST_CASE("simulated loss shows up as gap bytes")
{
    TempDir dir;
    auto s = parse_scenario(kOneTcp);
    s.conversations[0].packets = 200;
    s.conversations[0].loss = 0.2;
    const auto gen = gen_capture(s, dir / "loss.pcap");
    REQUIRE(gen.truth.size() == 1);
    CHECK(gen.truth[0].gap_bytes > 0);
    const auto summary = cmd_export(config_for(dir, gen.capture, "iot23"));
    const auto rows = read_csv(summary.files[0].output, profile_by_name("iot23"));
    CHECK(totals_by_flow(rows).at(gen.truth[0].flow_id).gap == gen.truth[0].gap_bytes);
}

TEST_CASE("window mode over 25 packets gives three rows")
{
    TempDir dir;
    auto s = parse_scenario(kOneTcp);
    s.conversations[0].packets = 25;
    const auto gen = gen_capture(s, dir / "w.pcap");
    auto cfg = config_for(dir, gen.capture, "ciciot23");
    cfg.mode = AggregationMode::window;
    cfg.window_size = 10;
    const auto summary = cmd_export(cfg);
    const auto rows = read_csv(summary.files[0].output, profile_by_name("ciciot23"));
    REQUIRE(rows.size() == 3);
    CHECK(rows[2].flow_id == "window-2");
}

TEST_CASE("export errors carry exit codes")
{
    TempDir dir;
    ExportConfig cfg;
    cfg.out_dir = dir.path();
    cfg.inputs = {dir / "missing.pcap"};
    try {
        cmd_export(cfg);
        FAIL("expected an error");
    } catch (const ExportError& e) {
        CHECK(e.code() == exit_code::input);
        CHECK(std::string(e.what()).find("missing.pcap") != std::string::npos);
    }

    write_file(dir / "bad.pcap", "garbage that is not a capture");
    cfg.inputs = {dir / "bad.pcap"};
    try {
        cmd_export(cfg);
        FAIL("expected an error");
    } catch (const ExportError& e) {
        CHECK(e.code() == exit_code::input);
    }
    CHECK(!std::filesystem::exists(dir / "bad.botiot.csv"));

    cfg.interval_s = 0;
    CHECK_THROWS_AS(cfg.validate(), ExportError);
    cfg.interval_s = 1;
    cfg.profile = "nope";
    CHECK_THROWS_AS(cfg.validate(), ExportError);
}

TEST_CASE("export is deterministic and handles several inputs")
{
    TempDir dir;
    std::vector<std::filesystem::path> inputs;
    for (std::uint64_t seed : {3, 4, 5}) {
        const auto p = dir / ("cap" + std::to_string(seed) + ".pcap");
        gen_capture(random_scenario(seed, 2000), p);
        inputs.push_back(p);
    }
    ExportConfig cfg;
    cfg.inputs = inputs;
    cfg.out_dir = dir / "x";
    cfg.jobs = 3;
    cfg.rules_path = dir / "cap3.rules.csv";
    const auto a = cmd_export(cfg);
    std::vector<std::string> first;
    for (const auto& f : a.files) first.push_back(read_file(f.output));
    cfg.jobs = 1;
    const auto b = cmd_export(cfg);
    for (std::size_t i = 0; i < b.files.size(); ++i) CHECK(read_file(b.files[i].output) == first[i]);
    CHECK(a.to_json_line() == b.to_json_line());
    CHECK(a.to_json_line().find('\n') == std::string::npos);
}

TEST_CASE("capture label map labels every row")
{
    TempDir dir;
    const auto gen = gen_capture(parse_scenario(kOneTcp), dir / "DDoS-SYN_Flood.pcap");
    write_file(dir / "map.csv", "capture,label\nDDoS-SYN_Flood,DDoS SYN Flood\n");
    auto cfg = config_for(dir, gen.capture, "ciciot23");
    cfg.capture_label_map = dir / "map.csv";
    const auto summary = cmd_export(cfg);
    for (const auto& r : read_csv(summary.files[0].output, profile_by_name("ciciot23")))
        CHECK(r.label == "DDoS SYN Flood");
}

TEST_CASE("relabelling an exported file")
{
    TempDir dir;
    const auto gen = gen_capture(random_scenario(21, 3000), dir / "l.pcap");
    const auto summary = cmd_export(config_for(dir, gen.capture, "botiot"));
    const auto csv = summary.files[0].output;
    const auto& profile = profile_by_name("botiot");

    write_file(dir / "empty.csv", std::string(kRulesHeader) + "\n");
    auto res = cmd_label(csv, dir / "empty.csv", dir / "benign.csv");
    CHECK(res.profile == "botiot");
    for (const auto& r : read_csv(dir / "benign.csv", profile)) CHECK(r.label == "Benign");

    write_file(dir / "all.csv", std::string(kRulesHeader) + "\n*,*,*,*,*,*,*,X,false\n");
    cmd_label(csv, dir / "all.csv", dir / "x.csv");
    for (const auto& r : read_csv(dir / "x.csv", profile)) CHECK(r.label == "X");

    // relabelling with the generator's rules: counts equal the oracle's
    const auto rules = parse_rules(gen.rules_csv).rules;
    res = cmd_label(dir / "benign.csv", gen.rules_csv, dir / "truth.csv");
    std::map<std::string, std::uint64_t> expected;
    for (const auto& r : read_csv(csv, profile)) ++expected[oracle_label(r, rules)];
    std::map<std::string, std::uint64_t> actual;
    for (const auto& c : res.classes.rows) actual[c.label] = c.count;
    CHECK(actual == expected);

    // same rules at export time give the same file
    auto cfg = config_for(dir, gen.capture, "botiot");
    cfg.rules_path = gen.rules_csv;
    cfg.out_dir = dir / "withrules";
    const auto labelled = cmd_export(cfg);
    CHECK(read_file(labelled.files[0].output) == read_file(dir / "truth.csv"));

    write_file(dir / "notprofile.csv", "a,b\n1,2\n");
    CHECK_THROWS_AS(cmd_label(dir / "notprofile.csv", dir / "empty.csv", dir / "o.csv"), ExportError);
}

TEST_CASE("scenario validation")
{
    CHECK_THROWS_AS(parse_scenario("{"), ScenarioError);
    CHECK_THROWS_AS(parse_scenario(R"({"conversations": [{"src": "10.0.0.1"}]})"), ScenarioError);
    CHECK_THROWS_AS(parse_scenario(R"({"conversations": [{"src": "10.0.0.1", "dst": "fd00::1"}]})"),
                    ScenarioError);
    CHECK_THROWS_AS(
        parse_scenario(R"({"conversations": [{"src": "10.0.0.1", "dst": "10.0.0.2", "packets": 0}]})"),
        ScenarioError);
    CHECK_THROWS_AS(
        parse_scenario(R"({"conversations": [{"src": "10.0.0.1", "dst": "10.0.0.2", "proto": "sctp"}]})"),
        ScenarioError);
    CHECK_NOTHROW(parse_scenario(R"({"conversations": []})"));
}

TEST_CASE("nanosecond big-endian scenario decodes to the same flows")
{
    TempDir dir;
    auto s = random_scenario(8, 1500);
    const auto a = gen_capture(s, dir / "us.pcap");
    s.resolution = TimestampResolution::nano;
    s.big_endian = true;
    const auto b = gen_capture(s, dir / "ns.pcap");
    CHECK(read_packets(dir / "us.pcap") == read_packets(dir / "ns.pcap"));
    CHECK(read_file(a.truth_csv) == read_file(b.truth_csv));
}
