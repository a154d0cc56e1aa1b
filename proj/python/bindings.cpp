#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "flowforge/exporter.hpp"
#include "flowforge/synth.hpp"

namespace py = pybind11;
namespace ff = flowforge;

namespace {

ff::ExportConfig make_config(std::vector<std::filesystem::path> inputs, std::string profile, double interval,
                             const std::string& mode, std::size_t window_size,
                             std::optional<std::filesystem::path> rules,
                             std::optional<std::filesystem::path> capture_labels, std::string default_label,
                             const std::string& rate_convention, std::filesystem::path out_dir,
                             const std::string& rows, const std::string& interval_mode)
{
    ff::ExportConfig c;
    c.inputs = std::move(inputs);
    c.profile = std::move(profile);
    c.interval_s = interval;
    if (mode == "window") c.mode = ff::AggregationMode::window;
    else if (mode != "flow") throw py::value_error("mode must be 'flow' or 'window'");
    c.window_size = window_size;
    c.rules_path = std::move(rules);
    c.capture_label_map = std::move(capture_labels);
    c.default_label = std::move(default_label);
    if (rate_convention == "n") c.rate_convention = ff::RateConvention::n;
    else if (rate_convention != "nminus1") throw py::value_error("rate_convention must be 'nminus1' or 'n'");
    c.out_dir = std::move(out_dir);
    if (rows == "flow") c.rows = ff::RowGranularity::flow;
    else if (rows != "record") throw py::value_error("rows must be 'record' or 'flow'");
    if (interval_mode == "idle") c.interval_mode = ff::IntervalMode::idle;
    else if (interval_mode != "status") throw py::value_error("interval_mode must be 'status' or 'idle'");
    return c;
}

py::dict row_dict(const ff::FlowFeatures& f)
{
    py::dict d;
    for (const auto& c : ff::profile_by_name("full").columns) d[py::str(std::string(ff::column_name(c)))] = ff::format_cell(f, c);
    d["Seq"] = f.seq;
    d["TotPkts"] = f.tot_pkts;
    d["SrcPkts"] = f.src_pkts;
    d["DstPkts"] = f.dst_pkts;
    d["TotBytes"] = f.tot_bytes;
    d["SrcBytes"] = f.src_bytes;
    d["DstBytes"] = f.dst_bytes;
    d["Rank"] = f.rank;
    d["StartTime"] = f.start_time;
    d["LastTime"] = f.last_time;
    d["Dur"] = f.dur;
    d["Mean"] = f.mean;
    d["StdDev"] = f.stddev;
    d["Sum"] = f.sum;
    d["Min"] = f.min;
    d["Max"] = f.max;
    d["Rate"] = f.rate;
    d["SrcRate"] = f.src_rate;
    d["DstRate"] = f.dst_rate;
    d["SIntPkt"] = f.s_int_pkt;
    d["DIntPkt"] = f.d_int_pkt;
    d["SrcGap"] = f.src_gap;
    d["DstGap"] = f.dst_gap;
    d["Sport"] = f.sport;
    d["Dport"] = f.dport;
    return d;
}

std::vector<std::pair<std::string, std::uint64_t>> class_counts(const ff::StatsReport& r)
{
    std::vector<std::pair<std::string, std::uint64_t>> out;
    for (const auto& c : r.rows) out.emplace_back(c.label, c.count);
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Flow feature extraction from classic PCAP captures";

    py::register_exception<ff::ExportError>(m, "ExportError");
    py::register_exception<ff::PcapError>(m, "PcapError");
    py::register_exception<ff::ProfileError>(m, "ProfileError");
    py::register_exception<ff::ScenarioError>(m, "ScenarioError");
    py::register_exception<ff::LabelError>(m, "LabelError");

    m.def(
        "export_json",
        [](std::vector<std::filesystem::path> inputs, std::string profile, double interval, const std::string& mode,
           std::size_t window_size, std::optional<std::filesystem::path> rules,
           std::optional<std::filesystem::path> capture_labels, std::string default_label,
           const std::string& rate_convention, std::filesystem::path out_dir, const std::string& rows,
           const std::string& interval_mode, unsigned jobs) {
            auto c = make_config(std::move(inputs), std::move(profile), interval, mode, window_size, std::move(rules),
                                 std::move(capture_labels), std::move(default_label), rate_convention,
                                 std::move(out_dir), rows, interval_mode);
            c.jobs = jobs;
            py::gil_scoped_release release;
            return ff::cmd_export(c).to_json_line();
        },
        py::arg("inputs"), py::arg("profile") = "botiot", py::arg("interval") = 60.0, py::arg("mode") = "flow",
        py::arg("window_size") = 10, py::arg("rules") = py::none(), py::arg("capture_labels") = py::none(),
        py::arg("default_label") = std::string(ff::kDefaultLabel), py::arg("rate_convention") = "nminus1",
        py::arg("out_dir") = ".", py::arg("rows") = "record", py::arg("interval_mode") = "status",
        py::arg("jobs") = 0u,
        "Writes <out_dir>/<stem>.<profile>.csv per input; returns the summary as a JSON line.");

    m.def(
        "extract",
        [](const std::filesystem::path& input, double interval, const std::string& mode, std::size_t window_size,
           std::optional<std::filesystem::path> rules, std::string default_label, const std::string& rate_convention,
           const std::string& rows, const std::string& interval_mode) {
            auto c = make_config({input}, "full", interval, mode, window_size, std::nullopt, std::nullopt,
                                 std::move(default_label), rate_convention, ".", rows, interval_mode);
            c.validate();
            ff::RuleSet rs;
            if (rules) rs = ff::parse_rules(*rules);
            ff::FileSummary summary;
            std::vector<ff::FlowFeatures> out;
            {
                py::gil_scoped_release release;
                out = ff::extract_rows(input, c, rs.rules, summary);
            }
            py::list l;
            for (const auto& f : out) l.append(row_dict(f));
            return l;
        },
        py::arg("input"), py::arg("interval") = 60.0, py::arg("mode") = "flow", py::arg("window_size") = 10,
        py::arg("rules") = py::none(), py::arg("default_label") = std::string(ff::kDefaultLabel),
        py::arg("rate_convention") = "nminus1", py::arg("rows") = "record", py::arg("interval_mode") = "status",
        "Rows for one capture as dicts keyed by column name, without writing a file.");

    m.def(
        "label",
        [](const std::filesystem::path& flows_csv, const std::filesystem::path& rules, const std::filesystem::path& out,
           const std::string& default_label) {
            return class_counts(ff::cmd_label(flows_csv, rules, out, default_label).classes);
        },
        py::arg("flows_csv"), py::arg("rules"), py::arg("out"), py::arg("default_label") = std::string(ff::kDefaultLabel),
        "Relabels an exported CSV; returns (label, count) pairs.");

    m.def(
        "stats", [](const std::filesystem::path& csv) { return class_counts(ff::stats_report(csv)); },
        py::arg("csv"), "(label, count) pairs, most frequent first.");

    m.def(
        "gen",
        [](const std::filesystem::path& out, std::optional<std::string> scenario_json, std::optional<std::uint64_t> seed,
           std::uint32_t packets) {
            ff::Scenario s;
            if (scenario_json) {
                s = ff::parse_scenario(*scenario_json);
                if (seed) s.seed = *seed;
            } else {
                s = ff::random_scenario(seed.value_or(1), packets);
            }
            const auto g = ff::gen_capture(s, out);
            py::dict d;
            d["capture"] = g.capture;
            d["truth_csv"] = g.truth_csv;
            d["rules_csv"] = g.rules_csv;
            d["ip_packets"] = g.ip_packets;
            d["frames"] = g.total_frames;
            d["flows"] = g.truth.size();
            return d;
        },
        py::arg("out"), py::arg("scenario_json") = py::none(), py::arg("seed") = py::none(),
        py::arg("packets") = 1000u, "Writes a synthetic capture plus truth and rules sidecars.");

    m.def(
        "profiles",
        [] {
            py::dict d;
            for (const auto& p : ff::all_profiles()) d[py::str(p.name)] = p.header();
            return d;
        },
        "Profile name to exact CSV header.");
}
