// flowforge: export labelled flow-feature CSVs from classic PCAP captures.

#include <cstdlib>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "flowforge/exporter.hpp"
#include "flowforge/synth.hpp"

namespace ff = flowforge;

namespace {

void setup_logging()
{
    auto logger = spdlog::stderr_color_mt("flowforge");
    logger->set_pattern("%^%l%$: %v");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::warn);
    if (const char* env = std::getenv("FLOWFORGE_LOG")) {
        const auto level = spdlog::level::from_str(env);
        // from_str maps unknown names to "off"; only honour it when asked for
        if (level != spdlog::level::off || std::string_view(env) == "off") spdlog::set_level(level);
        else spdlog::warn("FLOWFORGE_LOG={} not recognised; use trace|debug|info|warn|error|off", env);
    }
}

void log_rule_errors(const std::vector<ff::RuleError>& errors)
{
    for (const auto& e : errors) spdlog::warn("rules line {}: {}", e.line, e.message);
}

}  // namespace

int main(int argc, char** argv)
{
    setup_logging();

    CLI::App app{"Flow feature extraction and labelling for classic PCAP captures"};
    app.require_subcommand(1);

    ff::ExportConfig ex;
    std::string mode = "flow";
    std::string interval_mode = "status";
    std::string rows = "record";
    std::string rate = "nminus1";
    std::optional<std::string> rules_path, label_map;
    auto* export_cmd = app.add_subcommand("export", "Aggregate captures into one CSV per input");
    export_cmd->add_option("-i,--input", ex.inputs, "Capture file (repeatable)")->required();
    export_cmd->add_option("--profile", ex.profile, "botiot | iot23 | ciciot23 | full")->capture_default_str();
    export_cmd->add_option("--interval", ex.interval_s, "Flow interval in seconds")->capture_default_str();
    export_cmd->add_option("--interval-mode", interval_mode, "status: split records every interval; idle: close after an idle interval")
        ->check(CLI::IsMember({"status", "idle"}))
        ->capture_default_str();
    export_cmd->add_option("--mode", mode, "flow | window")->check(CLI::IsMember({"flow", "window"}))->capture_default_str();
    export_cmd->add_option("--window-size", ex.window_size, "Packets per window in window mode")->capture_default_str();
    export_cmd->add_option("--rows", rows, "record: one row per interval record; flow: one row per flow id")
        ->check(CLI::IsMember({"record", "flow"}))
        ->capture_default_str();
    export_cmd->add_option("--rules", rules_path, "Ground-truth rules CSV");
    export_cmd->add_option("--capture-labels", label_map, "CSV mapping capture name to label");
    export_cmd->add_option("--default-label", ex.default_label, "Label for unmatched flows")->capture_default_str();
    export_cmd->add_option("--rate-convention", rate, "nminus1 | n")->check(CLI::IsMember({"nminus1", "n"}))->capture_default_str();
    export_cmd->add_option("--out-dir", ex.out_dir, "Output directory")->capture_default_str();
    export_cmd->add_option("--jobs", ex.jobs, "Captures processed concurrently (0 = hardware threads)");

    std::string label_in, label_rules, label_out, label_default = std::string(ff::kDefaultLabel);
    auto* label_cmd = app.add_subcommand("label", "Relabel an exported CSV from a rules file");
    label_cmd->add_option("flows", label_in, "Exported flows CSV")->required();
    label_cmd->add_option("--rules", label_rules, "Ground-truth rules CSV")->required();
    label_cmd->add_option("-o,--out", label_out, "Output CSV (may equal the input)")->required();
    label_cmd->add_option("--default-label", label_default, "Label for unmatched flows")->capture_default_str();

    std::string scenario_path, gen_out;
    std::uint64_t seed = 1;
    std::uint32_t max_packets = 1000;
    auto* gen_cmd = app.add_subcommand("gen", "Write a deterministic synthetic capture with truth and rules sidecars");
    auto* scen_opt = gen_cmd->add_option("--scenario", scenario_path, "Scenario JSON");
    gen_cmd->add_option("--seed", seed, "Seed (overrides the scenario's, or drives a random scenario)");
    gen_cmd->add_option("--packets", max_packets, "Packet budget for a random scenario")->capture_default_str();
    gen_cmd->add_option("-o,--out", gen_out, "Capture path")->required();

    std::string stats_in;
    bool stats_csv = false;
    auto* stats_cmd = app.add_subcommand("stats", "Count rows per label in an exported CSV");
    stats_cmd->add_option("flows", stats_in, "Exported flows CSV")->required();
    stats_cmd->add_flag("--csv", stats_csv, "Print class,count CSV instead of a table");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? ff::exit_code::ok : ff::exit_code::usage;
    }

    try {
        if (*export_cmd) {
            ex.mode = mode == "window" ? ff::AggregationMode::window : ff::AggregationMode::flow;
            ex.interval_mode = interval_mode == "idle" ? ff::IntervalMode::idle : ff::IntervalMode::status;
            ex.rows = rows == "flow" ? ff::RowGranularity::flow : ff::RowGranularity::record;
            ex.rate_convention = rate == "n" ? ff::RateConvention::n : ff::RateConvention::n_minus_one;
            if (rules_path) ex.rules_path = *rules_path;
            if (label_map) ex.capture_label_map = *label_map;
            if (ex.mode == ff::AggregationMode::window && export_cmd->count("--interval"))
                spdlog::warn("--interval has no effect in window mode");
            const auto summary = ff::cmd_export(ex);
            log_rule_errors(summary.rule_errors);
            for (const auto& f : summary.files) {
                if (f.truncation_warnings) spdlog::warn("{}: capture ended inside a record", f.input.string());
                if (f.decode_skips) spdlog::info("{}: {} frames skipped", f.input.string(), f.decode_skips);
            }
            std::cout << summary.to_text() << summary.to_json_line() << "\n";
        } else if (*label_cmd) {
            const auto summary = ff::cmd_label(label_in, label_rules, label_out, label_default);
            log_rule_errors(summary.rule_errors);
            std::cout << "profile " << summary.profile << "\n" << summary.classes.to_text();
        } else if (*gen_cmd) {
            ff::Scenario scenario;
            if (*scen_opt) {
                scenario = ff::load_scenario(scenario_path);
                if (gen_cmd->count("--seed")) scenario.seed = seed;
            } else {
                scenario = ff::random_scenario(seed, max_packets);
            }
            const auto out = ff::gen_capture(scenario, gen_out);
            std::cout << "wrote " << out.capture.string() << " (" << out.total_frames << " frames, " << out.ip_packets
                      << " IP packets, " << out.truth.size() << " flows)\n"
                      << "truth " << out.truth_csv.string() << "\nrules " << out.rules_csv.string() << "\n";
        } else if (*stats_cmd) {
            const auto report = ff::stats_report(std::filesystem::path(stats_in));
            std::cout << (stats_csv ? report.to_csv() : report.to_text());
        }
    } catch (const ff::ExportError& e) {
        spdlog::error("{}", e.what());
        return e.code();
    } catch (const ff::ScenarioError& e) {
        spdlog::error("{}", e.what());
        return ff::exit_code::input;
    } catch (const ff::ProfileError& e) {
        spdlog::error("{}", e.what());
        return ff::exit_code::input;
    } catch (const ff::PcapError& e) {
        spdlog::error("{}", e.what());
        return ff::exit_code::write;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return ff::exit_code::input;
    }
    return ff::exit_code::ok;
}
