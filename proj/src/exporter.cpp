#include "flowforge/exporter.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <set>
#include <thread>
#include <unordered_map>

#include <json.hpp>

namespace flowforge {

namespace {

constexpr std::int64_t kSweepPeriodUs = kMicrosPerSecond;

std::filesystem::path output_path(const ExportConfig& config, const std::filesystem::path& input)
{
    return config.out_dir / (capture_stem(input.filename().string()) + "." + config.profile + ".csv");
}

std::vector<FlowFeatures> rows_from_records(const std::vector<FlowRecord>& records, const ExportConfig& config)
{
    const FeatureOptions opts{config.rate_convention};
    const auto groups = aggregate_by_flow_id(records);
    std::vector<FlowFeatures> rows;
    if (config.rows == RowGranularity::flow) {
        rows.reserve(groups.size());
        for (const auto& g : groups) rows.push_back(features_from_flow(g, opts));
        return rows;
    }
    std::unordered_map<std::string_view, const AggregatedFlow*> by_id;
    by_id.reserve(groups.size());
    for (const auto& g : groups) by_id.emplace(g.flow_id, &g);
    rows.reserve(records.size());
    for (const FlowRecord& r : records) {
        const std::string id = r.key.flow_id();
        rows.push_back(features_from_record(r, *by_id.at(id), opts));
    }
    return rows;
}

}  // namespace

void ExportConfig::validate() const
{
    if (inputs.empty()) throw ExportError(exit_code::usage, "no input captures given");
    if (!(interval_s > 0) || !std::isfinite(interval_s)) throw ExportError(exit_code::usage, "--interval must be > 0");
    if (window_size < 1) throw ExportError(exit_code::usage, "--window-size must be >= 1");
    try {
        profile_by_name(profile);
    } catch (const ProfileError& e) {
        throw ExportError(exit_code::usage, e.what());
    }
}

std::vector<FlowFeatures> extract_rows(const std::filesystem::path& input, const ExportConfig& config,
                                       std::span<const LabelRule> rules, FileSummary& summary)
{
    summary.input = input;
    std::optional<CaptureReader> reader;
    try {
        reader.emplace(input);
    } catch (const PcapError& e) {
        throw ExportError(exit_code::input, input.string() + ": " + e.what());
    }

    auto count_skip = [&summary](const DecodeSkip& s) {
        ++summary.decode_skips;
        ++summary.skip_reasons[std::string(to_string(s.reason))];
    };

    std::vector<FlowFeatures> rows;
    if (config.mode == AggregationMode::window) {
        const FeatureOptions opts{config.rate_convention};
        WindowSegmenter seg(config.window_size);
        while (auto item = reader->next()) {
            ++summary.frames;
            if (const auto* p = std::get_if<Packet>(&*item)) {
                ++summary.ip_packets;
                if (auto w = seg.push(*p)) rows.push_back(features_from_window(*w, opts));
            } else {
                count_skip(std::get<DecodeSkip>(*item));
            }
        }
        if (auto w = seg.finish()) rows.push_back(features_from_window(*w, opts));
    } else {
        FlowConfig fc;
        fc.interval_us = std::max<std::int64_t>(1, std::llround(config.interval_s * 1e6));
        fc.interval_mode = config.interval_mode;
        FlowTable table(fc);
        std::vector<FlowRecord> records;
        std::int64_t last_sweep = 0;
        bool swept = false;
        while (auto item = reader->next()) {
            ++summary.frames;
            if (const auto* p = std::get_if<Packet>(&*item)) {
                ++summary.ip_packets;
                table.ingest(*p);
                if (!swept) {
                    last_sweep = table.newest_ts_us();
                    swept = true;
                } else if (table.newest_ts_us() - last_sweep >= kSweepPeriodUs) {
                    auto batch = table.flush_interval();
                    records.insert(records.end(), std::make_move_iterator(batch.begin()),
                                   std::make_move_iterator(batch.end()));
                    last_sweep = table.newest_ts_us();
                }
            } else {
                count_skip(std::get<DecodeSkip>(*item));
            }
        }
        auto rest = table.finalize();
        records.insert(records.end(), std::make_move_iterator(rest.begin()), std::make_move_iterator(rest.end()));
        summary.records = records.size();
        summary.reordered_packets = table.reordered_packets();
        rows = rows_from_records(records, config);
    }
    summary.truncation_warnings = reader->truncation_warnings();

    std::string base_label = config.default_label;
    if (config.capture_label_map) {
        try {
            base_label = label_by_capture(input.filename().string(), parse_capture_labels(*config.capture_label_map));
        } catch (const LabelError& e) {
            throw ExportError(exit_code::input, e.what());
        }
    }
    std::uint64_t rank = 0;
    for (FlowFeatures& f : rows) {
        f.rank = ++rank;
        f.label = rules.empty() ? base_label : match_flow(f, rules, base_label);
    }
    summary.rows = rows.size();
    summary.classes = stats_report(rows);
    return rows;
}

void write_csv_atomically(std::span<const FlowFeatures> flows, const DatasetProfile& profile,
                          const std::filesystem::path& path)
{
    const auto tmp = path.string() + ".tmp-" + std::to_string(::getpid()) + "-" +
                     std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
    try {
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw ExportError(exit_code::write, "cannot create " + tmp);
            emit_csv(flows, profile, out);
            out.close();
            if (!out) throw ExportError(exit_code::write, "write failed: " + tmp);
        }
        std::filesystem::rename(tmp, path);
    } catch (const ExportError&) {
        std::error_code ec;
        std::filesystem::remove(tmp, ec);
        throw;
    } catch (const std::exception& e) {
        std::error_code ec;
        std::filesystem::remove(tmp, ec);
        throw ExportError(exit_code::write, path.string() + ": " + e.what());
    }
}

ExportSummary cmd_export(const ExportConfig& config)
{
    config.validate();
    const DatasetProfile& profile = profile_by_name(config.profile);

    std::set<std::filesystem::path> outputs;
    for (const auto& in : config.inputs) {
        if (!std::filesystem::is_regular_file(in)) throw ExportError(exit_code::input, "input not found: " + in.string());
        if (!outputs.insert(output_path(config, in)).second)
            throw ExportError(exit_code::input, "two inputs map to the same output name: " + in.string());
    }
    std::error_code ec;
    std::filesystem::create_directories(config.out_dir, ec);
    if (!std::filesystem::is_directory(config.out_dir))
        throw ExportError(exit_code::write, "cannot create output directory " + config.out_dir.string());

    ExportSummary summary;
    RuleSet rules;
    if (config.rules_path) {
        try {
            rules = parse_rules(*config.rules_path);
        } catch (const LabelError& e) {
            throw ExportError(exit_code::input, e.what());
        }
        summary.rule_errors = rules.errors;
    }

    auto run_one = [&](const std::filesystem::path& input) {
        FileSummary fs;
        auto rows = extract_rows(input, config, rules.rules, fs);
        fs.output = output_path(config, input);
        write_csv_atomically(rows, profile, fs.output);
        return fs;
    };

    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t jobs = std::max<std::size_t>(1, config.jobs ? config.jobs : hw);
    summary.files.resize(config.inputs.size());
    for (std::size_t start = 0; start < config.inputs.size(); start += jobs) {
        const std::size_t end = std::min(config.inputs.size(), start + jobs);
        std::vector<std::future<FileSummary>> pending;
        for (std::size_t i = start; i < end; ++i)
            pending.push_back(std::async(std::launch::async, run_one, config.inputs[i]));
        // get() in input order so the first failing input (by position) wins.
        std::optional<ExportError> failure;
        for (std::size_t i = start; i < end; ++i) {
            try {
                summary.files[i] = pending[i - start].get();
            } catch (const ExportError& e) {
                if (!failure) failure = e;
            } catch (const std::exception& e) {
                if (!failure) failure = ExportError(exit_code::input, config.inputs[i].string() + ": " + e.what());
            }
        }
        if (failure) throw *failure;
    }
    for (const auto& f : summary.files) summary.rows += f.rows;
    return summary;
}

std::string ExportSummary::to_text() const
{
    std::string out;
    for (const auto& f : files) {
        out += f.input.string() + " -> " + f.output.string() + "\n";
        out += "  frames " + std::to_string(f.frames) + ", ip packets " + std::to_string(f.ip_packets) +
               ", decode skips " + std::to_string(f.decode_skips);
        for (const auto& [reason, n] : f.skip_reasons) out += " [" + reason + ": " + std::to_string(n) + "]";
        out += "\n  truncation warnings " + std::to_string(f.truncation_warnings) + ", reordered packets " +
               std::to_string(f.reordered_packets) + "\n";
        out += "  rows " + std::to_string(f.rows) + "\n";
        for (const auto& c : f.classes.rows) out += "    " + c.label + ": " + std::to_string(c.count) + "\n";
    }
    out += "total rows " + std::to_string(rows) + "\n";
    if (!rule_errors.empty()) out += "rule rows rejected " + std::to_string(rule_errors.size()) + "\n";
    return out;
}

std::string ExportSummary::to_json_line() const
{
    nlohmann::ordered_json j;
    j["rows"] = rows;
    j["rule_errors"] = rule_errors.size();
    auto arr = nlohmann::ordered_json::array();
    for (const auto& f : files) {
        nlohmann::ordered_json o;
        o["input"] = f.input.string();
        o["output"] = f.output.string();
        o["frames"] = f.frames;
        o["ip_packets"] = f.ip_packets;
        o["decode_skips"] = f.decode_skips;
        o["skip_reasons"] = f.skip_reasons;
        o["truncation_warnings"] = f.truncation_warnings;
        o["reordered_packets"] = f.reordered_packets;
        o["records"] = f.records;
        o["rows"] = f.rows;
        nlohmann::ordered_json classes = nlohmann::ordered_json::object();
        for (const auto& c : f.classes.rows) classes[c.label] = c.count;
        o["classes"] = classes;
        arr.push_back(std::move(o));
    }
    j["files"] = std::move(arr);
    return j.dump();
}

LabelSummary cmd_label(const std::filesystem::path& flows_csv, const std::filesystem::path& rules_path,
                       const std::filesystem::path& out, std::string_view default_label)
{
    const DatasetProfile* profile = nullptr;
    std::vector<FlowFeatures> flows;
    try {
        flows = read_any_csv(flows_csv, &profile);
    } catch (const ProfileError& e) {
        throw ExportError(exit_code::input, e.what());
    }
    RuleSet rules;
    try {
        rules = parse_rules(rules_path);
    } catch (const LabelError& e) {
        throw ExportError(exit_code::input, e.what());
    }
    for (FlowFeatures& f : flows) f.label = match_flow(f, rules.rules, default_label);
    write_csv_atomically(flows, *profile, out);
    return LabelSummary{profile->name, stats_report(flows), rules.errors};
}

}  // namespace flowforge
