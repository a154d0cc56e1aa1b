#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowforge/features.hpp"
#include "flowforge/flow.hpp"
#include "flowforge/labeller.hpp"
#include "flowforge/profiles.hpp"

namespace flowforge {

/// Process exit codes shared by the command-line front end.
namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int usage = 1;
inline constexpr int input = 2;
inline constexpr int write = 3;
}  // namespace exit_code

class ExportError : public std::runtime_error {
public:
    ExportError(int code, const std::string& what) : std::runtime_error(what), code_(code) {}
    int code() const { return code_; }

private:
    int code_;
};

enum class AggregationMode : std::uint8_t { flow, window };

/// What one output row stands for in flow mode.
enum class RowGranularity : std::uint8_t {
    record,  // one row per status-interval record; duration stats over its flow id
    flow,    // one row per flow id
};

/// Options for a flow export. `interval_s` is ignored in window mode.
struct ExportConfig {
    std::vector<std::filesystem::path> inputs;
    std::string profile = "botiot";
    double interval_s = 60;
    IntervalMode interval_mode = IntervalMode::status;
    AggregationMode mode = AggregationMode::flow;
    std::size_t window_size = 10;
    RowGranularity rows = RowGranularity::record;
    std::optional<std::filesystem::path> rules_path;
    std::optional<std::filesystem::path> capture_label_map;
    std::string default_label = std::string(kDefaultLabel);
    RateConvention rate_convention = RateConvention::n_minus_one;
    std::filesystem::path out_dir = ".";
    unsigned jobs = 0;  // concurrent input files; 0 picks the hardware concurrency

    /// Throws ExportError(exit_code::usage) on out-of-range values.
    void validate() const;
};

struct FileSummary {
    std::filesystem::path input;
    std::filesystem::path output;
    std::uint64_t frames = 0;
    std::uint64_t ip_packets = 0;
    std::uint64_t decode_skips = 0;
    std::map<std::string, std::uint64_t> skip_reasons;
    std::uint64_t truncation_warnings = 0;
    std::uint64_t reordered_packets = 0;
    std::uint64_t records = 0;  // flow records before row shaping (flow mode)
    std::uint64_t rows = 0;
    StatsReport classes;
};

struct ExportSummary {
    std::vector<FileSummary> files;
    std::uint64_t rows = 0;
    std::vector<RuleError> rule_errors;

    std::string to_text() const;
    /// Single-line JSON with the same counters.
    std::string to_json_line() const;
};

/// Runs ingest → flows or windows → features → labels for one capture and
/// returns the rows in output order (Rank already filled). Does not write.
std::vector<FlowFeatures> extract_rows(const std::filesystem::path& input, const ExportConfig& config,
                                       std::span<const LabelRule> rules, FileSummary& summary);

/// Writes "<out_dir>/<stem>.<profile>.csv" for every input. Each file is
/// written to a temporary name and renamed once complete.
ExportSummary cmd_export(const ExportConfig& config);

struct LabelSummary {
    std::string profile;
    StatsReport classes;
    std::vector<RuleError> rule_errors;
};

/// Rewrites the Label column of a flows CSV from a rules file.
LabelSummary cmd_label(const std::filesystem::path& flows_csv, const std::filesystem::path& rules_path,
                       const std::filesystem::path& out, std::string_view default_label = kDefaultLabel);

/// Serialises `flows` under `profile` to `path` via a temporary file + rename.
void write_csv_atomically(std::span<const FlowFeatures> flows, const DatasetProfile& profile,
                          const std::filesystem::path& path);

}  // namespace flowforge
