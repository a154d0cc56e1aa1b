#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "flowforge/features.hpp"

namespace flowforge {

class ProfileError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Column : std::uint8_t {
    FlowID, Rank, StartTime, LastTime, Proto, SrcAddr, DstAddr,
    Sport, Dport, Flgs, State, Seq,
    TotPkts, SrcPkts, DstPkts, TotBytes, SrcBytes, DstBytes,
    Dur, Mean, StdDev, Sum, Min, Max,
    Rate, SrcRate, DstRate, SIntPkt, DIntPkt, SrcGap, DstGap,
    SrcMac, DstMac, SrcOui, DstOui,
    Label,
};

std::string_view column_name(Column c);

/// A named output schema. Every profile starts with the identity columns
/// FlowID, Rank, StartTime, LastTime, Proto, SrcAddr, DstAddr, then lists its
/// feature columns, and ends with Label.
struct DatasetProfile {
    std::string name;
    std::vector<Column> columns;

    std::vector<std::string> header() const;
    bool has(Column c) const;
};

/// botiot, iot23, ciciot23, full.
const std::vector<DatasetProfile>& all_profiles();

/// Throws ProfileError listing the valid names.
const DatasetProfile& profile_by_name(std::string_view name);

/// Profile whose header equals `header` exactly, or nullptr.
const DatasetProfile* detect_profile(const std::vector<std::string>& header);

/// Fixed six-decimal rendering, no exponent; -0 prints as 0.000000.
std::string format_fixed6(double value);

std::string format_cell(const FlowFeatures& f, Column c);

/// Parses one cell into `f`. Throws ProfileError on malformed numbers.
void parse_cell(FlowFeatures& f, Column c, std::string_view text);

/// Writes header plus one row per flow. Rank is rewritten as 1..n in input
/// order. Nothing reaches `out` unless at least the first row formats.
/// Returns the number of rows.
std::size_t emit_csv(std::span<const FlowFeatures> flows, const DatasetProfile& profile, std::ostream& out);

/// Reads a file produced by emit_csv. The header must match the profile
/// exactly; a mismatch throws ProfileError naming the first offending column.
std::vector<FlowFeatures> read_csv(std::istream& in, const DatasetProfile& profile);
std::vector<FlowFeatures> read_csv(const std::filesystem::path& path, const DatasetProfile& profile);

/// Reads a file in any known profile, detected from its header.
std::vector<FlowFeatures> read_any_csv(const std::filesystem::path& path, const DatasetProfile** detected = nullptr);

struct ClassCount {
    std::string label;
    std::uint64_t count = 0;

    friend bool operator==(const ClassCount&, const ClassCount&) = default;
};

/// Flow counts per class, by descending count then label.
struct StatsReport {
    std::vector<ClassCount> rows;
    std::uint64_t total = 0;

    std::string to_text() const;
    std::string to_csv() const;
};

StatsReport stats_report(std::span<const FlowFeatures> flows);
StatsReport stats_report(const std::filesystem::path& labelled_csv);

}  // namespace flowforge
