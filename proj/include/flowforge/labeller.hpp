#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "flowforge/address.hpp"
#include "flowforge/features.hpp"

namespace flowforge {

inline constexpr std::string_view kDefaultLabel = "Benign";
inline constexpr std::string_view kRulesHeader =
    "src_addr,dst_addr,sport,dport,proto,start_time,end_time,label,bidirectional";

class LabelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Ground-truth predicate. An empty optional is a wildcard.
struct LabelRule {
    std::optional<IpAddress> src_addr;
    std::optional<IpAddress> dst_addr;
    std::optional<std::uint16_t> sport;
    std::optional<std::uint16_t> dport;
    std::optional<std::uint8_t> proto;
    std::optional<double> t_start;
    std::optional<double> t_end;
    std::string label;
    bool bidirectional = false;
    std::size_t line = 0;  // source line in the rules file, 0 if built in code

    /// Number of constrained fields; the time window counts once. In [0, 6].
    int specificity() const;
};

struct RuleError {
    std::size_t line = 0;
    std::string message;
};

struct RuleSet {
    std::vector<LabelRule> rules;
    std::vector<RuleError> errors;
};

/// Parses a rules CSV. A missing or wrong header throws LabelError; bad rows
/// are skipped and listed in `errors`.
RuleSet parse_rules(std::istream& in);
RuleSet parse_rules(const std::filesystem::path& path);

bool rule_matches(const LabelRule& rule, const FlowFeatures& flow);

/// Label of the most specific matching rule; ties go to the earliest rule.
std::string match_flow(const FlowFeatures& flow, std::span<const LabelRule> rules,
                       std::string_view default_label = kDefaultLabel);

/// Capture file name → label, for captures holding a single traffic class.
struct CaptureLabelMap {
    std::map<std::string, std::string, std::less<>> labels;
    std::optional<std::string> default_label;
};

/// File name without directories and extension: "a/DDoS-SYN_Flood.pcap" → "DDoS-SYN_Flood".
std::string capture_stem(std::string_view capture_name);

/// Looks the capture's stem (or full name) up in `mapping`. Throws LabelError
/// naming the capture when it is unknown and there is no default.
std::string label_by_capture(std::string_view capture_name, const CaptureLabelMap& mapping);

/// Reads "capture,label" CSV; a capture of "*" sets the default label.
CaptureLabelMap parse_capture_labels(const std::filesystem::path& path);

}  // namespace flowforge
