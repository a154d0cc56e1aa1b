#include "flowforge/labeller.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>

#include "flowforge/csv.hpp"

namespace flowforge {

namespace {

bool is_wildcard(std::string_view s)
{
    return s == "*" || s.empty();
}

template <typename Int>
std::optional<Int> parse_int(std::string_view s)
{
    Int v{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

std::optional<double> parse_double(std::string_view s)
{
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::optional<bool> parse_bool(std::string_view s)
{
    std::string lower(s);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower.empty() || lower == "*" || lower == "false" || lower == "0" || lower == "no") return false;
    if (lower == "true" || lower == "1" || lower == "yes") return true;
    return std::nullopt;
}

std::vector<std::string> split_header(std::string_view header)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = header.find(',', start);
        out.emplace_back(header.substr(start, comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

bool directed_match(const LabelRule& r, const std::optional<IpAddress>& src, std::uint32_t sport,
                    const std::optional<IpAddress>& dst, std::uint32_t dport)
{
    if (r.src_addr && (!src || *r.src_addr != *src)) return false;
    if (r.dst_addr && (!dst || *r.dst_addr != *dst)) return false;
    if (r.sport && *r.sport != sport) return false;
    if (r.dport && *r.dport != dport) return false;
    return true;
}

}  // namespace

int LabelRule::specificity() const
{
    return int{src_addr.has_value()} + int{dst_addr.has_value()} + int{sport.has_value()} +
           int{dport.has_value()} + int{proto.has_value()} + int{t_start.has_value() || t_end.has_value()};
}

RuleSet parse_rules(std::istream& in)
{
    csv::Reader reader(in);
    std::vector<std::string> row;
    if (!reader.next(row)) throw LabelError("rules file has no header");
    if (row != split_header(kRulesHeader))
        throw LabelError("rules file header must be: " + std::string(kRulesHeader));

    RuleSet set;
    while (reader.next(row)) {
        const std::size_t line = reader.line();
        if (row.size() == 1 && row[0].empty()) continue;  // blank line
        auto fail = [&](std::string msg) { set.errors.push_back(RuleError{line, std::move(msg)}); };
        if (row.size() != 9) {
            fail("expected 9 fields, got " + std::to_string(row.size()));
            continue;
        }
        LabelRule r;
        r.line = line;
        bool ok = true;
        auto addr = [&](const std::string& text, std::optional<IpAddress>& out, const char* name) {
            if (is_wildcard(text)) return;
            out = IpAddress::parse(text);
            if (!out) {
                fail(std::string("unparseable ") + name + " '" + text + "'");
                ok = false;
            }
        };
        auto port = [&](const std::string& text, std::optional<std::uint16_t>& out, const char* name) {
            if (is_wildcard(text) || !ok) return;
            out = parse_int<std::uint16_t>(text);
            if (!out) {
                fail(std::string("unparseable ") + name + " '" + text + "'");
                ok = false;
            }
        };
        auto time = [&](const std::string& text, std::optional<double>& out, const char* name) {
            if (is_wildcard(text) || !ok) return;
            out = parse_double(text);
            if (!out) {
                fail(std::string("unparseable ") + name + " '" + text + "'");
                ok = false;
            }
        };
        addr(row[0], r.src_addr, "src_addr");
        if (ok) addr(row[1], r.dst_addr, "dst_addr");
        port(row[2], r.sport, "sport");
        port(row[3], r.dport, "dport");
        if (ok && !is_wildcard(row[4])) {
            r.proto = parse_protocol(row[4]);
            if (!r.proto) {
                fail("unknown proto '" + row[4] + "'");
                ok = false;
            }
        }
        time(row[5], r.t_start, "start_time");
        time(row[6], r.t_end, "end_time");
        if (!ok) continue;
        if (r.t_start && r.t_end && *r.t_start > *r.t_end) {
            fail("start_time is after end_time");
            continue;
        }
        r.label = row[7];
        if (r.label.empty()) {
            fail("empty label");
            continue;
        }
        auto bidir = parse_bool(row[8]);
        if (!bidir) {
            fail("unparseable bidirectional '" + row[8] + "'");
            continue;
        }
        r.bidirectional = *bidir;
        set.rules.push_back(std::move(r));
    }
    return set;
}

RuleSet parse_rules(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LabelError("cannot open rules file: " + path.string());
    return parse_rules(in);
}

namespace {

bool matches_parsed(const LabelRule& rule, const FlowFeatures& flow, const std::optional<IpAddress>& src,
                    const std::optional<IpAddress>& dst)
{
    if (rule.proto && protocol_name(*rule.proto) != flow.proto) return false;
    if (rule.t_start && *rule.t_start > flow.last_time) return false;
    if (rule.t_end && *rule.t_end < flow.start_time) return false;
    if (directed_match(rule, src, flow.sport, dst, flow.dport)) return true;
    return rule.bidirectional && directed_match(rule, dst, flow.dport, src, flow.sport);
}

}  // namespace

bool rule_matches(const LabelRule& rule, const FlowFeatures& flow)
{
    return matches_parsed(rule, flow, IpAddress::parse(flow.src_addr), IpAddress::parse(flow.dst_addr));
}

std::string match_flow(const FlowFeatures& flow, std::span<const LabelRule> rules, std::string_view default_label)
{
    const auto src = IpAddress::parse(flow.src_addr);
    const auto dst = IpAddress::parse(flow.dst_addr);
    const LabelRule* best = nullptr;
    for (const LabelRule& r : rules) {
        if ((!best || r.specificity() > best->specificity()) && matches_parsed(r, flow, src, dst)) best = &r;
    }
    return best ? best->label : std::string(default_label);
}

std::string capture_stem(std::string_view capture_name)
{
    const std::filesystem::path p{std::string(capture_name)};
    std::string stem = p.filename().string();
    for (std::string_view ext : {".gz", ".pcap", ".cap", ".dmp"}) {
        if (stem.size() > ext.size() && stem.ends_with(ext)) stem.resize(stem.size() - ext.size());
    }
    return stem;
}

std::string label_by_capture(std::string_view capture_name, const CaptureLabelMap& mapping)
{
    const std::string stem = capture_stem(capture_name);
    if (auto it = mapping.labels.find(stem); it != mapping.labels.end()) return it->second;
    const std::string base = std::filesystem::path(std::string(capture_name)).filename().string();
    if (auto it = mapping.labels.find(base); it != mapping.labels.end()) return it->second;
    if (mapping.default_label) return *mapping.default_label;
    throw LabelError("no label for capture '" + std::string(capture_name) + "' and no default");
}

CaptureLabelMap parse_capture_labels(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LabelError("cannot open capture label map: " + path.string());
    csv::Reader reader(in);
    std::vector<std::string> row;
    if (!reader.next(row) || row != std::vector<std::string>{"capture", "label"})
        throw LabelError("capture label map header must be: capture,label");
    CaptureLabelMap map;
    while (reader.next(row)) {
        if (row.size() == 1 && row[0].empty()) continue;
        if (row.size() != 2 || row[1].empty())
            throw LabelError("bad capture label row at line " + std::to_string(reader.line()));
        if (row[0] == "*") {
            map.default_label = row[1];
        } else {
            map.labels[capture_stem(row[0])] = row[1];
        }
    }
    return map;
}

}  // namespace flowforge
