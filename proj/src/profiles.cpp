#include "flowforge/profiles.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>

#include "flowforge/csv.hpp"

namespace flowforge {

namespace {

constexpr std::size_t kFlushBytes = 1 << 20;

std::vector<Column> with_identity(std::initializer_list<Column> features)
{
    std::vector<Column> cols = {Column::FlowID, Column::Rank,    Column::StartTime, Column::LastTime,
                                Column::Proto,  Column::SrcAddr, Column::DstAddr};
    for (Column c : features) cols.push_back(c);
    cols.push_back(Column::Label);
    return cols;
}

std::vector<DatasetProfile> build_profiles()
{
    using C = Column;
    return {
        {"botiot", with_identity({C::Sport, C::Dport, C::Dur, C::SrcBytes, C::DstBytes, C::SrcPkts,
                                  C::DstPkts, C::Mean, C::StdDev, C::Max, C::Min, C::Rate})},
        {"iot23", with_identity({C::Sport, C::Dport, C::Dur, C::SrcBytes, C::DstBytes, C::SrcPkts,
                                 C::DstPkts, C::SIntPkt, C::DIntPkt, C::SrcGap, C::DstGap})},
        {"ciciot23", with_identity({C::Sport, C::Dport, C::Dur, C::Max, C::Min, C::Rate, C::Mean, C::StdDev})},
        {"full", with_identity({C::Sport,   C::Dport,    C::Flgs,    C::State,    C::Seq,     C::TotPkts,
                                C::SrcPkts, C::DstPkts,  C::TotBytes, C::SrcBytes, C::DstBytes, C::Dur,
                                C::Mean,    C::StdDev,   C::Sum,     C::Min,      C::Max,     C::Rate,
                                C::SrcRate, C::DstRate,  C::SIntPkt, C::DIntPkt,  C::SrcGap,  C::DstGap,
                                C::SrcMac,  C::DstMac,   C::SrcOui,  C::DstOui})},
    };
}

template <typename Int>
Int parse_integer(std::string_view text, Column c)
{
    Int v{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty())
        throw ProfileError("bad integer '" + std::string(text) + "' in column " + std::string(column_name(c)));
    return v;
}

double parse_real(std::string_view text, Column c)
{
    double v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty() || !std::isfinite(v))
        throw ProfileError("bad number '" + std::string(text) + "' in column " + std::string(column_name(c)));
    return v;
}

void check_header(const std::vector<std::string>& got, const DatasetProfile& profile)
{
    const auto want = profile.header();
    const std::size_t common = std::min(got.size(), want.size());
    for (std::size_t i = 0; i < common; ++i) {
        if (got[i] != want[i])
            throw ProfileError("header mismatch for profile " + profile.name + ": column " + std::to_string(i + 1) +
                               " is '" + got[i] + "', expected '" + want[i] + "'");
    }
    if (got.size() > want.size())
        throw ProfileError("header mismatch for profile " + profile.name + ": unexpected column '" +
                           got[want.size()] + "'");
    if (got.size() < want.size())
        throw ProfileError("header mismatch for profile " + profile.name + ": missing column '" +
                           want[got.size()] + "'");
}

}  // namespace

std::string_view column_name(Column c)
{
    switch (c) {
    case Column::FlowID: return "FlowID";
    case Column::Rank: return "Rank";
    case Column::StartTime: return "StartTime";
    case Column::LastTime: return "LastTime";
    case Column::Proto: return "Proto";
    case Column::SrcAddr: return "SrcAddr";
    case Column::DstAddr: return "DstAddr";
    case Column::Sport: return "Sport";
    case Column::Dport: return "Dport";
    case Column::Flgs: return "Flgs";
    case Column::State: return "State";
    case Column::Seq: return "Seq";
    case Column::TotPkts: return "TotPkts";
    case Column::SrcPkts: return "SrcPkts";
    case Column::DstPkts: return "DstPkts";
    case Column::TotBytes: return "TotBytes";
    case Column::SrcBytes: return "SrcBytes";
    case Column::DstBytes: return "DstBytes";
    case Column::Dur: return "Dur";
    case Column::Mean: return "Mean";
    case Column::StdDev: return "StdDev";
    case Column::Sum: return "Sum";
    case Column::Min: return "Min";
    case Column::Max: return "Max";
    case Column::Rate: return "Rate";
    case Column::SrcRate: return "SrcRate";
    case Column::DstRate: return "DstRate";
    case Column::SIntPkt: return "SIntPkt";
    case Column::DIntPkt: return "DIntPkt";
    case Column::SrcGap: return "SrcGap";
    case Column::DstGap: return "DstGap";
    case Column::SrcMac: return "SrcMac";
    case Column::DstMac: return "DstMac";
    case Column::SrcOui: return "SrcOui";
    case Column::DstOui: return "DstOui";
    case Column::Label: return "Label";
    }
    return "?";
}

std::vector<std::string> DatasetProfile::header() const
{
    std::vector<std::string> out;
    out.reserve(columns.size());
    for (Column c : columns) out.emplace_back(column_name(c));
    return out;
}

bool DatasetProfile::has(Column c) const
{
    return std::find(columns.begin(), columns.end(), c) != columns.end();
}

const std::vector<DatasetProfile>& all_profiles()
{
    static const std::vector<DatasetProfile> profiles = build_profiles();
    return profiles;
}

const DatasetProfile& profile_by_name(std::string_view name)
{
    for (const auto& p : all_profiles())
        if (p.name == name) return p;
    throw ProfileError("unknown profile '" + std::string(name) + "' (expected botiot, iot23, ciciot23 or full)");
}

const DatasetProfile* detect_profile(const std::vector<std::string>& header)
{
    for (const auto& p : all_profiles())
        if (p.header() == header) return &p;
    return nullptr;
}

std::string format_fixed6(double value)
{
    if (value == 0) value = 0;  // folds -0.0
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::fixed, 6);
    if (ec != std::errc{}) throw ProfileError("cannot format value");
    return std::string(buf, ptr);
}

std::string format_cell(const FlowFeatures& f, Column c)
{
    switch (c) {
    case Column::FlowID: return f.flow_id;
    case Column::Rank: return std::to_string(f.rank);
    case Column::StartTime: return format_fixed6(f.start_time);
    case Column::LastTime: return format_fixed6(f.last_time);
    case Column::Proto: return f.proto;
    case Column::SrcAddr: return f.src_addr;
    case Column::DstAddr: return f.dst_addr;
    case Column::Sport: return std::to_string(f.sport);
    case Column::Dport: return std::to_string(f.dport);
    case Column::Flgs: return f.flgs;
    case Column::State: return f.state;
    case Column::Seq: return std::to_string(f.seq);
    case Column::TotPkts: return std::to_string(f.tot_pkts);
    case Column::SrcPkts: return std::to_string(f.src_pkts);
    case Column::DstPkts: return std::to_string(f.dst_pkts);
    case Column::TotBytes: return std::to_string(f.tot_bytes);
    case Column::SrcBytes: return std::to_string(f.src_bytes);
    case Column::DstBytes: return std::to_string(f.dst_bytes);
    case Column::Dur: return format_fixed6(f.dur);
    case Column::Mean: return format_fixed6(f.mean);
    case Column::StdDev: return format_fixed6(f.stddev);
    case Column::Sum: return format_fixed6(f.sum);
    case Column::Min: return format_fixed6(f.min);
    case Column::Max: return format_fixed6(f.max);
    case Column::Rate: return format_fixed6(f.rate);
    case Column::SrcRate: return format_fixed6(f.src_rate);
    case Column::DstRate: return format_fixed6(f.dst_rate);
    case Column::SIntPkt: return format_fixed6(f.s_int_pkt);
    case Column::DIntPkt: return format_fixed6(f.d_int_pkt);
    case Column::SrcGap: return std::to_string(f.src_gap);
    case Column::DstGap: return std::to_string(f.dst_gap);
    case Column::SrcMac: return f.src_mac;
    case Column::DstMac: return f.dst_mac;
    case Column::SrcOui: return f.src_oui;
    case Column::DstOui: return f.dst_oui;
    case Column::Label: return f.label;
    }
    return {};
}

void parse_cell(FlowFeatures& f, Column c, std::string_view t)
{
    switch (c) {
    case Column::FlowID: f.flow_id = t; break;
    case Column::Rank: f.rank = parse_integer<std::uint64_t>(t, c); break;
    case Column::StartTime: f.start_time = parse_real(t, c); break;
    case Column::LastTime: f.last_time = parse_real(t, c); break;
    case Column::Proto: f.proto = t; break;
    case Column::SrcAddr: f.src_addr = t; break;
    case Column::DstAddr: f.dst_addr = t; break;
    case Column::Sport: f.sport = parse_integer<std::uint16_t>(t, c); break;
    case Column::Dport: f.dport = parse_integer<std::uint16_t>(t, c); break;
    case Column::Flgs: f.flgs = t; break;
    case Column::State: f.state = t; break;
    case Column::Seq: f.seq = parse_integer<std::uint64_t>(t, c); break;
    case Column::TotPkts: f.tot_pkts = parse_integer<std::uint64_t>(t, c); break;
    case Column::SrcPkts: f.src_pkts = parse_integer<std::uint64_t>(t, c); break;
    case Column::DstPkts: f.dst_pkts = parse_integer<std::uint64_t>(t, c); break;
    case Column::TotBytes: f.tot_bytes = parse_integer<std::uint64_t>(t, c); break;
    case Column::SrcBytes: f.src_bytes = parse_integer<std::uint64_t>(t, c); break;
    case Column::DstBytes: f.dst_bytes = parse_integer<std::uint64_t>(t, c); break;
    case Column::Dur: f.dur = parse_real(t, c); break;
    case Column::Mean: f.mean = parse_real(t, c); break;
    case Column::StdDev: f.stddev = parse_real(t, c); break;
    case Column::Sum: f.sum = parse_real(t, c); break;
    case Column::Min: f.min = parse_real(t, c); break;
    case Column::Max: f.max = parse_real(t, c); break;
    case Column::Rate: f.rate = parse_real(t, c); break;
    case Column::SrcRate: f.src_rate = parse_real(t, c); break;
    case Column::DstRate: f.dst_rate = parse_real(t, c); break;
    case Column::SIntPkt: f.s_int_pkt = parse_real(t, c); break;
    case Column::DIntPkt: f.d_int_pkt = parse_real(t, c); break;
    case Column::SrcGap: f.src_gap = parse_integer<std::uint64_t>(t, c); break;
    case Column::DstGap: f.dst_gap = parse_integer<std::uint64_t>(t, c); break;
    case Column::SrcMac: f.src_mac = t; break;
    case Column::DstMac: f.dst_mac = t; break;
    case Column::SrcOui: f.src_oui = t; break;
    case Column::DstOui: f.dst_oui = t; break;
    case Column::Label: f.label = t; break;
    }
}

std::size_t emit_csv(std::span<const FlowFeatures> flows, const DatasetProfile& profile, std::ostream& out)
{
    std::string buf = csv::format_row(profile.header());
    auto flush = [&] {
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (!out) throw ProfileError("write failed");
        buf.clear();
    };
    std::size_t rank = 0;
    for (const FlowFeatures& f : flows) {
        ++rank;
        for (std::size_t i = 0; i < profile.columns.size(); ++i) {
            if (i) buf.push_back(',');
            const Column c = profile.columns[i];
            if (c == Column::Rank) {
                buf += std::to_string(rank);
            } else {
                csv::append_field(buf, format_cell(f, c));
            }
        }
        buf.push_back('\n');
        if (buf.size() >= kFlushBytes) flush();
    }
    flush();
    out.flush();
    if (!out) throw ProfileError("write failed");
    return rank;
}

std::vector<FlowFeatures> read_csv(std::istream& in, const DatasetProfile& profile)
{
    csv::Reader reader(in);
    std::vector<std::string> row;
    if (!reader.next(row)) throw ProfileError("empty file: missing header for profile " + profile.name);
    check_header(row, profile);
    std::vector<FlowFeatures> out;
    while (reader.next(row)) {
        if (row.size() == 1 && row[0].empty()) continue;
        if (row.size() != profile.columns.size())
            throw ProfileError("line " + std::to_string(reader.line()) + ": expected " +
                               std::to_string(profile.columns.size()) + " fields, got " + std::to_string(row.size()));
        FlowFeatures f;
        try {
            for (std::size_t i = 0; i < row.size(); ++i) parse_cell(f, profile.columns[i], row[i]);
        } catch (const ProfileError& e) {
            throw ProfileError("line " + std::to_string(reader.line()) + ": " + e.what());
        }
        out.push_back(std::move(f));
    }
    return out;
}

std::vector<FlowFeatures> read_csv(const std::filesystem::path& path, const DatasetProfile& profile)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ProfileError("cannot open " + path.string());
    return read_csv(in, profile);
}

std::vector<FlowFeatures> read_any_csv(const std::filesystem::path& path, const DatasetProfile** detected)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ProfileError("cannot open " + path.string());
    csv::Reader reader(in);
    std::vector<std::string> header;
    if (!reader.next(header)) throw ProfileError(path.string() + ": empty file");
    const DatasetProfile* profile = detect_profile(header);
    if (!profile) throw ProfileError(path.string() + ": header matches no known profile");
    if (detected) *detected = profile;
    in.clear();
    in.seekg(0);
    return read_csv(in, *profile);
}

std::string StatsReport::to_text() const
{
    std::size_t width = 5;  // "Class"/"Total"
    for (const auto& r : rows) width = std::max(width, r.label.size());
    std::size_t num_width = 5;
    num_width = std::max(num_width, std::to_string(total).size());
    auto line = [&](std::string_view name, std::string_view count) {
        std::string s(name);
        s.append(width - name.size() + 2, ' ');
        s.append(num_width - std::min(num_width, count.size()), ' ');
        s.append(count);
        s.push_back('\n');
        return s;
    };
    std::string out = line("Class", "Flows");
    for (const auto& r : rows) out += line(r.label, std::to_string(r.count));
    out += line("Total", std::to_string(total));
    return out;
}

std::string StatsReport::to_csv() const
{
    std::string out = "class,count\n";
    for (const auto& r : rows) {
        csv::append_field(out, r.label);
        out += "," + std::to_string(r.count) + "\n";
    }
    out += "Total," + std::to_string(total) + "\n";
    return out;
}

StatsReport stats_report(std::span<const FlowFeatures> flows)
{
    std::map<std::string, std::uint64_t> counts;
    for (const auto& f : flows) ++counts[f.label];
    StatsReport report;
    for (auto& [label, n] : counts) report.rows.push_back(ClassCount{label, n});
    std::stable_sort(report.rows.begin(), report.rows.end(),
                     [](const ClassCount& a, const ClassCount& b) { return a.count > b.count; });
    report.total = flows.size();
    return report;
}

StatsReport stats_report(const std::filesystem::path& labelled_csv)
{
    const auto flows = read_any_csv(labelled_csv);
    return stats_report(flows);
}

}  // namespace flowforge
