#include "qhealth/caldata.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "qhealth/common.hpp"
#include "qhealth/topology.hpp"

namespace qhealth {

namespace {

constexpr std::array<std::string_view, 6> kMetricTokens = {"T1",  "T2STAR", "T2ECHO",
                                                           "FRO", "F1Q",    "F2Q"};

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

template <typename T>
bool parse_full(std::string_view s, T& out) {
    s = trim(s);
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc{} && ptr == end;
}

int parse_index(std::string_view s) {
    int v = 0;
    if (!parse_full(s, v) || v < 0) throw DataError("bad index '" + std::string(s) + "'");
    return v;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

void validate_record(const CalibrationRecord& r) {
    if (r.day < 0) throw DataError("negative day index");
    if (r.target.kind == TargetId::Kind::Device)
        throw DataError("record target must be a qubit or coupler");
    if (is_coupler_metric(r.metric) != r.target.is_coupler())
        throw DataError(std::string(to_string(r.metric)) + " cannot attach to " +
                        to_string(r.target));
    if (!in_range(r.metric, r.value))
        throw DataError(std::string(to_string(r.metric)) + " value " + format_number(r.value) +
                        " out of range");
    if (r.std_error && !(*r.std_error >= 0.0 && std::isfinite(*r.std_error)))
        throw DataError("stderr must be a finite nonnegative number");
}

CalibrationRecord parse_row(std::string_view line) {
    const auto fields = split(line, ',');
    if (fields.size() != 5)
        throw DataError("expected 5 fields, got " + std::to_string(fields.size()));
    CalibrationRecord r;
    if (!parse_full(fields[0], r.day)) throw DataError("bad day '" + std::string(fields[0]) + "'");
    r.target = parse_target(trim(fields[1]));
    r.metric = parse_metric(trim(fields[2]));
    if (!parse_full(fields[3], r.value))
        throw DataError("bad value '" + std::string(fields[3]) + "'");
    if (!trim(fields[4]).empty()) {
        double se = 0.0;
        if (!parse_full(fields[4], se))
            throw DataError("bad stderr '" + std::string(fields[4]) + "'");
        r.std_error = se;
    }
    validate_record(r);
    return r;
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    return in;
}

}  // namespace

std::string_view to_string(MetricKind m) noexcept { return kMetricTokens[static_cast<std::size_t>(m)]; }

MetricKind parse_metric(std::string_view token) {
    for (std::size_t i = 0; i < kMetricTokens.size(); ++i)
        if (kMetricTokens[i] == token) return static_cast<MetricKind>(i);
    throw DataError("unknown metric '" + std::string(token) + "'");
}

bool in_range(MetricKind m, double value) noexcept {
    if (!std::isfinite(value)) return false;
    if (is_fidelity(m)) return value >= 0.0 && value <= 1.0;
    return value > 0.0;
}

TargetId TargetId::qubit(int index) {
    if (index < 0) throw DataError("negative qubit index");
    return {Kind::Qubit, index, -1};
}

TargetId TargetId::coupler(int x, int y) {
    if (x < 0 || y < 0) throw DataError("negative coupler endpoint");
    if (x == y) throw DataError("coupler endpoints must differ");
    return {Kind::Coupler, std::min(x, y), std::max(x, y)};
}

std::string to_string(const TargetId& t) {
    switch (t.kind) {
    case TargetId::Kind::Qubit: return "q" + std::to_string(t.a);
    case TargetId::Kind::Coupler: return "c" + std::to_string(t.a) + "-" + std::to_string(t.b);
    case TargetId::Kind::Device: return "device";
    }
    return {};
}

TargetId parse_target(std::string_view token) {
    if (token.size() >= 2 && token.front() == 'q') return TargetId::qubit(parse_index(token.substr(1)));
    if (token.size() >= 4 && token.front() == 'c') {
        const auto dash = token.find('-');
        if (dash == std::string_view::npos) throw DataError("bad coupler '" + std::string(token) + "'");
        const int x = parse_index(token.substr(1, dash - 1));
        const int y = parse_index(token.substr(dash + 1));
        if (x >= y) throw DataError("coupler endpoints must be ascending in '" + std::string(token) + "'");
        return TargetId::coupler(x, y);
    }
    if (token == "device") return TargetId::device();
    throw DataError("bad target '" + std::string(token) + "'");
}

MetricSeries MetricSeries::restricted(const DayWindow& w) const {
    MetricSeries out{target, metric, {}, {}};
    for (std::size_t i = 0; i < days.size(); ++i) {
        if (w.contains(days[i])) {
            out.days.push_back(days[i]);
            out.values.push_back(values[i]);
        }
    }
    return out;
}

Dataset::Dataset(std::vector<CalibrationRecord> records, std::optional<std::string> topology_ref)
    : records_(std::move(records)), topology_ref_(std::move(topology_ref)) {
    for (const auto& r : records_) validate_record(r);
    std::sort(records_.begin(), records_.end(), [](const auto& x, const auto& y) {
        return std::tie(x.day, x.target, x.metric) < std::tie(y.day, y.target, y.metric);
    });
    for (std::size_t i = 1; i < records_.size(); ++i) {
        const auto& p = records_[i - 1];
        const auto& r = records_[i];
        if (p.day == r.day && p.target == r.target && p.metric == r.metric)
            throw DataError("duplicate record (day " + std::to_string(r.day) + ", " +
                            to_string(r.target) + ", " + std::string(to_string(r.metric)) + ")");
    }
    for (std::size_t i = 0; i < records_.size(); ++i)
        index_[{records_[i].target, records_[i].metric}].push_back(i);
}

std::vector<TargetId> Dataset::targets(MetricKind metric) const {
    std::vector<TargetId> out;
    for (const auto& [key, idx] : index_)
        if (key.second == metric) out.push_back(key.first);
    return out;
}

int Dataset::qubit_count() const noexcept {
    int n = 0;
    for (const auto& r : records_) n = std::max(n, std::max(r.target.a, r.target.b) + 1);
    return n;
}

DayWindow Dataset::day_span() const {
    if (records_.empty()) throw DataError("dataset is empty");
    return {records_.front().day, records_.back().day};
}

std::span<const std::size_t> Dataset::index(const TargetId& target, MetricKind metric) const {
    const auto it = index_.find({target, metric});
    if (it == index_.end()) return {};
    return it->second;
}

void Dataset::check_topology(const DeviceTopology& topology) const {
    for (const auto& [key, idx] : index_) {
        const auto& t = key.first;
        if (t.is_coupler() && !topology.has_edge(t.a, t.b))
            throw DataError("coupler " + to_string(t) + " is not an edge of topology '" +
                            topology.name() + "'");
        if (t.is_qubit() && t.a >= topology.n_qubits())
            throw DataError("qubit " + to_string(t) + " outside topology '" + topology.name() + "'");
    }
}

std::string format_number(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
}

Dataset parse_csv(std::istream& in, std::string_view source) {
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    std::vector<CalibrationRecord> records;
    while (std::getline(in, line)) {
        ++line_no;
        const auto view = trim(line);
        if (view.empty()) continue;
        if (!have_header) {
            std::string header(view);
            std::erase(header, ' ');
            if (header.starts_with("\xEF\xBB\xBF")) header.erase(0, 3);
            if (header != "day,target,metric,value,stderr")
                throw DataError(std::string(source) + ":" + std::to_string(line_no) +
                                ": header must be 'day,target,metric,value,stderr'");
            have_header = true;
            continue;
        }
        try {
            records.push_back(parse_row(view));
        } catch (const DataError& e) {
            throw DataError(std::string(source) + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!have_header) throw DataError(std::string(source) + ": missing header row");
    return Dataset(std::move(records));
}

Dataset ingest_csv(const std::filesystem::path& path) {
    auto in = open_or_throw(path);
    return parse_csv(in, path.string());
}

void emit_csv(const Dataset& ds, std::ostream& out) {
    out << "day,target,metric,value,stderr\n";
    for (const auto& r : ds.records()) {
        out << r.day << ',' << to_string(r.target) << ',' << to_string(r.metric) << ','
            << format_number(r.value) << ',';
        if (r.std_error) out << format_number(*r.std_error);
        out << '\n';
    }
}

Dataset parse_json(std::istream& in, std::string_view source) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string(source) + ": " + e.what());
    }
    std::optional<std::string> topology_ref;
    const nlohmann::json* rows = &doc;
    if (doc.is_object()) {
        if (!doc.contains("records")) throw DataError(std::string(source) + ": missing 'records'");
        rows = &doc["records"];
        if (doc.contains("topology_ref") && doc["topology_ref"].is_string())
            topology_ref = doc["topology_ref"].get<std::string>();
    }
    if (!rows->is_array()) throw DataError(std::string(source) + ": records must be an array");
    std::vector<CalibrationRecord> records;
    records.reserve(rows->size());
    std::size_t i = 0;
    for (const auto& row : *rows) {
        try {
            CalibrationRecord r;
            r.day = row.at("day").get<int>();
            r.target = parse_target(row.at("target").get<std::string>());
            r.metric = parse_metric(row.at("metric").get<std::string>());
            r.value = row.at("value").get<double>();
            if (row.contains("stderr") && !row["stderr"].is_null())
                r.std_error = row["stderr"].get<double>();
            validate_record(r);
            records.push_back(r);
        } catch (const std::exception& e) {
            throw DataError(std::string(source) + ": record " + std::to_string(i) + ": " + e.what());
        }
        ++i;
    }
    return Dataset(std::move(records), std::move(topology_ref));
}

Dataset ingest_json(const std::filesystem::path& path) {
    auto in = open_or_throw(path);
    return parse_json(in, path.string());
}

void emit_json(const Dataset& ds, std::ostream& out) {
    auto rows = nlohmann::ordered_json::array();
    for (const auto& r : ds.records()) {
        nlohmann::ordered_json row;
        row["day"] = r.day;
        row["target"] = to_string(r.target);
        row["metric"] = std::string(to_string(r.metric));
        row["value"] = r.value;
        row["stderr"] = r.std_error ? nlohmann::ordered_json(*r.std_error) : nlohmann::ordered_json();
        rows.push_back(std::move(row));
    }
    out << rows.dump(1) << '\n';
}

Dataset ingest(const std::filesystem::path& path) {
    if (path.extension() == ".json") return ingest_json(path);
    return ingest_csv(path);
}

MetricSeries series(const Dataset& ds, const TargetId& target, MetricKind metric) {
    MetricSeries s{target, metric, {}, {}};
    for (const auto i : ds.index(target, metric)) {
        s.days.push_back(ds.records()[i].day);
        s.values.push_back(ds.records()[i].value);
    }
    return s;
}

MetricSeries daily_mean(const Dataset& ds, MetricKind metric, std::optional<DayWindow> window) {
    if (window && window->from > window->to) throw UsageError("window start after window end");
    MetricSeries out{TargetId::device(), metric, {}, {}};
    int current_day = -1;
    double sum = 0.0;
    int count = 0;
    auto flush = [&] {
        if (count > 0) {
            out.days.push_back(current_day);
            out.values.push_back(sum / count);
        }
    };
    // Records are sorted by day first, so one pass suffices.
    for (const auto& r : ds.records()) {
        if (r.metric != metric) continue;
        if (window && !window->contains(r.day)) continue;
        if (r.day != current_day) {
            flush();
            current_day = r.day;
            sum = 0.0;
            count = 0;
        }
        sum += r.value;
        ++count;
    }
    flush();
    return out;
}

std::optional<double> window_mean(const Dataset& ds, const TargetId& target, MetricKind metric, DayWindow window) {
    double sum = 0.0;
    long n = 0;
    for (const auto i : ds.index(target, metric)) {
        const auto& r = ds.records()[i];
        if (!window.contains(r.day)) continue;
        sum += r.value;
        ++n;
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

}  // namespace qhealth
