#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace qhealth {

enum class MetricKind : std::uint8_t { T1, T2Star, T2Echo, ReadoutFidelity, Fidelity1Q, Fidelity2Q };

inline constexpr std::array<MetricKind, 6> kAllMetrics = {
    MetricKind::T1,         MetricKind::T2Star,     MetricKind::T2Echo,
    MetricKind::ReadoutFidelity, MetricKind::Fidelity1Q, MetricKind::Fidelity2Q};

inline constexpr std::array<MetricKind, 5> kQubitMetrics = {
    MetricKind::T1, MetricKind::T2Star, MetricKind::T2Echo, MetricKind::ReadoutFidelity,
    MetricKind::Fidelity1Q};

constexpr bool is_fidelity(MetricKind m) noexcept {
    return m == MetricKind::ReadoutFidelity || m == MetricKind::Fidelity1Q ||
           m == MetricKind::Fidelity2Q;
}

constexpr bool is_coherence(MetricKind m) noexcept { return !is_fidelity(m); }

constexpr bool is_coupler_metric(MetricKind m) noexcept { return m == MetricKind::Fidelity2Q; }

/// CSV token: T1, T2STAR, T2ECHO, FRO, F1Q, F2Q.
std::string_view to_string(MetricKind m) noexcept;
MetricKind parse_metric(std::string_view token);

/// True when `value` satisfies the unit/range invariant of `m`.
bool in_range(MetricKind m, double value) noexcept;

/// A qubit, a coupler (a < b), or the whole device (used for aggregated series).
struct TargetId {
    enum class Kind : std::uint8_t { Qubit, Coupler, Device };

    Kind kind = Kind::Device;
    int a = -1;
    int b = -1;

    static TargetId qubit(int index);
    /// Endpoints are stored in ascending order; equal endpoints throw.
    static TargetId coupler(int x, int y);
    static TargetId device() noexcept { return {}; }

    bool is_qubit() const noexcept { return kind == Kind::Qubit; }
    bool is_coupler() const noexcept { return kind == Kind::Coupler; }
    bool touches(int q) const noexcept {
        return (kind == Kind::Qubit && a == q) || (kind == Kind::Coupler && (a == q || b == q));
    }

    friend auto operator<=>(const TargetId&, const TargetId&) = default;
    friend bool operator==(const TargetId&, const TargetId&) = default;
};

/// `q<N>`, `c<A>-<B>` or `device`.
std::string to_string(const TargetId& t);
TargetId parse_target(std::string_view token);

struct CalibrationRecord {
    int day = 0;
    TargetId target;
    MetricKind metric = MetricKind::T1;
    double value = 0.0;
    std::optional<double> std_error;

    friend bool operator==(const CalibrationRecord&, const CalibrationRecord&) = default;
};

/// Inclusive day interval.
struct DayWindow {
    int from = 0;
    int to = 0;

    bool contains(int day) const noexcept { return day >= from && day <= to; }
    int length() const noexcept { return to - from + 1; }
};

/// Daily series of one metric for one target. Days are strictly increasing;
/// missing days are gaps, never filled in.
struct MetricSeries {
    TargetId target;
    MetricKind metric = MetricKind::T1;
    std::vector<int> days;
    std::vector<double> values;

    std::size_t size() const noexcept { return days.size(); }
    bool empty() const noexcept { return days.empty(); }
    /// Days covered from the first to the last point, gaps included.
    int span_days() const noexcept { return empty() ? 0 : days.back() - days.front() + 1; }
    /// Points that fall into `w`.
    MetricSeries restricted(const DayWindow& w) const;
};

class DeviceTopology;

/// Immutable validated collection of calibration records, stored in canonical
/// (day, target, metric) order.
class Dataset {
public:
    Dataset() = default;
    /// Validates ranges and (day, target, metric) uniqueness, then sorts.
    explicit Dataset(std::vector<CalibrationRecord> records,
                     std::optional<std::string> topology_ref = std::nullopt);

    const std::vector<CalibrationRecord>& records() const noexcept { return records_; }
    const std::optional<std::string>& topology_ref() const noexcept { return topology_ref_; }
    bool empty() const noexcept { return records_.empty(); }
    std::size_t size() const noexcept { return records_.size(); }

    /// Distinct targets carrying `metric`, ascending.
    std::vector<TargetId> targets(MetricKind metric) const;
    /// Highest qubit index referenced by any record, plus one.
    int qubit_count() const noexcept;
    /// [first day, last day] over all records. Throws DataError when empty.
    DayWindow day_span() const;

    /// Indices into records() for one (target, metric), in day order.
    std::span<const std::size_t> index(const TargetId& target, MetricKind metric) const;

    /// Throws DataError when a coupler target is not an edge of `topology`
    /// or a qubit index lies outside it.
    void check_topology(const DeviceTopology& topology) const;

    friend bool operator==(const Dataset& x, const Dataset& y) {
        return x.records_ == y.records_ && x.topology_ref_ == y.topology_ref_;
    }

private:
    std::vector<CalibrationRecord> records_;
    std::optional<std::string> topology_ref_;
    std::map<std::pair<TargetId, MetricKind>, std::vector<std::size_t>> index_;
};

/// Shortest decimal representation that round-trips to the same double.
std::string format_number(double value);

Dataset parse_csv(std::istream& in, std::string_view source = "<stream>");
Dataset ingest_csv(const std::filesystem::path& path);
void emit_csv(const Dataset& ds, std::ostream& out);

Dataset parse_json(std::istream& in, std::string_view source = "<stream>");
Dataset ingest_json(const std::filesystem::path& path);
void emit_json(const Dataset& ds, std::ostream& out);

/// Picks the reader by extension (.json or anything else as CSV).
Dataset ingest(const std::filesystem::path& path);

MetricSeries series(const Dataset& ds, const TargetId& target, MetricKind metric);

/// Mean of one target's values inside the window; nullopt when it has none.
std::optional<double> window_mean(const Dataset& ds, const TargetId& target, MetricKind metric, DayWindow window);

/// Arithmetic mean across targets for every day with at least one record.
MetricSeries daily_mean(const Dataset& ds, MetricKind metric,
                        std::optional<DayWindow> window = std::nullopt);

}  // namespace qhealth
