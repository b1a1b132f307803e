#pragma once

// Double-indexed (day, hour) market data and the DST repair rule.

#include "poolcast/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace poolcast {

inline constexpr int kHoursPerDay = 24;

/// Rows are days, columns are the 24 delivery hours.
using DayHourMatrix = Eigen::Matrix<double, Eigen::Dynamic, kHoursPerDay, Eigen::RowMajor>;

enum class Market { Epex, NordPool, Omie, Pjm, Synth };

enum class Series { Price, Load, ZonalLoad, Wind, Solar };

inline std::string_view to_string(Market m) {
    switch (m) {
        case Market::Epex: return "epex";
        case Market::NordPool: return "np";
        case Market::Omie: return "omie";
        case Market::Pjm: return "pjm";
        case Market::Synth: return "synth";
    }
    return "?";
}

inline Market parse_market(std::string_view s) {
    for (Market m : {Market::Epex, Market::NordPool, Market::Omie, Market::Pjm, Market::Synth}) {
        if (to_string(m) == s) return m;
    }
    throw ConfigError("unknown market '" + std::string(s) + "' (valid: epex, np, omie, pjm, synth)");
}

/// Column name used in CSV files.
inline std::string_view column_name(Series s) {
    switch (s) {
        case Series::Price: return "price";
        case Series::Load: return "load";
        case Series::ZonalLoad: return "zonal_load";
        case Series::Wind: return "wind";
        case Series::Solar: return "solar";
    }
    return "?";
}

/// Exogenous series available per market, in canonical order.
inline std::vector<Series> exogenous_schema(Market m) {
    switch (m) {
        case Market::Epex: return {Series::Load, Series::Wind, Series::Solar};
        case Market::NordPool: return {Series::Load, Series::Wind};
        case Market::Omie: return {Series::Load, Series::Wind, Series::Solar};
        case Market::Pjm: return {Series::Load, Series::ZonalLoad};
        case Market::Synth: return {Series::Load, Series::Wind};
    }
    return {};
}

// Calendar helpers. Weekday index: 0 = Monday ... 6 = Sunday.

using Date = std::chrono::sys_days;

inline int weekday_index(Date date) {
    const unsigned iso = std::chrono::weekday{date}.iso_encoding();  // 1 = Monday
    return static_cast<int>(iso) - 1;
}

inline Date make_date(int y, unsigned m, unsigned d) {
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!ymd.ok()) throw ParseError("invalid calendar date");
    return Date{ymd};
}

inline std::string format_date(Date date) {
    const std::chrono::year_month_day ymd{date};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

/// Parses YYYY-MM-DD.
inline Date parse_date(std::string_view s) {
    int y = 0;
    unsigned m = 0, d = 0;
    char tail = 0;
    const std::string str(s);
    if (std::sscanf(str.c_str(), "%d-%u-%u%c", &y, &m, &d, &tail) != 3) {
        throw ParseError("bad date '" + str + "', expected YYYY-MM-DD");
    }
    return make_date(y, m, d);
}

enum class RepairKind { MissingFilled, DoubledAveraged };

struct RepairEntry {
    Series series = Series::Price;
    int day = 0;   // 0-based day index
    int hour = 0;  // 0-based hour of day
    RepairKind kind = RepairKind::MissingFilled;
    std::vector<double> original;  // empty for missing cells
};

struct RepairLog {
    std::vector<RepairEntry> entries;

    std::size_t count(RepairKind k) const {
        return static_cast<std::size_t>(
            std::count_if(entries.begin(), entries.end(), [k](const RepairEntry& e) { return e.kind == k; }));
    }
};

/// One raw observation before densification. Duplicated (day, hour) pairs are
/// the autumn DST hour; absent pairs (or NaN values) are missing hours.
struct RawObservation {
    int day = 0;
    int hour = 0;
    double value = 0.0;
};

struct RepairResult {
    DayHourMatrix values;
    RepairLog log;
};

/// Densifies sparse hourly records into an [n_days x 24] matrix.
///
/// Duplicated cells become the arithmetic mean of their values. A missing cell
/// becomes the mean of the nearest observed hours on either side; at the series
/// boundary the single nearest observation is copied. Two or more consecutive
/// missing hours throw GapError.
inline RepairResult repair_hours(const std::vector<RawObservation>& raw, int n_days, Series series = Series::Price) {
    if (n_days <= 0) throw GapError("no days to repair");
    const std::size_t n_cells = static_cast<std::size_t>(n_days) * kHoursPerDay;
    std::vector<std::vector<double>> bucket(n_cells);
    for (const auto& obs : raw) {
        if (obs.day < 0 || obs.day >= n_days || obs.hour < 0 || obs.hour >= kHoursPerDay) {
            throw GapError("observation outside the day range");
        }
        if (std::isfinite(obs.value)) {
            bucket[static_cast<std::size_t>(obs.day) * kHoursPerDay + obs.hour].push_back(obs.value);
        }
    }

    RepairResult out;
    out.values.resize(n_days, kHoursPerDay);
    std::vector<bool> observed(n_cells, false);
    double* cells = out.values.data();
    for (std::size_t i = 0; i < n_cells; ++i) {
        const auto& b = bucket[i];
        if (b.empty()) continue;
        observed[i] = true;
        double sum = 0.0;
        for (double v : b) sum += v;
        cells[i] = sum / static_cast<double>(b.size());
        if (b.size() > 1) {
            out.log.entries.push_back({series, static_cast<int>(i / kHoursPerDay), static_cast<int>(i % kHoursPerDay),
                                       RepairKind::DoubledAveraged, b});
        }
    }

    for (std::size_t i = 0; i < n_cells; ++i) {
        if (observed[i]) continue;
        const bool has_prev = i > 0 && observed[i - 1];
        const bool has_next = i + 1 < n_cells && observed[i + 1];
        const bool at_start = i == 0;
        const bool at_end = i + 1 == n_cells;
        const int day = static_cast<int>(i / kHoursPerDay);
        const int hour = static_cast<int>(i % kHoursPerDay);
        if (has_prev && has_next) {
            cells[i] = 0.5 * (cells[i - 1] + cells[i + 1]);
        } else if (at_start && has_next) {
            cells[i] = cells[i + 1];
        } else if (at_end && has_prev) {
            cells[i] = cells[i - 1];
        } else {
            throw GapError("irreparable gap in '" + std::string(column_name(series)) + "' at day " +
                           std::to_string(day) + " hour " + std::to_string(hour) +
                           ": two or more consecutive hours missing");
        }
        out.log.entries.push_back({series, day, hour, RepairKind::MissingFilled, {}});
    }
    std::sort(out.log.entries.begin(), out.log.entries.end(), [](const RepairEntry& a, const RepairEntry& b) {
        return std::tie(a.day, a.hour) < std::tie(b.day, b.hour);
    });
    return out;
}

/// Hourly price and exogenous panel for one market. Immutable once built.
struct HourlyFrame {
    Market market = Market::Synth;
    Date start_date{};
    DayHourMatrix price;
    std::map<Series, DayHourMatrix> exog;
    RepairLog repairs;

    int n_days() const { return static_cast<int>(price.rows()); }

    Date date_of(int day) const { return start_date + std::chrono::days{day}; }

    int weekday(int day) const { return weekday_index(date_of(day)); }

    const DayHourMatrix& series(Series s) const {
        if (s == Series::Price) return price;
        auto it = exog.find(s);
        if (it == exog.end()) throw SchemaError("series '" + std::string(column_name(s)) + "' not present");
        return it->second;
    }

    /// Checks shapes, finiteness and the market's exogenous schema.
    void validate() const {
        if (price.rows() <= 0) throw SchemaError("frame has no days");
        if (!price.allFinite()) throw SchemaError("price contains non-finite values");
        const auto schema = exogenous_schema(market);
        if (exog.size() != schema.size()) {
            throw SchemaError("exogenous series do not match the schema of market '" +
                              std::string(to_string(market)) + "'");
        }
        for (Series s : schema) {
            auto it = exog.find(s);
            if (it == exog.end()) {
                throw SchemaError("market '" + std::string(to_string(market)) + "' requires series '" +
                                  std::string(column_name(s)) + "'");
            }
            if (it->second.rows() != price.rows()) throw SchemaError("series lengths differ");
            if (!it->second.allFinite()) {
                throw SchemaError("series '" + std::string(column_name(s)) + "' contains non-finite values");
            }
        }
    }
};

}  // namespace poolcast
