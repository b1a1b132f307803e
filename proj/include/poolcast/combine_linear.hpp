#pragma once

// Equal- and inverse-MAE-weighted averages over pool columns. Days are
// pool-local indices (0 = first pool day).

#include "poolcast/error.hpp"
#include "poolcast/pool.hpp"

#include <Eigen/Dense>

#include <array>
#include <vector>

namespace poolcast {

using DayForecast = std::array<double, kHoursPerDay>;

inline constexpr int kAveragingWindow = 182;

struct WindowSubset {
    std::vector<int> taus{56, 84, 112, 714, 721, 728};

    std::vector<int> columns(const ForecastPool& pool) const {
        if (taus.empty()) throw ConfigError("empty window subset");
        std::vector<int> cols;
        for (int t : taus) cols.push_back(pool.column_of(t));
        return cols;
    }
};

namespace detail {

inline void check_day(const ForecastPool& pool, int day) {
    if (day < 0 || day >= pool.n_days()) throw AlignmentError("day " + std::to_string(day) + " not in the pool");
}

inline void check_trailing(const ForecastPool& pool, int day, int window_len) {
    check_day(pool, day);
    if (window_len < 1 || day < window_len) {
        throw AlignmentError("day " + std::to_string(day) + " lacks " + std::to_string(window_len) +
                             " trailing pool days");
    }
}

inline DayForecast weighted_columns(const ForecastPool& pool, int day, const std::vector<int>& cols,
                                    const Eigen::VectorXd& weights) {
    DayForecast out{};
    const auto rows = pool.day_rows(day);
    for (int h = 0; h < kHoursPerDay; ++h) {
        double s = 0.0;
        for (std::size_t i = 0; i < cols.size(); ++i) s += weights(static_cast<Eigen::Index>(i)) * rows(h, cols[i]);
        out[static_cast<std::size_t>(h)] = s;
    }
    return out;
}

}  // namespace detail

inline DayForecast simple_average(const ForecastPool& pool, int day) {
    detail::check_day(pool, day);
    DayForecast out{};
    const auto rows = pool.day_rows(day);
    for (int h = 0; h < kHoursPerDay; ++h) out[static_cast<std::size_t>(h)] = rows.row(h).mean();
    return out;
}

inline DayForecast aw(const ForecastPool& pool, const WindowSubset& subset, int day) {
    detail::check_day(pool, day);
    const auto cols = subset.columns(pool);
    const Eigen::VectorXd w = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(cols.size()), 1.0 / cols.size());
    return detail::weighted_columns(pool, day, cols, w);
}

/// Normalized inverse-MAE weights. Columns with zero MAE share all the weight.
inline Eigen::VectorXd waw_weights(const Eigen::VectorXd& mae) {
    if (mae.size() == 0) throw ConfigError("no columns to weight");
    const Eigen::Index n = mae.size();
    Eigen::VectorXd w(n);
    const auto zeros = (mae.array() == 0.0).count();
    if (zeros > 0) {
        for (Eigen::Index i = 0; i < n; ++i) w(i) = mae(i) == 0.0 ? 1.0 / static_cast<double>(zeros) : 0.0;
        return w;
    }
    w = mae.cwiseInverse();
    return w / w.sum();
}

/// Trailing MAE of each column over the `window_len` days before `day`.
inline Eigen::VectorXd trailing_mae(const ForecastPool& pool, const std::vector<int>& cols, int day, int window_len) {
    detail::check_trailing(pool, day, window_len);
    const Eigen::Index r0 = static_cast<Eigen::Index>(day - window_len) * kHoursPerDay;
    const Eigen::Index n = static_cast<Eigen::Index>(window_len) * kHoursPerDay;
    Eigen::VectorXd mae(static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < cols.size(); ++i) {
        mae(static_cast<Eigen::Index>(i)) =
            (pool.values.col(cols[i]).segment(r0, n) - pool.actual.segment(r0, n)).cwiseAbs().mean();
    }
    return mae;
}

inline DayForecast waw(const ForecastPool& pool, const WindowSubset& subset, int day,
                       int window_len = kAveragingWindow) {
    const auto cols = subset.columns(pool);
    const Eigen::VectorXd w = waw_weights(trailing_mae(pool, cols, day, window_len));
    return detail::weighted_columns(pool, day, cols, w);
}

}  // namespace poolcast
