#pragma once

// Per-hour autoregressive model with exogenous inputs, estimated on N-PIT
// transformed data:
//
//   y(d,h) = b1 y(d-1,h) + b2 y(d-2,h) + b3 y(d-7,h)
//          + b4 min_h' y(d-1,h') + b5 max_h' y(d-1,h') + b6 y(d-1,24)
//          + sum_{i=1..7} b(6+i) D_i(d) + theta_h' x(d,h) + e(d,h)
//
// The seven weekday dummies carry the level, so there is no separate
// intercept. Solar enters only for hours 9-17.

#include "poolcast/error.hpp"
#include "poolcast/frame.hpp"
#include "poolcast/vst.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace poolcast {

inline constexpr int kArxPriceTerms = 6;
inline constexpr int kWeekdays = 7;

/// True when `s` enters the model for the 1-based `hour`.
inline bool series_active(Series s, int hour) { return s != Series::Solar || (hour >= 9 && hour <= 17); }

/// Number of regressors for a 1-based hour of a market.
inline int design_width(Market market, int hour) {
    int w = kArxPriceTerms + kWeekdays;
    for (Series s : exogenous_schema(market)) w += series_active(s, hour) ? 1 : 0;
    return w;
}

/// Transformed price and exogenous values over a contiguous day range.
struct TransformedPanel {
    Market market = Market::Synth;
    int first_day = 0;      // frame day index of row 0
    int first_weekday = 0;  // weekday index (0 = Monday) of row 0
    DayHourMatrix price;    // NaN where the price is unknown (forecast day)
    std::vector<DayHourMatrix> exog;  // aligned with exogenous_schema(market)

    int end_day() const { return first_day + static_cast<int>(price.rows()); }
    int weekday(int day) const { return (first_weekday + (day - first_day)) % 7; }
};

/// Plain (untransformed) view of a frame as a panel.
inline TransformedPanel identity_panel(const HourlyFrame& frame) {
    TransformedPanel p;
    p.market = frame.market;
    p.first_day = 0;
    p.first_weekday = frame.weekday(0);
    p.price = frame.price;
    for (Series s : exogenous_schema(frame.market)) p.exog.push_back(frame.exog.at(s));
    return p;
}

/// Regressors of one (day, hour); `hour` is 1-based. Needs days day-7..day in the panel.
inline void design_row(const TransformedPanel& panel, int day, int hour, std::span<double> out) {
    const int r = day - panel.first_day;
    const int h = hour - 1;
    const auto prev = panel.price.row(r - 1);
    out[0] = panel.price(r - 1, h);
    out[1] = panel.price(r - 2, h);
    out[2] = panel.price(r - 7, h);
    out[3] = prev.minCoeff();
    out[4] = prev.maxCoeff();
    out[5] = prev(kHoursPerDay - 1);
    const int wd = panel.weekday(day);
    for (int i = 0; i < kWeekdays; ++i) out[kArxPriceTerms + i] = i == wd ? 1.0 : 0.0;
    int c = kArxPriceTerms + kWeekdays;
    const auto schema = exogenous_schema(panel.market);
    for (std::size_t k = 0; k < schema.size(); ++k) {
        if (series_active(schema[k], hour)) out[static_cast<std::size_t>(c++)] = panel.exog[k](r, h);
    }
}

struct Design {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
};

/// Design matrix and target for target days [first_day, last_day] of a 1-based hour.
inline Design build_design(const TransformedPanel& panel, int hour, int first_day, int last_day) {
    if (hour < 1 || hour > kHoursPerDay) throw DesignError("hour must lie in 1..24");
    if (first_day - 7 < panel.first_day) throw DesignError("target days start less than 7 days after the panel start");
    if (last_day >= panel.end_day() || last_day < first_day) throw DesignError("target day range outside the panel");
    const int rows = last_day - first_day + 1;
    const int width = design_width(panel.market, hour);
    Design d{Eigen::MatrixXd(rows, width), Eigen::VectorXd(rows)};
    std::array<double, 32> buf{};
    for (int i = 0; i < rows; ++i) {
        const int day = first_day + i;
        design_row(panel, day, hour, std::span<double>(buf.data(), static_cast<std::size_t>(width)));
        for (int c = 0; c < width; ++c) d.X(i, c) = buf[static_cast<std::size_t>(c)];
        d.y(i) = panel.price(day - panel.first_day, hour - 1);
    }
    return d;
}

struct ArxFit {
    int hour = 1;
    Eigen::VectorXd coefficients;
    int first_day = 0;  // first and last in-sample days of the calibration window
    int last_day = 0;
    double rss = 0.0;
};

/// Least squares via complete orthogonal decomposition (minimum-norm when rank deficient).
inline ArxFit fit_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    if (X.rows() != y.size()) throw FitError("design and target lengths differ");
    if (X.rows() < X.cols()) throw FitError("underdetermined least squares: fewer rows than columns");
    if (!X.allFinite() || !y.allFinite()) throw FitError("non-finite values in least-squares problem");
    ArxFit fit;
    const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(X);
    fit.coefficients = cod.solve(y);
    fit.rss = (y - X * fit.coefficients).squaredNorm();
    return fit;
}

/// N-PIT maps of one calibration window: price first, then exogenous series in schema order.
struct WindowMaps {
    VstMap price;
    std::vector<VstMap> exog;
};

/// A calibrated window: transformed panel covering the in-sample days and the
/// forecast day, the fitted maps and the 24 per-hour fits.
struct CalibratedWindow {
    int forecast_day = 0;
    int window = 0;
    TransformedPanel panel;
    WindowMaps maps;
    std::array<ArxFit, kHoursPerDay> fits;
};

namespace detail {

inline void tagged_day(const DayHourMatrix& m, int day, std::vector<TaggedValue>& out) {
    for (int h = 0; h < kHoursPerDay; ++h) out.push_back({m(day, h), day * kHoursPerDay + h});
}

/// Sorted tagged cells of a series over days [first, last].
inline std::vector<TaggedValue> sorted_cells(const DayHourMatrix& m, int first, int last) {
    std::vector<TaggedValue> v;
    v.reserve(static_cast<std::size_t>(last - first + 1) * kHoursPerDay);
    for (int d = first; d <= last; ++d) tagged_day(m, d, v);
    std::sort(v.begin(), v.end());
    return v;
}

inline VstMap map_from_tagged(std::span<const TaggedValue> sorted) {
    std::vector<double> values;
    values.reserve(sorted.size());
    for (const auto& t : sorted) values.push_back(t.value);
    return VstMap::from_sorted(std::move(values));
}

}  // namespace detail

/// Transforms in-sample days [d - window, d - 1] of every series given their
/// sorted tagged cells (price first, exogenous in schema order), and appends the
/// forecast day d with transformed exogenous values and unknown price.
inline CalibratedWindow transform_window(const HourlyFrame& frame, int forecast_day, int window,
                                         std::span<const std::vector<TaggedValue>> sorted,
                                         const std::vector<double>* scores = nullptr) {
    const int first = forecast_day - window;
    if (first < 0) throw DesignError("insufficient history for window " + std::to_string(window));
    if (forecast_day >= frame.n_days()) throw ForecastError("forecast day outside the frame");
    const auto schema = exogenous_schema(frame.market);
    if (sorted.size() != schema.size() + 1) throw DesignError("sorted cell sets do not match the schema");

    CalibratedWindow cw;
    cw.forecast_day = forecast_day;
    cw.window = window;
    auto& panel = cw.panel;
    panel.market = frame.market;
    panel.first_day = first;
    panel.first_weekday = frame.weekday(first);
    const int cell_offset = first * kHoursPerDay;

    panel.price.resize(window + 1, kHoursPerDay);
    score_sorted(sorted[0], std::span<double>(panel.price.data(), static_cast<std::size_t>(window) * kHoursPerDay),
                 cell_offset, scores);
    panel.price.row(window).setConstant(std::numeric_limits<double>::quiet_NaN());
    cw.maps.price = detail::map_from_tagged(sorted[0]);

    for (std::size_t k = 0; k < schema.size(); ++k) {
        DayHourMatrix m(window + 1, kHoursPerDay);
        score_sorted(sorted[k + 1], std::span<double>(m.data(), static_cast<std::size_t>(window) * kHoursPerDay),
                     cell_offset, scores);
        VstMap map = detail::map_from_tagged(sorted[k + 1]);
        const auto& raw = frame.exog.at(schema[k]);
        for (int h = 0; h < kHoursPerDay; ++h) {
            const double v = raw(forecast_day, h);
            if (!std::isfinite(v)) throw ForecastError("missing exogenous value on the forecast day");
            m(window, h) = map.forward(v);
        }
        panel.exog.push_back(std::move(m));
        cw.maps.exog.push_back(std::move(map));
    }
    return cw;
}

/// Transforms the window from scratch (sorting every series).
inline CalibratedWindow transform_window(const HourlyFrame& frame, int forecast_day, int window) {
    const int first = forecast_day - window;
    if (first < 0) throw DesignError("insufficient history for window " + std::to_string(window));
    if (forecast_day >= frame.n_days()) throw ForecastError("forecast day outside the frame");
    std::vector<std::vector<TaggedValue>> sorted;
    sorted.push_back(detail::sorted_cells(frame.price, first, forecast_day - 1));
    for (Series s : exogenous_schema(frame.market)) {
        sorted.push_back(detail::sorted_cells(frame.exog.at(s), first, forecast_day - 1));
    }
    return transform_window(frame, forecast_day, window, sorted);
}

namespace detail {

/// Least squares for one hour through the normal equations, exploiting the
/// weekday-dummy structure of the design: the Gram matrix is assembled from
/// the non-dummy block, per-weekday column sums and weekday counts, then solved
/// with a pivoted LDLT, falling back to a complete orthogonal decomposition
/// (minimum-norm) when singular. Matches fit_ols(build_design(...)) to rounding.
inline ArxFit fit_hour_structured(const TransformedPanel& panel, const Eigen::VectorXd& day_min,
                                  const Eigen::VectorXd& day_max, int hour, int first_day, int last_day) {
    const int h = hour - 1;
    const auto schema = exogenous_schema(panel.market);
    std::vector<std::size_t> exog_index;
    for (std::size_t k = 0; k < schema.size(); ++k) {
        if (series_active(schema[k], hour)) exog_index.push_back(k);
    }
    const int q = kArxPriceTerms + static_cast<int>(exog_index.size());
    const int width = q + kWeekdays;
    const int m = last_day - first_day + 1;
    if (m < width) throw FitError("underdetermined least squares: fewer rows than columns");
    const int r0 = first_day - panel.first_day;

    // Non-dummy regressors, one column each.
    Eigen::MatrixXd S(m, q);
    S.col(0) = panel.price.col(h).segment(r0 - 1, m);
    S.col(1) = panel.price.col(h).segment(r0 - 2, m);
    S.col(2) = panel.price.col(h).segment(r0 - 7, m);
    S.col(3) = day_min.segment(r0 - 1, m);
    S.col(4) = day_max.segment(r0 - 1, m);
    S.col(5) = panel.price.col(kHoursPerDay - 1).segment(r0 - 1, m);
    for (std::size_t k = 0; k < exog_index.size(); ++k) {
        S.col(kArxPriceTerms + static_cast<Eigen::Index>(k)) = panel.exog[exog_index[k]].col(h).segment(r0, m);
    }
    const Eigen::VectorXd y = panel.price.col(h).segment(r0, m);

    Eigen::MatrixXd weekday_sums = Eigen::MatrixXd::Zero(kWeekdays, q);
    Eigen::VectorXd weekday_y = Eigen::VectorXd::Zero(kWeekdays);
    Eigen::VectorXd weekday_n = Eigen::VectorXd::Zero(kWeekdays);
    const int wd0 = panel.weekday(first_day);
    for (int w = 0; w < kWeekdays; ++w) {
        for (int i = (w - wd0 + kWeekdays) % kWeekdays; i < m; i += kWeekdays) {
            weekday_sums.row(w) += S.row(i);
            weekday_y(w) += y(i);
            weekday_n(w) += 1.0;
        }
    }

    // Design column order: price terms, weekday dummies, exogenous.
    Eigen::MatrixXd G(width, width);
    Eigen::VectorXd b(width);
    const Eigen::MatrixXd gss = S.transpose() * S;
    const Eigen::VectorXd bs = S.transpose() * y;
    std::vector<int> col(static_cast<std::size_t>(q));
    for (int k = 0; k < q; ++k) col[static_cast<std::size_t>(k)] = k < kArxPriceTerms ? k : k + kWeekdays;
    G.setZero();
    for (int i = 0; i < q; ++i) {
        const int ci = col[static_cast<std::size_t>(i)];
        b(ci) = bs(i);
        for (int j = 0; j < q; ++j) G(ci, col[static_cast<std::size_t>(j)]) = gss(i, j);
        for (int w = 0; w < kWeekdays; ++w) G(ci, kArxPriceTerms + w) = G(kArxPriceTerms + w, ci) = weekday_sums(w, i);
    }
    for (int w = 0; w < kWeekdays; ++w) {
        G(kArxPriceTerms + w, kArxPriceTerms + w) = weekday_n(w);
        b(kArxPriceTerms + w) = weekday_y(w);
    }

    ArxFit fit;
    fit.hour = hour;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(G);
    const auto diag = ldlt.vectorD().cwiseAbs();
    if (ldlt.info() == Eigen::Success && diag.minCoeff() > 1e-10 * diag.maxCoeff()) {
        fit.coefficients = ldlt.solve(b);
    } else {
        fit.coefficients = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(G).solve(b);
    }
    if (!fit.coefficients.allFinite()) throw FitError("non-finite ARX coefficients");

    Eigen::VectorXd beta_s(q);
    for (int k = 0; k < q; ++k) beta_s(k) = fit.coefficients(col[static_cast<std::size_t>(k)]);
    Eigen::VectorXd resid = y - S * beta_s;
    for (int i = 0; i < m; ++i) resid(i) -= fit.coefficients(kArxPriceTerms + (wd0 + i) % kWeekdays);
    fit.rss = resid.squaredNorm();
    return fit;
}

}  // namespace detail

/// Fits the 24 hourly models on every in-sample day with complete lags.
inline void fit_window(CalibratedWindow& cw) {
    const auto& panel = cw.panel;
    const int first_target = panel.first_day + 7;
    const int last_target = cw.forecast_day - 1;
    if (last_target < first_target) throw DesignError("calibration window shorter than the lag structure");
    if (!panel.price.topRows(panel.price.rows() - 1).allFinite()) throw FitError("non-finite in-sample prices");
    const Eigen::Index n_rows = panel.price.rows();
    Eigen::VectorXd day_min = Eigen::VectorXd::Zero(n_rows);
    Eigen::VectorXd day_max = Eigen::VectorXd::Zero(n_rows);
    for (Eigen::Index r = 0; r + 1 < n_rows; ++r) {
        day_min(r) = panel.price.row(r).minCoeff();
        day_max(r) = panel.price.row(r).maxCoeff();
    }
    for (int hour = 1; hour <= kHoursPerDay; ++hour) {
        ArxFit fit = detail::fit_hour_structured(panel, day_min, day_max, hour, first_target, last_target);
        fit.first_day = panel.first_day;
        fit.last_day = last_target;
        cw.fits[static_cast<std::size_t>(hour - 1)] = std::move(fit);
    }
}

/// Evaluates the hourly models on the forecast-day regressors and maps the
/// transformed forecasts back to prices.
inline std::array<double, kHoursPerDay> forecast_day(const std::array<ArxFit, kHoursPerDay>& fits,
                                                     const TransformedPanel& panel, const VstMap& price_map, int day) {
    if (day - 7 < panel.first_day || day >= panel.end_day()) throw ForecastError("forecast day outside the panel");
    std::array<double, kHoursPerDay> out{};
    std::array<double, 32> row{};
    for (int hour = 1; hour <= kHoursPerDay; ++hour) {
        const auto& fit = fits[static_cast<std::size_t>(hour - 1)];
        const int width = design_width(panel.market, hour);
        if (fit.coefficients.size() != width) throw ForecastError("coefficient vector does not match the design");
        design_row(panel, day, hour, std::span<double>(row.data(), static_cast<std::size_t>(width)));
        double z = 0.0;
        for (int c = 0; c < width; ++c) z += fit.coefficients(c) * row[static_cast<std::size_t>(c)];
        if (!std::isfinite(z)) throw ForecastError("non-finite transformed forecast");
        out[static_cast<std::size_t>(hour - 1)] = price_map.inverse(z);
    }
    return out;
}

/// Calibrates one window length on the days before `day` and forecasts `day`.
inline std::array<double, kHoursPerDay> forecast_with_window(const HourlyFrame& frame, int day, int window) {
    CalibratedWindow cw = transform_window(frame, day, window);
    fit_window(cw);
    return forecast_day(cw.fits, cw.panel, cw.maps.price, day);
}

}  // namespace poolcast
