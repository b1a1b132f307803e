#pragma once

// Combination methods by name, and a driver that evaluates a list of them over
// a range of pool days while sharing the per-day LASSO paths and PCA panels.
//
// Method labels: mean, aw, waw, and <family>_<selector> with family one of
// lasso, pca, lpca, twostep and selector one of aic, bic, hqc, k<N> (pca
// only) or lambda<value> (lasso, lpca, twostep).

#include "poolcast/combine_linear.hpp"
#include "poolcast/error.hpp"
#include "poolcast/lasso.hpp"
#include "poolcast/parallel.hpp"
#include "poolcast/pca.hpp"
#include "poolcast/pool.hpp"
#include "poolcast/text.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace poolcast {

namespace detail {

inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> trailing_rows(const ForecastPool& pool, int day, int window_len) {
    check_trailing(pool, day, window_len);
    const Eigen::Index r0 = static_cast<Eigen::Index>(day - window_len) * kHoursPerDay;
    const Eigen::Index n = static_cast<Eigen::Index>(window_len) * kHoursPerDay;
    return {pool.values.middleRows(r0, n), pool.actual.segment(r0, n)};
}

inline DayForecast apply_fit(const ForecastPool& pool, int day, const LassoFit& fit) {
    const Eigen::VectorXd v = fit.predict(pool.day_rows(day));
    DayForecast out{};
    for (int h = 0; h < kHoursPerDay; ++h) out[static_cast<std::size_t>(h)] = v(h);
    return out;
}

}  // namespace detail

/// LASSO over all pool columns, trained on the `window_len` days before `day`.
inline DayForecast lasso_average(const ForecastPool& pool, int day, const LambdaSelector& sel,
                                 int window_len = kAveragingWindow, const LassoOptions& opts = {}) {
    const auto [X, y] = detail::trailing_rows(pool, day, window_len);
    return detail::apply_fit(pool, day, fit_selected(X, y, sel, opts));
}

enum class MethodKind { Mean, Aw, Waw, Lasso, Pca, Lpca, TwoStep };

struct MethodSpec {
    MethodKind kind = MethodKind::Mean;
    std::optional<Criterion> criterion;
    std::optional<int> k;          // pca only
    std::optional<double> lambda;  // fixed-lambda variants
    std::string label;

    bool needs_lasso_rows() const { return kind == MethodKind::Lasso; }
    bool needs_panel() const { return kind == MethodKind::Pca || kind == MethodKind::Lpca || kind == MethodKind::TwoStep; }

    LambdaSelector lambda_selector(LambdaConvention c) const {
        return lambda ? LambdaSelector::fixed(*lambda, c) : LambdaSelector::by(*criterion);
    }
};

inline const char* kMethodHelp =
    "mean, aw, waw, lasso_{aic,bic,hqc,lambda<v>}, pca_{aic,bic,hqc,k<N>}, lpca_{aic,bic,hqc,lambda<v>}, "
    "twostep_{aic,bic,hqc,lambda<v>}";

inline MethodSpec parse_method(const std::string& label) {
    MethodSpec m;
    m.label = label;
    if (label == "mean") return m;
    if (label == "aw") {
        m.kind = MethodKind::Aw;
        return m;
    }
    if (label == "waw") {
        m.kind = MethodKind::Waw;
        return m;
    }
    const auto bad = [&] { return ConfigError("unknown method '" + label + "' (valid: " + kMethodHelp + ")"); };
    const auto us = label.find('_');
    if (us == std::string::npos) throw bad();
    const std::string family = label.substr(0, us);
    const std::string sel = label.substr(us + 1);
    if (family == "lasso") {
        m.kind = MethodKind::Lasso;
    } else if (family == "pca") {
        m.kind = MethodKind::Pca;
    } else if (family == "lpca") {
        m.kind = MethodKind::Lpca;
    } else if (family == "twostep") {
        m.kind = MethodKind::TwoStep;
    } else {
        throw bad();
    }
    if (sel == "aic" || sel == "bic" || sel == "hqc") {
        m.criterion = parse_criterion(sel);
    } else if (m.kind == MethodKind::Pca && sel.size() > 1 && sel[0] == 'k') {
        const auto v = parse_double(sel.substr(1));
        if (!v || *v < 0 || *v != std::floor(*v)) throw bad();
        m.k = static_cast<int>(*v);
    } else if (m.kind != MethodKind::Pca && sel.starts_with("lambda")) {
        const auto v = parse_double(sel.substr(6));
        if (!v || !(*v >= 0.0) || !std::isfinite(*v)) throw bad();
        m.lambda = *v;
    } else {
        throw bad();
    }
    return m;
}

struct CombineOptions {
    int window_len = kAveragingWindow;
    int kmax = kMaxComponents;
    WindowSubset subset;
    LambdaConvention convention = LambdaConvention::Paper;
    LassoOptions lasso;
};

namespace detail {

/// Every method of one day, sharing the LASSO path and the PCA panel.
inline void combine_one_day(const ForecastPool& pool, int day, const std::vector<MethodSpec>& methods,
                            const CombineOptions& opts, std::vector<DayForecast>& out) {
    bool want_rows = false;
    bool want_panel = false;
    int panel_k = 0;
    for (const auto& m : methods) {
        want_rows = want_rows || m.needs_lasso_rows();
        if (m.needs_panel()) {
            want_panel = true;
            panel_k = std::max(panel_k, m.k ? *m.k : opts.kmax);
        }
    }

    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    std::optional<std::vector<LassoFit>> lasso_path;
    if (want_rows) std::tie(X, y) = trailing_rows(pool, day, opts.window_len);

    std::optional<PcPanel> panel;
    std::optional<std::vector<LassoFit>> pc_path;
    int pc_k = 0;
    if (want_panel) {
        panel = prepared_panel(pool, day, opts.window_len, panel_k);
        pc_k = std::min(opts.kmax, panel->n_components());
    }

    for (std::size_t i = 0; i < methods.size(); ++i) {
        const auto& m = methods[i];
        switch (m.kind) {
            case MethodKind::Mean: out[i] = simple_average(pool, day); break;
            case MethodKind::Aw: out[i] = aw(pool, opts.subset, day); break;
            case MethodKind::Waw: out[i] = waw(pool, opts.subset, day, opts.window_len); break;
            case MethodKind::Lasso: {
                if (m.lambda) {
                    out[i] = apply_fit(pool, day, fit_selected(X, y, m.lambda_selector(opts.convention), opts.lasso));
                } else {
                    if (!lasso_path) lasso_path = fit_path(X, y, opts.lasso);
                    out[i] = apply_fit(pool, day, (*lasso_path)[select_fit(*lasso_path, *m.criterion)]);
                }
                break;
            }
            case MethodKind::Pca: {
                const KSelector ks = m.k ? KSelector::fixed_k(*m.k) : KSelector::by(*m.criterion, opts.kmax);
                out[i] = pca_average(*panel, ks).forecast;
                break;
            }
            case MethodKind::Lpca:
            case MethodKind::TwoStep: {
                if (all_training_degenerate(*panel)) {
                    out[i] = mean_fallback(*panel).forecast;
                    break;
                }
                PcrFit fit;
                if (m.lambda) {
                    fit = fit_pcr_lasso(*panel, pc_k, m.lambda_selector(opts.convention), opts.lasso);
                } else {
                    if (!pc_path) pc_path = pcr_lasso_path(*panel, pc_k, opts.lasso);
                    fit = pcr_from_lasso((*pc_path)[select_fit(*pc_path, *m.criterion)], pc_k);
                }
                if (m.kind == MethodKind::TwoStep) fit = fit_pcr_ols(*panel, fit.used);
                out[i] = forecast_rows(*panel, fit);
                break;
            }
        }
    }
}

}  // namespace detail

/// Forecasts of every method for pool days [first_day, last_day]; rows are
/// hours, columns follow `methods`. Days run in parallel; the result does not
/// depend on `jobs`.
inline Eigen::MatrixXd combine_days(const ForecastPool& pool, const std::vector<MethodSpec>& methods, int first_day,
                                    int last_day, const CombineOptions& opts = {}, int jobs = 1) {
    if (methods.empty()) throw ConfigError("no combination methods given");
    if (first_day > last_day) throw ConfigError("empty day range");
    detail::check_trailing(pool, first_day, opts.window_len);
    detail::check_day(pool, last_day);
    for (const auto& m : methods) {
        if (m.kind == MethodKind::Aw || m.kind == MethodKind::Waw) (void)opts.subset.columns(pool);
    }
    const int n_days = last_day - first_day + 1;
    Eigen::MatrixXd out(static_cast<Eigen::Index>(n_days) * kHoursPerDay, static_cast<Eigen::Index>(methods.size()));
    parallel_for(static_cast<std::size_t>(n_days), jobs, [&](std::size_t k) {
        const int day = first_day + static_cast<int>(k);
        std::vector<DayForecast> fc(methods.size());
        detail::combine_one_day(pool, day, methods, opts, fc);
        for (std::size_t i = 0; i < methods.size(); ++i) {
            for (int h = 0; h < kHoursPerDay; ++h) {
                out(static_cast<Eigen::Index>(k) * kHoursPerDay + h, static_cast<Eigen::Index>(i)) =
                    fc[i][static_cast<std::size_t>(h)];
            }
        }
    });
    return out;
}

}  // namespace poolcast
