#pragma once

// PCA averaging. Each hourly row of the pool is standardized across windows,
// principal components of the standardized panel are extracted, and the
// standardized actual price is regressed on the leading components (by OLS or
// LASSO). The prediction for the forecast day is mapped back with the row's
// mean and standard deviation.
//
// Components are PC = Z V, with V the right singular vectors of the
// standardized panel Z, so ||PC_k||^2 is the k-th eigenvalue of Z'Z. Each
// loading vector is signed so that its largest-magnitude entry is positive.

#include "poolcast/combine_linear.hpp"
#include "poolcast/error.hpp"
#include "poolcast/lasso.hpp"
#include "poolcast/pool.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <vector>

namespace poolcast {

inline constexpr int kMaxComponents = 20;

struct PcPanel {
    Eigen::VectorXd mu;         // row mean across windows
    Eigen::VectorXd sigma;      // row sample sd; 0 on degenerate rows
    Eigen::MatrixXd z_hat;      // standardized forecasts, zero on degenerate rows
    Eigen::VectorXd z_actual;   // standardized actuals of the training rows
    std::vector<char> degenerate;
    Eigen::MatrixXd components; // [rows x K]
    Eigen::MatrixXd loadings;   // [windows x K]
    Eigen::VectorXd eigenvalues;  // all eigenvalues of Z'Z, descending

    Eigen::Index rows() const { return z_hat.rows(); }
    Eigen::Index n_train() const { return z_actual.size(); }
    Eigen::Index n_windows() const { return z_hat.cols(); }
    int n_components() const { return static_cast<int>(components.cols()); }

    /// ||PC_k||^2 / rows, the eigenvalues of Z'Z / rows.
    Eigen::VectorXd component_variances() const {
        return components.colwise().squaredNorm().transpose() / static_cast<double>(rows());
    }
};

/// Standardizes `forecasts` row by row. The first actual.size() rows are
/// training rows; the remaining rows are forecast rows without actuals.
inline PcPanel standardize_panel(const Eigen::MatrixXd& forecasts, const Eigen::VectorXd& actual) {
    if (forecasts.cols() < 2) throw ConfigError("PCA averaging needs at least two windows");
    if (actual.size() > forecasts.rows()) throw AlignmentError("more actuals than forecast rows");
    if (!forecasts.allFinite() || !actual.allFinite()) throw SolverError("non-finite values in PCA panel");
    PcPanel p;
    const Eigen::Index n = forecasts.rows();
    const double w = static_cast<double>(forecasts.cols());
    p.mu = forecasts.rowwise().mean();
    p.sigma.resize(n);
    p.z_hat.resize(n, forecasts.cols());
    p.degenerate.assign(static_cast<std::size_t>(n), 0);
    for (Eigen::Index t = 0; t < n; ++t) {
        const auto centered = forecasts.row(t).array() - p.mu(t);
        const double sd = std::sqrt(centered.square().sum() / (w - 1.0));
        if (!(sd > 1e-12 * (1.0 + std::abs(p.mu(t))))) {
            p.sigma(t) = 0.0;
            p.z_hat.row(t).setZero();
            p.degenerate[static_cast<std::size_t>(t)] = 1;
        } else {
            p.sigma(t) = sd;
            p.z_hat.row(t) = centered / sd;
        }
    }
    p.z_actual.resize(actual.size());
    for (Eigen::Index t = 0; t < actual.size(); ++t) {
        p.z_actual(t) = p.sigma(t) > 0.0 ? (actual(t) - p.mu(t)) / p.sigma(t) : 0.0;
    }
    return p;
}

/// Panel for forecasting pool day `day`: the `window_len` preceding days
/// (training rows) followed by the 24 rows of `day`.
inline PcPanel standardize_panel(const ForecastPool& pool, int day, int window_len = kAveragingWindow) {
    detail::check_trailing(pool, day, window_len);
    const Eigen::Index r0 = static_cast<Eigen::Index>(day - window_len) * kHoursPerDay;
    const Eigen::Index n_train = static_cast<Eigen::Index>(window_len) * kHoursPerDay;
    return standardize_panel(pool.values.middleRows(r0, n_train + kHoursPerDay), pool.actual.segment(r0, n_train));
}

/// Computes the first K components over all rows, including forecast rows.
inline void extract_components(PcPanel& p, int K) {
    const Eigen::Index n = p.rows();
    const Eigen::Index m = p.n_windows();
    if (K < 0 || K > std::min(n, m)) {
        throw ConfigError("component count " + std::to_string(K) + " outside [0, " + std::to_string(std::min(n, m)) + "]");
    }
    Eigen::MatrixXd V;
    Eigen::VectorXd s;
    if (n >= m) {
        // Reduce the tall panel to its m x m triangular factor first; Z and R share V and the singular values.
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(p.z_hat);
        const Eigen::MatrixXd R = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
        Eigen::BDCSVD<Eigen::MatrixXd> svd(R, Eigen::ComputeThinV);
        V = svd.matrixV();
        s = svd.singularValues();
    } else {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(p.z_hat, Eigen::ComputeThinV);
        V = svd.matrixV();
        s = svd.singularValues();
    }
    p.eigenvalues = Eigen::VectorXd::Zero(m);
    p.eigenvalues.head(s.size()) = s.array().square().matrix();
    p.loadings = V.leftCols(K);
    for (int k = 0; k < K; ++k) {
        Eigen::Index arg = 0;
        p.loadings.col(k).cwiseAbs().maxCoeff(&arg);
        if (p.loadings(arg, k) < 0.0) p.loadings.col(k) *= -1.0;
    }
    p.components = p.z_hat * p.loadings;
}

enum class PcrMethod { Ols, Lasso };

struct PcrFit {
    double alpha = 0.0;
    Eigen::VectorXd beta;         // one entry per used component
    std::vector<int> used;        // 0-based component indices entering the model
    int k_used = 0;
    PcrMethod method = PcrMethod::Ols;
    InformationCriteria ic;
    double lambda = 0.0;          // LASSO only
};

namespace detail {

inline std::vector<Eigen::Index> regression_rows(const PcPanel& p) {
    std::vector<Eigen::Index> rows;
    rows.reserve(static_cast<std::size_t>(p.n_train()));
    for (Eigen::Index t = 0; t < p.n_train(); ++t) {
        if (!p.degenerate[static_cast<std::size_t>(t)]) rows.push_back(t);
    }
    return rows;
}

inline Eigen::MatrixXd component_design(const PcPanel& p, const std::vector<Eigen::Index>& rows,
                                        const std::vector<int>& used) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(used.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t k = 0; k < used.size(); ++k) {
            X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = p.components(rows[i], used[k]);
        }
    }
    return X;
}

inline Eigen::VectorXd gather(const Eigen::VectorXd& v, const std::vector<Eigen::Index>& rows) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(rows[i]);
    return out;
}

inline void require_components(const PcPanel& p, int K) {
    if (K < 0) throw ConfigError("negative component count");
    if (K > p.n_components()) {
        throw ConfigError("panel holds " + std::to_string(p.n_components()) + " components, " + std::to_string(K) +
                          " requested");
    }
}

/// OLS of y on [1, X]; minimum-norm solution when [1, X] is rank deficient.
inline Eigen::VectorXd ols_with_intercept(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    Eigen::MatrixXd A(X.rows(), X.cols() + 1);
    A.col(0).setOnes();
    A.rightCols(X.cols()) = X;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
    return cod.solve(y);
}

}  // namespace detail

/// OLS of the standardized actuals on the intercept and the listed components.
inline PcrFit fit_pcr_ols(const PcPanel& p, const std::vector<int>& used) {
    for (int k : used) detail::require_components(p, k + 1);
    const auto rows = detail::regression_rows(p);
    if (rows.size() <= used.size() + 1) throw SolverError("too few non-degenerate rows for the component regression");
    const Eigen::MatrixXd X = detail::component_design(p, rows, used);
    const Eigen::VectorXd y = detail::gather(p.z_actual, rows);
    const Eigen::VectorXd coef = detail::ols_with_intercept(X, y);
    PcrFit fit;
    fit.alpha = coef(0);
    fit.beta = coef.tail(static_cast<Eigen::Index>(used.size()));
    fit.used = used;
    fit.k_used = static_cast<int>(used.size());
    fit.method = PcrMethod::Ols;
    const Eigen::VectorXd r = y - X * fit.beta - Eigen::VectorXd::Constant(y.size(), fit.alpha);
    const double tss = (y.array() - y.mean()).square().sum();
    fit.ic = information_criteria(r.squaredNorm(), tss, static_cast<int>(y.size()), fit.k_used);
    return fit;
}

inline std::vector<int> first_components(int K) {
    std::vector<int> used(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) used[static_cast<std::size_t>(k)] = k;
    return used;
}

inline PcrFit fit_pcr_ols(const PcPanel& p, int K) { return fit_pcr_ols(p, first_components(K)); }

/// Nested models K = 1..kmax; the criterion's minimizer wins, ties to the smaller K.
inline PcrFit select_pcr_k(const PcPanel& p, Criterion c, int kmax = kMaxComponents) {
    kmax = std::min(kmax, p.n_components());
    if (kmax < 1) throw ConfigError("K selection needs at least one component");
    PcrFit best = fit_pcr_ols(p, 1);
    for (int K = 2; K <= kmax; ++K) {
        PcrFit fit = fit_pcr_ols(p, K);
        if (fit.ic.get(c) < best.ic.get(c)) best = std::move(fit);
    }
    return best;
}

/// LASSO path of the standardized actuals on the first K >= 1 components.
inline std::vector<LassoFit> pcr_lasso_path(const PcPanel& p, int K, const LassoOptions& opts = {},
                                            const LambdaGrid* grid = nullptr) {
    detail::require_components(p, K);
    if (K < 1) throw ConfigError("LASSO component regression needs at least one component");
    const auto rows = detail::regression_rows(p);
    if (rows.size() < 2) throw SolverError("too few non-degenerate rows for the component regression");
    const Eigen::MatrixXd X = detail::component_design(p, rows, first_components(K));
    const Eigen::VectorXd y = detail::gather(p.z_actual, rows);
    return grid ? fit_path(X, y, *grid, opts) : fit_path(X, y, opts);
}

/// Component regression from a LASSO fit over the first K components.
inline PcrFit pcr_from_lasso(const LassoFit& lf, int K) {
    PcrFit fit;
    fit.method = PcrMethod::Lasso;
    fit.alpha = lf.intercept;
    fit.lambda = lf.lambda;
    fit.ic = lf.ic;
    fit.k_used = K;
    for (int k = 0; k < K; ++k) {
        if (lf.beta(k) != 0.0) fit.used.push_back(k);
    }
    fit.beta.resize(static_cast<Eigen::Index>(fit.used.size()));
    for (std::size_t i = 0; i < fit.used.size(); ++i) fit.beta(static_cast<Eigen::Index>(i)) = lf.beta(fit.used[i]);
    return fit;
}

/// LASSO of the standardized actuals on the first K components, lambda per `sel`.
/// K = 0 gives the intercept-only model.
inline PcrFit fit_pcr_lasso(const PcPanel& p, int K, const LambdaSelector& sel, const LassoOptions& opts = {}) {
    if (K == 0) {
        PcrFit fit = fit_pcr_ols(p, 0);
        fit.method = PcrMethod::Lasso;
        return fit;
    }
    if (sel.kind == LambdaSelector::Kind::Fixed) {
        const auto n = static_cast<int>(detail::regression_rows(p).size());
        const LambdaGrid grid = LambdaGrid::fixed({internal_lambda(sel.lambda, sel.convention, n)});
        return pcr_from_lasso(pcr_lasso_path(p, K, opts, &grid).front(), K);
    }
    const auto path = pcr_lasso_path(p, K, opts);
    return pcr_from_lasso(path[select_fit(path, sel.criterion())], K);
}

/// LASSO selection over the first K components followed by an OLS refit of the selected ones.
inline PcrFit fit_two_step(const PcPanel& p, int K, const LambdaSelector& sel, const LassoOptions& opts = {}) {
    const PcrFit selection = fit_pcr_lasso(p, K, sel, opts);
    return fit_pcr_ols(p, selection.used);
}

/// Price-scale fitted values for every panel row (training and forecast rows).
inline Eigen::VectorXd fitted_prices(const PcPanel& p, const PcrFit& fit) {
    Eigen::VectorXd z = Eigen::VectorXd::Constant(p.rows(), fit.alpha);
    for (std::size_t i = 0; i < fit.used.size(); ++i) z += fit.beta(static_cast<Eigen::Index>(i)) * p.components.col(fit.used[i]);
    return z.cwiseProduct(p.sigma) + p.mu;
}

/// The last 24 fitted values: the forecast day.
inline DayForecast forecast_rows(const PcPanel& p, const PcrFit& fit) {
    if (p.rows() - p.n_train() != kHoursPerDay) throw AlignmentError("panel does not end with one forecast day");
    const Eigen::VectorXd all = fitted_prices(p, fit);
    DayForecast out{};
    for (int h = 0; h < kHoursPerDay; ++h) out[static_cast<std::size_t>(h)] = all(p.n_train() + h);
    return out;
}

/// Fixed component count or an information criterion over K = 1..kmax.
struct KSelector {
    bool fixed = false;
    int k = 0;
    Criterion criterion = Criterion::Bic;
    int kmax = kMaxComponents;

    static KSelector fixed_k(int k) { return {true, k, Criterion::Bic, kMaxComponents}; }
    static KSelector by(Criterion c, int kmax = kMaxComponents) { return {false, 0, c, kmax}; }

    int components_needed() const { return fixed ? k : kmax; }
};

struct PcDayResult {
    DayForecast forecast{};
    PcrFit fit;
    bool fallback = false;  // every training row degenerate; forecast is the row mean
};

namespace detail {

inline bool all_training_degenerate(const PcPanel& p) {
    for (Eigen::Index t = 0; t < p.n_train(); ++t) {
        if (!p.degenerate[static_cast<std::size_t>(t)]) return false;
    }
    return true;
}

inline PcDayResult mean_fallback(const PcPanel& p) {
    PcDayResult r;
    r.fallback = true;
    for (int h = 0; h < kHoursPerDay; ++h) r.forecast[static_cast<std::size_t>(h)] = p.mu(p.n_train() + h);
    return r;
}

/// Standardizes and extracts up to `K` components, capped by the panel size.
inline PcPanel prepared_panel(const ForecastPool& pool, int day, int window_len, int K) {
    PcPanel p = standardize_panel(pool, day, window_len);
    extract_components(p, std::min<int>(K, static_cast<int>(std::min(p.rows(), p.n_windows()))));
    return p;
}

}  // namespace detail

inline PcDayResult pca_average(const PcPanel& p, const KSelector& sel) {
    if (detail::all_training_degenerate(p)) return detail::mean_fallback(p);
    PcDayResult r;
    r.fit = sel.fixed ? fit_pcr_ols(p, sel.k) : select_pcr_k(p, sel.criterion, sel.kmax);
    r.forecast = forecast_rows(p, r.fit);
    return r;
}

inline PcDayResult lpca_average(const PcPanel& p, int K, const LambdaSelector& sel, const LassoOptions& opts = {}) {
    if (detail::all_training_degenerate(p)) return detail::mean_fallback(p);
    PcDayResult r;
    r.fit = fit_pcr_lasso(p, std::min(K, p.n_components()), sel, opts);
    r.forecast = forecast_rows(p, r.fit);
    return r;
}

inline PcDayResult two_step_average(const PcPanel& p, int K, const LambdaSelector& sel, const LassoOptions& opts = {}) {
    if (detail::all_training_degenerate(p)) return detail::mean_fallback(p);
    PcDayResult r;
    r.fit = fit_two_step(p, std::min(K, p.n_components()), sel, opts);
    r.forecast = forecast_rows(p, r.fit);
    return r;
}

inline DayForecast pca_average(const ForecastPool& pool, int day, const KSelector& sel,
                               int window_len = kAveragingWindow) {
    return pca_average(detail::prepared_panel(pool, day, window_len, sel.components_needed()), sel).forecast;
}

inline DayForecast lpca_average(const ForecastPool& pool, int day, const LambdaSelector& sel, int K = kMaxComponents,
                                int window_len = kAveragingWindow) {
    return lpca_average(detail::prepared_panel(pool, day, window_len, K), K, sel).forecast;
}

inline DayForecast two_step_average(const ForecastPool& pool, int day, const LambdaSelector& sel,
                                    int K = kMaxComponents, int window_len = kAveragingWindow) {
    return two_step_average(detail::prepared_panel(pool, day, window_len, K), K, sel).forecast;
}

}  // namespace poolcast
