#pragma once

// Accuracy metrics and the conditional predictive ability test.
//
// The test regresses the daily loss differential Delta_d = MAE_d(i) - MAE_d(j)
// on the instruments h_{d-1} = [1, Delta_{d-1}]. With Z_d = h_{d-1} Delta_d the
// statistic is T R^2 of the uncentered regression of 1 on Z (T = number of
// usable days), asymptotically chi-squared with 2 degrees of freedom.

#include "poolcast/error.hpp"
#include "poolcast/frame.hpp"
#include "poolcast/text.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace poolcast {

/// Mean absolute error of each day; `errors` is [n_days x 24].
inline Eigen::VectorXd daily_mae(const Eigen::Ref<const Eigen::MatrixXd>& errors) {
    if (errors.cols() != kHoursPerDay) throw AlignmentError("daily MAE needs 24 error columns");
    if (!errors.allFinite()) throw MetricError("non-finite forecast errors");
    return errors.cwiseAbs().rowwise().mean();
}

/// Daily MAE of hourly forecasts against hourly actuals (whole days).
inline Eigen::VectorXd daily_mae(const Eigen::VectorXd& forecast, const Eigen::VectorXd& actual) {
    if (forecast.size() != actual.size() || forecast.size() % kHoursPerDay != 0) {
        throw AlignmentError("forecasts and actuals must cover the same whole days");
    }
    const Eigen::VectorXd e = forecast - actual;
    return daily_mae(Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, kHoursPerDay, Eigen::RowMajor>>(
        e.data(), e.size() / kHoursPerDay, kHoursPerDay));
}

/// Percentage change of `mae` relative to `benchmark`; negative is better.
inline double pct_chng(double mae, double benchmark) {
    if (!(benchmark > 0.0) || !std::isfinite(benchmark)) throw MetricError("benchmark MAE must be positive");
    return (mae - benchmark) / benchmark * 100.0;
}

/// Mean percentage change across markets.
inline double mpdb(std::span<const double> pct_by_market) {
    if (pct_by_market.empty()) throw MetricError("m.p.d.b. of an empty market list");
    double s = 0.0;
    for (double v : pct_by_market) s += v;
    return s / static_cast<double>(pct_by_market.size());
}

inline constexpr int kMinCpaDays = 30;

enum class CpaFlag { None, IdenticalForecasts, DominantUnconditional };

inline std::string_view to_string(CpaFlag f) {
    switch (f) {
        case CpaFlag::None: return "";
        case CpaFlag::IdenticalForecasts: return "identical forecasts";
        case CpaFlag::DominantUnconditional: return "dominant but unconditional";
    }
    return "";
}

struct CpaResult {
    double statistic = 0.0;
    double p_value = 1.0;  // Wald test, chi-squared with 2 degrees of freedom
    double mean_diff = 0.0;
    int n = 0;             // usable days after dropping the first
    CpaFlag flag = CpaFlag::None;

    /// p-value for "method i is better than method j": the test's p-value when
    /// mean(Delta) < 0, otherwise 1.
    double p_better() const { return mean_diff < 0.0 ? p_value : 1.0; }
};

inline CpaResult cpa_test(const Eigen::VectorXd& mae_i, const Eigen::VectorXd& mae_j) {
    if (mae_i.size() != mae_j.size()) throw AlignmentError("CPA inputs differ in length");
    if (mae_i.size() < kMinCpaDays) {
        throw MetricError("CPA test needs at least " + std::to_string(kMinCpaDays) + " days");
    }
    if (!mae_i.allFinite() || !mae_j.allFinite()) throw MetricError("non-finite daily MAE");
    const Eigen::VectorXd delta = mae_i - mae_j;
    CpaResult r;
    r.n = static_cast<int>(delta.size() - 1);
    r.mean_diff = delta.mean();
    if ((delta.array() == 0.0).all()) {
        r.flag = CpaFlag::IdenticalForecasts;
        r.mean_diff = 0.0;
        return r;
    }
    if (delta.maxCoeff() - delta.minCoeff() <= 1e-12 * delta.cwiseAbs().maxCoeff()) {
        r.flag = CpaFlag::DominantUnconditional;
        return r;
    }
    const Eigen::Index T = delta.size() - 1;
    Eigen::MatrixXd Z(T, 2);
    Z.col(0) = delta.tail(T);
    Z.col(1) = delta.head(T).cwiseProduct(delta.tail(T));
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(T);
    const Eigen::VectorXd b = Z.completeOrthogonalDecomposition().solve(ones);
    r.statistic = (Z * b).squaredNorm();
    r.p_value = std::exp(-0.5 * r.statistic);  // chi-squared(2) upper tail
    return r;
}

struct EvalReport {
    std::vector<std::string> methods;
    std::string benchmark_label;
    Eigen::MatrixXd daily_mae;    // [n_days x n_methods]
    Eigen::VectorXd mae;
    Eigen::VectorXd pct_chng;
    Eigen::MatrixXd cpa_pvalues;  // (i, j): p-value for "i better than j"; NaN when too few days
    long first_t = 0;             // hourly index of the first evaluated hour
};

/// Report over aligned hourly forecasts. `forecasts` columns follow `methods`;
/// one of them must be `benchmark`.
inline EvalReport build_report(const std::vector<std::string>& methods, const Eigen::MatrixXd& forecasts,
                               const Eigen::VectorXd& actual, const std::string& benchmark, long first_t = 0) {
    if (methods.empty() || static_cast<Eigen::Index>(methods.size()) != forecasts.cols()) {
        throw AlignmentError("method labels do not match forecast columns");
    }
    if (forecasts.rows() != actual.size() || actual.size() == 0 || actual.size() % kHoursPerDay != 0) {
        throw AlignmentError("forecasts and actuals must cover the same whole days");
    }
    const auto it = std::find(methods.begin(), methods.end(), benchmark);
    if (it == methods.end()) throw AlignmentError("benchmark '" + benchmark + "' is not among the methods");
    const auto bench = static_cast<Eigen::Index>(it - methods.begin());

    EvalReport rep;
    rep.methods = methods;
    rep.benchmark_label = benchmark;
    rep.first_t = first_t;
    const Eigen::Index m = forecasts.cols();
    const Eigen::Index days = actual.size() / kHoursPerDay;
    rep.daily_mae.resize(days, m);
    for (Eigen::Index i = 0; i < m; ++i) rep.daily_mae.col(i) = daily_mae(forecasts.col(i), actual);
    rep.mae = rep.daily_mae.colwise().mean().transpose();
    rep.pct_chng.resize(m);
    for (Eigen::Index i = 0; i < m; ++i) rep.pct_chng(i) = i == bench ? 0.0 : pct_chng(rep.mae(i), rep.mae(bench));
    rep.cpa_pvalues = Eigen::MatrixXd::Ones(m, m);
    if (days < kMinCpaDays) {
        rep.cpa_pvalues.setConstant(std::numeric_limits<double>::quiet_NaN());
        rep.cpa_pvalues.diagonal().setOnes();
        return rep;
    }
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = i + 1; j < m; ++j) {
            const CpaResult r = cpa_test(rep.daily_mae.col(i), rep.daily_mae.col(j));
            rep.cpa_pvalues(i, j) = r.p_better();
            rep.cpa_pvalues(j, i) = r.mean_diff > 0.0 ? r.p_value : 1.0;
        }
    }
    return rep;
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream out(p);
    if (!out) throw ConfigError("cannot write '" + p.string() + "'");
    return out;
}

inline std::string cell(double v) { return std::isnan(v) ? "nan" : fixed(v); }

}  // namespace detail

/// Writes mae.csv, pct_chng.csv, mpdb.csv, cpa_pvalues.csv, daily_mae.csv and
/// the heat-map script cpa_heatmap.gp into `dir`.
inline void write_report(const std::filesystem::path& dir, const EvalReport& rep) {
    std::filesystem::create_directories(dir);
    const auto m = static_cast<Eigen::Index>(rep.methods.size());
    {
        auto out = detail::open_out(dir / "mae.csv");
        out << "method,mae\n";
        for (Eigen::Index i = 0; i < m; ++i) out << rep.methods[i] << ',' << detail::cell(rep.mae(i)) << '\n';
    }
    {
        auto out = detail::open_out(dir / "pct_chng.csv");
        out << "method,pct_chng\n";
        for (Eigen::Index i = 0; i < m; ++i) out << rep.methods[i] << ',' << detail::cell(rep.pct_chng(i)) << '\n';
    }
    {
        // One market per report, so m.p.d.b. equals the percentage change.
        auto out = detail::open_out(dir / "mpdb.csv");
        out << "method,mpdb,markets\n";
        for (Eigen::Index i = 0; i < m; ++i) {
            const double v = rep.pct_chng(i);
            out << rep.methods[i] << ',' << detail::cell(mpdb(std::span<const double>(&v, 1))) << ",1\n";
        }
    }
    {
        auto out = detail::open_out(dir / "cpa_pvalues.csv");
        out << "better\\worse";
        for (const auto& name : rep.methods) out << ',' << name;
        out << '\n';
        for (Eigen::Index i = 0; i < m; ++i) {
            out << rep.methods[i];
            for (Eigen::Index j = 0; j < m; ++j) out << ',' << detail::cell(rep.cpa_pvalues(i, j));
            out << '\n';
        }
    }
    {
        auto out = detail::open_out(dir / "daily_mae.csv");
        out << "t";
        for (const auto& name : rep.methods) out << ',' << name;
        out << '\n';
        for (Eigen::Index d = 0; d < rep.daily_mae.rows(); ++d) {
            out << rep.first_t + d * kHoursPerDay;
            for (Eigen::Index i = 0; i < m; ++i) out << ',' << detail::cell(rep.daily_mae(d, i));
            out << '\n';
        }
    }
    {
        auto out = detail::open_out(dir / "cpa_heatmap.gp");
        out << "# gnuplot -p cpa_heatmap.gp\n"
               "# x: method credited as better, y: method tested as worse\n"
               "set datafile separator ','\n"
               "set palette defined (0 'dark-green', 0.05 'yellow', 0.1 'red', 1 'black')\n"
               "set cbrange [0:0.1]\n"
               "set xtics rotate by 90\n"
               "set size square\n"
               "unset key\n"
               "plot 'cpa_pvalues.csv' matrix rowheaders columnheaders using 2:1:3 with image\n";
    }
}

}  // namespace poolcast
