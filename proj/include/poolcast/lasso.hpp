#pragma once

// LASSO by cyclic coordinate descent on standardized predictors:
//
//   minimize (1/(2n)) ||y - a - X b||^2 + lambda ||b||_1
//
// The intercept a is unpenalized. Predictors are centered and scaled to unit
// (population) variance internally; coefficients are reported on the original
// scale. A `paper` lambda, stated for the unscaled objective RSS + l ||b||_1,
// maps to the internal one as lambda = l / (2n).
//
// The solver works on the Gram matrix of the standardized predictors, keeping
// the gradient c - G b up to date, so one coordinate update costs O(p).

#include "poolcast/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace poolcast {

enum class Criterion { Aic, Bic, Hqc };

inline std::string_view to_string(Criterion c) {
    switch (c) {
        case Criterion::Aic: return "aic";
        case Criterion::Bic: return "bic";
        case Criterion::Hqc: return "hqc";
    }
    return "?";
}

inline Criterion parse_criterion(std::string_view s) {
    if (s == "aic") return Criterion::Aic;
    if (s == "bic") return Criterion::Bic;
    if (s == "hqc") return Criterion::Hqc;
    throw ConfigError("unknown information criterion '" + std::string(s) + "' (valid: aic, bic, hqc)");
}

/// Value of n ln(rss/n) used when the fit is exact; the usual penalty is added
/// on top so that among exact fits the smallest model still wins.
inline constexpr double kPerfectFitBase = -1e12;

struct InformationCriteria {
    double aic = 0.0;
    double bic = 0.0;
    double hqc = 0.0;
    bool perfect_fit = false;   // rss is zero to working precision
    bool identified = true;     // n > number of estimated parameters

    double get(Criterion c) const {
        switch (c) {
            case Criterion::Aic: return aic;
            case Criterion::Bic: return bic;
            case Criterion::Hqc: return hqc;
        }
        return aic;
    }
};

/// AIC, BIC and HQC of a Gaussian regression with `df` slope parameters plus
/// an intercept (k = df + 1).
inline InformationCriteria information_criteria(double rss, double tss, int n, int df) {
    InformationCriteria ic;
    const double k = df + 1.0;
    const double nn = n;
    if (n <= df + 1 || n < 3) {
        ic.identified = false;
        ic.aic = ic.bic = ic.hqc = std::numeric_limits<double>::infinity();
        return ic;
    }
    double base;
    if (rss <= 1e-24 * std::max(tss, std::numeric_limits<double>::min()) || rss <= 0.0) {
        ic.perfect_fit = true;
        base = kPerfectFitBase;
    } else {
        base = nn * std::log(rss / nn);
    }
    ic.aic = base + 2.0 * k;
    ic.bic = base + std::log(nn) * k;
    ic.hqc = base + 2.0 * std::log(std::log(nn)) * k;
    return ic;
}

struct LassoFit {
    double intercept = 0.0;
    Eigen::VectorXd beta;  // original scale
    double lambda = 0.0;   // internal (1/(2n)-scaled) penalty
    int df = 0;            // nonzero coefficients
    double rss = 0.0;
    double tss = 0.0;
    int n = 0;
    bool converged = true;
    long sweeps = 0;
    InformationCriteria ic;

    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const {
        return (X * beta).array() + intercept;
    }
};

inline InformationCriteria information_criteria(const LassoFit& fit) {
    return information_criteria(fit.rss, fit.tss, fit.n, fit.df);
}

struct LambdaGrid {
    std::vector<double> values;  // descending

    /// `count` log-spaced values from lambda_max down to min_ratio * lambda_max.
    static LambdaGrid log_spaced(double lambda_max, int count = 20, double min_ratio = 1e-4) {
        if (count < 1 || !(min_ratio > 0.0) || min_ratio >= 1.0) throw ConfigError("bad lambda grid settings");
        LambdaGrid g;
        if (!(lambda_max > 0.0)) {
            g.values.assign(1, 0.0);
            return g;
        }
        if (count == 1) {
            g.values.push_back(lambda_max);
            return g;
        }
        const double step = std::log(min_ratio) / (count - 1);
        for (int i = 0; i < count; ++i) g.values.push_back(lambda_max * std::exp(step * i));
        return g;
    }

    static LambdaGrid fixed(std::vector<double> values) {
        for (double v : values) {
            if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("lambda values must be finite and nonnegative");
        }
        std::sort(values.begin(), values.end(), std::greater<>());
        return {std::move(values)};
    }
};

enum class LambdaConvention { Paper, Scaled };

inline LambdaConvention parse_lambda_convention(std::string_view s) {
    if (s == "paper") return LambdaConvention::Paper;
    if (s == "scaled") return LambdaConvention::Scaled;
    throw ConfigError("unknown lambda convention '" + std::string(s) + "' (valid: paper, scaled)");
}

/// Internal lambda for a user-supplied value under `convention` with n observations.
inline double internal_lambda(double lambda, LambdaConvention convention, int n) {
    return convention == LambdaConvention::Paper ? lambda / (2.0 * n) : lambda;
}

struct LassoOptions {
    double tolerance = 1e-7;   // max coefficient change (standardized scale)
    long max_sweeps = 100000;  // per lambda
    int grid_size = 20;
    double min_ratio = 1e-4;
};

/// Centered and scaled predictors with their Gram matrix.
struct StandardizedProblem {
    int n = 0;
    double y_mean = 0.0;
    double tss = 0.0;
    Eigen::VectorXd mean;          // per original column
    Eigen::VectorXd scale;         // population sd per original column
    std::vector<int> kept;         // columns with nonzero variance
    Eigen::MatrixXd gram;          // [kept x kept], Xs'Xs / n
    Eigen::VectorXd corr;          // Xs'(y - ybar) / n

    double lambda_max() const { return corr.size() == 0 ? 0.0 : corr.cwiseAbs().maxCoeff(); }
};

inline StandardizedProblem standardize_problem(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    if (X.rows() != y.size()) throw SolverError("design and target lengths differ");
    if (X.rows() < 2) throw SolverError("LASSO needs at least two observations");
    if (!X.allFinite() || !y.allFinite()) throw SolverError("non-finite values in LASSO problem");
    StandardizedProblem sp;
    sp.n = static_cast<int>(X.rows());
    const double n = sp.n;
    sp.y_mean = y.mean();
    const Eigen::VectorXd yc = y.array() - sp.y_mean;
    sp.tss = yc.squaredNorm();
    sp.mean = X.colwise().mean().transpose();
    sp.scale.resize(X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        const double var = (X.col(j).array() - sp.mean(j)).square().sum() / n;
        sp.scale(j) = std::sqrt(var);
        if (sp.scale(j) > 1e-12 * (1.0 + std::abs(sp.mean(j)))) sp.kept.push_back(static_cast<int>(j));
    }
    const auto p = static_cast<Eigen::Index>(sp.kept.size());
    Eigen::MatrixXd Xs(X.rows(), p);
    for (Eigen::Index k = 0; k < p; ++k) {
        const int j = sp.kept[static_cast<std::size_t>(k)];
        Xs.col(k) = (X.col(j).array() - sp.mean(j)) / sp.scale(j);
    }
    sp.gram = Eigen::MatrixXd::Zero(p, p);
    sp.gram.selfadjointView<Eigen::Lower>().rankUpdate(Xs.transpose(), 1.0 / n);
    sp.gram.triangularView<Eigen::StrictlyUpper>() = sp.gram.transpose();
    sp.corr = Xs.transpose() * yc / n;
    return sp;
}

namespace detail {

inline double soft_threshold(double z, double lambda) {
    if (z > lambda) return z - lambda;
    if (z < -lambda) return z + lambda;
    return 0.0;
}

}  // namespace detail

/// Warm-started coordinate descent along `grid` (any order; solved descending).
inline std::vector<LassoFit> fit_path(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const LambdaGrid& grid,
                                      const LassoOptions& opts = {}) {
    if (grid.values.empty()) throw ConfigError("empty lambda grid");
    const StandardizedProblem sp = standardize_problem(X, y);
    const auto p = static_cast<Eigen::Index>(sp.kept.size());
    std::vector<double> lambdas = grid.values;
    std::sort(lambdas.begin(), lambdas.end(), std::greater<>());

    Eigen::VectorXd b = Eigen::VectorXd::Zero(p);  // standardized coefficients
    Eigen::VectorXd g = sp.corr;                   // corr - gram * b
    std::vector<char> active(static_cast<std::size_t>(p), 0);
    std::vector<Eigen::Index> active_list;

    auto update = [&](Eigen::Index j, double lambda) {
        const double gjj = sp.gram(j, j);
        const double z = g(j) + gjj * b(j);
        const double nb = detail::soft_threshold(z, lambda) / gjj;
        const double d = nb - b(j);
        if (d != 0.0) {
            g.noalias() -= d * sp.gram.col(j);
            b(j) = nb;
            if (!active[static_cast<std::size_t>(j)] && nb != 0.0) {
                active[static_cast<std::size_t>(j)] = 1;
                active_list.push_back(j);
            }
        }
        return std::abs(d);
    };

    // On a singular active block: moves along a null direction of the block
    // until one coefficient reaches zero, provided the objective does not
    // increase. Returns the index (into idx) that left the set, or -1.
    auto shrink_support = [&](const std::vector<Eigen::Index>& idx, const Eigen::MatrixXd& ga, double lambda) {
        const auto k = static_cast<Eigen::Index>(idx.size());
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ga);
        if (es.info() != Eigen::Success) return Eigen::Index{-1};
        Eigen::VectorXd v = es.eigenvectors().col(0);
        const double curv = es.eigenvalues()(0);
        double slope = 0.0;  // d objective / dt along v
        for (Eigen::Index i = 0; i < k; ++i) slope += v(i) * ((b(idx[i]) > 0.0 ? lambda : -lambda) - g(idx[i]));
        if (slope > 0.0) {
            v = -v;
            slope = -slope;
        }
        double t = std::numeric_limits<double>::infinity();
        Eigen::Index hit = -1;
        for (Eigen::Index i = 0; i < k; ++i) {
            const double bi = b(idx[i]);
            if (v(i) * bi < 0.0 && -bi / v(i) < t) {
                t = -bi / v(i);
                hit = i;
            }
        }
        if (hit < 0 || slope * t + 0.5 * std::max(curv, 0.0) * t * t > 0.0) return Eigen::Index{-1};
        for (Eigen::Index i = 0; i < k; ++i) {
            const double nb = i == hit ? 0.0 : b(idx[i]) + t * v(i);
            const double delta = nb - b(idx[i]);
            if (delta != 0.0) {
                g.noalias() -= delta * sp.gram.col(idx[i]);
                b(idx[i]) = nb;
            }
        }
        return hit;
    };

    // Moves the nonzero coefficients to the minimizer of the objective
    // restricted to their current sign pattern. When that minimizer lies in
    // another orthant, the step stops where the first coefficient reaches zero,
    // that coefficient leaves the set and the step is repeated. The objective
    // never increases. A numerically singular active block is first reduced
    // along its null space.
    auto newton_step = [&](double lambda) {
        std::vector<Eigen::Index> idx;
        for (Eigen::Index j : active_list) {
            if (b(j) != 0.0) idx.push_back(j);
        }
        while (!idx.empty()) {
            const auto k = static_cast<Eigen::Index>(idx.size());
            Eigen::MatrixXd ga(k, k);
            Eigen::VectorXd rhs(k);
            Eigen::VectorXd cur(k);
            for (Eigen::Index i = 0; i < k; ++i) {
                cur(i) = b(idx[i]);
                rhs(i) = sp.corr(idx[i]) - (cur(i) > 0.0 ? lambda : -lambda);
                for (Eigen::Index j = 0; j < k; ++j) ga(i, j) = sp.gram(idx[i], idx[j]);
            }
            const Eigen::LDLT<Eigen::MatrixXd> ldlt(ga);
            const Eigen::VectorXd d = ldlt.vectorD();
            if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || !(d.minCoeff() > 1e-12 * d.maxCoeff())) {
                const Eigen::Index out = shrink_support(idx, ga, lambda);
                if (out < 0) return;
                idx.erase(idx.begin() + out);
                continue;
            }
            const Eigen::VectorXd x = ldlt.solve(rhs);
            if (!x.allFinite()) return;
            double t = 1.0;
            Eigen::Index hit = -1;
            for (Eigen::Index i = 0; i < k; ++i) {
                if (x(i) * cur(i) < 0.0) {
                    const double ti = cur(i) / (cur(i) - x(i));
                    if (ti < t) {
                        t = ti;
                        hit = i;
                    }
                }
            }
            std::vector<Eigen::Index> keep;
            for (Eigen::Index i = 0; i < k; ++i) {
                double nb = i == hit ? 0.0 : cur(i) + t * (x(i) - cur(i));
                if (nb * cur(i) < 0.0) nb = 0.0;
                const double delta = nb - cur(i);
                if (delta != 0.0) {
                    g.noalias() -= delta * sp.gram.col(idx[i]);
                    b(idx[i]) = nb;
                }
                if (nb != 0.0) keep.push_back(idx[i]);
            }
            if (hit < 0) return;
            idx = std::move(keep);
        }
    };

    std::vector<LassoFit> path;
    path.reserve(lambdas.size());
    for (double lambda : lambdas) {
        long sweeps = 0;
        bool converged = false;
        while (sweeps < opts.max_sweeps) {
            double max_change = 0.0;
            for (Eigen::Index j = 0; j < p; ++j) max_change = std::max(max_change, update(j, lambda));
            ++sweeps;
            if (max_change < opts.tolerance) {
                converged = true;
                break;
            }
            // Settle the active set, then re-check all coordinates.
            while (sweeps < opts.max_sweeps) {
                newton_step(lambda);
                double inner = 0.0;
                for (std::size_t a = 0; a < active_list.size(); ++a) inner = std::max(inner, update(active_list[a], lambda));
                ++sweeps;
                if (inner < opts.tolerance) break;
            }
        }

        LassoFit fit;
        fit.lambda = lambda;
        fit.n = sp.n;
        fit.tss = sp.tss;
        fit.converged = converged;
        fit.sweeps = sweeps;
        fit.beta = Eigen::VectorXd::Zero(X.cols());
        fit.intercept = sp.y_mean;
        for (Eigen::Index k = 0; k < p; ++k) {
            if (b(k) == 0.0) continue;
            const int j = sp.kept[static_cast<std::size_t>(k)];
            fit.beta(j) = b(k) / sp.scale(j);
            fit.intercept -= sp.mean(j) * fit.beta(j);
            ++fit.df;
        }
        fit.rss = (y - fit.predict(X)).squaredNorm();
        fit.ic = information_criteria(fit);
        path.push_back(std::move(fit));
    }
    return path;
}

/// Smallest lambda (internal scale) that sets every coefficient to zero.
inline double lambda_max(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    return standardize_problem(X, y).lambda_max();
}

/// Path over the data-driven grid: lambda_max down to min_ratio * lambda_max.
inline std::vector<LassoFit> fit_path(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                      const LassoOptions& opts = {}) {
    const LambdaGrid grid = LambdaGrid::log_spaced(lambda_max(X, y), opts.grid_size, opts.min_ratio);
    return fit_path(X, y, grid, opts);
}

/// Index of the fit minimizing the criterion; ties go to the earlier (larger lambda) fit.
inline std::size_t select_fit(const std::vector<LassoFit>& path, Criterion c) {
    if (path.empty()) throw SolverError("empty LASSO path");
    std::size_t best = 0;
    for (std::size_t i = 1; i < path.size(); ++i) {
        if (path[i].ic.get(c) < path[best].ic.get(c)) best = i;
    }
    return best;
}

/// How to pick lambda: a fixed value or an information criterion over the grid.
struct LambdaSelector {
    enum class Kind { Fixed, Aic, Bic, Hqc };
    Kind kind = Kind::Bic;
    double lambda = 0.0;  // Fixed only
    LambdaConvention convention = LambdaConvention::Paper;

    static LambdaSelector fixed(double lambda, LambdaConvention c = LambdaConvention::Paper) {
        return {Kind::Fixed, lambda, c};
    }
    static LambdaSelector by(Criterion c) {
        switch (c) {
            case Criterion::Aic: return {Kind::Aic};
            case Criterion::Bic: return {Kind::Bic};
            case Criterion::Hqc: return {Kind::Hqc};
        }
        return {};
    }
    Criterion criterion() const {
        return kind == Kind::Aic ? Criterion::Aic : kind == Kind::Hqc ? Criterion::Hqc : Criterion::Bic;
    }
};

/// Solves for the selector's lambda (or the grid) and returns the chosen fit.
inline LassoFit fit_selected(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const LambdaSelector& sel,
                             const LassoOptions& opts = {}) {
    if (sel.kind == LambdaSelector::Kind::Fixed) {
        const double lambda = internal_lambda(sel.lambda, sel.convention, static_cast<int>(X.rows()));
        return fit_path(X, y, LambdaGrid::fixed({lambda}), opts).front();
    }
    auto path = fit_path(X, y, opts);
    return std::move(path[select_fit(path, sel.criterion())]);
}

}  // namespace poolcast
