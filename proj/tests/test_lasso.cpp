#include "oracles.hpp"
#include "support.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

using namespace poolcast;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Eigen::VectorXd standardized_beta(const LassoFit& fit, const oracle::Standardized& s) {
    return fit.beta.cwiseProduct(s.scale);
}

// Correlated design with a sparse truth.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> sparse_problem(std::mt19937_64& rng, Eigen::Index n, Eigen::Index p) {
    Eigen::MatrixXd X = testing::random_matrix(rng, n, p);
    X.rightCols(p / 2) += 0.7 * X.leftCols(p / 2);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
    for (Eigen::Index j = 0; j < std::min<Eigen::Index>(p, 4); ++j) b(j) = 1.5 - j;
    const Eigen::VectorXd y = (X * b).array() + 3.0 + testing::random_vector(rng, n).array();
    return {X, y};
}

}  // namespace

TEST_CASE("soft threshold", "[lasso]") {
    CHECK(detail::soft_threshold(3.0, 1.0) == 2.0);
    CHECK(detail::soft_threshold(-3.0, 1.0) == -2.0);
    CHECK(detail::soft_threshold(0.5, 1.0) == 0.0);
}

TEST_CASE("orthonormal designs match the soft-threshold solution", "[lasso]") {
    std::mt19937_64 rng(101);
    const Eigen::MatrixXd X = oracle::orthonormal_design(rng, 200, 10);
    const Eigen::VectorXd y = X * testing::random_vector(rng, 10) + testing::random_vector(rng, 200);
    const auto s = oracle::standardize(X, y);
    const Eigen::VectorXd c = s.Xs.transpose() * s.yc / 200.0;
    const std::vector<double> lambdas{0.8, 0.3, 0.1, 0.01, 0.0};
    const auto path = fit_path(X, y, LambdaGrid::fixed(lambdas));
    for (std::size_t k = 0; k < lambdas.size(); ++k) {
        for (Eigen::Index j = 0; j < 10; ++j) {
            CHECK_THAT(path[k].beta(j), WithinAbs(oracle::soft_threshold(c(j), lambdas[k]) / s.scale(j), 1e-8));
        }
    }
}

TEST_CASE("two-predictor objective matches a brute-force scan", "[lasso]") {
    std::mt19937_64 rng(7);
    Eigen::MatrixXd X = testing::random_matrix(rng, 50, 2);
    X.col(1) += 0.5 * X.col(0);
    const Eigen::VectorXd y = X * Eigen::Vector2d(1.2, -0.7) + testing::random_vector(rng, 50);
    const auto s = oracle::standardize(X, y);
    const double lambda = 0.15;
    const auto fit = fit_path(X, y, LambdaGrid::fixed({lambda})).front();
    const double got = oracle::lasso_objective(s, standardized_beta(fit, s), lambda);
    const double scan = oracle::brute_force_p2(s, lambda);
    CHECK(got <= scan + 1e-12);
    CHECK(scan - got < 2e-3);
}

TEST_CASE("zero penalty reproduces least squares", "[lasso]") {
    std::mt19937_64 rng(3);
    const auto [X, y] = sparse_problem(rng, 80, 6);
    const auto fit = fit_path(X, y, LambdaGrid::fixed({0.0})).front();
    const Eigen::VectorXd ref = oracle::ols_with_intercept(X, y);
    CHECK_THAT(fit.intercept, WithinAbs(ref(0), 1e-6 * (1.0 + std::abs(ref(0)))));
    for (Eigen::Index j = 0; j < 6; ++j) CHECK_THAT(fit.beta(j), WithinRel(ref(j + 1), 1e-6));
}

TEST_CASE("large penalties give the intercept-only model", "[lasso]") {
    std::mt19937_64 rng(4);
    const auto [X, y] = sparse_problem(rng, 60, 5);
    const double lmax = lambda_max(X, y);
    const auto s = oracle::standardize(X, y);
    CHECK_THAT(lmax, WithinAbs((s.Xs.transpose() * s.yc / 60.0).cwiseAbs().maxCoeff(), 1e-12));
    const auto path = fit_path(X, y, LambdaGrid::fixed({10 * lmax, lmax, 0.99 * lmax}));
    CHECK(path[0].beta.isZero(0.0));
    CHECK(path[1].beta.isZero(0.0));
    CHECK(path[0].df == 0);
    CHECK_THAT(path[0].intercept, WithinAbs(y.mean(), 1e-12));
    CHECK(path[2].df >= 1);
}

TEST_CASE("path fits satisfy KKT, including p > n", "[lasso]") {
    std::mt19937_64 rng(5);
    for (auto [n, p] : {std::pair{100, 8}, std::pair{40, 90}}) {
        const auto [X, y] = sparse_problem(rng, n, p);
        const auto s = oracle::standardize(X, y);
        const auto path = fit_path(X, y);
        REQUIRE(path.size() == 20);
        for (const auto& f : path) {
            CHECK(f.converged);
            CHECK(oracle::kkt_violation(s, standardized_beta(f, s), f.lambda) < 1e-5);
            CHECK(f.df == static_cast<int>((f.beta.array() != 0.0).count()));
        }
    }
}

TEST_CASE("path is monotone in fit and norm", "[lasso]") {
    std::mt19937_64 rng(6);
    const auto [X, y] = sparse_problem(rng, 120, 12);
    const auto s = oracle::standardize(X, y);
    const auto path = fit_path(X, y);
    for (std::size_t k = 1; k < path.size(); ++k) {
        CHECK(path[k].lambda < path[k - 1].lambda);
        CHECK(path[k].rss <= path[k - 1].rss * (1 + 1e-9));
        CHECK(standardized_beta(path[k], s).cwiseAbs().sum() >=
              standardized_beta(path[k - 1], s).cwiseAbs().sum() * (1 - 1e-9));
    }
}

TEST_CASE("column permutations permute the coefficients", "[lasso]") {
    std::mt19937_64 rng(8);
    const auto [X, y] = sparse_problem(rng, 90, 7);
    std::vector<int> order(7);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    Eigen::MatrixXd Xp(90, 7);
    for (int j = 0; j < 7; ++j) Xp.col(j) = X.col(order[static_cast<std::size_t>(j)]);
    const auto grid = LambdaGrid::fixed({0.2, 0.05, 0.01});
    const auto a = fit_path(X, y, grid);
    const auto b = fit_path(Xp, y, grid);
    for (std::size_t k = 0; k < 3; ++k) {
        for (int j = 0; j < 7; ++j) CHECK_THAT(b[k].beta(j), WithinAbs(a[k].beta(order[static_cast<std::size_t>(j)]), 1e-6));
    }
}

TEST_CASE("duplicating a column never raises the optimum", "[lasso]") {
    std::mt19937_64 rng(9);
    const auto [X, y] = sparse_problem(rng, 70, 5);
    Eigen::MatrixXd Xd(70, 6);
    Xd << X, X.col(0);
    const auto sa = oracle::standardize(X, y);
    const auto sb = oracle::standardize(Xd, y);
    for (double lambda : {0.3, 0.05}) {
        const auto a = fit_path(X, y, LambdaGrid::fixed({lambda})).front();
        const auto b = fit_path(Xd, y, LambdaGrid::fixed({lambda})).front();
        CHECK(oracle::lasso_objective(sb, standardized_beta(b, sb), lambda) <=
              oracle::lasso_objective(sa, standardized_beta(a, sa), lambda) + 1e-10);
    }
}

TEST_CASE("information criteria", "[lasso]") {
    const auto a = information_criteria(50.0, 100.0, 100, 3);
    const auto b = information_criteria(50.0, 100.0, 100, 5);
    CHECK(a.aic < b.aic);
    CHECK(a.bic < b.bic);
    CHECK(a.hqc < b.hqc);

    // Per-parameter penalties at n = 100.
    const auto c = information_criteria(50.0, 100.0, 100, 4);
    CHECK_THAT(c.hqc - a.hqc, WithinAbs(2.0 * std::log(std::log(100.0)), 1e-9));
    CHECK_THAT(c.hqc - a.hqc, WithinAbs(3.054, 1e-3));
    CHECK_THAT(c.bic - a.bic, WithinAbs(std::log(100.0), 1e-9));
    CHECK_THAT(c.aic - a.aic, WithinAbs(2.0, 1e-12));

    const auto z = information_criteria(20.0, 40.0, 50, 0);
    CHECK_THAT(z.aic, WithinAbs(50.0 * std::log(20.0 / 50.0) + 2.0, 1e-12));
    CHECK(!z.perfect_fit);
}

TEST_CASE("exact fits use a finite sentinel", "[lasso]") {
    const auto ic = information_criteria(0.0, 10.0, 40, 2);
    CHECK(ic.perfect_fit);
    CHECK(std::isfinite(ic.bic));
    CHECK(ic.bic < information_criteria(1e-6, 10.0, 40, 2).bic);
    CHECK(ic.bic < information_criteria(0.0, 10.0, 40, 3).bic);
}

TEST_CASE("criteria are unidentified without spare observations", "[lasso]") {
    const auto ic = information_criteria(1.0, 10.0, 5, 4);
    CHECK(!ic.identified);
    CHECK(std::isinf(ic.bic));
}

TEST_CASE("lambda grid", "[lasso]") {
    const auto g = LambdaGrid::log_spaced(2.0);
    REQUIRE(g.values.size() == 20);
    CHECK(g.values.front() == 2.0);
    CHECK_THAT(g.values.back(), WithinRel(2e-4, 1e-12));
    for (std::size_t i = 1; i < 20; ++i) {
        CHECK(g.values[i] < g.values[i - 1]);
        CHECK_THAT(g.values[i] / g.values[i - 1], WithinRel(std::pow(1e-4, 1.0 / 19.0), 1e-12));
    }
    CHECK_THAT(internal_lambda(1.0, LambdaConvention::Paper, 50), WithinAbs(0.01, 1e-15));
    CHECK(internal_lambda(1.0, LambdaConvention::Scaled, 50) == 1.0);
}

TEST_CASE("invalid problems raise solver errors", "[lasso]") {
    Eigen::MatrixXd X = Eigen::MatrixXd::Ones(5, 2);
    Eigen::VectorXd y = Eigen::VectorXd::Ones(5);
    X(0, 0) = std::nan("");
    CHECK_THROWS_AS(fit_path(X, y), SolverError);
    CHECK_THROWS_AS(fit_path(Eigen::MatrixXd::Ones(1, 2), Eigen::VectorXd::Ones(1)), SolverError);
    CHECK_THROWS_AS(fit_path(Eigen::MatrixXd::Ones(4, 2), Eigen::VectorXd::Ones(3)), SolverError);
}

TEST_CASE("constant columns are dropped with zero coefficients", "[lasso]") {
    std::mt19937_64 rng(10);
    auto [X, y] = sparse_problem(rng, 50, 4);
    X.col(2).setConstant(3.0);
    const auto path = fit_path(X, y);
    for (const auto& f : path) CHECK(f.beta(2) == 0.0);
}

TEST_CASE("a perfect pool column is selected", "[lasso]") {
    std::mt19937_64 rng(11);
    const int days = 12;
    const Eigen::Index rows = days * kHoursPerDay;
    const Eigen::VectorXd actual = (testing::random_vector(rng, rows, 8.0).array() + 40.0).matrix();
    Eigen::MatrixXd v(rows, 10);
    for (Eigen::Index c = 0; c < 10; ++c) v.col(c) = actual + testing::random_vector(rng, rows, 1.0 + 0.3 * c);
    v.col(4) = actual;
    const auto pool = testing::make_pool(v, actual);
    const int day = days - 1;

    const auto exact = lasso_average(pool, day, LambdaSelector::fixed(1e-10, LambdaConvention::Scaled), 10);
    for (int h = 0; h < kHoursPerDay; ++h) CHECK_THAT(exact[static_cast<std::size_t>(h)], WithinAbs(v(day * 24 + h, 4), 1e-6));

    const auto [X, y] = detail::trailing_rows(pool, day, 10);
    const auto fit = fit_selected(X, y, LambdaSelector::by(Criterion::Bic));
    CHECK(fit.df == 1);
    CHECK(fit.beta(4) > 0.99);
    CHECK(((fit.predict(X) - y).cwiseAbs().maxCoeff()) < 1e-3 * 8.0);
    const auto sel = lasso_average(pool, day, LambdaSelector::by(Criterion::Bic), 10);
    for (int h = 0; h < kHoursPerDay; ++h) CHECK_THAT(sel[static_cast<std::size_t>(h)], WithinAbs(v(day * 24 + h, 4), 1e-2));
}

TEST_CASE("identical pool columns", "[lasso]") {
    std::mt19937_64 rng(12);
    const Eigen::Index rows = 8 * kHoursPerDay;
    SECTION("constant columns leave the intercept") {
        const Eigen::VectorXd actual = Eigen::VectorXd::Constant(rows, 25.0);
        const auto pool = testing::make_pool(Eigen::MatrixXd::Constant(rows, 5, 25.0), actual);
        const auto fc = lasso_average(pool, 7, LambdaSelector::by(Criterion::Bic), 6);
        for (double v : fc) CHECK(v == 25.0);
    }
    SECTION("varying identical columns reproduce the column") {
        const Eigen::VectorXd col = testing::random_vector(rng, rows, 5.0);
        Eigen::MatrixXd v(rows, 4);
        for (int c = 0; c < 4; ++c) v.col(c) = col;
        const auto pool = testing::make_pool(v, col);
        const auto fc = lasso_average(pool, 7, LambdaSelector::by(Criterion::Bic), 6);
        for (int h = 0; h < kHoursPerDay; ++h) CHECK_THAT(fc[static_cast<std::size_t>(h)], WithinAbs(col(7 * 24 + h), 1e-2));
    }
}

TEST_CASE("selection ties go to the larger penalty", "[lasso]") {
    std::vector<LassoFit> path(3);
    path[0].ic.bic = 1.0;
    path[1].ic.bic = 0.5;
    path[2].ic.bic = 0.5;
    CHECK(select_fit(path, Criterion::Bic) == 1);
}
