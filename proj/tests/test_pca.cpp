#include "oracles.hpp"
#include "support.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace poolcast;
using Catch::Matchers::WithinAbs;

namespace {

// Panel of `w` noisy forecasts of a common signal over `days` training days
// plus one forecast day, with the realized signal as actuals.
struct Fixture {
    Eigen::MatrixXd forecasts;
    Eigen::VectorXd actual;
};

Fixture forecast_panel(std::mt19937_64& rng, int days, int w) {
    const Eigen::Index rows = static_cast<Eigen::Index>(days + 1) * kHoursPerDay;
    const Eigen::VectorXd signal = (testing::random_vector(rng, rows, 6.0).array() + 40.0).matrix();
    Eigen::MatrixXd F(rows, w);
    const Eigen::VectorXd common = testing::random_vector(rng, rows, 2.0);
    for (int c = 0; c < w; ++c) {
        const double load = static_cast<double>(c) / w;
        F.col(c) = signal + load * common + testing::random_vector(rng, rows, 0.5 + load);
    }
    return {F, signal.head(rows - kHoursPerDay) + testing::random_vector(rng, rows - kHoursPerDay, 1.0)};
}

PcPanel prepared(const Fixture& f, int K) {
    PcPanel p = standardize_panel(f.forecasts, f.actual);
    extract_components(p, K);
    return p;
}

}  // namespace

TEST_CASE("two-column standardization", "[pca]") {
    Eigen::MatrixXd F(3, 2);
    F << 1, 3, -4, -2, 10, 12;
    const auto p = standardize_panel(F, Eigen::VectorXd::Zero(2));
    for (int t = 0; t < 3; ++t) {
        CHECK_THAT(p.mu(t), WithinAbs(F(t, 0) + 1.0, 1e-15));
        CHECK_THAT(p.sigma(t), WithinAbs(std::sqrt(2.0), 1e-15));
        CHECK_THAT(p.z_hat(t, 0), WithinAbs(-1.0 / std::sqrt(2.0), 1e-15));
        CHECK_THAT(p.z_hat(t, 1), WithinAbs(1.0 / std::sqrt(2.0), 1e-15));
    }
    CHECK(p.n_train() == 2);
}

TEST_CASE("identical columns give degenerate rows", "[pca]") {
    const Eigen::MatrixXd F = Eigen::VectorXd::LinSpaced(4, 1, 4).replicate(1, 3);
    const auto p = standardize_panel(F, Eigen::VectorXd::Ones(4));
    for (int t = 0; t < 4; ++t) {
        CHECK(p.degenerate[static_cast<std::size_t>(t)]);
        CHECK(p.sigma(t) == 0.0);
        CHECK(p.z_hat.row(t).isZero(0.0));
    }
}

TEST_CASE("standardized rows have zero mean and unit sd", "[pca]") {
    std::mt19937_64 rng(1);
    const Eigen::MatrixXd F = testing::random_matrix(rng, 100, 10, 3.0);
    const auto p = standardize_panel(F, Eigen::VectorXd::Zero(100));
    const Eigen::MatrixXd Z = oracle::standardize_rows(F);
    CHECK((p.z_hat - Z).cwiseAbs().maxCoeff() < 1e-12);
    for (int t = 0; t < 100; ++t) {
        CHECK(std::abs(p.z_hat.row(t).mean()) < 1e-12);
        CHECK_THAT(std::sqrt(p.z_hat.row(t).squaredNorm() / 9.0), WithinAbs(1.0, 1e-12));
    }
}

TEST_CASE("component variances match an eigensolver", "[pca]") {
    std::mt19937_64 rng(2);
    const Eigen::MatrixXd F = testing::random_matrix(rng, 50, 8);
    PcPanel p = standardize_panel(F, Eigen::VectorXd::Zero(40));
    extract_components(p, 8);
    const Eigen::VectorXd ev = oracle::gram_eigenvalues(p.z_hat);
    const Eigen::VectorXd got = p.component_variances();
    for (int k = 0; k < 8; ++k) CHECK_THAT(got(k), WithinAbs(ev(k), 1e-8));
    for (int k = 1; k < 8; ++k) CHECK(got(k) <= got(k - 1) + 1e-12);
    // Row standardization leaves rank at most windows - 1.
    for (int i = 0; i < 7; ++i) {
        for (int j = i + 1; j < 7; ++j) {
            const double dot = p.components.col(i).dot(p.components.col(j));
            CHECK(std::abs(dot) < 1e-8 * p.components.col(i).norm() * p.components.col(j).norm());
        }
    }
}

TEST_CASE("rank-one panels are recovered by one component", "[pca]") {
    std::mt19937_64 rng(3);
    const Eigen::VectorXd a = testing::random_vector(rng, 60);
    const Eigen::VectorXd b = testing::random_vector(rng, 60, 10.0);
    Eigen::VectorXd v = testing::random_vector(rng, 6);
    Eigen::MatrixXd F = a * v.transpose();
    F.colwise() += b;
    PcPanel p = standardize_panel(F, Eigen::VectorXd::Zero(36));
    extract_components(p, 1);
    const Eigen::VectorXd u = a.cwiseSign();
    const Eigen::VectorXd pc = p.components.col(0);
    CHECK(std::abs(std::abs(pc.dot(u)) - pc.norm() * u.norm()) < 1e-10 * pc.norm() * u.norm());
    CHECK((p.z_hat - p.components * p.loadings.transpose()).norm() < 1e-10);
}

TEST_CASE("all components reconstruct the panel", "[pca]") {
    std::mt19937_64 rng(4);
    for (auto [n, w] : {std::pair{30, 5}, std::pair{4, 9}}) {
        PcPanel p = standardize_panel(testing::random_matrix(rng, n, w), Eigen::VectorXd::Zero(0));
        const int K = std::min(n, w);
        extract_components(p, K);
        CHECK((p.z_hat - p.components * p.loadings.transpose()).norm() < 1e-8);
    }
    PcPanel p = standardize_panel(testing::random_matrix(rng, 10, 4), Eigen::VectorXd::Zero(5));
    CHECK_THROWS_AS(extract_components(p, 5), ConfigError);
}

TEST_CASE("largest loading entries are positive", "[pca]") {
    std::mt19937_64 rng(5);
    const auto f = forecast_panel(rng, 10, 12);
    const auto p = prepared(f, 6);
    for (int k = 0; k < 6; ++k) {
        Eigen::Index arg = 0;
        p.loadings.col(k).cwiseAbs().maxCoeff(&arg);
        CHECK(p.loadings(arg, k) > 0.0);
    }
}

TEST_CASE("actuals equal to the first component", "[pca]") {
    std::mt19937_64 rng(6);
    auto f = forecast_panel(rng, 8, 10);
    PcPanel probe = prepared(f, 10);
    const Eigen::Index n = probe.n_train();
    f.actual = probe.mu.head(n) + probe.sigma.head(n).cwiseProduct(probe.components.col(0).head(n));
    const auto p = prepared(f, 10);
    const auto fit = fit_pcr_ols(p, 1);
    CHECK_THAT(fit.alpha, WithinAbs(0.0, 1e-9));
    CHECK_THAT(fit.beta(0), WithinAbs(1.0, 1e-9));
    const auto r = pca_average(p, KSelector::by(Criterion::Bic, 10));
    CHECK(r.fit.k_used == 1);
    for (int h = 0; h < kHoursPerDay; ++h) {
        const double expect = p.mu(n + h) + p.sigma(n + h) * p.components(n + h, 0);
        CHECK_THAT(r.forecast[static_cast<std::size_t>(h)], WithinAbs(expect, 1e-8));
    }
}

TEST_CASE("intercept-only model", "[pca]") {
    std::mt19937_64 rng(7);
    const auto f = forecast_panel(rng, 6, 8);
    const auto p = prepared(f, 4);
    const auto r = pca_average(p, KSelector::fixed_k(0));
    const double abar = p.z_actual.mean();
    for (int h = 0; h < kHoursPerDay; ++h) {
        const Eigen::Index t = p.n_train() + h;
        CHECK_THAT(r.forecast[static_cast<std::size_t>(h)], WithinAbs(p.mu(t) + abar * p.sigma(t), 1e-10));
    }
}

TEST_CASE("fixed-K fit matches least squares on the components", "[pca]") {
    std::mt19937_64 rng(8);
    const auto f = forecast_panel(rng, 10, 15);
    const auto p = prepared(f, 5);
    const auto fit = fit_pcr_ols(p, 5);
    const Eigen::VectorXd ref = oracle::ols_with_intercept(p.components.topRows(p.n_train()), p.z_actual);
    CHECK_THAT(fit.alpha, WithinAbs(ref(0), 1e-9));
    for (int k = 0; k < 5; ++k) CHECK_THAT(fit.beta(k), WithinAbs(ref(k + 1), 1e-9));
}

TEST_CASE("zero-penalty LPCA equals PCA with the same K", "[pca]") {
    std::mt19937_64 rng(9);
    const auto f = forecast_panel(rng, 12, 20);
    const auto p = prepared(f, 7);
    const auto pca = fit_pcr_ols(p, 7);
    const auto lpca = fit_pcr_lasso(p, 7, LambdaSelector::fixed(0.0));
    CHECK((fitted_prices(p, pca) - fitted_prices(p, lpca)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("a large penalty reduces LPCA to the intercept", "[pca]") {
    std::mt19937_64 rng(10);
    const auto f = forecast_panel(rng, 6, 10);
    const auto p = prepared(f, 5);
    const auto big = lpca_average(p, 5, LambdaSelector::fixed(1e9));
    const auto k0 = pca_average(p, KSelector::fixed_k(0));
    CHECK(big.fit.used.empty());
    for (int h = 0; h < kHoursPerDay; ++h) {
        CHECK_THAT(big.forecast[static_cast<std::size_t>(h)], WithinAbs(k0.forecast[static_cast<std::size_t>(h)], 1e-9));
    }
}

TEST_CASE("two-step refits the LASSO selection by OLS", "[pca]") {
    std::mt19937_64 rng(11);
    const auto f = forecast_panel(rng, 8, 12);
    const auto p = prepared(f, 6);
    SECTION("all components selected") {
        const auto two = two_step_average(p, 6, LambdaSelector::fixed(0.0));
        const auto pca = pca_average(p, KSelector::fixed_k(6));
        REQUIRE(two.fit.used.size() == 6);
        for (int h = 0; h < kHoursPerDay; ++h) {
            CHECK_THAT(two.forecast[static_cast<std::size_t>(h)], WithinAbs(pca.forecast[static_cast<std::size_t>(h)], 1e-9));
        }
    }
    SECTION("nothing selected") {
        const auto two = two_step_average(p, 6, LambdaSelector::fixed(1e9));
        const auto k0 = pca_average(p, KSelector::fixed_k(0));
        CHECK(two.fit.used.empty());
        for (int h = 0; h < kHoursPerDay; ++h) {
            CHECK_THAT(two.forecast[static_cast<std::size_t>(h)], WithinAbs(k0.forecast[static_cast<std::size_t>(h)], 1e-10));
        }
    }
    SECTION("a selected subset") {
        const auto lasso = fit_pcr_lasso(p, 6, LambdaSelector::by(Criterion::Bic));
        const auto two = fit_two_step(p, 6, LambdaSelector::by(Criterion::Bic));
        CHECK(two.used == lasso.used);
        CHECK(two.method == PcrMethod::Ols);
    }
}

TEST_CASE("forecasts are affine equivariant", "[pca]") {
    std::mt19937_64 rng(12);
    auto f = forecast_panel(rng, 8, 10);
    const auto p = prepared(f, 10);
    Fixture g{2.5 * f.forecasts.array() + 3.0, 2.5 * f.actual.array() + 3.0};
    const auto q = prepared(g, 10);
    for (auto sel : {KSelector::fixed_k(3), KSelector::by(Criterion::Aic, 10)}) {
        const auto a = pca_average(p, sel).forecast;
        const auto b = pca_average(q, sel).forecast;
        for (int h = 0; h < kHoursPerDay; ++h) {
            CHECK_THAT(b[static_cast<std::size_t>(h)], WithinAbs(2.5 * a[static_cast<std::size_t>(h)] + 3.0, 1e-8));
        }
    }
}

TEST_CASE("forecasts ignore component signs and rotations", "[pca]") {
    std::mt19937_64 rng(13);
    const auto f = forecast_panel(rng, 8, 10);
    auto p = prepared(f, 3);
    const auto base = pca_average(p, KSelector::fixed_k(3)).forecast;
    const double c = std::cos(0.7), s = std::sin(0.7);
    Eigen::Matrix3d R;
    R << c, -s, 0, s, c, 0, 0, 0, -1;
    p.components = p.components * R;
    const auto turned = pca_average(p, KSelector::fixed_k(3)).forecast;
    for (int h = 0; h < kHoursPerDay; ++h) {
        CHECK_THAT(turned[static_cast<std::size_t>(h)], WithinAbs(base[static_cast<std::size_t>(h)], 1e-9));
    }
}

TEST_CASE("degenerate rows", "[pca]") {
    std::mt19937_64 rng(14);
    auto f = forecast_panel(rng, 6, 8);
    const Eigen::Index n = f.actual.size();
    SECTION("are excluded from the fit and forecast by their mean") {
        f.forecasts.row(3).setConstant(30.0);
        f.forecasts.row(n + 5).setConstant(31.0);
        const auto p = prepared(f, 4);
        CHECK(p.degenerate[3]);
        const auto r = pca_average(p, KSelector::fixed_k(2));
        CHECK(r.forecast[5] == 31.0);
        const auto rows = detail::regression_rows(p);
        CHECK(rows.size() == static_cast<std::size_t>(n - 1));
    }
    SECTION("everywhere falls back to the mean") {
        for (Eigen::Index t = 0; t < f.forecasts.rows(); ++t) f.forecasts.row(t).setConstant(f.forecasts(t, 0));
        const auto p = prepared(f, 4);
        const auto r = lpca_average(p, 4, LambdaSelector::by(Criterion::Bic));
        CHECK(r.fallback);
        for (int h = 0; h < kHoursPerDay; ++h) {
            const double v = f.forecasts(n + h, 0);
            CHECK_THAT(r.forecast[static_cast<std::size_t>(h)], WithinAbs(v, 1e-12 * std::abs(v)));
        }
    }
}

TEST_CASE("pool-day panels use the trailing window and the day", "[pca]") {
    std::mt19937_64 rng(15);
    const auto f = forecast_panel(rng, 9, 6);
    Eigen::VectorXd actual(f.forecasts.rows());
    actual << f.actual, Eigen::VectorXd::Zero(kHoursPerDay);
    const auto pool = testing::make_pool(f.forecasts, actual);
    const auto p = standardize_panel(pool, 9, 5);
    CHECK(p.rows() == 6 * kHoursPerDay);
    CHECK(p.n_train() == 5 * kHoursPerDay);
    CHECK(p.mu(0) == f.forecasts.row(4 * kHoursPerDay).mean());
    const auto fc = pca_average(pool, 9, KSelector::fixed_k(2), 5);
    const auto direct = pca_average(detail::prepared_panel(pool, 9, 5, 2), KSelector::fixed_k(2)).forecast;
    CHECK(fc == direct);
    CHECK_THROWS_AS(standardize_panel(pool, 4, 5), AlignmentError);
}
