#pragma once

// Fixture helpers shared by the test suites.

#include "poolcast/poolcast.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <random>
#include <string>

namespace poolcast::testing {

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double sd = 1.0) {
    std::normal_distribution<double> n(0.0, sd);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = n(rng);
    }
    return m;
}

inline Eigen::VectorXd random_vector(std::mt19937_64& rng, Eigen::Index n, double sd = 1.0) {
    return random_matrix(rng, n, 1, sd).col(0);
}

/// Pool wrapper around explicit values; rows must cover whole days.
inline ForecastPool make_pool(const Eigen::MatrixXd& values, const Eigen::VectorXd& actual, std::vector<int> taus = {}) {
    ForecastPool p;
    if (taus.empty()) {
        for (Eigen::Index j = 0; j < values.cols(); ++j) taus.push_back(56 + static_cast<int>(j));
    }
    p.window_lengths = std::move(taus);
    p.values = values;
    p.actual = actual;
    return p;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("poolcast-test-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

/// OLS through the normal equations, an oracle independent of the library solvers.
inline Eigen::VectorXd normal_equations(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    return (X.transpose() * X).llt().solve(X.transpose() * y);
}

}  // namespace poolcast::testing
