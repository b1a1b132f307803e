#pragma once

// N-PIT variance stabilizing transform: z = Phi^-1(F(y)) with F the empirical
// CDF of the in-sample data, and its inverse y = F^-1(Phi(z)).
//
// F uses Weibull plotting positions rank/(n+1), tied values share their
// average rank, and F is linear between distinct sample values. Outside the
// sample range F clamps to 1/(n+1) and n/(n+1); the inverse clamps to the
// sample minimum and maximum.

#include "poolcast/error.hpp"
#include "poolcast/normal.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

namespace poolcast {

inline double plotting_position(double rank, std::size_t n) { return rank / (static_cast<double>(n) + 1.0); }

/// Phi^-1(r/(n+1)) for integer ranks r = 1..n; element 0 is unused.
inline std::vector<double> normal_scores(std::size_t n) {
    std::vector<double> out(n + 1, 0.0);
    for (std::size_t r = 1; r <= n; ++r) out[r] = normal_quantile(plotting_position(static_cast<double>(r), n));
    return out;
}

class VstMap {
public:
    VstMap() = default;

    static VstMap fit(std::span<const double> sample) {
        std::vector<double> sorted(sample.begin(), sample.end());
        for (double v : sorted) {
            if (!std::isfinite(v)) throw FitError("VST sample contains non-finite values");
        }
        std::sort(sorted.begin(), sorted.end());
        return from_sorted(std::move(sorted));
    }

    /// Builds a map from an ascending sample without re-sorting it.
    static VstMap from_sorted(std::vector<double> sorted) {
        if (sorted.size() < 2) throw FitError("VST needs at least two observations");
        VstMap m;
        m.sorted_ = std::move(sorted);
        const std::size_t n = m.sorted_.size();
        const double* v = m.sorted_.data();
        m.knots_.reserve(n);
        m.positions_.reserve(n);
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j + 1 < n && v[j + 1] == v[i]) ++j;
            m.knots_.push_back(v[i]);
            m.positions_.push_back(plotting_position(0.5 * static_cast<double>((i + 1) + (j + 1)), n));
            i = j + 1;
        }
        return m;
    }

    std::size_t size() const { return sorted_.size(); }
    std::span<const double> sorted_sample() const { return sorted_; }

    /// Empirical CDF value (plotting position) of y.
    double cdf(double y) const {
        if (!std::isfinite(y)) throw FitError("VST forward of a non-finite value");
        const std::size_t n = sorted_.size();
        if (y < knots_.front()) return plotting_position(1.0, n);
        if (y > knots_.back()) return plotting_position(static_cast<double>(n), n);
        const auto it = std::lower_bound(knots_.begin(), knots_.end(), y);
        const auto k = static_cast<std::size_t>(it - knots_.begin());
        if (*it == y) return positions_[k];
        const double t = (y - knots_[k - 1]) / (knots_[k] - knots_[k - 1]);
        return positions_[k - 1] + t * (positions_[k] - positions_[k - 1]);
    }

    double forward(double y) const { return normal_quantile(cdf(y)); }

    double inverse(double z) const {
        if (!std::isfinite(z)) throw FitError("VST inverse of a non-finite value");
        const double p = normal_cdf(z);
        if (p <= positions_.front()) return knots_.front();
        if (p >= positions_.back()) return knots_.back();
        const auto it = std::upper_bound(positions_.begin(), positions_.end(), p);
        const auto k = static_cast<std::size_t>(it - positions_.begin());
        const double t = (p - positions_[k - 1]) / (positions_[k] - positions_[k - 1]);
        return knots_[k - 1] + t * (knots_[k] - knots_[k - 1]);
    }

private:
    std::vector<double> sorted_;
    std::vector<double> knots_;      // distinct sample values
    std::vector<double> positions_;  // plotting position of each knot
};

/// A sample value tagged with the caller's cell id.
struct TaggedValue {
    double value;
    int cell;

    friend bool operator<(const TaggedValue& a, const TaggedValue& b) {
        return a.value < b.value || (a.value == b.value && a.cell < b.cell);
    }
};

/// Writes forward(value) of every element of an ascending tagged sample to
/// out[cell - cell_offset]. Equal to calling VstMap::forward on each value.
/// `scores` may hold normal_scores(n) to skip quantile evaluations.
inline void score_sorted(std::span<const TaggedValue> sorted, std::span<double> out, int cell_offset,
                         const std::vector<double>* scores = nullptr) {
    const std::size_t n = sorted.size();
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && sorted[j + 1].value == sorted[i].value) ++j;
        const std::size_t rank_sum = (i + 1) + (j + 1);
        double z;
        if (scores != nullptr && rank_sum % 2 == 0) {
            z = (*scores)[rank_sum / 2];
        } else {
            z = normal_quantile(plotting_position(0.5 * static_cast<double>(rank_sum), n));
        }
        for (std::size_t k = i; k <= j; ++k) out[static_cast<std::size_t>(sorted[k].cell - cell_offset)] = z;
        i = j + 1;
    }
}

}  // namespace poolcast
