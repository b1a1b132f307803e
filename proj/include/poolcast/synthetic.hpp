#pragma once

// Seeded synthetic market generator for offline runs.
//
// Random stream: std::mt19937_64 (standard constants) seeded with `seed`.
// Uniform draws use the top 53 bits: u = (x >> 11) * 2^-53. Normal draws use
// the Box-Muller pair z0 = r cos(2 pi u2), z1 = r sin(2 pi u2) with
// r = sqrt(-2 ln(1 - u1)); z0 is returned first and z1 is cached.
// Draw order per day: for each hour 0..23 load noise, wind innovation, price
// innovation.

#include "poolcast/error.hpp"
#include "poolcast/frame.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace poolcast {

class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(1.0 - u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        cached_ = r * std::sin(angle);
        has_cached_ = true;
        return r * std::cos(angle);
    }

private:
    std::mt19937_64 engine_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

struct SyntheticConfig {
    int n_days = 1000;
    Date start_date = make_date(2015, 1, 1);
    std::uint64_t seed = 1;

    double price_level = 40.0;
    double price_daily_amplitude = 8.0;
    double price_weekend_effect = -6.0;
    double price_yearly_amplitude = 4.0;
    // AR coefficients on the same hour 1, 2 and 7 days earlier.
    double ar_lag1 = 0.6;
    double ar_lag2 = 0.1;
    double ar_lag7 = 0.15;
    double noise_sd = 3.0;

    double load_level = 100.0;
    double load_daily_amplitude = 15.0;
    double load_weekend_effect = -10.0;
    double load_yearly_amplitude = 10.0;
    double load_noise_sd = 3.0;
    double load_coefficient = 0.4;

    double wind_level = 20.0;
    double wind_persistence = 0.95;  // AR(1) across consecutive hours
    double wind_sd = 2.0;
    double wind_coefficient = -0.5;

    // Structural break: from break_day on, the level shifts by break_shift and
    // the load coefficient by break_load_shift.
    int break_day = 500;
    double break_shift = 10.0;
    double break_load_shift = 0.2;

    void validate() const {
        if (n_days <= 0) throw ConfigError("synthetic n_days must be positive");
        if (noise_sd < 0 || load_noise_sd < 0 || wind_sd < 0) throw ConfigError("noise scales must be nonnegative");
        if (std::abs(wind_persistence) >= 1.0) throw ConfigError("wind_persistence must lie in (-1, 1)");
    }
};

namespace detail {

inline double daily_shape(int hour) {
    // Peaks mid-day, trough at night; zero mean over the day.
    return std::sin(2.0 * std::numbers::pi * (hour - 6) / 24.0);
}

inline double yearly_shape(int day) { return std::cos(2.0 * std::numbers::pi * day / 365.25); }

}  // namespace detail

inline HourlyFrame generate_synthetic(const SyntheticConfig& cfg) {
    cfg.validate();
    NormalStream rng(cfg.seed);

    HourlyFrame frame;
    frame.market = Market::Synth;
    frame.start_date = cfg.start_date;
    frame.price.resize(cfg.n_days, kHoursPerDay);
    DayHourMatrix load(cfg.n_days, kHoursPerDay);
    DayHourMatrix wind(cfg.n_days, kHoursPerDay);
    DayHourMatrix ar_state = DayHourMatrix::Zero(cfg.n_days, kHoursPerDay);

    double wind_dev = 0.0;
    for (int d = 0; d < cfg.n_days; ++d) {
        const int wd = weekday_index(cfg.start_date + std::chrono::days{d});
        const double weekend = wd >= 5 ? 1.0 : 0.0;
        const bool after_break = d >= cfg.break_day;
        const double level = cfg.price_level + (after_break ? cfg.break_shift : 0.0) +
                             cfg.price_yearly_amplitude * detail::yearly_shape(d) + cfg.price_weekend_effect * weekend;
        const double load_coef = cfg.load_coefficient + (after_break ? cfg.break_load_shift : 0.0);
        for (int h = 0; h < kHoursPerDay; ++h) {
            const double load_noise = rng.normal();
            const double wind_innov = rng.normal();
            const double price_innov = rng.normal();

            const double load_dev = cfg.load_daily_amplitude * detail::daily_shape(h) +
                                    cfg.load_weekend_effect * weekend +
                                    cfg.load_yearly_amplitude * detail::yearly_shape(d) + cfg.load_noise_sd * load_noise;
            load(d, h) = cfg.load_level + load_dev;

            wind_dev = cfg.wind_persistence * wind_dev + cfg.wind_sd * wind_innov;
            wind(d, h) = cfg.wind_level + wind_dev;

            double x = cfg.noise_sd * price_innov;
            if (d >= 1) x += cfg.ar_lag1 * ar_state(d - 1, h);
            if (d >= 2) x += cfg.ar_lag2 * ar_state(d - 2, h);
            if (d >= 7) x += cfg.ar_lag7 * ar_state(d - 7, h);
            ar_state(d, h) = x;

            frame.price(d, h) = level + cfg.price_daily_amplitude * detail::daily_shape(h) + load_coef * load_dev +
                                cfg.wind_coefficient * wind_dev + x;
        }
    }
    frame.exog.emplace(Series::Load, std::move(load));
    frame.exog.emplace(Series::Wind, std::move(wind));
    frame.validate();
    return frame;
}

}  // namespace poolcast
