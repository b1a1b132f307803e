#pragma once

// Rolling-window forecast pool: for every forecast day and every calibration
// window length, refit the N-PIT maps and the 24 hourly models on the most
// recent `window` days and forecast the day.

#include "poolcast/arx.hpp"
#include "poolcast/error.hpp"
#include "poolcast/frame.hpp"
#include "poolcast/parallel.hpp"
#include "poolcast/text.hpp"
#include "poolcast/vst.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace poolcast {

inline constexpr const char* kModelId = "arx-npit-v1";

struct ForecastPool {
    Market market = Market::Synth;
    Date start_date{};              // date of frame day 0
    int first_day = 0;              // frame day index of the first pool day
    std::vector<int> window_lengths;
    Eigen::MatrixXd values;         // [n_hours x n_windows] forecasts
    Eigen::VectorXd actual;         // realized prices aligned to rows

    int n_days() const { return static_cast<int>(values.rows() / kHoursPerDay); }
    int n_windows() const { return static_cast<int>(window_lengths.size()); }
    long t0() const { return static_cast<long>(first_day) * kHoursPerDay; }

    int column_of(int tau) const {
        const auto it = std::find(window_lengths.begin(), window_lengths.end(), tau);
        if (it == window_lengths.end()) throw ConfigError("window " + std::to_string(tau) + " is not in the pool");
        return static_cast<int>(it - window_lengths.begin());
    }

    /// Rows of pool day k (0-based within the pool).
    auto day_rows(int k) const { return values.middleRows(static_cast<Eigen::Index>(k) * kHoursPerDay, kHoursPerDay); }
    auto day_actual(int k) const { return actual.segment(static_cast<Eigen::Index>(k) * kHoursPerDay, kHoursPerDay); }

    std::string model_hash() const {
        std::string key = std::string(kModelId) + "|" + std::string(to_string(market)) + "|";
        for (int w : window_lengths) key += std::to_string(w) + ",";
        return hex64(fnv1a(key));
    }
};

/// Parses `a:b`, `a:b:step` or a comma list into strictly increasing window lengths.
inline std::vector<int> parse_windows(const std::string& spec) {
    std::vector<int> out;
    auto to_int = [&](std::string_view s) {
        const auto v = parse_double(s);
        if (!v || *v != std::floor(*v) || *v < 1) throw ConfigError("bad window specification '" + spec + "'");
        return static_cast<int>(*v);
    };
    if (spec.find(':') != std::string::npos) {
        std::vector<std::string_view> parts;
        std::string_view rest(spec);
        for (std::size_t pos; (pos = rest.find(':')) != std::string_view::npos; rest.remove_prefix(pos + 1)) {
            parts.push_back(rest.substr(0, pos));
        }
        parts.push_back(rest);
        if (parts.size() < 2 || parts.size() > 3) throw ConfigError("bad window specification '" + spec + "'");
        const int lo = to_int(parts[0]);
        const int hi = to_int(parts[1]);
        const int step = parts.size() == 3 ? to_int(parts[2]) : 1;
        if (hi < lo) throw ConfigError("bad window range '" + spec + "'");
        for (int w = lo; w <= hi; w += step) out.push_back(w);
    } else {
        for (auto f : split_csv(spec)) out.push_back(to_int(f));
    }
    if (out.empty()) throw ConfigError("empty window set");
    for (std::size_t i = 1; i < out.size(); ++i) {
        if (out[i] <= out[i - 1]) throw ConfigError("window lengths must be strictly increasing");
    }
    return out;
}

inline std::vector<int> default_windows() { return parse_windows("56:728"); }

/// Builds the forecast pool for forecast days [first_forecast_day, last_forecast_day] (frame day indices).
inline ForecastPool run_pool(const HourlyFrame& frame, const std::vector<int>& windows, int first_forecast_day,
                             int last_forecast_day, int jobs = 1) {
    if (windows.empty()) throw ConfigError("empty window set");
    for (std::size_t i = 1; i < windows.size(); ++i) {
        if (windows[i] <= windows[i - 1]) throw ConfigError("window lengths must be strictly increasing");
    }
    if (windows.front() < 7 + design_width(frame.market, 12)) {
        throw ConfigError("window " + std::to_string(windows.front()) + " is too short for the model");
    }
    if (first_forecast_day < windows.back()) {
        throw DesignError("insufficient history: first forecast day " + std::to_string(first_forecast_day) +
                          " needs " + std::to_string(windows.back()) + " earlier days");
    }
    if (last_forecast_day < first_forecast_day || last_forecast_day >= frame.n_days()) {
        throw ConfigError("forecast day range outside the frame");
    }

    ForecastPool pool;
    pool.market = frame.market;
    pool.start_date = frame.start_date;
    pool.first_day = first_forecast_day;
    pool.window_lengths = windows;
    const int n_days = last_forecast_day - first_forecast_day + 1;
    pool.values.resize(static_cast<Eigen::Index>(n_days) * kHoursPerDay, static_cast<Eigen::Index>(windows.size()));
    pool.actual.resize(static_cast<Eigen::Index>(n_days) * kHoursPerDay);
    for (int k = 0; k < n_days; ++k) {
        for (int h = 0; h < kHoursPerDay; ++h) pool.actual(k * kHoursPerDay + h) = frame.price(first_forecast_day + k, h);
    }

    std::vector<std::vector<double>> scores(windows.size());
    parallel_for(windows.size(), jobs, [&](std::size_t i) {
        scores[i] = normal_scores(static_cast<std::size_t>(windows[i]) * kHoursPerDay);
    });

    std::vector<const DayHourMatrix*> series{&frame.price};
    for (Series s : exogenous_schema(frame.market)) series.push_back(&frame.exog.at(s));

    parallel_for(static_cast<std::size_t>(n_days), jobs, [&](std::size_t k) {
        const int day = first_forecast_day + static_cast<int>(k);
        // Sorted cells per series, grown one block of days at a time as the window lengthens.
        std::vector<std::vector<TaggedValue>> sorted(series.size());
        std::vector<TaggedValue> block, merged;
        int covered_from = day;
        for (std::size_t w = 0; w < windows.size(); ++w) {
            const int first = day - windows[w];
            for (std::size_t v = 0; v < series.size(); ++v) {
                block.clear();
                for (int d = first; d < covered_from; ++d) detail::tagged_day(*series[v], d, block);
                std::sort(block.begin(), block.end());
                merged.resize(sorted[v].size() + block.size());
                std::merge(sorted[v].begin(), sorted[v].end(), block.begin(), block.end(), merged.begin());
                sorted[v].swap(merged);
            }
            covered_from = first;
            CalibratedWindow cw = transform_window(frame, day, windows[w], sorted, &scores[w]);
            fit_window(cw);
            const auto fc = forecast_day(cw.fits, cw.panel, cw.maps.price, day);
            for (int h = 0; h < kHoursPerDay; ++h) {
                pool.values(static_cast<Eigen::Index>(k) * kHoursPerDay + h, static_cast<Eigen::Index>(w)) =
                    fc[static_cast<std::size_t>(h)];
            }
        }
    });
    return pool;
}

/// MAE of each window column over all pool hours.
inline Eigen::VectorXd mae_by_window(const ForecastPool& pool) {
    if (pool.actual.size() != pool.values.rows()) throw AlignmentError("pool actuals are not aligned");
    return (pool.values.colwise() - pool.actual).cwiseAbs().colwise().mean().transpose();
}

// Pool file: header `t,actual,tau_<w>...`, one row per hour, fixed 6-decimal
// values; t = 24 * (frame day index) + (hour - 1). A sidecar `<path>.meta.json`
// carries the market, frame start date and model key.

inline void write_pool_csv(std::ostream& out, const ForecastPool& pool) {
    out << "t,actual";
    for (int w : pool.window_lengths) out << ",tau_" << w;
    out << '\n';
    std::string line;
    for (Eigen::Index r = 0; r < pool.values.rows(); ++r) {
        line.clear();
        line += std::to_string(pool.t0() + r);
        line += ',';
        append_fixed(line, pool.actual(r));
        for (Eigen::Index c = 0; c < pool.values.cols(); ++c) {
            line += ',';
            append_fixed(line, pool.values(r, c));
        }
        line += '\n';
        out << line;
    }
}

inline nlohmann::json pool_meta(const ForecastPool& pool) {
    return {{"market", std::string(to_string(pool.market))},
            {"start_date", format_date(pool.start_date)},
            {"first_day", pool.first_day},
            {"n_days", pool.n_days()},
            {"model", kModelId},
            {"model_hash", pool.model_hash()},
            {"window_lengths", pool.window_lengths}};
}

inline void write_pool(const std::string& path, const ForecastPool& pool) {
    {
        std::ofstream out(path);
        if (!out) throw ParseError("cannot write '" + path + "'");
        write_pool_csv(out, pool);
    }
    std::ofstream meta(path + ".meta.json");
    if (!meta) throw ParseError("cannot write '" + path + ".meta.json'");
    meta << pool_meta(pool).dump(2) << '\n';
}

inline ForecastPool read_pool_csv(std::istream& in) {
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line)) throw ParseError("empty pool file", 1);
    const auto header = split_csv(line);
    if (header.size() < 3 || trim(header[0]) != "t" || trim(header[1]) != "actual") {
        throw SchemaError("pool header must be t,actual,tau_<w>,...");
    }
    ForecastPool pool;
    for (std::size_t c = 2; c < header.size(); ++c) {
        const auto name = trim(header[c]);
        const auto w = name.starts_with("tau_") ? parse_double(name.substr(4)) : std::nullopt;
        if (!w || *w < 1 || *w != std::floor(*w)) throw SchemaError("bad pool column '" + std::string(name) + "'");
        pool.window_lengths.push_back(static_cast<int>(*w));
    }
    for (std::size_t i = 1; i < pool.window_lengths.size(); ++i) {
        if (pool.window_lengths[i] <= pool.window_lengths[i - 1]) throw SchemaError("pool windows not increasing");
    }
    std::vector<double> cells;
    std::vector<double> actual;
    long t_first = 0;
    long rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const auto f = split_csv(line);
        if (f.size() != header.size()) throw ParseError("wrong field count", line_no);
        const auto t = parse_double(f[0]);
        if (!t) throw ParseError("bad hour index", line_no);
        if (rows == 0) t_first = static_cast<long>(*t);
        if (static_cast<long>(*t) != t_first + rows) throw ParseError("hour index not contiguous", line_no);
        for (std::size_t c = 1; c < f.size(); ++c) {
            const auto v = parse_double(f[c]);
            if (!v || !std::isfinite(*v)) throw ParseError("bad value '" + std::string(f[c]) + "'", line_no);
            if (c == 1) {
                actual.push_back(*v);
            } else {
                cells.push_back(*v);
            }
        }
        ++rows;
    }
    if (rows == 0 || rows % kHoursPerDay != 0 || t_first % kHoursPerDay != 0) {
        throw SchemaError("pool must cover whole days");
    }
    pool.first_day = static_cast<int>(t_first / kHoursPerDay);
    const auto n_w = static_cast<Eigen::Index>(pool.window_lengths.size());
    pool.values = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        cells.data(), rows, n_w);
    pool.actual = Eigen::Map<const Eigen::VectorXd>(actual.data(), rows);
    return pool;
}

inline ForecastPool read_pool(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    ForecastPool pool = read_pool_csv(in);
    std::ifstream meta_in(path + ".meta.json");
    if (meta_in) {
        const auto meta = nlohmann::json::parse(meta_in);
        pool.market = parse_market(meta.at("market").get<std::string>());
        pool.start_date = parse_date(meta.at("start_date").get<std::string>());
        if (meta.at("first_day").get<int>() != pool.first_day) throw SchemaError("pool metadata does not match the file");
    }
    return pool;
}

}  // namespace poolcast
