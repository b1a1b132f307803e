#pragma once

// End-to-end run: data -> forecast pool -> combinations -> evaluation.
//
// Output layout under the run directory:
//   pool.csv, pool.csv.meta.json
//   forecasts/<method>.csv      t,forecast
//   report/                     see write_report
//   manifest.json               configuration, its hash, versions, file digests
//
// The run is staged in a sibling directory and moved into place only when it
// completes; on failure the staging directory is removed.

#include "poolcast/combine.hpp"
#include "poolcast/config.hpp"
#include "poolcast/csv_io.hpp"
#include "poolcast/error.hpp"
#include "poolcast/evaluation.hpp"
#include "poolcast/pool.hpp"
#include "poolcast/synthetic.hpp"
#include "poolcast/text.hpp"

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace poolcast {

inline constexpr const char* kVersion = "0.1.0";

/// Hourly forecasts with their hour indices (t of the first row, then contiguous).
struct ForecastSeries {
    long t0 = 0;
    Eigen::VectorXd values;
};

inline void write_forecast_csv(const std::filesystem::path& path, const ForecastSeries& f) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    std::string line;
    out << "t,forecast\n";
    for (Eigen::Index r = 0; r < f.values.size(); ++r) {
        line = std::to_string(f.t0 + r);
        line += ',';
        append_fixed(line, f.values(r));
        line += '\n';
        out << line;
    }
}

inline ForecastSeries read_forecast_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line) || trim(line) != "t,forecast") throw SchemaError(path.string() + ": header must be t,forecast");
    ForecastSeries f;
    std::vector<double> v;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto parts = split_csv(line);
        if (parts.size() != 2) throw ParseError(path.string() + ": wrong field count", line_no);
        const auto t = parse_double(parts[0]);
        const auto x = parse_double(parts[1]);
        if (!t || !x || !std::isfinite(*x)) throw ParseError(path.string() + ": bad value", line_no);
        if (v.empty()) f.t0 = static_cast<long>(*t);
        if (static_cast<long>(*t) != f.t0 + static_cast<long>(v.size())) {
            throw ParseError(path.string() + ": hour index not contiguous", line_no);
        }
        v.push_back(*x);
    }
    if (v.empty() || v.size() % kHoursPerDay != 0 || f.t0 % kHoursPerDay != 0) {
        throw SchemaError(path.string() + ": forecasts must cover whole days");
    }
    f.values = Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    return f;
}

/// The six-window subset: the configured one; else the default taus when all
/// are in the pool; else the same pattern anchored at the shortest and
/// longest windows (min, min+28, min+56, max-14, max-7, max); else the three
/// shortest and three longest windows.
inline WindowSubset resolve_subset(const std::vector<int>& configured, const std::vector<int>& windows) {
    const auto has = [&](int t) { return std::find(windows.begin(), windows.end(), t) != windows.end(); };
    const auto all_in = [&](const std::vector<int>& ts) { return std::all_of(ts.begin(), ts.end(), has); };
    if (!configured.empty()) {
        if (!all_in(configured)) throw ConfigError("subset window missing from the pool");
        return {configured};
    }
    WindowSubset def;
    if (all_in(def.taus)) return def;
    const int lo = windows.front();
    const int hi = windows.back();
    std::vector<int> anchored{lo, lo + 28, lo + 56, hi - 14, hi - 7, hi};
    if (std::is_sorted(anchored.begin(), anchored.end()) && std::adjacent_find(anchored.begin(), anchored.end()) == anchored.end() &&
        all_in(anchored)) {
        return {anchored};
    }
    std::vector<int> ends;
    for (std::size_t i = 0; i < windows.size(); ++i) {
        if (i < 3 || i + 3 >= windows.size()) ends.push_back(windows[i]);
    }
    return {ends};
}

inline std::string window_label(int tau) { return "tau_" + std::to_string(tau); }

struct ExperimentResult {
    std::filesystem::path out_dir;
    ForecastPool pool;
    std::vector<std::string> methods;  // report order
    EvalReport report;
    int eval_first_day = 0;            // pool-local index
    int eval_days = 0;
    WindowSubset subset;
};

namespace detail {

inline std::string file_digest(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return hex64(fnv1a(ss.str()));
}

struct StagingGuard {
    std::filesystem::path dir;
    bool committed = false;
    ~StagingGuard() {
        if (!committed) {
            std::error_code ec;
            std::filesystem::remove_all(dir, ec);
        }
    }
};

/// Only an earlier run directory (or an empty one) may be replaced.
inline void check_replaceable(const std::filesystem::path& out) {
    if (!std::filesystem::exists(out)) return;
    const bool empty = std::filesystem::is_directory(out) && std::filesystem::is_empty(out);
    if (!empty && !std::filesystem::exists(out / "manifest.json")) {
        throw ConfigError("output '" + out.string() + "' exists and is not a previous run directory");
    }
}

}  // namespace detail

inline HourlyFrame load_frame(const RunConfig& cfg) {
    return cfg.synthetic ? generate_synthetic(cfg.synth) : load_csv(cfg.data_path, cfg.market);
}

/// Runs the full pipeline and writes the artifacts into cfg.out_dir.
inline ExperimentResult run_experiment(const RunConfig& cfg) {
    cfg.validate();
    const HourlyFrame frame = load_frame(cfg);
    const std::vector<int> windows = parse_windows(cfg.windows);
    const int max_w = windows.back();
    const int available = frame.n_days() - max_w - cfg.averaging_window;
    if (available < 1) {
        throw ConfigError("data span of " + std::to_string(frame.n_days()) + " days leaves no evaluation days after " +
                          std::to_string(max_w) + " calibration and " + std::to_string(cfg.averaging_window) +
                          " averaging days");
    }
    if (cfg.eval_days > available) {
        throw ConfigError("eval_days " + std::to_string(cfg.eval_days) + " exceeds the " + std::to_string(available) +
                          " available days");
    }
    const int eval_days = cfg.eval_days > 0 ? cfg.eval_days : available;
    const int benchmark = cfg.benchmark > 0 ? cfg.benchmark : max_w;
    if (std::find(windows.begin(), windows.end(), benchmark) == windows.end()) {
        throw ConfigError("benchmark window " + std::to_string(benchmark) + " is not in the window set");
    }

    std::vector<MethodSpec> specs;
    for (const auto& l : cfg.method_labels()) specs.push_back(parse_method(l));

    std::filesystem::path out = std::filesystem::path(cfg.out_dir).lexically_normal();
    if (!out.has_filename()) out = out.parent_path();
    if (out.empty()) throw ConfigError("empty output directory");
    detail::check_replaceable(out);
    std::filesystem::path staging = out;
    staging += ".partial";
    std::filesystem::remove_all(staging);
    std::filesystem::create_directories(staging / "forecasts");
    detail::StagingGuard guard{staging};

    // Stage 1: the pool, written and read back so that combinations see the stored values.
    const int first_forecast_day = frame.n_days() - eval_days - cfg.averaging_window;
    {
        const ForecastPool built = run_pool(frame, windows, first_forecast_day, frame.n_days() - 1, cfg.jobs);
        write_pool((staging / "pool.csv").string(), built);
    }
    ExperimentResult res;
    res.pool = read_pool((staging / "pool.csv").string());
    res.eval_first_day = cfg.averaging_window;
    res.eval_days = eval_days;
    res.subset = resolve_subset(cfg.subset, windows);

    // Stage 2: combinations over the evaluation days.
    CombineOptions opts;
    opts.window_len = cfg.averaging_window;
    opts.kmax = cfg.kmax;
    opts.subset = res.subset;
    opts.convention = cfg.convention;
    opts.lasso.grid_size = cfg.lambda_grid_size;
    opts.lasso.min_ratio = cfg.lambda_min_ratio;
    const int last = res.pool.n_days() - 1;
    const Eigen::MatrixXd combined = combine_days(res.pool, specs, res.eval_first_day, last, opts, cfg.jobs);
    const long t_first = res.pool.t0() + static_cast<long>(res.eval_first_day) * kHoursPerDay;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        write_forecast_csv(staging / "forecasts" / (specs[i].label + ".csv"),
                           {t_first, combined.col(static_cast<Eigen::Index>(i))});
    }

    // Stage 3: evaluation of the combinations against the shortest and benchmark windows.
    const Eigen::Index r0 = static_cast<Eigen::Index>(res.eval_first_day) * kHoursPerDay;
    const Eigen::Index rows = static_cast<Eigen::Index>(eval_days) * kHoursPerDay;
    std::vector<int> report_windows{windows.front()};
    if (benchmark != windows.front()) report_windows.push_back(benchmark);
    Eigen::MatrixXd all(rows, combined.cols() + static_cast<Eigen::Index>(report_windows.size()));
    all.leftCols(combined.cols()) = combined;
    for (const auto& s : specs) res.methods.push_back(s.label);
    for (std::size_t k = 0; k < report_windows.size(); ++k) {
        all.col(combined.cols() + static_cast<Eigen::Index>(k)) =
            res.pool.values.col(res.pool.column_of(report_windows[k])).segment(r0, rows);
        res.methods.push_back(window_label(report_windows[k]));
    }
    res.report = build_report(res.methods, all, res.pool.actual.segment(r0, rows), window_label(benchmark), t_first);
    write_report(staging / "report", res.report);

    nlohmann::json manifest;
    manifest["version"] = kVersion;
    manifest["model"] = kModelId;
    manifest["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION);
    manifest["config"] = cfg.to_json();
    manifest["config_hash"] = cfg.hash();
    manifest["pool_key"] = res.pool.model_hash();
    manifest["frame_days"] = frame.n_days();
    manifest["eval_days"] = eval_days;
    manifest["first_eval_t"] = t_first;
    manifest["subset"] = res.subset.taus;
    manifest["methods"] = res.methods;
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(staging)) {
        if (e.is_regular_file()) files.push_back(std::filesystem::relative(e.path(), staging));
    }
    std::sort(files.begin(), files.end());
    nlohmann::json digests = nlohmann::json::object();
    for (const auto& f : files) digests[f.generic_string()] = detail::file_digest(staging / f);
    manifest["files"] = digests;
    {
        std::ofstream m(staging / "manifest.json");
        if (!m) throw ConfigError("cannot write manifest");
        m << manifest.dump(2) << '\n';
    }

    if (std::filesystem::exists(out)) {
        detail::check_replaceable(out);
        std::filesystem::remove_all(out);
    }
    std::filesystem::rename(staging, out);
    guard.committed = true;
    res.out_dir = out;
    return res;
}

}  // namespace poolcast
