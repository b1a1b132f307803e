#include "poolcast/poolcast.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace poolcast;

namespace {

const char* error_kind(const Error& e) {
    if (dynamic_cast<const ParseError*>(&e)) return "parse";
    if (dynamic_cast<const SchemaError*>(&e)) return "schema";
    if (dynamic_cast<const GapError*>(&e)) return "gap";
    if (dynamic_cast<const ConfigError*>(&e)) return "config";
    if (dynamic_cast<const DesignError*>(&e)) return "design";
    if (dynamic_cast<const FitError*>(&e)) return "fit";
    if (dynamic_cast<const ForecastError*>(&e)) return "forecast";
    if (dynamic_cast<const SolverError*>(&e)) return "solver";
    if (dynamic_cast<const AlignmentError*>(&e)) return "alignment";
    if (dynamic_cast<const MetricError*>(&e)) return "metric";
    return "error";
}

/// Frame day index of a calendar date.
int day_of(const HourlyFrame& f, const std::string& date) {
    return static_cast<int>((parse_date(date) - f.start_date).count());
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    for (auto part : split_csv(s)) {
        const auto v = parse_double(part);
        if (!v || *v != std::floor(*v)) throw ConfigError("bad integer '" + std::string(trim(part)) + "'");
        out.push_back(static_cast<int>(*v));
    }
    return out;
}

int parse_benchmark(const std::string& s, const ForecastPool& pool) {
    if (s.empty()) return pool.window_lengths.back();
    std::string_view v = s;
    if (v.starts_with("tau=")) v.remove_prefix(4);
    const auto t = parse_double(v);
    if (!t || *t != std::floor(*t)) throw ConfigError("benchmark must look like tau=728");
    (void)pool.column_of(static_cast<int>(*t));
    return static_cast<int>(*t);
}

void print_report(const EvalReport& rep) {
    std::printf("%-16s %12s %12s\n", "method", "mae", "pct_chng");
    for (std::size_t i = 0; i < rep.methods.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        std::printf("%-16s %12s %12s\n", rep.methods[i].c_str(), fixed(rep.mae(k), 4).c_str(),
                    fixed(rep.pct_chng(k), 3).c_str());
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"poolcast: forecast pools over calibration windows and their combinations"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();

    // synth
    auto* synth = app.add_subcommand("synth", "Write a seeded synthetic market to CSV");
    SyntheticConfig sc;
    std::string synth_start = "2015-01-01";
    std::string synth_out;
    synth->add_option("--days", sc.n_days, "Number of days");
    synth->add_option("--seed", sc.seed, "Random seed");
    synth->add_option("--start", synth_start, "First calendar day");
    synth->add_option("--break-day", sc.break_day, "Day index of the structural break");
    synth->add_option("--break-shift", sc.break_shift, "Price level shift at the break");
    synth->add_option("--out", synth_out, "Output CSV")->required();

    // pool
    auto* pool_cmd = app.add_subcommand("pool", "Build the forecast pool over a range of days");
    std::string pool_data, pool_market, pool_windows = "56:728", pool_from, pool_to, pool_out = "pool.csv";
    int pool_jobs = 1;
    pool_cmd->add_option("--data", pool_data, "Market CSV")->required();
    pool_cmd->add_option("--market", pool_market, "epex, np, omie, pjm or synth")->required();
    pool_cmd->add_option("--windows", pool_windows, "Window lengths: a:b, a:b:step or a list");
    pool_cmd->add_option("--from", pool_from, "First forecast day (default: first day with enough history)");
    pool_cmd->add_option("--to", pool_to, "Last forecast day (default: last day of the data)");
    pool_cmd->add_option("--jobs", pool_jobs, "Worker threads");
    pool_cmd->add_option("--out", pool_out, "Pool CSV");

    // combine
    auto* comb = app.add_subcommand("combine", "Combine pool forecasts for every day with enough history");
    std::string comb_pool, comb_method, comb_subset, comb_select = "bic", comb_conv = "paper", comb_out;
    double comb_lambda = 0.0;
    int comb_k = 0, comb_kmax = kMaxComponents, comb_window = kAveragingWindow, comb_jobs = 1;
    comb->add_option("--pool", comb_pool, "Pool CSV")->required();
    comb->add_option("--method", comb_method, "mean, aw, waw, lasso, pca, lpca or twostep")->required();
    comb->add_option("--subset", comb_subset, "Window subset for aw/waw (default 56,84,112,714,721,728)");
    comb->add_option("--select", comb_select, "Information criterion: aic, bic or hqc");
    auto* lambda_opt = comb->add_option("--lambda", comb_lambda, "Fixed lambda instead of --select");
    auto* k_opt = comb->add_option("--k", comb_k, "Fixed component count for pca instead of --select");
    comb->add_option("--kmax", comb_kmax, "Largest component count");
    comb->add_option("--lambda-convention", comb_conv, "paper (unscaled RSS) or scaled (1/(2n) RSS)");
    comb->add_option("--window-len", comb_window, "Averaging window in days");
    comb->add_option("--jobs", comb_jobs, "Worker threads");
    comb->add_option("--out", comb_out, "Output CSV (default forecasts/<method>.csv)");

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "Score forecast files against the pool's actual prices");
    std::string eval_pool, eval_dir, eval_bench, eval_out = "report";
    eval->add_option("--pool", eval_pool, "Pool CSV")->required();
    eval->add_option("--forecasts", eval_dir, "Directory of <method>.csv forecast files")->required();
    eval->add_option("--benchmark", eval_bench, "Benchmark window, e.g. tau=728 (default: the longest)");
    eval->add_option("--out", eval_out, "Report directory");

    // reproduce
    auto* rep = app.add_subcommand("reproduce", "Run pool, every combination and the evaluation in one go");
    RunConfig rc;
    std::string rc_config, rc_market = "epex", rc_methods, rc_selectors;
    rep->add_option("--config", rc_config, "INI config or a previous manifest.json");
    auto* o_synth = rep->add_flag("--synthetic", rc.synthetic, "Use generated data instead of --data");
    auto* o_days = rep->add_option("--days", rc.synth.n_days, "Synthetic days");
    auto* o_seed = rep->add_option("--seed", rc.synth.seed, "Synthetic seed");
    auto* o_data = rep->add_option("--data", rc.data_path, "Market CSV");
    auto* o_market = rep->add_option("--market", rc_market, "Market of --data");
    auto* o_windows = rep->add_option("--windows", rc.windows, "Window lengths");
    auto* o_avg = rep->add_option("--averaging-window", rc.averaging_window, "Averaging window in days");
    auto* o_eval = rep->add_option("--eval-days", rc.eval_days, "Evaluation days (0: all after warm-up)");
    auto* o_bench = rep->add_option("--benchmark", rc.benchmark, "Benchmark window (0: the longest)");
    auto* o_kmax = rep->add_option("--kmax", rc.kmax, "Largest component count");
    auto* o_methods = rep->add_option("--methods", rc_methods, "Method families or labels (default: all)");
    auto* o_sel = rep->add_option("--selectors", rc_selectors, "Criteria for IC-tuned methods (default aic,bic,hqc)");
    rep->add_option("--jobs", rc.jobs, "Worker threads");
    rep->add_option("--out", rc.out_dir, "Run directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth) {
            sc.start_date = parse_date(synth_start);
            write_csv(synth_out, generate_synthetic(sc));
        } else if (*pool_cmd) {
            const HourlyFrame frame = load_csv(pool_data, parse_market(pool_market));
            const auto windows = parse_windows(pool_windows);
            const int from = pool_from.empty() ? windows.back() : day_of(frame, pool_from);
            const int to = pool_to.empty() ? frame.n_days() - 1 : day_of(frame, pool_to);
            write_pool(pool_out, run_pool(frame, windows, from, to, pool_jobs));
        } else if (*comb) {
            const ForecastPool pool = read_pool(comb_pool);
            std::string label = comb_method;
            if (comb_method == "lasso" || comb_method == "pca" || comb_method == "lpca" || comb_method == "twostep") {
                if (lambda_opt->count() > 0 && k_opt->count() > 0) throw ConfigError("--lambda and --k are exclusive");
                if (lambda_opt->count() > 0) {
                    label += "_lambda" + std::to_string(comb_lambda);
                } else if (k_opt->count() > 0) {
                    label += "_k" + std::to_string(comb_k);
                } else {
                    label += "_" + comb_select;
                }
            }
            MethodSpec spec = parse_method(label);
            if (lambda_opt->count() > 0) spec.lambda = comb_lambda;
            CombineOptions opts;
            opts.window_len = comb_window;
            opts.kmax = comb_kmax;
            opts.convention = parse_lambda_convention(comb_conv);
            if (spec.kind == MethodKind::Aw || spec.kind == MethodKind::Waw) {
                opts.subset = resolve_subset(comb_subset.empty() ? std::vector<int>{} : parse_int_list(comb_subset),
                                             pool.window_lengths);
            }
            const int first = comb_window;
            const int last = pool.n_days() - 1;
            if (first > last) throw ConfigError("pool has no day with " + std::to_string(comb_window) + " days of history");
            const Eigen::MatrixXd fc = combine_days(pool, {spec}, first, last, opts, comb_jobs);
            const fs::path out = comb_out.empty() ? fs::path("forecasts") / (label + ".csv") : fs::path(comb_out);
            if (out.has_parent_path()) fs::create_directories(out.parent_path());
            write_forecast_csv(out, {pool.t0() + static_cast<long>(first) * kHoursPerDay, fc.col(0)});
        } else if (*eval) {
            const ForecastPool pool = read_pool(eval_pool);
            const int bench = parse_benchmark(eval_bench, pool);
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(eval_dir)) {
                if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
            }
            std::sort(files.begin(), files.end());
            if (files.empty()) throw ConfigError("no forecast files in '" + eval_dir + "'");
            std::vector<std::string> methods;
            std::vector<ForecastSeries> series;
            for (const auto& f : files) {
                series.push_back(read_forecast_csv(f));
                methods.push_back(f.stem().string());
                if (series.back().t0 != series.front().t0 || series.back().values.size() != series.front().values.size()) {
                    throw AlignmentError("forecast files cover different hours");
                }
            }
            const long r0 = series.front().t0 - pool.t0();
            const auto rows = series.front().values.size();
            if (r0 < 0 || r0 + rows > pool.values.rows()) throw AlignmentError("forecasts fall outside the pool");
            const std::string bench_label = "tau_" + std::to_string(bench);
            Eigen::MatrixXd all(rows, static_cast<Eigen::Index>(series.size()) + 1);
            for (std::size_t i = 0; i < series.size(); ++i) all.col(static_cast<Eigen::Index>(i)) = series[i].values;
            all.col(all.cols() - 1) = pool.values.col(pool.column_of(bench)).segment(r0, rows);
            methods.push_back(bench_label);
            const EvalReport r = build_report(methods, all, pool.actual.segment(r0, rows), bench_label, series.front().t0);
            write_report(eval_out, r);
            print_report(r);
        } else if (*rep) {
            RunConfig cfg;
            if (!rc_config.empty()) cfg = load_config(rc_config);
            // Explicit flags override the config file.
            if (o_synth->count() > 0) cfg.synthetic = rc.synthetic;
            if (o_days->count() > 0) cfg.synth.n_days = rc.synth.n_days;
            if (o_seed->count() > 0) cfg.synth.seed = rc.synth.seed;
            if (o_data->count() > 0) cfg.data_path = rc.data_path;
            if (o_market->count() > 0) cfg.market = parse_market(rc_market);
            if (o_windows->count() > 0) cfg.windows = rc.windows;
            if (o_avg->count() > 0) cfg.averaging_window = rc.averaging_window;
            if (o_eval->count() > 0) cfg.eval_days = rc.eval_days;
            if (o_bench->count() > 0) cfg.benchmark = rc.benchmark;
            if (o_kmax->count() > 0) cfg.kmax = rc.kmax;
            if (o_methods->count() > 0) cfg.methods = detail::split_list(rc_methods);
            if (o_sel->count() > 0) cfg.selectors = detail::split_list(rc_selectors);
            cfg.jobs = rc.jobs;
            cfg.out_dir = rc.out_dir;
            const ExperimentResult res = run_experiment(cfg);
            std::printf("run directory: %s (%d evaluation days)\n", res.out_dir.string().c_str(), res.eval_days);
            print_report(res.report);
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "poolcast: %s error: %s\n", error_kind(e), e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "poolcast: error: %s\n", e.what());
        return 2;
    }
    return 0;
}
