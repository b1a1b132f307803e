#include "support.hpp"

#include <catch_amalgamated.hpp>

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace poolcast;
using Catch::Matchers::ContainsSubstring;

namespace {

RunConfig small_run(const std::string& out, int jobs = 1) {
    RunConfig c;
    c.synthetic = true;
    c.synth.n_days = 60;
    c.synth.seed = 11;
    c.windows = "30:40";
    c.averaging_window = 10;
    c.eval_days = 6;
    c.kmax = 3;
    c.subset = {30, 31, 32, 38, 39, 40};
    c.out_dir = out;
    c.jobs = jobs;
    return c;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args, const std::filesystem::path& log) {
    const char* cli = std::getenv("POOLCAST_CLI");
    REQUIRE(cli != nullptr);
    const int rc = std::system(("\"" + std::string(cli) + "\" " + args + " >\"" + log.string() + "\" 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("method labels expand families over selectors", "[config]") {
    RunConfig c;
    c.methods = {"mean", "lasso", "pca_k3"};
    c.selectors = {"aic", "bic"};
    CHECK(c.method_labels() == std::vector<std::string>{"mean", "lasso_aic", "lasso_bic", "pca_k3"});
    c.methods = {"ridge"};
    CHECK_THROWS_WITH(c.method_labels(), ContainsSubstring("ridge") && ContainsSubstring("lpca"));
    CHECK_THROWS_AS(parse_method("pca_lambda1"), ConfigError);
    CHECK_THROWS_AS(parse_method("lasso_k3"), ConfigError);
    CHECK(parse_method("lpca_lambda0.5").lambda == 0.5);
    CHECK(parse_method("pca_k4").k == 4);
}

TEST_CASE("ini config", "[config]") {
    std::istringstream ini(
        "[synthetic]\nenabled = true\ndays = 900\nseed = 3\n"
        "[run]\nwindows = 56:364\naveraging_window = 91\nmethods = mean, lpca\nselectors = bic\nsubset = 56,84,112,350,357,364\n");
    const RunConfig c = read_ini_config(ini);
    CHECK(c.synthetic);
    CHECK(c.synth.n_days == 900);
    CHECK(c.synth.seed == 3);
    CHECK(c.windows == "56:364");
    CHECK(c.averaging_window == 91);
    CHECK(c.method_labels() == std::vector<std::string>{"mean", "lpca_bic"});
    CHECK(c.subset == std::vector<int>{56, 84, 112, 350, 357, 364});
    CHECK_NOTHROW(c.validate());

    std::istringstream typo("[run]\nwindow = 56:364\n");
    CHECK_THROWS_WITH(read_ini_config(typo), ContainsSubstring("run.window"));
    std::istringstream section("[model]\nx = 1\n");
    CHECK_THROWS_AS(read_ini_config(section), ConfigError);
    std::istringstream bad_int("[run]\nkmax = three\n");
    CHECK_THROWS_AS(read_ini_config(bad_int), ConfigError);
}

TEST_CASE("config validation", "[config]") {
    RunConfig c;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c.synthetic = true;
    CHECK_NOTHROW(c.validate());
    c.jobs = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c.jobs = 1;
    c.methods = {"mean", "mean"};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c.methods = {"mean"};
    c.windows = "60:50";
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("config hash tracks numeric settings only", "[config]") {
    RunConfig a = small_run("x");
    RunConfig b = small_run("y", 4);
    CHECK(a.hash() == b.hash());
    b.kmax = 4;
    CHECK(a.hash() != b.hash());
}

TEST_CASE("subset resolution", "[config]") {
    std::vector<int> full;
    for (int t = 56; t <= 728; ++t) full.push_back(t);
    CHECK(resolve_subset({}, full).taus == std::vector<int>{56, 84, 112, 714, 721, 728});
    std::vector<int> short_set;
    for (int t = 56; t <= 364; ++t) short_set.push_back(t);
    CHECK(resolve_subset({}, short_set).taus == std::vector<int>{56, 84, 112, 350, 357, 364});
    CHECK(resolve_subset({}, {30, 31, 32, 33, 34, 35, 36}).taus == std::vector<int>{30, 31, 32, 34, 35, 36});
    CHECK(resolve_subset({60, 70}, short_set).taus == std::vector<int>{60, 70});
    CHECK_THROWS_AS(resolve_subset({50}, short_set), ConfigError);
}

TEST_CASE("forecast csv round trip", "[config]") {
    std::mt19937_64 rng(1);
    const ForecastSeries f{4368, testing::random_vector(rng, 48, 30.0)};
    const auto dir = testing::scratch_dir("fcsv");
    write_forecast_csv(dir / "f.csv", f);
    const auto g = read_forecast_csv(dir / "f.csv");
    CHECK(g.t0 == f.t0);
    CHECK((g.values - f.values).cwiseAbs().maxCoeff() <= 0.5 * std::pow(10.0, -kFixedDecimals) * (1.0 + 1e-9));
    write_forecast_csv(dir / "g.csv", g);
    CHECK(slurp(dir / "f.csv") == slurp(dir / "g.csv"));
}

TEST_CASE("combine_days agrees with the per-method functions", "[combine]") {
    std::mt19937_64 rng(2);
    const int days = 24;
    const Eigen::Index rows = days * kHoursPerDay;
    const Eigen::VectorXd actual = testing::random_vector(rng, rows, 5.0);
    Eigen::MatrixXd values(rows, 10);
    for (int j = 0; j < 10; ++j) values.col(j) = actual + testing::random_vector(rng, rows, 1.0 + 0.2 * j);
    const ForecastPool pool = testing::make_pool(values, actual);

    CombineOptions opts;
    opts.window_len = 14;
    opts.kmax = 5;
    opts.subset = WindowSubset{{56, 57, 58, 63, 64, 65}};
    const std::vector<std::string> labels{"mean", "aw", "waw", "lasso_bic", "pca_aic", "pca_k2", "lpca_hqc", "twostep_bic"};
    std::vector<MethodSpec> specs;
    for (const auto& l : labels) specs.push_back(parse_method(l));
    const Eigen::MatrixXd got = combine_days(pool, specs, 14, days - 1, opts, 3);
    REQUIRE(got.rows() == (days - 14) * kHoursPerDay);

    for (int day = 14; day < days; ++day) {
        const std::vector<DayForecast> direct{
            simple_average(pool, day),
            aw(pool, opts.subset, day),
            waw(pool, opts.subset, day, 14),
            lasso_average(pool, day, LambdaSelector::by(Criterion::Bic), 14),
            pca_average(pool, day, KSelector::by(Criterion::Aic, 5), 14),
            pca_average(pool, day, KSelector::fixed_k(2), 14),
            lpca_average(pool, day, LambdaSelector::by(Criterion::Hqc), 5, 14),
            two_step_average(pool, day, LambdaSelector::by(Criterion::Bic), 5, 14),
        };
        for (std::size_t m = 0; m < labels.size(); ++m) {
            for (int h = 0; h < kHoursPerDay; ++h) {
                INFO(labels[m] << " day " << day << " hour " << h);
                const double a = got((day - 14) * kHoursPerDay + h, static_cast<Eigen::Index>(m));
                const double b = direct[m][static_cast<std::size_t>(h)];
                CHECK(std::abs(a - b) <= 1e-9 * (1.0 + std::abs(b)));
            }
        }
    }
    CHECK_THROWS_AS(combine_days(pool, specs, 13, days - 1, opts), Error);
    CHECK_THROWS_AS(combine_days(pool, {}, 14, days - 1, opts), ConfigError);
}

TEST_CASE("end-to-end run", "[experiment]") {
    const auto root = testing::scratch_dir("run");
    const RunConfig c1 = small_run((root / "one").string(), 1);
    const auto res = run_experiment(c1);
    CHECK(res.eval_days == 6);
    CHECK(res.pool.window_lengths.front() == 30);
    CHECK(res.pool.window_lengths.back() == 40);
    CHECK(res.methods.back() == "tau_40");
    CHECK(res.methods[res.methods.size() - 2] == "tau_30");
    CHECK(res.report.mae.allFinite());
    for (const char* f : {"pool.csv", "manifest.json", "report/mae.csv", "report/cpa_pvalues.csv", "forecasts/mean.csv",
                          "forecasts/lpca_bic.csv", "forecasts/twostep_hqc.csv"}) {
        CHECK(std::filesystem::exists(root / "one" / f));
    }
    CHECK_FALSE(std::filesystem::exists(root / "one.partial"));

    const auto manifest = nlohmann::json::parse(slurp(root / "one" / "manifest.json"));
    CHECK(manifest.at("config_hash") == c1.hash());
    CHECK(manifest.at("eval_days") == 6);
    CHECK(manifest.at("files").contains("pool.csv"));

    // Replaying the manifest gives the same configuration and the same bytes.
    RunConfig replay = load_config((root / "one" / "manifest.json").string());
    CHECK(replay.hash() == c1.hash());
    replay.out_dir = (root / "replay").string();
    replay.jobs = 3;
    run_experiment(replay);
    for (const char* f : {"pool.csv", "manifest.json", "report/mae.csv", "forecasts/lasso_aic.csv", "forecasts/pca_bic.csv"}) {
        INFO(f);
        CHECK(slurp(root / "one" / f) == slurp(root / "replay" / f));
    }
}

TEST_CASE("run preconditions", "[experiment]") {
    const auto root = testing::scratch_dir("pre");
    RunConfig c = small_run((root / "a").string());
    c.eval_days = 100;
    CHECK_THROWS_WITH(run_experiment(c), ContainsSubstring("eval_days"));
    c = small_run((root / "a").string());
    c.benchmark = 45;
    CHECK_THROWS_AS(run_experiment(c), ConfigError);
    c = small_run((root / "a").string());
    c.synth.n_days = 45;
    CHECK_THROWS_WITH(run_experiment(c), ContainsSubstring("no evaluation days"));

    std::filesystem::create_directories(root / "occupied");
    std::ofstream(root / "occupied" / "notes.txt") << "keep";
    c = small_run((root / "occupied").string());
    CHECK_THROWS_AS(run_experiment(c), ConfigError);
    CHECK(std::filesystem::exists(root / "occupied" / "notes.txt"));
}

TEST_CASE("command line", "[cli]") {
    const auto root = testing::scratch_dir("cli");
    CHECK(run_cli("--help", root / "help.txt") == 0);
    CHECK_THAT(slurp(root / "help.txt"), ContainsSubstring("reproduce"));

    CHECK(run_cli("reproduce --synthetic --methods ridge --out \"" + (root / "r").string() + "\"", root / "bad.txt") == 2);
    CHECK_THAT(slurp(root / "bad.txt"), ContainsSubstring("unknown method 'ridge'"));

    CHECK(run_cli("pool --data \"" + (root / "missing.csv").string() + "\" --market epex", root / "missing.txt") == 2);

    const std::string synth = (root / "m.csv").string();
    REQUIRE(run_cli("synth --days 60 --seed 5 --out \"" + synth + "\"", root / "s.txt") == 0);
    const std::string pool = (root / "pool.csv").string();
    REQUIRE(run_cli("pool --data \"" + synth + "\" --market synth --windows 30:34 --out \"" + pool + "\"", root / "p.txt") == 0);
    const auto p = read_pool(pool);
    CHECK(p.window_lengths == std::vector<int>{30, 31, 32, 33, 34});
    CHECK(p.n_days() == 60 - 34);
}
