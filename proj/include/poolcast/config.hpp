#pragma once

// Run configuration for the full experiment and its INI file form:
//
//   [data]       path, market
//   [synthetic]  enabled, days, seed, start, break_day, break_shift, ...
//   [run]        windows, averaging_window, eval_days, benchmark, kmax,
//                methods, selectors, subset, lambda_convention,
//                lambda_grid_size, lambda_min_ratio
//
// Unknown sections or keys are rejected. List values are comma separated.

#include "poolcast/combine.hpp"
#include "poolcast/error.hpp"
#include "poolcast/frame.hpp"
#include "poolcast/lasso.hpp"
#include "poolcast/pool.hpp"
#include "poolcast/synthetic.hpp"
#include "poolcast/text.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace poolcast {

inline const std::vector<std::string> kMethodFamilies{"mean", "aw", "waw", "lasso", "pca", "lpca", "twostep"};

struct RunConfig {
    std::string data_path;
    Market market = Market::Epex;
    bool synthetic = false;
    SyntheticConfig synth;

    std::string windows = "56:728";
    int averaging_window = kAveragingWindow;
    int eval_days = 0;   // 0: every day after the warm-up
    int benchmark = 0;   // 0: the longest window
    int kmax = kMaxComponents;
    std::vector<std::string> methods = kMethodFamilies;
    std::vector<std::string> selectors{"aic", "bic", "hqc"};
    std::vector<int> subset;  // empty: default subset rule
    LambdaConvention convention = LambdaConvention::Paper;
    int lambda_grid_size = 20;
    double lambda_min_ratio = 1e-4;

    // Execution settings; they never change numeric outputs.
    std::string out_dir = "poolcast-out";
    int jobs = 1;

    /// Method labels after expanding families over the selectors.
    std::vector<std::string> method_labels() const {
        std::vector<std::string> out;
        for (const auto& m : methods) {
            if (m == "mean" || m == "aw" || m == "waw" || m.find('_') != std::string::npos) {
                out.push_back(m);
            } else if (m == "lasso" || m == "pca" || m == "lpca" || m == "twostep") {
                for (const auto& s : selectors) out.push_back(m + "_" + s);
            } else {
                std::string valid;
                for (const auto& f : kMethodFamilies) valid += (valid.empty() ? "" : ", ") + f;
                throw ConfigError("unknown method '" + m + "' (valid: " + valid + ")");
            }
        }
        return out;
    }

    void validate() const {
        if (!synthetic && data_path.empty()) throw ConfigError("no data file given and synthetic data not enabled");
        if (synthetic) synth.validate();
        (void)parse_windows(windows);
        if (averaging_window < 1) throw ConfigError("averaging_window must be positive");
        if (eval_days < 0) throw ConfigError("eval_days must be nonnegative");
        if (kmax < 1) throw ConfigError("kmax must be positive");
        if (lambda_grid_size < 1) throw ConfigError("lambda_grid_size must be positive");
        if (!(lambda_min_ratio > 0.0 && lambda_min_ratio < 1.0)) throw ConfigError("lambda_min_ratio must lie in (0, 1)");
        if (jobs < 1) throw ConfigError("jobs must be at least 1");
        for (const auto& s : selectors) (void)parse_criterion(s);
        const auto labels = method_labels();
        if (labels.empty()) throw ConfigError("no methods selected");
        std::set<std::string> seen;
        for (const auto& l : labels) {
            (void)parse_method(l);
            if (!seen.insert(l).second) throw ConfigError("method '" + l + "' listed twice");
        }
    }

    /// Every setting that affects numeric outputs.
    nlohmann::json to_json() const {
        nlohmann::json j;
        j["data"] = {{"path", data_path}, {"market", std::string(to_string(synthetic ? Market::Synth : market))}};
        j["synthetic"] = {{"enabled", synthetic},
                          {"days", synth.n_days},
                          {"seed", synth.seed},
                          {"start", format_date(synth.start_date)},
                          {"break_day", synth.break_day},
                          {"break_shift", synth.break_shift},
                          {"break_load_shift", synth.break_load_shift},
                          {"noise_sd", synth.noise_sd}};
        j["run"] = {{"windows", windows},
                    {"averaging_window", averaging_window},
                    {"eval_days", eval_days},
                    {"benchmark", benchmark},
                    {"kmax", kmax},
                    {"methods", methods},
                    {"selectors", selectors},
                    {"subset", subset},
                    {"lambda_convention", convention == LambdaConvention::Paper ? "paper" : "scaled"},
                    {"lambda_grid_size", lambda_grid_size},
                    {"lambda_min_ratio", lambda_min_ratio}};
        return j;
    }

    std::string hash() const { return hex64(fnv1a(to_json().dump())); }
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    for (auto part : split_csv(s)) {
        part = trim(part);
        if (!part.empty()) out.emplace_back(part);
    }
    return out;
}

inline int to_int(const std::string& key, const std::string& v) {
    const auto d = parse_double(v);
    if (!d || *d != std::floor(*d) || std::abs(*d) > 2e9) throw ConfigError("'" + key + "' needs an integer, got '" + v + "'");
    return static_cast<int>(*d);
}

inline double to_double(const std::string& key, const std::string& v) {
    const auto d = parse_double(v);
    if (!d || !std::isfinite(*d)) throw ConfigError("'" + key + "' needs a number, got '" + v + "'");
    return *d;
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("'" + key + "' needs true or false, got '" + v + "'");
}

inline void apply_setting(RunConfig& c, const std::string& section, const std::string& key, const std::string& v) {
    const std::string name = section + "." + key;
    if (section == "data") {
        if (key == "path") return void(c.data_path = v);
        if (key == "market") return void(c.market = parse_market(v));
    } else if (section == "synthetic") {
        if (key == "enabled") return void(c.synthetic = to_bool(name, v));
        if (key == "days") return void(c.synth.n_days = to_int(name, v));
        if (key == "seed") return void(c.synth.seed = static_cast<std::uint64_t>(to_int(name, v)));
        if (key == "start") return void(c.synth.start_date = parse_date(v));
        if (key == "break_day") return void(c.synth.break_day = to_int(name, v));
        if (key == "break_shift") return void(c.synth.break_shift = to_double(name, v));
        if (key == "break_load_shift") return void(c.synth.break_load_shift = to_double(name, v));
        if (key == "noise_sd") return void(c.synth.noise_sd = to_double(name, v));
    } else if (section == "run") {
        if (key == "windows") return void(c.windows = v);
        if (key == "averaging_window") return void(c.averaging_window = to_int(name, v));
        if (key == "eval_days") return void(c.eval_days = to_int(name, v));
        if (key == "benchmark") return void(c.benchmark = to_int(name, v));
        if (key == "kmax") return void(c.kmax = to_int(name, v));
        if (key == "methods") return void(c.methods = split_list(v));
        if (key == "selectors") return void(c.selectors = split_list(v));
        if (key == "subset") {
            c.subset.clear();
            for (const auto& s : split_list(v)) c.subset.push_back(to_int(name, s));
            return;
        }
        if (key == "lambda_convention") return void(c.convention = parse_lambda_convention(v));
        if (key == "lambda_grid_size") return void(c.lambda_grid_size = to_int(name, v));
        if (key == "lambda_min_ratio") return void(c.lambda_min_ratio = to_double(name, v));
    } else {
        throw ConfigError("unknown config section [" + section + "]");
    }
    throw ConfigError("unknown config key '" + name + "'");
}

inline std::string json_scalar(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_array()) {
        std::string s;
        for (const auto& e : v) s += (s.empty() ? "" : ",") + json_scalar(e);
        return s;
    }
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
    return buf;
}

}  // namespace detail

/// Applies an INI file on top of `base`.
inline RunConfig read_ini_config(std::istream& in, RunConfig base = {}) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty()) throw ConfigError("config key '" + section + "' outside a section");
        for (const auto& [key, value] : body) detail::apply_setting(base, section, key, std::string(trim(value.data())));
    }
    return base;
}

/// Applies the "config" object of a run manifest on top of `base`.
inline RunConfig read_manifest_config(const nlohmann::json& manifest, RunConfig base = {}) {
    const auto& cfg = manifest.contains("config") ? manifest.at("config") : manifest;
    for (const auto& [section, body] : cfg.items()) {
        for (const auto& [key, value] : body.items()) detail::apply_setting(base, section, key, detail::json_scalar(value));
    }
    return base;
}

/// Reads an INI file, or the configuration recorded in a manifest (.json).
inline RunConfig load_config(const std::string& path, RunConfig base = {}) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    if (path.size() >= 5 && path.ends_with(".json")) {
        try {
            return read_manifest_config(nlohmann::json::parse(in), std::move(base));
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("config '" + path + "': " + e.what());
        }
    }
    return read_ini_config(in, std::move(base));
}

}  // namespace poolcast
