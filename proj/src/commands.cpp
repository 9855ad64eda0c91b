#include "aqem/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <set>

#include "aqem/format.hpp"
#include "aqem/policies.hpp"
#include "aqem/trainer.hpp"

namespace aqem {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kDeskBayesMax = 50;
constexpr int kDeskTrainMax = 20;
constexpr long kDeskTrialFloor = 10000;
constexpr long kDeskTrialCap = 100000;

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, value] : obj.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
            throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

template <class T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + "." + key + ": wrong type");
    }
}

void read_path(const json& obj, const char* key, fs::path& out, const std::string& where) {
    std::string s = out.string();
    read(obj, key, s, where);
    out = s;
}

std::vector<NoiseSpec> read_noise(const json& obj, const std::string& where) {
    if (obj.is_string()) {
        if (obj.get<std::string>() == "grid") return default_noise_grid();
        throw ConfigError(where + ": expected \"grid\" or a list of noise specs");
    }
    if (!obj.is_array() || obj.empty()) throw ConfigError(where + ": expected a non-empty list");
    std::vector<NoiseSpec> out;
    for (const auto& item : obj) {
        try {
            out.push_back(noise_from_json(item));
            out.back().validate();
            params_from_spec(out.back());
        } catch (const std::exception& e) {
            throw ConfigError(where + ": " + e.what());
        }
    }
    return out;
}

json preset_json(Preset p) {
    switch (p) {
        case Preset::none: return nullptr;
        case Preset::desk: return "desk";
        case Preset::paper: return "paper";
    }
    return nullptr;
}

Preset preset_from(const std::string& name) {
    if (name == "desk") return Preset::desk;
    if (name == "paper") return Preset::paper;
    throw ConfigError("unknown preset '" + name + "' (expected desk or paper)");
}

json noise_list(const std::vector<NoiseSpec>& specs) {
    json out = json::array();
    for (const auto& s : specs) out.push_back(noise_to_json(s));
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingInputError("missing input " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::vector<int> size_range(int lo, int hi) {
    std::vector<int> out;
    for (int n = lo; n <= hi; ++n) out.push_back(n);
    return out;
}

std::string curve_key(const std::string& policy, const NoiseSpec& noise) { return policy + "__" + noise.tag(); }

}  // namespace

std::vector<NoiseSpec> default_noise_grid() {
    std::vector<NoiseSpec> grid{NoiseSpec{}};
    for (NoiseModel m : {NoiseModel::normal, NoiseModel::random_telegraph})
        for (double v : {1.0, 2.0, 3.0}) grid.push_back({m, v, 0.0});
    for (NoiseModel m : {NoiseModel::skew_normal, NoiseModel::log_normal})
        for (double v : {1.0, 3.0, 5.0, 7.0}) grid.push_back({m, v, kTestSkewness});
    return grid;
}

RunConfig parse_config(const json& doc, const Overrides& overrides) {
    check_keys(doc, "config", {"seed", "workers", "preset", "train", "sweep", "fit", "report"});
    RunConfig cfg;
    std::string preset_name;
    read(doc, "preset", preset_name, "config");
    if (!preset_name.empty()) cfg.preset = preset_from(preset_name);
    if (overrides.preset) cfg.preset = *overrides.preset;
    read(doc, "seed", cfg.seed, "config");
    if (overrides.seed) cfg.seed = *overrides.seed;
    read(doc, "workers", cfg.workers, "config");
    if (overrides.workers) cfg.workers = *overrides.workers;
    if (cfg.workers < 1) throw ConfigError("workers must be >= 1");

    if (cfg.preset == Preset::paper) {
        cfg.train.n_max = kMaxPhotons;
        cfg.sweep.n_max = kMaxPhotons;
    }

    const json empty = json::object();
    const json& train = doc.contains("train") ? doc["train"] : empty;
    check_keys(train, "train",
               {"n_min", "n_max", "noise", "population", "generations", "diff_weight", "crossover",
                "samples_per_eval", "validation_samples", "policy_dir", "log_dir"});
    auto& t = cfg.train;
    read(train, "n_min", t.n_min, "train");
    read(train, "n_max", t.n_max, "train");
    if (train.contains("noise")) t.noise = read_noise(train["noise"], "train.noise");
    read(train, "population", t.population, "train");
    read(train, "generations", t.generations, "train");
    read(train, "diff_weight", t.diff_weight, "train");
    read(train, "crossover", t.crossover, "train");
    read(train, "samples_per_eval", t.samples_per_eval, "train");
    read(train, "validation_samples", t.validation_samples, "train");
    read_path(train, "policy_dir", t.policy_dir, "train");
    read_path(train, "log_dir", t.log_dir, "train");
    if (cfg.preset == Preset::desk) t.n_max = std::min(t.n_max, kDeskTrainMax);
    if (t.n_min < 2 || t.n_max < t.n_min || t.n_max > kMaxPhotons)
        throw ConfigError("train: need 2 <= n_min <= n_max <= 100");

    const json& sweep = doc.contains("sweep") ? doc["sweep"] : empty;
    check_keys(sweep, "sweep",
               {"n_min", "n_max", "controllers", "noise", "policy_tag", "policy_dir", "results", "hl_reference",
                "timing", "trials", "trials_floor", "trials_cap"});
    auto& s = cfg.sweep;
    read(sweep, "n_min", s.n_min, "sweep");
    read(sweep, "n_max", s.n_max, "sweep");
    read(sweep, "controllers", s.controllers, "sweep");
    if (sweep.contains("noise")) s.noise = read_noise(sweep["noise"], "sweep.noise");
    read(sweep, "policy_tag", s.policy_tag, "sweep");
    if (!sweep.contains("policy_dir")) s.policy_dir = t.policy_dir;
    read_path(sweep, "policy_dir", s.policy_dir, "sweep");
    read_path(sweep, "results", s.results, "sweep");
    read_path(sweep, "hl_reference", s.hl_reference, "sweep");
    read(sweep, "timing", s.timing, "sweep");
    read(sweep, "trials", s.trials.fixed, "sweep");
    read(sweep, "trials_floor", s.trials.floor, "sweep");
    read(sweep, "trials_cap", s.trials.cap, "sweep");
    if (cfg.preset == Preset::desk) {
        s.n_max = std::min(s.n_max, kDeskBayesMax);
        if (s.trials.floor == 0) s.trials.floor = kDeskTrialFloor;
        if (s.trials.cap == 0) s.trials.cap = kDeskTrialCap;
    }
    if (overrides.trials) s.trials.fixed = *overrides.trials;
    if (s.trials.fixed < 0 || s.trials.floor < 0 || s.trials.cap < 0)
        throw ConfigError("sweep: trial counts must be non-negative");
    if (s.trials.fixed > 0 && s.trials.fixed < 100) throw ConfigError("sweep: at least 100 trials per point");
    if (s.n_min < 1 || s.n_max < s.n_min || s.n_max > kMaxPhotons)
        throw ConfigError("sweep: need 1 <= n_min <= n_max <= 100");
    if (s.controllers.empty()) throw ConfigError("sweep: no controllers");
    for (const auto& c : s.controllers)
        if (c != "bayes" && c != "rl" && c != "sql")
            throw ConfigError("sweep: unknown controller '" + c + "' (expected bayes, rl or sql)");

    const json& fit = doc.contains("fit") ? doc["fit"] : empty;
    check_keys(fit, "fit",
               {"results", "output_dir", "min_segment_points", "min_segment_fraction", "max_interp_fraction",
                "interp_drop", "guard"});
    auto& f = cfg.fit;
    if (!fit.contains("results")) f.results = s.results;
    read_path(fit, "results", f.results, "fit");
    read_path(fit, "output_dir", f.output_dir, "fit");
    read(fit, "min_segment_points", f.regress.min_segment_points, "fit");
    read(fit, "min_segment_fraction", f.regress.min_segment_fraction, "fit");
    read(fit, "max_interp_fraction", f.regress.max_interp_fraction, "fit");
    read(fit, "interp_drop", f.regress.interp_drop, "fit");
    read(fit, "guard", f.regress.guard, "fit");
    if (f.regress.min_segment_points < 2) throw ConfigError("fit: min_segment_points must be >= 2");
    if (!(f.regress.guard >= 0.0)) throw ConfigError("fit: guard must be >= 0");

    const json& report = doc.contains("report") ? doc["report"] : empty;
    check_keys(report, "report", {"fit_dir", "output_dir"});
    if (!report.contains("fit_dir")) cfg.report.fit_dir = f.output_dir;
    read_path(report, "fit_dir", cfg.report.fit_dir, "report");
    read_path(report, "output_dir", cfg.report.output_dir, "report");

    // Worker count never changes any output, so it is left out of the fingerprint.
    cfg.effective = {
        {"seed", cfg.seed},
        {"preset", preset_json(cfg.preset)},
        {"train",
         {{"n_min", t.n_min},
          {"n_max", t.n_max},
          {"noise", noise_list(t.noise)},
          {"population", t.population},
          {"generations", t.generations},
          {"diff_weight", t.diff_weight},
          {"crossover", t.crossover},
          {"samples_per_eval", t.samples_per_eval},
          {"validation_samples", t.validation_samples},
          {"policy_dir", t.policy_dir.generic_string()},
          {"log_dir", t.log_dir.generic_string()}}},
        {"sweep",
         {{"n_min", s.n_min},
          {"n_max", s.n_max},
          {"controllers", s.controllers},
          {"noise", noise_list(s.noise)},
          {"policy_tag", s.policy_tag},
          {"policy_dir", s.policy_dir.generic_string()},
          {"results", s.results.generic_string()},
          {"hl_reference", s.hl_reference.generic_string()},
          {"timing", s.timing},
          {"trials", s.trials.fixed},
          {"trials_floor", s.trials.floor},
          {"trials_cap", s.trials.cap}}},
        {"fit",
         {{"results", f.results.generic_string()},
          {"output_dir", f.output_dir.generic_string()},
          {"min_segment_points", f.regress.min_segment_points},
          {"min_segment_fraction", f.regress.min_segment_fraction},
          {"max_interp_fraction", f.regress.max_interp_fraction},
          {"interp_drop", f.regress.interp_drop},
          {"guard", f.regress.guard}}},
        {"report", {{"fit_dir", cfg.report.fit_dir.generic_string()}, {"output_dir", cfg.report.output_dir.generic_string()}}}};
    cfg.hash = hex64(fnv1a(cfg.effective.dump()));
    return cfg;
}

RunConfig load_config(const fs::path& path, const Overrides& overrides) {
    if (!fs::exists(path)) throw MissingInputError("config file not found: " + path.string());
    return parse_config(read_json(path), overrides);
}

json provenance(const RunConfig& config) {
    return {{"config_hash", config.hash}, {"master_seed", config.seed}, {"config", config.effective}};
}

fs::path policy_path(const fs::path& dir, const std::string& tag, int n) {
    return dir / tag / ("n" + std::to_string(n) + ".json");
}

void cmd_train(const RunConfig& config, std::ostream& log) {
    const auto& t = config.train;
    for (const auto& noise : t.noise) {
        const std::string tag = noise.tag();
        std::optional<MarkovPolicy> warm;
        for (int n = t.n_min; n <= t.n_max; ++n) {
            TrainConfig tc;
            tc.n = n;
            tc.noise = noise;
            tc.population = t.population;
            tc.generations = t.generations;
            tc.diff_weight = t.diff_weight;
            tc.crossover = t.crossover;
            tc.samples_per_eval = t.samples_per_eval;
            tc.validation_samples = t.validation_samples;
            tc.seed = derive_seed(config.seed, fnv1a("train|" + tag), static_cast<std::uint64_t>(n));
            tc.workers = config.workers;
            try {
                tc.validate();
            } catch (const std::invalid_argument& e) {
                throw ConfigError(std::string("train: ") + e.what());
            }
            TrainResult result = train_policy(tc, warm);
            result.policy.metadata["config_hash"] = config.hash;
            result.policy.metadata["master_seed"] = config.seed;
            const auto path = policy_path(t.policy_dir, tag, n);
            if (path.has_parent_path()) fs::create_directories(path.parent_path());
            save_policy(result.policy, path);
            write_training_log(t.log_dir / tag / ("n" + std::to_string(n) + ".csv"), result.log);
            log << "train " << tag << " N=" << n << " validation S=" << format_double(result.policy.objective)
                << " -> " << path.generic_string() << '\n';
            warm = std::move(result.policy);
        }
    }
}

void cmd_sweep(const RunConfig& config, std::ostream& log) {
    const auto& s = config.sweep;
    RunOptions options;
    options.workers = config.workers;
    options.record_timing = s.timing;

    auto progress = [&](const RunRecord& r) {
        log << "sweep " << r.policy << ' ' << r.noise.tag() << " N=" << r.n << " K=" << r.trials
            << " V_H=" << format_double(r.holevo) << (r.valid ? "" : " (abort fraction above 0.1%)") << '\n';
    };

    // Load every policy up front so missing inputs are reported before any work starts.
    std::map<std::string, ControllerFamily> markov;
    if (std::count(s.controllers.begin(), s.controllers.end(), "rl")) {
        std::vector<std::string> missing;
        const int hi = config.preset == Preset::desk ? std::min(s.n_max, kDeskTrainMax) : s.n_max;
        for (const auto& noise : s.noise) {
            const std::string tag = s.policy_tag.empty() ? noise.tag() : s.policy_tag;
            if (markov.count(tag)) continue;
            ControllerFamily fam{ControllerFamily::Kind::markov, {}};
            for (int n = s.n_min; n <= hi; ++n) {
                const auto path = policy_path(s.policy_dir, tag, n);
                if (!fs::exists(path)) {
                    missing.push_back(path.generic_string());
                    continue;
                }
                try {
                    fam.policies.emplace(n, load_policy(path));
                } catch (const std::invalid_argument& e) {
                    throw ConfigError(path.generic_string() + ": " + e.what());
                }
            }
            markov.emplace(tag, std::move(fam));
        }
        if (!missing.empty()) {
            std::string msg = "missing policies:";
            for (const auto& m : missing) msg += "\n  " + m;
            throw MissingInputError(msg);
        }
    }

    std::vector<RunRecord> all;
    auto run = [&](const ControllerFamily& fam, const std::vector<int>& sizes, const NoiseSpec& noise) {
        auto recs = sweep_curve(fam, sizes, noise, config.seed, s.trials, options, progress);
        append_results(s.results, recs);
        all.insert(all.end(), recs.begin(), recs.end());
        return recs;
    };

    for (const auto& c : s.controllers) {
        if (c == "sql") {
            const auto recs = run(ControllerFamily{ControllerFamily::Kind::product_reference, {}},
                                  size_range(s.n_min, s.n_max), NoiseSpec{});
            if (recs.size() >= 2) {
                std::vector<int> n;
                std::vector<double> v;
                for (const auto& r : recs) {
                    n.push_back(r.n);
                    v.push_back(r.holevo);
                }
                const auto series = LogSeries::from_curve(n, v);
                const double intercept = fit_linear(series, 0, series.size() - 1).intercept;
                std::string text = "n,holevo\n";
                for (int k : n) text += std::to_string(k) + ',' + format_double(std::exp(intercept - 2.0 * std::log(k))) + '\n';
                write_text(s.hl_reference, text);
                log << "sweep hl reference -> " << s.hl_reference.generic_string() << '\n';
            }
            continue;
        }
        for (const auto& noise : s.noise) {
            if (c == "bayes") {
                run(ControllerFamily{ControllerFamily::Kind::bayes, {}}, size_range(s.n_min, s.n_max), noise);
            } else {
                const auto& fam = markov.at(s.policy_tag.empty() ? noise.tag() : s.policy_tag);
                std::vector<int> sizes;
                for (const auto& [n, p] : fam.policies) sizes.push_back(n);
                run(fam, sizes, noise);
            }
        }
    }

    // The results table keeps its fixed header, so provenance goes next to it.
    const fs::path side = s.results.string() + ".provenance.json";
    json runs = fs::exists(side) ? read_json(side) : json::array();
    if (!runs.is_array()) runs = json::array();
    runs.push_back(provenance(config));
    runs.back()["records"] = all.size();
    write_text(side, runs.dump(2) + "\n");
}

void cmd_fit(const RunConfig& config, std::ostream& log) {
    const auto& f = config.fit;
    if (!fs::exists(f.results)) throw MissingInputError("results file not found: " + f.results.generic_string());
    std::vector<RunRecord> records;
    try {
        records = read_results(f.results);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }

    // Group by curve in order of first appearance; a later row for the same N replaces an earlier one.
    std::vector<std::string> order;
    std::map<std::string, std::map<int, RunRecord>> curves;
    for (auto& r : records) {
        const auto key = curve_key(r.policy, r.noise);
        if (!curves.count(key)) order.push_back(key);
        curves[key][r.n] = r;
    }

    json summary = json::array();
    std::string table = "policy,model,variance,skewness,family,two_wp,adj_r2,points,config_hash,master_seed\n";
    for (const auto& key : order) {
        const auto& pts = curves[key];
        const RunRecord& first = pts.begin()->second;
        std::vector<int> n;
        std::vector<double> v;
        for (const auto& [size, r] : pts) {
            n.push_back(size);
            v.push_back(r.holevo);
        }
        if (n.size() < static_cast<std::size_t>(minimum_points(Family::L1))) {
            log << "fit " << key << ": " << n.size() << " points, skipped (insufficient points)\n";
            continue;
        }
        const auto series = LogSeries::from_curve(n, v);
        const FitReport report = fit_series(series, f.regress);
        json doc = report_to_json(report, series, n, f.regress);
        doc["policy"] = first.policy;
        doc["noise"] = noise_to_json(first.noise);
        json points = json::array();
        const auto& chosen = report.chosen();
        for (int i = 0; i < series.size(); ++i)
            points.push_back({{"n", n[i]}, {"holevo", v[i]}, {"fitted_log_holevo", chosen.fitted(series, i)}});
        doc["points"] = points;
        doc["provenance"] = provenance(config);
        const auto path = f.output_dir / (key + ".json");
        write_text(path, doc.dump(2) + "\n");

        const auto& adj = chosen.criteria.adj_r2;
        table += first.policy + ',' + std::string(to_string(first.noise.model)) + ',' +
                 format_double(first.noise.variance) + ',' + format_double(first.noise.skewness) + ',' +
                 std::string(to_string(chosen.family)) + ',' + format_double(report.selection.exponent) + ',' +
                 (adj ? format_double(*adj) : std::string()) + ',' + std::to_string(n.size()) + ',' + config.hash +
                 ',' + std::to_string(config.seed) + '\n';
        summary.push_back({{"policy", first.policy},
                           {"noise", noise_to_json(first.noise)},
                           {"family", std::string(to_string(chosen.family))},
                           {"two_wp", report.selection.exponent},
                           {"file", path.filename().generic_string()}});
        log << "fit " << key << ": " << to_string(chosen.family) << " 2wp=" << format_double(report.selection.exponent)
            << '\n';
    }
    if (summary.empty()) throw MissingInputError("no curve in " + f.results.generic_string() + " has enough points to fit");
    write_text(f.output_dir / "summary.csv", table);
    json doc = {{"curves", summary}, {"provenance", provenance(config)}};
    write_text(f.output_dir / "summary.json", doc.dump(2) + "\n");
}

std::optional<double> robustness_threshold(std::vector<std::pair<double, double>> points) {
    std::sort(points.begin(), points.end());
    std::optional<double> best;
    for (const auto& [variance, two_wp] : points) {
        if (!(two_wp > 1.0)) break;
        best = variance;
    }
    return best;
}

void cmd_report(const RunConfig& config, std::ostream& log) {
    const auto& r = config.report;
    const json summary = read_json(r.fit_dir / "summary.json");

    // policy -> model -> (V, 2wp)
    std::map<std::string, std::map<std::string, std::vector<std::pair<double, double>>>> by_policy;
    json curves = json::array();
    for (const auto& entry : summary.at("curves")) {
        const json doc = read_json(r.fit_dir / entry.at("file").get<std::string>());
        const std::string policy = doc.at("policy");
        const NoiseSpec noise = noise_from_json(doc.at("noise"));
        const std::string key = curve_key(policy, noise);

        std::string csv = "n,holevo,log_n,log_holevo,fitted_log_holevo\n";
        for (const auto& p : doc.at("points")) {
            const int n = p.at("n");
            const double v = p.at("holevo");
            csv += std::to_string(n) + ',' + format_double(v) + ',' + format_double(std::log(n)) + ',' +
                   format_double(std::log(v)) + ',' + format_double(p.at("fitted_log_holevo").get<double>()) + '\n';
        }
        write_text(r.output_dir / (key + "_points.csv"), csv);
        json segments;
        for (const auto& fit : doc.at("fits"))
            if (fit.at("chosen").get<bool>()) segments = fit.at("segments");
        curves.push_back({{"policy", policy},
                          {"noise", noise_to_json(noise)},
                          {"family", doc.at("chosen")},
                          {"two_wp", doc.at("two_wp")},
                          {"points_file", key + "_points.csv"},
                          {"segments", segments}});
        if (policy != "sql" && noise.model != NoiseModel::none)
            by_policy[policy][std::string(to_string(noise.model))].emplace_back(noise.variance,
                                                                                doc.at("two_wp").get<double>());
    }

    json verdict = json::object();
    for (const auto& [policy, models] : by_policy) {
        json per_model = json::object();
        std::optional<double> overall;
        bool all_pass = true;
        for (const auto& [model, pts] : models) {
            const auto th = robustness_threshold(pts);
            per_model[model] = th ? json(*th) : json();
            if (!th) all_pass = false;
            else if (!overall || *th < *overall) overall = th;
        }
        const json joint = all_pass && overall ? json(*overall) : json();
        verdict[policy] = {{"threshold_by_model", per_model}, {"joint_threshold", joint}};
        log << "report " << policy << ": joint threshold V=" << joint.dump() << '\n';
    }
    json doc = {{"curves", curves}, {"robustness", verdict}, {"provenance", provenance(config)}};
    write_text(r.output_dir / "report.json", doc.dump(2) + "\n");
}

}  // namespace aqem
