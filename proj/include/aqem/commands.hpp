#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aqem/engine.hpp"
#include "aqem/noise.hpp"
#include "aqem/regress.hpp"

namespace aqem {

/// Bad or inconsistent configuration (exit code 2).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A required input file or policy is absent (exit code 3).
class MissingInputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Preset { none, desk, paper };

/// Command-line values that take precedence over the config file.
struct Overrides {
    std::optional<Preset> preset;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::optional<long> trials;
};

/// Robustness grid: no noise, symmetric models at V in {1,2,3}, asymmetric models at
/// V in {1,3,5,7} with the fixed test skewness.
std::vector<NoiseSpec> default_noise_grid();

struct TrainSettings {
    int n_min = 4;
    int n_max = 20;
    std::vector<NoiseSpec> noise{NoiseSpec{}};
    int population = 40;
    int generations = 50;
    double diff_weight = 0.7;
    double crossover = 0.9;
    int samples_per_eval = 0;
    int validation_samples = 0;
    std::filesystem::path policy_dir = "policies";
    std::filesystem::path log_dir = "logs";
};

struct SweepSettings {
    int n_min = 4;
    int n_max = 50;
    // Any of "bayes", "rl", "sql".
    std::vector<std::string> controllers{"bayes"};
    std::vector<NoiseSpec> noise{NoiseSpec{}};
    // Noise tag of the trained policies to use; empty means the sweep noise itself.
    std::string policy_tag;
    std::filesystem::path policy_dir = "policies";
    std::filesystem::path results = "results.csv";
    std::filesystem::path hl_reference = "reference_hl.csv";
    bool reference = true;
    bool timing = false;
    TrialRule trials;
};

struct FitSettings {
    std::filesystem::path results = "results.csv";
    std::filesystem::path output_dir = "fits";
    RegressOptions regress;
};

struct ReportSettings {
    std::filesystem::path fit_dir = "fits";
    std::filesystem::path output_dir = "report";
};

struct RunConfig {
    Preset preset = Preset::none;
    std::uint64_t seed = 1;
    int workers = 1;
    TrainSettings train;
    SweepSettings sweep;
    FitSettings fit;
    ReportSettings report;
    // Effective configuration after presets and overrides; hashed for provenance.
    nlohmann::json effective;
    std::string hash;
};

/// Throws ConfigError on any schema or value problem.
RunConfig parse_config(const nlohmann::json& doc, const Overrides& overrides = {});
/// Throws MissingInputError when the file is absent, ConfigError when it is malformed.
RunConfig load_config(const std::filesystem::path& path, const Overrides& overrides = {});

nlohmann::json provenance(const RunConfig& config);

/// Policy location for one training noise tag and size.
std::filesystem::path policy_path(const std::filesystem::path& dir, const std::string& tag, int n);

void cmd_train(const RunConfig& config, std::ostream& log);
void cmd_sweep(const RunConfig& config, std::ostream& log);
void cmd_fit(const RunConfig& config, std::ostream& log);
void cmd_report(const RunConfig& config, std::ostream& log);

/// Largest tested V with 2wp > 1 such that every smaller tested V also passes.
/// Inputs are (V, 2wp) pairs; returns nullopt when the smallest V already fails.
std::optional<double> robustness_threshold(std::vector<std::pair<double, double>> points);

}  // namespace aqem
