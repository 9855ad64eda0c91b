#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "aqem/noise.hpp"
#include "aqem/policies.hpp"

namespace aqem {

/// Noiseless-model Bayesian feedback; `product_input` switches the probe from the
/// sine state to the unentangled product state (standard-limit reference).
struct BayesController {
    bool product_input = false;
};

using Controller = std::variant<MarkovPolicy, BayesController>;

/// One adaptive estimation with N photons and true mode phi0; returns the estimate.
/// Each photon sees a fresh noisy phase; the detector rotation angle is (phi_m - Phi_m)/2.
PhaseAngle run_single_shot(const Controller& controller, int n, const NoiseParams& params,
                           PhaseAngle phi0, Rng& rng);

/// Outcome string (bit m-1 = port of photon m) of the last shot, for distribution tests.
struct ShotTrace {
    PhaseAngle estimate;
    std::vector<int> outcomes;
    std::vector<double> feedback;
};
ShotTrace trace_single_shot(const Controller& controller, int n, const NoiseParams& params,
                            PhaseAngle phi0, Rng& rng);

/// Any estimator: given the true phase and a private stream, return the estimate.
using ShotFunction = std::function<PhaseAngle(PhaseAngle phi0, Rng& rng)>;

struct RunRecord {
    int n = 0;
    std::string policy;
    NoiseSpec noise;
    long trials = 0;
    double sharpness = 0.0;
    double holevo = 0.0;
    double holevo_stderr = 0.0;
    std::uint64_t seed = 0;
    long aborts = 0;
    double wall_ms = 0.0;
    bool valid = true;
    bool trials_overridden = false;
    std::vector<double> errors;  // phi0 - estimate per trial, in trial order
};

struct RunOptions {
    int workers = 1;
    bool record_timing = true;
    bool keep_errors = false;
    // Re-draw budget per trial before the campaign gives up.
    int max_attempts = 1000;
};

/// S = |mean of exp(i * error)| over the given per-trial errors.
double sharpness_of(const std::vector<double>& errors);
/// V_H = S^-2 - 1.
double holevo_variance(double sharpness);

/// K trials of `shot`; trial k uses the stream (point_seed, k, attempt) and draws phi0
/// uniformly first. Results do not depend on the worker count.
RunRecord estimate_sharpness_variance(const ShotFunction& shot, long trials, std::uint64_t point_seed,
                                      const RunOptions& options = {});

/// Campaign for one (controller, N, noise) point.
RunRecord estimate_sharpness_variance(const Controller& controller, int n, const NoiseSpec& noise,
                                      long trials, std::uint64_t master_seed, const RunOptions& options = {});

/// Trial count rule: 10 N^2 unless fixed, optionally clamped to [floor, cap].
struct TrialRule {
    long fixed = 0;
    long floor = 0;
    long cap = 0;
    long trials_for(int n) const;
    bool overridden() const { return fixed > 0 || floor > 0 || cap > 0; }
};

/// Controller family for a sweep: Bayesian (sine or product probe) or Markov policies by N.
struct ControllerFamily {
    enum class Kind { bayes, markov, product_reference };
    Kind kind = Kind::bayes;
    std::map<int, MarkovPolicy> policies;

    std::string id() const;
    Controller for_size(int n) const;
};

struct VarianceCurve {
    std::string policy;
    NoiseSpec noise;
    std::vector<int> n;
    std::vector<double> holevo;
};

/// Runs every N in `sizes` (strictly increasing, within [1, 100]); throws
/// std::invalid_argument listing absent N values when Markov policies are missing.
std::vector<RunRecord> sweep_curve(const ControllerFamily& family, const std::vector<int>& sizes,
                                   const NoiseSpec& noise, std::uint64_t master_seed, const TrialRule& rule,
                                   const RunOptions& options = {},
                                   const std::function<void(const RunRecord&)>& progress = {});

VarianceCurve curve_from_records(const std::vector<RunRecord>& records);

/// Derived seed of one (policy, noise, N) grid point.
std::uint64_t point_seed(std::uint64_t master_seed, const std::string& policy, const NoiseSpec& noise, int n);

inline constexpr const char* kResultsHeader =
    "n,policy,model,variance,skewness,trials,sharpness,holevo,seed,aborts,wall_ms";

std::string format_record(const RunRecord& r);
/// Appends rows, writing the header when the file is new or empty.
void append_results(const std::filesystem::path& path, const std::vector<RunRecord>& records);
std::vector<RunRecord> read_results(const std::filesystem::path& path);

}  // namespace aqem
