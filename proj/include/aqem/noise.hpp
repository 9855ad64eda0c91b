#pragma once

#include <string>
#include <string_view>

#include "aqem/common.hpp"

namespace aqem {

enum class NoiseModel { none, normal, random_telegraph, skew_normal, log_normal };

std::string_view to_string(NoiseModel model);
NoiseModel noise_model_from_string(std::string_view name);

// Switching probability used for every random-telegraph run.
inline constexpr double kTelegraphSwitchProbability = 0.5;

// Skewness used for the asymmetric models in the robustness grid.
inline constexpr double kTestSkewness = 0.8509;

/// Test knobs: model, variance V and skewness gamma of the per-photon phase.
struct NoiseSpec {
    NoiseModel model = NoiseModel::none;
    double variance = 0.0;
    double skewness = 0.0;

    /// Throws std::invalid_argument when the invariants of the model are violated.
    void validate() const;
    /// Filesystem- and CSV-friendly tag, e.g. "normal_v1_g0".
    std::string tag() const;

    friend bool operator==(const NoiseSpec&, const NoiseSpec&) = default;
};

/// Native distribution parameters. Draws are offsets from the mode phi0.
struct NoiseParams {
    NoiseModel model = NoiseModel::none;
    // normal / skew-normal: offset = location + scale * Z
    double location = 0.0;
    double scale = 0.0;
    double alpha = 0.0;
    // random telegraph
    double switch_probability = 0.0;
    double jump = 0.0;
    // log-normal: offset = exp(log_mu + log_sigma * Z) - mode_shift
    double log_mu = 0.0;
    double log_sigma = 0.0;
    double mode_shift = 0.0;
};

NoiseParams params_from_spec(const NoiseSpec& spec);

/// Skewness of a skew-normal distribution with shape alpha.
double skew_normal_skewness(double alpha);
/// Shape alpha reproducing skewness gamma; throws when |gamma| is unreachable.
double skew_normal_alpha(double gamma);
/// Mode of the standard skew-normal density with shape alpha.
double skew_normal_standard_mode(double alpha);
/// Log-normal sigma' reproducing skewness gamma (> 0).
double log_normal_sigma(double gamma);

/// One unwrapped draw of phi - phi0.
double sample_offset(const NoiseParams& params, Rng& rng);

/// One per-photon phase draw with mode phi0, reduced mod 2pi.
PhaseAngle sample_phase(const NoiseParams& params, PhaseAngle phi0, Rng& rng);

struct Moments {
    double variance;
    double skewness;
};
/// Sample variance and skewness of unwrapped draws; n_samples >= 10^4.
Moments empirical_moments(const NoiseParams& params, long n_samples, Rng& rng);

/// Mode estimate of the unwrapped offset distribution (should be ~0): most frequent
/// value for the discrete telegraph model, a local polynomial fit to the log of a fine
/// histogram around the smoothed peak otherwise.
double empirical_mode(const NoiseParams& params, long n_samples, Rng& rng);

}  // namespace aqem
