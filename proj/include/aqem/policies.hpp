#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aqem/common.hpp"
#include "aqem/noise.hpp"
#include "aqem/qsym.hpp"

namespace aqem {

/// Phase-adjustment vector of a Markovian feedback rule plus its training provenance.
class MarkovPolicy {
public:
    MarkovPolicy() = default;
    /// Deltas are reduced into [0, 2pi).
    explicit MarkovPolicy(std::vector<double> deltas);

    int size() const { return static_cast<int>(deltas_.size()); }
    const std::vector<double>& deltas() const { return deltas_; }

    /// Feedback after the m-th detection (1-based): current - (-1)^outcome * delta_m.
    /// Throws std::out_of_range when m is not in [1, N].
    PhaseAngle next_phase(PhaseAngle current, int m, int outcome) const;

    NoiseSpec trained_on;
    std::uint64_t seed = 0;
    double objective = 0.0;
    nlohmann::json metadata = nlohmann::json::object();

private:
    std::vector<double> deltas_;
};

PhaseAngle markov_next_phase(const MarkovPolicy& policy, PhaseAngle current, int m, int outcome);

nlohmann::json noise_to_json(const NoiseSpec& spec);
NoiseSpec noise_from_json(const nlohmann::json& j);

nlohmann::json policy_to_json(const MarkovPolicy& policy);
/// Throws std::invalid_argument on schema violations.
MarkovPolicy policy_from_json(const nlohmann::json& j);

void save_policy(const MarkovPolicy& policy, const std::filesystem::path& path);
MarkovPolicy load_policy(const std::filesystem::path& path);

/// Unnormalized conditional state of the undetected photons as a trigonometric
/// polynomial in the unknown phase.
///
/// After m detections the amplitude of |n, N-m-n> is
///   sum_{j=0}^{m} coeff(n, j) * exp(i (2j - m) phi / 2),
/// i.e. Fourier index k = 2j - m in half-frequency units, k in [-m, m].
class BayesState {
public:
    BayesState(int n_total, std::vector<Complex> amplitudes);

    int n_total() const { return n_total_; }
    int detected() const { return m_; }
    int remaining() const { return n_total_ - m_; }
    int band() const { return m_ + 1; }
    std::size_t entry_count() const { return coeff_.size(); }

    Complex coeff(int n, int j) const { return coeff_[static_cast<std::size_t>(n) * band() + j]; }
    const std::vector<Complex>& raw() const { return coeff_; }

    PhaseAngle current_phase;

private:
    friend BayesState bayes_update(const BayesState&, PhaseAngle, int);
    BayesState(int n_total, int m, std::vector<Complex> coeff);

    int n_total_ = 0;
    int m_ = 0;
    std::vector<Complex> coeff_;
};

/// Uniform prior over the phase with the N-photon sine state.
BayesState bayes_init(int n_total);
/// Same with an arbitrary symmetric input state (e.g. the product state).
BayesState bayes_init(const SymmetricState& input);

/// Folds in one detection with feedback `feedback` and outcome `outcome`, using the
/// noiseless likelihood. No renormalization. Throws ZeroProbabilityError if every
/// coefficient vanishes.
BayesState bayes_update(const BayesState& state, PhaseAngle feedback, int outcome);

/// Unnormalized posterior density at phi (2pi-periodic).
double posterior_density(const BayesState& state, double phi);
/// (1/2pi) * integral of the unnormalized density; equals the outcome probability.
double posterior_mass(const BayesState& state);
/// Coefficient of e^{i phi} in the unnormalized density.
Complex posterior_first_harmonic(const BayesState& state);

/// Expected sharpness objective sum_x |c1^(x)(Phi)| for a hypothetical feedback Phi.
double expected_sharpness_objective(const BayesState& state, double feedback);
/// Feedback maximizing the expected sharpness; 0 when the objective is flat.
PhaseAngle bayes_optimal_phase(const BayesState& state);
/// Posterior mean direction. Throws std::domain_error when the posterior is too flat.
PhaseAngle bayes_estimate(const BayesState& state);

}  // namespace aqem
