#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "aqem/noise.hpp"
#include "aqem/policies.hpp"

namespace aqem {

struct TrainConfig {
    int n = 4;
    NoiseSpec noise;
    int population = 40;
    int generations = 50;
    double diff_weight = 0.7;
    double crossover = 0.9;
    int samples_per_eval = 0;     // 0 -> 10 N
    int validation_samples = 0;   // 0 -> max(1000, 100 N)
    std::uint64_t seed = 0;
    int workers = 1;

    int k_train() const { return samples_per_eval > 0 ? samples_per_eval : 10 * n; }
    int k_validation() const { return validation_samples > 0 ? validation_samples : std::max(1000, 100 * n); }
    /// Throws std::invalid_argument on an inconsistent configuration.
    void validate() const;
};

struct GenerationLog {
    int generation;
    double best;
    double mean;
};

struct TrainResult {
    MarkovPolicy policy;
    std::vector<GenerationLog> log;
    // First generation whose best objective reached `target` (if requested), else -1.
    int generation_reached = -1;
};

/// Average sharpness of K_train shots with uniformly random phi0, drawn from `rng`.
double evaluate_candidate(const std::vector<double>& deltas, const TrainConfig& cfg, Rng& rng);

/// Stretches an (N-1)-entry vector onto N entries by circular linear interpolation.
std::vector<double> extend_deltas(const std::vector<double>& deltas, int n);

/// Differential evolution (rand/1/bin) over the phase-adjustment vector, gated on
/// validation sharpness against the extended warm start when one is given.
TrainResult train_policy(const TrainConfig& cfg, const std::optional<MarkovPolicy>& warm_start = std::nullopt,
                         std::optional<double> target = std::nullopt);

void write_training_log(const std::filesystem::path& path, const std::vector<GenerationLog>& log);

}  // namespace aqem
