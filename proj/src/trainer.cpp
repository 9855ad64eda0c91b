#include "aqem/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "aqem/engine.hpp"
#include "aqem/format.hpp"
#include "aqem/parallel.hpp"

namespace aqem {

void TrainConfig::validate() const {
    if (n < 1 || n > kMaxPhotons) throw std::invalid_argument("train: N must lie in [1, 100]");
    if (population < 4) throw std::invalid_argument("train: population must be >= 4");
    if (generations < 0) throw std::invalid_argument("train: generations must be >= 0");
    if (!(diff_weight > 0.0 && diff_weight <= 2.0)) throw std::invalid_argument("train: diff_weight must be in (0, 2]");
    if (!(crossover > 0.0 && crossover <= 1.0)) throw std::invalid_argument("train: crossover must be in (0, 1]");
    if (samples_per_eval < 0 || validation_samples < 0)
        throw std::invalid_argument("train: sample counts must be positive");
    noise.validate();
}

namespace {

constexpr std::size_t kFinalists = 5;

double mean_sharpness(const std::vector<double>& deltas, const TrainConfig& cfg, int k, Rng& rng) {
    if (static_cast<int>(deltas.size()) != cfg.n)
        throw std::invalid_argument("evaluate_candidate: expected " + std::to_string(cfg.n) + " deltas");
    const MarkovPolicy policy(deltas);
    const Controller controller = policy;
    const NoiseParams params = params_from_spec(cfg.noise);
    double re = 0.0, im = 0.0;
    for (int i = 0; i < k; ++i) {
        const PhaseAngle phi0(kTwoPi * uniform01(rng));
        const PhaseAngle est = run_single_shot(controller, cfg.n, params, phi0, rng);
        re += std::cos(phi0.value() - est.value());
        im += std::sin(phi0.value() - est.value());
    }
    return std::min(1.0, std::hypot(re, im) / k);
}

}  // namespace

double evaluate_candidate(const std::vector<double>& deltas, const TrainConfig& cfg, Rng& rng) {
    return mean_sharpness(deltas, cfg, cfg.k_train(), rng);
}

std::vector<double> extend_deltas(const std::vector<double>& deltas, int n) {
    const int old = static_cast<int>(deltas.size());
    if (old != n - 1) throw std::invalid_argument("warm start must have N-1 entries");
    if (old == 1) return {deltas[0], deltas[0]};
    // Trained entries are kept; the extra one is the circular midpoint of the
    // two central neighbours.
    const int mid = old / 2;
    std::vector<double> out(deltas.begin(), deltas.end());
    const double a = deltas[mid - 1];
    out.insert(out.begin() + mid, PhaseAngle::reduce(a + 0.5 * circular_difference(deltas[mid], a)));
    return out;
}

namespace {

double validation_score(const std::vector<double>& deltas, const TrainConfig& cfg, std::uint64_t stream) {
    TrainConfig vcfg = cfg;
    vcfg.samples_per_eval = cfg.k_validation();
    Rng rng = make_stream(cfg.seed, static_cast<std::uint64_t>(cfg.n), stream);
    return evaluate_candidate(deltas, vcfg, rng);
}

}  // namespace

TrainResult train_policy(const TrainConfig& cfg, const std::optional<MarkovPolicy>& warm_start,
                         std::optional<double> target) {
    cfg.validate();
    const int n = cfg.n;
    const int pop = cfg.population;
    const auto un = static_cast<std::uint64_t>(n);

    std::optional<std::vector<double>> baseline;
    if (warm_start) baseline = extend_deltas(warm_start->deltas(), n);

    TrainResult result;
    auto finish = [&](std::vector<double> deltas, double objective, const std::string& origin, bool accepted,
                      double val_best, double val_base) {
        MarkovPolicy p(std::move(deltas));
        p.trained_on = cfg.noise;
        p.seed = cfg.seed;
        p.objective = objective;
        p.metadata = {{"population", cfg.population},
                      {"generations", cfg.generations},
                      {"diff_weight", cfg.diff_weight},
                      {"crossover", cfg.crossover},
                      {"samples_per_eval", cfg.k_train()},
                      {"validation_samples", cfg.k_validation()},
                      {"warm_start", warm_start.has_value()},
                      {"origin", origin},
                      {"accepted", accepted},
                      {"validation_sharpness", val_best},
                      {"baseline_validation_sharpness", val_base}};
        result.policy = std::move(p);
        return result;
    };

    if (cfg.generations == 0 && baseline) {
        const double v = validation_score(*baseline, cfg, 1);
        return finish(*baseline, v, "warm_start", true, v, v);
    }

    // Initial population: uniform, or perturbations of the warm start.
    Rng init = make_stream(cfg.seed, un, 0xffff'ffffULL);
    std::normal_distribution<double> jitter(0.0, 0.3);
    std::vector<std::vector<double>> members(static_cast<std::size_t>(pop), std::vector<double>(n));
    for (int i = 0; i < pop; ++i) {
        for (int d = 0; d < n; ++d) {
            if (baseline && i < pop / 2)
                members[i][d] = PhaseAngle::reduce((*baseline)[d] + (i == 0 ? 0.0 : jitter(init)));
            else
                members[i][d] = kTwoPi * uniform01(init);
        }
    }

    auto score_all = [&](const std::vector<std::vector<double>>& cands, int generation) {
        std::vector<double> scores(cands.size());
        parallel_for(cands.size(), cfg.workers, [&](std::size_t c) {
            Rng rng = make_stream(cfg.seed, un, static_cast<std::uint64_t>(generation) + 2, c);
            scores[c] = evaluate_candidate(cands[c], cfg, rng);
        });
        return scores;
    };

    std::vector<double> fitness = score_all(members, 0);
    auto log_generation = [&](int g) {
        const double best = *std::max_element(fitness.begin(), fitness.end());
        const double mean = std::accumulate(fitness.begin(), fitness.end(), 0.0) / pop;
        result.log.push_back({g, best, mean});
        if (target && result.generation_reached < 0 && best >= *target) result.generation_reached = g;
    };
    log_generation(0);

    for (int g = 1; g <= cfg.generations; ++g) {
        Rng mut = make_stream(cfg.seed, un, 0xfffe'0000ULL + static_cast<std::uint64_t>(g));
        std::vector<std::vector<double>> trials(static_cast<std::size_t>(pop), std::vector<double>(n));
        for (int i = 0; i < pop; ++i) {
            int r1, r2, r3;
            do r1 = static_cast<int>(mut() % pop); while (r1 == i);
            do r2 = static_cast<int>(mut() % pop); while (r2 == i || r2 == r1);
            do r3 = static_cast<int>(mut() % pop); while (r3 == i || r3 == r1 || r3 == r2);
            const int forced = static_cast<int>(mut() % n);
            for (int d = 0; d < n; ++d) {
                if (d == forced || uniform01(mut) < cfg.crossover) {
                    const double diff = circular_difference(members[r2][d], members[r3][d]);
                    trials[i][d] = PhaseAngle::reduce(members[r1][d] + cfg.diff_weight * diff);
                } else {
                    trials[i][d] = members[i][d];
                }
            }
        }
        // Trial and target are scored on the same shots (half the budget each) so
        // the comparison is not decided by sampling luck; the survivor keeps the
        // fresh score.
        const int half = std::max(1, cfg.k_train() / 2);
        parallel_for(static_cast<std::size_t>(pop), cfg.workers, [&](std::size_t i) {
            const Rng shots = make_stream(cfg.seed, un, static_cast<std::uint64_t>(g) + 2, i);
            Rng a = shots, b = shots;
            const double target_score = mean_sharpness(members[i], cfg, half, a);
            const double trial_score = mean_sharpness(trials[i], cfg, half, b);
            if (trial_score >= target_score) {
                members[i] = std::move(trials[i]);
                fitness[i] = trial_score;
            } else {
                fitness[i] = target_score;
            }
        });
        log_generation(g);
    }

    // Training scores are noisy; the leading few go through validation and the
    // best validated one is returned.
    std::vector<std::size_t> order(static_cast<std::size_t>(pop));
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto finalists = std::min<std::size_t>(kFinalists, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(finalists), order.end(),
                      [&](std::size_t a, std::size_t b) { return fitness[a] > fitness[b] || (fitness[a] == fitness[b] && a < b); });
    std::vector<double> val(finalists);
    parallel_for(finalists, cfg.workers, [&](std::size_t f) { val[f] = validation_score(members[order[f]], cfg, 1); });
    const auto pick = static_cast<std::size_t>(std::max_element(val.begin(), val.end()) - val.begin());
    const std::size_t best_idx = order[pick];
    const double val_best = val[pick];
    if (baseline) {
        const double val_base = validation_score(*baseline, cfg, 1);
        if (val_best < val_base) return finish(*baseline, val_base, "warm_start", false, val_best, val_base);
        return finish(members[best_idx], val_best, "search", true, val_best, val_base);
    }
    return finish(members[best_idx], val_best, "search", true, val_best, val_best);
}

void write_training_log(const std::filesystem::path& path, const std::vector<GenerationLog>& log) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "generation,best_sharpness,mean_sharpness\n";
    for (const auto& row : log)
        out << row.generation << ',' << format_double(row.best) << ',' << format_double(row.mean) << '\n';
}

}  // namespace aqem
