#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "aqem/engine.hpp"
#include "aqem/policies.hpp"
#include "oracles.hpp"

using namespace aqem;
using std::numbers::pi;

namespace {

std::vector<Complex> sine_amp(int n) {
    const auto s = sine_state(n);
    return {s.amplitudes().begin(), s.amplitudes().end()};
}

double circ_dist(double a, double b) { return std::abs(circular_difference(a, b)); }

}  // namespace

TEST(Markov, UpdateRuleExamples) {
    const MarkovPolicy p({pi / 2, 0.0});
    EXPECT_NEAR(markov_next_phase(p, PhaseAngle(0.0), 1, 0).value(), 3 * pi / 2, 1e-15);
    EXPECT_NEAR(markov_next_phase(p, PhaseAngle(0.0), 1, 1).value(), pi / 2, 1e-15);
    EXPECT_EQ(markov_next_phase(p, PhaseAngle(pi), 2, 0).value(), PhaseAngle(pi).value());
}

TEST(Markov, StepIndexChecked) {
    const MarkovPolicy p({0.1, 0.2});
    EXPECT_THROW(p.next_phase(PhaseAngle(0.0), 3, 0), std::out_of_range);
    EXPECT_THROW(p.next_phase(PhaseAngle(0.0), 0, 0), std::out_of_range);
    EXPECT_THROW(p.next_phase(PhaseAngle(0.0), 1, 2), std::invalid_argument);
}

TEST(Markov, DeltasReduced) {
    const MarkovPolicy p({-0.5, 7.0, 2 * pi});
    EXPECT_NEAR(p.deltas()[0], 2 * pi - 0.5, 1e-15);
    EXPECT_NEAR(p.deltas()[1], 7.0 - 2 * pi, 1e-15);
    EXPECT_EQ(p.deltas()[2], 0.0);
    EXPECT_THROW(MarkovPolicy(std::vector<double>{}), std::invalid_argument);
}

TEST(Markov, JsonRoundTrip) {
    MarkovPolicy p({0.25, 1.5, 3.125});
    p.trained_on = {NoiseModel::skew_normal, 3.0, kTestSkewness};
    p.seed = 42;
    p.objective = 0.875;
    p.metadata["origin"] = "test";
    const auto dir = std::filesystem::temp_directory_path() / "aqem_policy_test";
    std::filesystem::remove_all(dir);
    save_policy(p, dir / "p.json");
    const auto q = load_policy(dir / "p.json");
    EXPECT_EQ(q.deltas(), p.deltas());
    EXPECT_EQ(q.trained_on, p.trained_on);
    EXPECT_EQ(q.seed, 42u);
    EXPECT_EQ(q.objective, 0.875);
    EXPECT_EQ(q.metadata["origin"], "test");
    std::filesystem::remove_all(dir);
}

TEST(Markov, JsonSchemaErrors) {
    auto j = policy_to_json(MarkovPolicy({0.1, 0.2}));
    j["n"] = 3;
    EXPECT_THROW(policy_from_json(j), std::invalid_argument);
    j = policy_to_json(MarkovPolicy({0.1, 0.2}));
    j.erase("seed");
    EXPECT_THROW(policy_from_json(j), std::invalid_argument);
    j = policy_to_json(MarkovPolicy({0.1, 0.2}));
    j["trained_on"]["model"] = "gaussian";
    EXPECT_THROW(policy_from_json(j), std::invalid_argument);
}

TEST(Bayes, InitialPosteriorIsFlat) {
    const auto s = bayes_init(4);
    EXPECT_EQ(std::abs(posterior_first_harmonic(s)), 0.0);
    EXPECT_NEAR(posterior_mass(s), 1.0, 1e-12);
    EXPECT_NEAR(posterior_density(s, 0.3), posterior_density(s, 2.1), 1e-14);
}

TEST(Bayes, SinglePhotonShape) {
    const auto s = bayes_init(1);
    EXPECT_EQ(s.entry_count(), 2u);
    EXPECT_EQ(s.band(), 1);
    EXPECT_EQ(s.detected(), 0);
    EXPECT_THROW(bayes_init(0), std::domain_error);
    EXPECT_THROW(bayes_init(101), std::domain_error);
}

TEST(Bayes, BandGrowsAndSpaceBounded) {
    const int n = 30;
    auto s = bayes_init(n);
    std::mt19937_64 rng(5);
    for (int m = 0; m < n; ++m) {
        s = bayes_update(s, PhaseAngle(0.37 * m), static_cast<int>(rng() & 1));
        EXPECT_EQ(s.band(), m + 2);
        EXPECT_EQ(s.detected(), m + 1);
        EXPECT_LE(s.entry_count(), static_cast<std::size_t>((n + 1) * (2 * n + 1)));
    }
    EXPECT_THROW(bayes_update(s, PhaseAngle(0.0), 0), std::domain_error);
}

TEST(Bayes, TwoPhotonPosteriorMatchesGrid) {
    const auto amp = sine_amp(2);
    const auto s = bayes_update(bayes_init(2), PhaseAngle(0.0), 0);
    const int grid = 4096;
    double mean = 0.0;
    for (int i = 0; i < grid; ++i) mean += oracle::likelihood(amp, {0.0}, {0}, kTwoPi * i / grid);
    mean /= grid;
    const double mass = posterior_mass(s);
    double worst = 0.0;
    for (int i = 0; i < grid; ++i) {
        const double phi = kTwoPi * (i + 0.5) / grid;
        const double want = oracle::likelihood(amp, {0.0}, {0}, phi) / mean;
        worst = std::max(worst, std::abs(posterior_density(s, phi) / mass - want));
    }
    EXPECT_LT(worst, 1e-8);
}

TEST(Bayes, ChainMassMatchesDenseProbability) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> angle(0.0, kTwoPi);
    const int grid = 4096;
    for (int n = 1; n <= 6; ++n) {
        const auto amp = sine_amp(n);
        for (int rep = 0; rep < 5; ++rep) {
            std::vector<double> fb;
            std::vector<int> out;
            auto s = bayes_init(n);
            for (int m = 0; m < n; ++m) {
                fb.push_back(angle(rng));
                out.push_back(static_cast<int>(rng() & 1));
                s = bayes_update(s, PhaseAngle(fb.back()), out.back());
            }
            double marginal = 0.0;
            for (int i = 0; i < grid; ++i) marginal += oracle::likelihood(amp, fb, out, kTwoPi * i / grid);
            marginal /= grid;
            EXPECT_NEAR(posterior_mass(s), marginal, 1e-9) << "N=" << n;
            const double phi = angle(rng);
            EXPECT_NEAR(posterior_density(s, phi), oracle::likelihood(amp, fb, out, phi), 1e-9);
            EXPECT_GE(posterior_density(s, phi), 0.0);
        }
    }
}

TEST(Bayes, VanishingCoefficientsRaise) {
    EXPECT_THROW(bayes_update(bayes_init(SymmetricState(std::vector<Complex>{0.0, 0.0})), PhaseAngle(0.0), 0),
                 ZeroProbabilityError);
}

TEST(Bayes, FirstFeedbackTieBreak) {
    for (int n : {1, 4, 9}) EXPECT_EQ(bayes_optimal_phase(bayes_init(n)).value(), 0.0);
}

TEST(Bayes, OptimizerMatchesFineGrid) {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> angle(0.0, kTwoPi);
    const int grid = 1 << 14;
    for (int n = 2; n <= 6; ++n) {
        auto s = bayes_init(n);
        for (int m = 1; m < n; ++m) {
            s = bayes_update(s, PhaseAngle(angle(rng)), static_cast<int>(rng() & 1));
            const double got = bayes_optimal_phase(s).value();
            double best = -1.0;
            for (int i = 0; i < grid; ++i) best = std::max(best, expected_sharpness_objective(s, kTwoPi * i / grid));
            EXPECT_GE(expected_sharpness_objective(s, got), best - 1e-12) << "N=" << n << " m=" << m;
        }
    }
}

TEST(Bayes, ObjectiveIsCovariant) {
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> angle(0.0, kTwoPi);
    const double chi = 0.9;
    auto a = bayes_init(5);
    auto b = bayes_init(5);
    for (int m = 0; m < 3; ++m) {
        const double f = angle(rng);
        const int x = static_cast<int>(rng() & 1);
        a = bayes_update(a, PhaseAngle(f), x);
        b = bayes_update(b, PhaseAngle(f + chi), x);
    }
    for (int i = 0; i < 50; ++i) {
        const double phi = angle(rng);
        EXPECT_NEAR(expected_sharpness_objective(b, phi + chi), expected_sharpness_objective(a, phi), 1e-12);
        EXPECT_NEAR(posterior_density(b, phi + chi), posterior_density(a, phi), 1e-12);
    }
    const double pa = bayes_optimal_phase(a).value();
    const double pb = bayes_optimal_phase(b).value();
    EXPECT_NEAR(expected_sharpness_objective(b, pb), expected_sharpness_objective(a, pa), 1e-10);
    // Maxima of M come in pairs differing by pi.
    EXPECT_LT(std::min(circ_dist(pb, pa + chi), circ_dist(pb, pa + chi + pi)), 1e-6);
}

TEST(Bayes, EstimateOfSingleProductPhoton) {
    // Posterior (1 +- cos(phi - Phi)) / 2 has mean direction Phi or Phi + pi.
    const auto prior = bayes_init(SymmetricState::product(1));
    EXPECT_NEAR(circ_dist(bayes_estimate(bayes_update(prior, PhaseAngle(1.3), 0)).value(), 1.3), 0.0, 1e-12);
    EXPECT_NEAR(circ_dist(bayes_estimate(bayes_update(prior, PhaseAngle(1.3), 1)).value(), 1.3 + pi), 0.0, 1e-12);
}

TEST(Bayes, FlatPosteriorHasNoEstimate) { EXPECT_THROW(bayes_estimate(bayes_init(3)), std::domain_error); }

TEST(Bayes, EstimateMatchesGridMeanDirection) {
    const int n = 4;
    Rng rng(31);
    const auto trace = trace_single_shot(BayesController{}, n, params_from_spec({}), PhaseAngle(1.0), rng);
    auto s = bayes_init(n);
    for (int m = 0; m < n; ++m) s = bayes_update(s, PhaseAngle(trace.feedback[m]), trace.outcomes[m]);
    const auto amp = sine_amp(n);
    const int grid = 4096;
    Complex acc{};
    for (int i = 0; i < grid; ++i) {
        const double phi = kTwoPi * i / grid;
        acc += std::polar(oracle::likelihood(amp, trace.feedback, trace.outcomes, phi), phi);
    }
    EXPECT_LT(circ_dist(bayes_estimate(s).value(), std::arg(acc)), 1e-8);
    EXPECT_LT(circ_dist(trace.estimate.value(), std::arg(acc)), 1e-8);
}

TEST(Sharpness, TwoAtomMonotone) {
    double prev = std::numeric_limits<double>::infinity();
    for (double a = 1.5; a >= 0.0; a -= 0.1) {
        const double s = sharpness_of({a, -a});
        EXPECT_NEAR(s, std::cos(a), 1e-12);
        const double v = holevo_variance(s);
        EXPECT_LT(v, prev);
        prev = v;
    }
}
