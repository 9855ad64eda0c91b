#include "aqem/policies.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace aqem {

namespace {

constexpr Complex kI{0.0, 1.0};
constexpr int kGridPoints = 1024;

// Per-outcome pieces of the next-step amplitudes:
//   new(n, j') = e^{-i Phi/2} P(n, j'-1) + e^{+i Phi/2} Q(n, j').
struct Halves {
    int rows = 0;
    int cols = 0;  // old band m+1
    std::vector<Complex> p;
    std::vector<Complex> q;

    Complex P(int n, int j) const {
        return (j < 0 || j >= cols) ? Complex{} : p[static_cast<std::size_t>(n) * cols + j];
    }
    Complex Q(int n, int j) const {
        return (j < 0 || j >= cols) ? Complex{} : q[static_cast<std::size_t>(n) * cols + j];
    }
};

Halves make_halves(const BayesState& s, int outcome) {
    const int remaining = s.remaining();
    const int cols = s.band();
    Halves h;
    h.rows = remaining;
    h.cols = cols;
    h.p.resize(static_cast<std::size_t>(remaining) * cols);
    h.q.resize(h.p.size());
    const double inv = 1.0 / remaining;
    for (int n = 0; n < remaining; ++n) {
        const double w0 = std::sqrt((remaining - n) * inv);
        const double w1 = std::sqrt((n + 1) * inv);
        for (int j = 0; j < cols; ++j) {
            const Complex a0 = w0 * s.coeff(n, j);
            const Complex a1 = w1 * s.coeff(n + 1, j);
            const std::size_t idx = static_cast<std::size_t>(n) * cols + j;
            if (outcome == 0) {
                h.p[idx] = 0.5 * (a0 - kI * a1);
                h.q[idx] = 0.5 * (a0 + kI * a1);
            } else {
                h.p[idx] = 0.5 * (a1 + kI * a0);
                h.q[idx] = 0.5 * (a1 - kI * a0);
            }
        }
    }
    return h;
}

// First harmonic of the hypothetical posterior: a + b e^{-i Phi} + g e^{i Phi}.
struct Harmonic {
    Complex a, b, g;
    Complex at(Complex e) const { return a + b * std::conj(e) + g * e; }
};

Harmonic harmonic_coefficients(const Halves& h) {
    Harmonic out{};
    for (int n = 0; n < h.rows; ++n) {
        for (int j = 0; j <= h.cols; ++j) {
            out.a += h.P(n, j) * std::conj(h.P(n, j - 1)) + h.Q(n, j + 1) * std::conj(h.Q(n, j));
            out.b += h.P(n, j) * std::conj(h.Q(n, j));
            out.g += h.Q(n, j + 1) * std::conj(h.P(n, j - 1));
        }
    }
    return out;
}

std::array<Harmonic, 2> both_branches(const BayesState& s) {
    if (s.remaining() < 1) throw std::domain_error("bayes: all photons already detected");
    return {harmonic_coefficients(make_halves(s, 0)), harmonic_coefficients(make_halves(s, 1))};
}

double objective_at(const std::array<Harmonic, 2>& h, Complex e) {
    return std::sqrt(std::norm(h[0].at(e))) + std::sqrt(std::norm(h[1].at(e)));
}

double objective(const std::array<Harmonic, 2>& h, double phi) { return objective_at(h, std::polar(1.0, phi)); }

const std::array<Complex, kGridPoints>& grid_phasors() {
    static const auto table = [] {
        std::array<Complex, kGridPoints> t;
        for (int i = 0; i < kGridPoints; ++i) t[i] = std::polar(1.0, kTwoPi * i / kGridPoints);
        return t;
    }();
    return table;
}

}  // namespace

BayesState::BayesState(int n_total, std::vector<Complex> amplitudes)
    : n_total_(n_total), m_(0), coeff_(std::move(amplitudes)) {
    if (n_total_ < 1 || n_total_ > kMaxPhotons)
        throw std::domain_error("bayes_init: N must lie in [1, 100]");
    if (static_cast<int>(coeff_.size()) != n_total_ + 1)
        throw std::invalid_argument("bayes_init: amplitude vector must have N+1 entries");
}

BayesState::BayesState(int n_total, int m, std::vector<Complex> coeff)
    : n_total_(n_total), m_(m), coeff_(std::move(coeff)) {}

BayesState bayes_init(int n_total) {
    if (n_total < 1 || n_total > kMaxPhotons)
        throw std::domain_error("bayes_init: N must lie in [1, 100]");
    const auto state = sine_state(n_total);
    return bayes_init(state);
}

BayesState bayes_init(const SymmetricState& input) {
    const auto amp = input.amplitudes();
    return BayesState(input.remaining(), std::vector<Complex>(amp.begin(), amp.end()));
}

BayesState bayes_update(const BayesState& state, PhaseAngle feedback, int outcome) {
    if (outcome != 0 && outcome != 1) throw std::invalid_argument("outcome must be 0 or 1");
    if (state.remaining() < 1) throw std::domain_error("bayes_update: all photons already detected");
    const Halves h = make_halves(state, outcome);
    const int cols = h.cols + 1;
    const Complex down = std::polar(1.0, -0.5 * feedback.value());
    const Complex up = std::conj(down);

    std::vector<Complex> next(static_cast<std::size_t>(h.rows) * cols);
    bool any = false;
    for (int n = 0; n < h.rows; ++n) {
        for (int j = 0; j < cols; ++j) {
            const Complex v = down * h.P(n, j - 1) + up * h.Q(n, j);
            next[static_cast<std::size_t>(n) * cols + j] = v;
            any = any || v != Complex{};
        }
    }
    if (!any) throw ZeroProbabilityError("bayes_update: outcome impossible under the model");
    BayesState out(state.n_total(), state.detected() + 1, std::move(next));
    out.current_phase = feedback;
    return out;
}

double posterior_density(const BayesState& state, double phi) {
    const int cols = state.band();
    const int m = state.detected();
    double acc = 0.0;
    for (int n = 0; n <= state.remaining(); ++n) {
        Complex amp{};
        for (int j = 0; j < cols; ++j) amp += state.coeff(n, j) * std::polar(1.0, 0.5 * (2 * j - m) * phi);
        acc += std::norm(amp);
    }
    return acc;
}

double posterior_mass(const BayesState& state) {
    double acc = 0.0;
    for (const auto& c : state.raw()) acc += std::norm(c);
    return acc;
}

Complex posterior_first_harmonic(const BayesState& state) {
    const int cols = state.band();
    Complex acc{};
    for (int n = 0; n <= state.remaining(); ++n)
        for (int j = 0; j + 1 < cols; ++j) acc += state.coeff(n, j + 1) * std::conj(state.coeff(n, j));
    return acc;
}

double expected_sharpness_objective(const BayesState& state, double feedback) {
    return objective(both_branches(state), feedback);
}

PhaseAngle bayes_optimal_phase(const BayesState& state) {
    const auto h = both_branches(state);
    const double step = kTwoPi / kGridPoints;
    int best = 0;
    double best_val = -1.0;
    double worst_val = std::numeric_limits<double>::infinity();
    const auto& phasors = grid_phasors();
    for (int i = 0; i < kGridPoints; ++i) {
        const double v = objective_at(h, phasors[i]);
        if (v > best_val) {
            best_val = v;
            best = i;
        }
        worst_val = std::min(worst_val, v);
    }
    if (!(best_val > 0.0) || best_val - worst_val <= 1e-12 * best_val) return PhaseAngle(0.0);

    // Golden-section refinement inside the neighbouring grid cells.
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double lo = (best - 1) * step;
    double hi = (best + 1) * step;
    double x1 = hi - inv_phi * (hi - lo);
    double x2 = lo + inv_phi * (hi - lo);
    double f1 = objective(h, x1);
    double f2 = objective(h, x2);
    while (hi - lo > 1e-10) {
        if (f1 >= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = objective(h, x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = objective(h, x2);
        }
    }
    const double refined = 0.5 * (lo + hi);
    if (objective(h, refined) >= best_val) return PhaseAngle(refined);
    return PhaseAngle(best * step);
}

PhaseAngle bayes_estimate(const BayesState& state) {
    const double mass = posterior_mass(state);
    const Complex f1 = posterior_first_harmonic(state);
    if (!(mass > 0.0) || std::abs(f1) < 1e-14 * mass)
        throw std::domain_error("bayes_estimate: posterior too flat for a mean direction");
    return PhaseAngle(-std::arg(f1));
}

}  // namespace aqem
