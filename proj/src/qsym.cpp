#include "aqem/qsym.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace aqem {

namespace {

bool is_integral(double x) { return std::abs(x - std::round(x)) < 1e-12; }

}  // namespace

std::vector<double> wigner_d_matrix(int two_j, double beta) {
    if (two_j < 0) throw std::domain_error("wigner_d_matrix: 2j must be non-negative");
    // Spin-1/2 rotation in the (down, up) = (|0>, |1>) ordering.
    const double c = std::cos(beta / 2.0);
    const double s = std::sin(beta / 2.0);
    const double r[2][2] = {{c, s}, {-s, c}};  // r[a][b] = <a| exp(-i beta s_y) |b>

    std::vector<double> prev{1.0};
    for (int m = 1; m <= two_j; ++m) {
        const int dim = m + 1;
        const int pdim = m;
        std::vector<double> next(static_cast<std::size_t>(dim) * dim, 0.0);
        std::vector<double> w1(dim), w0(dim);
        for (int n = 0; n <= m; ++n) {
            w1[n] = std::sqrt(static_cast<double>(n) / m);
            w0[n] = std::sqrt(static_cast<double>(m - n) / m);
        }
        for (int n = 0; n <= m; ++n) {
            for (int k = 0; k <= m; ++k) {
                double acc = 0.0;
                for (int a = 0; a < 2; ++a) {
                    const int na = n - a;
                    if (na < 0 || na >= pdim) continue;
                    const double wa = a ? w1[n] : w0[n];
                    for (int b = 0; b < 2; ++b) {
                        const int kb = k - b;
                        if (kb < 0 || kb >= pdim) continue;
                        const double wb = b ? w1[k] : w0[k];
                        acc += wa * wb * r[a][b] * prev[static_cast<std::size_t>(na) * pdim + kb];
                    }
                }
                next[static_cast<std::size_t>(n) * dim + k] = acc;
            }
        }
        prev = std::move(next);
    }
    return prev;
}

double wigner_d(double j, double m, double mp, double beta) {
    if (j < 0.0 || !is_integral(2.0 * j))
        throw std::domain_error("wigner_d: j must be a non-negative half-integer");
    if (std::abs(m) > j + 1e-12 || std::abs(mp) > j + 1e-12)
        throw std::domain_error("wigner_d: |m| and |m'| must not exceed j");
    if (!is_integral(j + m) || !is_integral(j + mp))
        throw std::domain_error("wigner_d: j+m and j+m' must be integers");
    const int two_j = static_cast<int>(std::lround(2.0 * j));
    const int row = static_cast<int>(std::lround(j + m));
    const int col = static_cast<int>(std::lround(j + mp));
    const auto d = wigner_d_matrix(two_j, beta);
    return d[static_cast<std::size_t>(row) * (two_j + 1) + col];
}

SymmetricState::SymmetricState(std::vector<Complex> amp) : amp_(std::move(amp)) {
    if (amp_.empty()) throw std::invalid_argument("SymmetricState: empty amplitude vector");
}

double SymmetricState::norm_squared() const {
    return std::accumulate(amp_.begin(), amp_.end(), 0.0,
                           [](double acc, Complex a) { return acc + std::norm(a); });
}

SymmetricState SymmetricState::product(int photons) {
    if (photons < 1) throw std::domain_error("product state: N must be >= 1");
    std::vector<Complex> amp(static_cast<std::size_t>(photons) + 1, Complex{});
    amp[0] = 1.0;
    return SymmetricState(std::move(amp));
}

SymmetricState sine_state(int photons) {
    if (photons < 1) throw std::domain_error("sine_state: N must be >= 1");
    if (photons > kMaxPhotons)
        throw PrecisionError("sine_state: N=" + std::to_string(photons) +
                             " exceeds the double-precision range (N <= 100)");
    const int dim = photons + 1;
    const auto d = wigner_d_matrix(photons, std::numbers::pi / 2.0);
    const double pref = 1.0 / std::sqrt(photons / 2.0 + 1.0);

    std::vector<double> profile(dim);
    for (int k = 0; k < dim; ++k)
        profile[k] = std::sin((k + 1) * std::numbers::pi / (photons + 2));

    // e^{i pi (k-n)/2} = i^{(k-n) mod 4}
    static constexpr Complex kQuarter[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    std::vector<Complex> amp(dim);
    for (int n = 0; n < dim; ++n) {
        Complex acc{};
        for (int k = 0; k < dim; ++k) {
            const int q = (((k - n) % 4) + 4) % 4;
            acc += kQuarter[q] * (profile[k] * d[static_cast<std::size_t>(n) * dim + k]);
        }
        amp[n] = pref * acc;
    }
    return SymmetricState(std::move(amp));
}

PhotonBranches split_photon(std::span<const Complex> amp) {
    const int total = static_cast<int>(amp.size()) - 1;
    if (total < 1) throw std::domain_error("split_photon: no photons left");
    PhotonBranches out{std::vector<Complex>(total), std::vector<Complex>(total)};
    const double inv = 1.0 / total;
    for (int n = 0; n < total; ++n) {
        out.mode0[n] = amp[n] * std::sqrt((total - n) * inv);
        out.mode1[n] = amp[n + 1] * std::sqrt((n + 1) * inv);
    }
    return out;
}

namespace {

void check_port(int port) {
    if (port != 0 && port != 1) throw std::invalid_argument("port must be 0 or 1");
}

// Rotated-and-projected branch for `port`.
std::vector<Complex> project(const PhotonBranches& br, double theta, int port) {
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    std::vector<Complex> out(br.mode0.size());
    if (port == 0) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * br.mode0[i] + s * br.mode1[i];
    } else {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = -s * br.mode0[i] + c * br.mode1[i];
    }
    return out;
}

double squared_norm(const std::vector<Complex>& v) {
    double acc = 0.0;
    for (const auto& a : v) acc += std::norm(a);
    return acc;
}

}  // namespace

double detection_probability(const SymmetricState& state, double theta, int port) {
    check_port(port);
    if (state.remaining() < 1)
        throw std::domain_error("detection_probability: no photons remaining");
    const auto br = split_photon(state.amplitudes());
    const double p = squared_norm(project(br, theta, port)) / state.norm_squared();
    return std::clamp(p, 0.0, 1.0);
}

Detection measure_photon(const SymmetricState& state, double theta, int port) {
    check_port(port);
    if (state.remaining() < 1) throw std::domain_error("collapse: no photons remaining");
    const auto br = split_photon(state.amplitudes());
    auto branch = project(br, theta, port);
    const double mass = squared_norm(branch);
    const double p = mass / state.norm_squared();
    if (!(p > 0.0)) throw ZeroProbabilityError("collapse: outcome has zero probability");
    const double scale = 1.0 / std::sqrt(mass);
    for (auto& a : branch) a *= scale;
    return Detection{std::min(p, 1.0), SymmetricState(std::move(branch))};
}

SampledDetection sample_detection(const SymmetricState& state, double theta, double u) {
    if (state.remaining() < 1) throw std::domain_error("sample_detection: no photons remaining");
    const auto br = split_photon(state.amplitudes());
    auto b0 = project(br, theta, 0);
    auto b1 = project(br, theta, 1);
    const double m0 = squared_norm(b0);
    const double m1 = squared_norm(b1);
    const double p0 = m0 / (m0 + m1);
    const int port = (u < p0) ? 0 : 1;
    auto& chosen = port == 0 ? b0 : b1;
    const double mass = port == 0 ? m0 : m1;
    if (!(mass > 0.0)) throw ZeroProbabilityError("sample_detection: zero-probability branch");
    const double scale = 1.0 / std::sqrt(mass);
    for (auto& a : chosen) a *= scale;
    return SampledDetection{port, port == 0 ? p0 : 1.0 - p0, SymmetricState(std::move(chosen))};
}

SymmetricState collapse(const SymmetricState& state, double theta, int port) {
    return measure_photon(state, theta, port).state;
}

}  // namespace aqem
