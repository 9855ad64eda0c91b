#pragma once

#include <complex>
#include <span>
#include <vector>

#include "aqem/common.hpp"

namespace aqem {

using Complex = std::complex<double>;

/// Wigner small-d element d^j_{m,m'}(beta) = <j,m| exp(-i beta J_y) |j,m'>.
/// j, m, mp are half-integers passed as doubles; throws std::domain_error on invalid labels.
double wigner_d(double j, double m, double mp, double beta);

/// Full (2j+1)x(2j+1) matrix, row-major, index (j+m)*(2j+1) + (j+m').
/// Built by adding one spin-1/2 at a time, which stays stable for 2j in the hundreds.
std::vector<double> wigner_d_matrix(int two_j, double beta);

/// Pure state of M indistinguishable two-mode photons in the permutation-symmetric
/// basis. amp[n] multiplies |n, M-n>, the Dicke state with n photons in mode 1.
class SymmetricState {
public:
    explicit SymmetricState(std::vector<Complex> amp);

    int remaining() const { return static_cast<int>(amp_.size()) - 1; }
    std::span<const Complex> amplitudes() const { return amp_; }
    double norm_squared() const;

    /// |0,1>^{⊗M}: every photon in mode 0.
    static SymmetricState product(int photons);

private:
    std::vector<Complex> amp_;
};

/// N-photon sine state. Throws std::domain_error for N < 1 and PrecisionError for N > 100.
SymmetricState sine_state(int photons);

/// Splits one photon off: amp[n]|n,M-n> = sqrt(n/M)|1>|n-1> + sqrt((M-n)/M)|0>|n>.
/// Returns the two (M-1)-photon branch vectors conditioned on the extracted photon
/// being in mode 0 and mode 1 (unnormalized).
struct PhotonBranches {
    std::vector<Complex> mode0;
    std::vector<Complex> mode1;
};
PhotonBranches split_photon(std::span<const Complex> amp);

/// Probability that the next photon exits `port` after the rotation
/// exp(i theta sigma_y) = [[cos, sin], [-sin, cos]] on (|0>, |1>).
double detection_probability(const SymmetricState& state, double theta, int port);

/// Post-measurement state of the remaining photons. Throws ZeroProbabilityError for an
/// impossible outcome.
SymmetricState collapse(const SymmetricState& state, double theta, int port);

/// One-photon step used by the simulator: probability of `port` and the collapsed state.
struct Detection {
    double probability;
    SymmetricState state;
};
Detection measure_photon(const SymmetricState& state, double theta, int port);

/// Draws the exit port with a uniform variate u in [0,1): port 0 iff u < P(0).
struct SampledDetection {
    int port;
    double probability;
    SymmetricState state;
};
SampledDetection sample_detection(const SymmetricState& state, double theta, double u);

}  // namespace aqem
