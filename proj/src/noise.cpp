#include "aqem/noise.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "aqem/format.hpp"

namespace aqem {

namespace {

constexpr double kPi = std::numbers::pi;

// Largest skewness a skew-normal distribution can reach (alpha -> infinity).
const double kMaxSkewNormalSkewness =
    (4.0 - kPi) / 2.0 * std::pow(2.0 / (kPi - 2.0), 1.5);

template <class F>
double bisect(F f, double lo, double hi, int iterations = 200) {
    double flo = f(lo);
    for (int i = 0; i < iterations; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if (hi - lo < 1e-15 * std::max(1.0, std::abs(lo))) break;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

std::string_view to_string(NoiseModel model) {
    switch (model) {
        case NoiseModel::none: return "none";
        case NoiseModel::normal: return "normal";
        case NoiseModel::random_telegraph: return "random_telegraph";
        case NoiseModel::skew_normal: return "skew_normal";
        case NoiseModel::log_normal: return "log_normal";
    }
    return "none";
}

NoiseModel noise_model_from_string(std::string_view name) {
    static const std::map<std::string_view, NoiseModel> table = {
        {"none", NoiseModel::none},
        {"normal", NoiseModel::normal},
        {"random_telegraph", NoiseModel::random_telegraph},
        {"skew_normal", NoiseModel::skew_normal},
        {"log_normal", NoiseModel::log_normal},
    };
    auto it = table.find(name);
    if (it == table.end()) throw std::invalid_argument("unknown noise model '" + std::string(name) + "'");
    return it->second;
}

void NoiseSpec::validate() const {
    if (!(variance >= 0.0) || !std::isfinite(variance))
        throw std::invalid_argument("noise variance must be finite and >= 0");
    if (!std::isfinite(skewness)) throw std::invalid_argument("noise skewness must be finite");
    if ((variance == 0.0) != (model == NoiseModel::none))
        throw std::invalid_argument("variance must be 0 exactly when the model is 'none'");
    switch (model) {
        case NoiseModel::none:
        case NoiseModel::normal:
        case NoiseModel::random_telegraph:
            if (skewness != 0.0)
                throw std::invalid_argument(std::string(to_string(model)) + " noise requires skewness 0");
            break;
        case NoiseModel::skew_normal:
            if (std::abs(skewness) >= kMaxSkewNormalSkewness)
                throw std::invalid_argument("skew-normal skewness out of reach (|gamma| < 0.9953)");
            break;
        case NoiseModel::log_normal:
            if (!(skewness > 0.0))
                throw std::invalid_argument("log-normal noise requires positive skewness");
            break;
    }
}

std::string NoiseSpec::tag() const {
    return std::string(to_string(model)) + "_v" + format_double(variance) + "_g" + format_double(skewness);
}

double skew_normal_skewness(double alpha) {
    const double beta = alpha * alpha / (1.0 + alpha * alpha);
    const double ratio = 2.0 * beta / (kPi - 2.0 * beta);
    const double g = (4.0 - kPi) / 2.0 * std::pow(ratio, 1.5);
    return alpha < 0.0 ? -g : g;
}

double skew_normal_alpha(double gamma) {
    if (std::abs(gamma) >= kMaxSkewNormalSkewness)
        throw std::invalid_argument("skew-normal skewness out of reach");
    if (gamma == 0.0) return 0.0;
    const double r = std::pow(2.0 * std::abs(gamma) / (4.0 - kPi), 2.0 / 3.0);
    const double beta = kPi * r / (2.0 * (1.0 + r));
    const double alpha = std::sqrt(beta / (1.0 - beta));
    return gamma < 0.0 ? -alpha : alpha;
}

double skew_normal_standard_mode(double alpha) {
    if (alpha == 0.0) return 0.0;
    // d/dz log density = -z + alpha*phi(alpha z)/Phi(alpha z), strictly decreasing in z.
    auto slope = [alpha](double z) {
        const double t = alpha * z;
        const double pdf = std::exp(-0.5 * t * t) / std::sqrt(2.0 * kPi);
        const double cdf = 0.5 * std::erfc(-t / std::sqrt(2.0));
        return -z + alpha * pdf / cdf;
    };
    return bisect(slope, -4.0, 4.0);
}

double log_normal_sigma(double gamma) {
    if (!(gamma > 0.0)) throw std::invalid_argument("log-normal skewness must be positive");
    // u = e^{s^2} - 1 solves (u + 3) sqrt(u) = gamma; the left side is increasing.
    auto f = [gamma](double u) { return (u + 3.0) * std::sqrt(u) - gamma; };
    double hi = 1.0;
    while (f(hi) < 0.0) hi *= 2.0;
    const double u = bisect(f, 0.0, hi);
    return std::sqrt(std::log1p(u));
}

NoiseParams params_from_spec(const NoiseSpec& spec) {
    spec.validate();
    NoiseParams p;
    p.model = spec.model;
    switch (spec.model) {
        case NoiseModel::none:
            break;
        case NoiseModel::normal: {
            p.scale = std::sqrt(spec.variance);
            if (p.scale >= kPi) throw std::invalid_argument("normal noise needs sigma < pi");
            break;
        }
        case NoiseModel::random_telegraph: {
            p.switch_probability = kTelegraphSwitchProbability;
            if (p.switch_probability >= 2.0 / 3.0)
                throw std::invalid_argument("telegraph noise must be unimodal (p_s < 2/3)");
            p.jump = std::sqrt(spec.variance / p.switch_probability);
            if (p.jump >= kPi) throw std::invalid_argument("telegraph jump must satisfy delta < pi");
            break;
        }
        case NoiseModel::skew_normal: {
            p.alpha = skew_normal_alpha(spec.skewness);
            const double beta = p.alpha * p.alpha / (1.0 + p.alpha * p.alpha);
            p.scale = std::sqrt(spec.variance / (1.0 - 2.0 * beta / kPi));
            p.location = -p.scale * skew_normal_standard_mode(p.alpha);
            break;
        }
        case NoiseModel::log_normal: {
            p.log_sigma = log_normal_sigma(spec.skewness);
            const double s2 = p.log_sigma * p.log_sigma;
            // V = (e^{s^2} - 1) e^{2 mu + s^2}
            p.log_mu = 0.5 * (std::log(spec.variance / std::expm1(s2)) - s2);
            p.mode_shift = std::exp(p.log_mu - s2);
            break;
        }
    }
    return p;
}

double sample_offset(const NoiseParams& p, Rng& rng) {
    switch (p.model) {
        case NoiseModel::none:
            return 0.0;
        case NoiseModel::normal: {
            std::normal_distribution<double> z;
            return p.location + p.scale * z(rng);
        }
        case NoiseModel::random_telegraph: {
            const double u = uniform01(rng);
            if (u >= p.switch_probability) return 0.0;
            return (u < 0.5 * p.switch_probability) ? -p.jump : p.jump;
        }
        case NoiseModel::skew_normal: {
            // X = delta |Z0| + sqrt(1 - delta^2) Z1 is standard skew-normal.
            std::normal_distribution<double> z;
            const double delta = p.alpha / std::sqrt(1.0 + p.alpha * p.alpha);
            const double z0 = z(rng);
            const double z1 = z(rng);
            const double x = delta * std::abs(z0) + std::sqrt(1.0 - delta * delta) * z1;
            return p.location + p.scale * x;
        }
        case NoiseModel::log_normal: {
            std::normal_distribution<double> z;
            return std::exp(p.log_mu + p.log_sigma * z(rng)) - p.mode_shift;
        }
    }
    return 0.0;
}

PhaseAngle sample_phase(const NoiseParams& params, PhaseAngle phi0, Rng& rng) {
    if (params.model == NoiseModel::none) return phi0;
    return PhaseAngle(phi0.value() + sample_offset(params, rng));
}

Moments empirical_moments(const NoiseParams& params, long n_samples, Rng& rng) {
    if (n_samples < 10000) throw std::invalid_argument("empirical_moments needs >= 10^4 samples");
    std::vector<double> xs(static_cast<std::size_t>(n_samples));
    double mean = 0.0;
    for (auto& x : xs) {
        x = sample_offset(params, rng);
        mean += x;
    }
    mean /= static_cast<double>(n_samples);
    double m2 = 0.0, m3 = 0.0;
    for (double x : xs) {
        const double d = x - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= static_cast<double>(n_samples);
    m3 /= static_cast<double>(n_samples);
    const double skew = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
    return {m2 * n_samples / (n_samples - 1.0), skew};
}

double empirical_mode(const NoiseParams& params, long n_samples, Rng& rng) {
    if (params.model == NoiseModel::none) return 0.0;
    std::vector<double> xs(static_cast<std::size_t>(n_samples));
    for (auto& x : xs) x = sample_offset(params, rng);

    if (params.model == NoiseModel::random_telegraph) {
        std::map<double, long> counts;
        for (double x : xs) ++counts[x];
        return std::max_element(counts.begin(), counts.end(),
                                [](const auto& a, const auto& b) { return a.second < b.second; })
            ->first;
    }

    std::sort(xs.begin(), xs.end());
    const auto quantile = [&](double q) {
        return xs[static_cast<std::size_t>(q * static_cast<double>(xs.size() - 1))];
    };
    const double lo = quantile(0.001);
    const double hi = quantile(0.999);
    const double spread = quantile(0.75) - quantile(0.25);
    const int bins = 2000;
    const double width = (hi - lo) / bins;
    std::vector<double> hist(bins, 0.0);
    for (double x : xs) {
        const auto b = static_cast<long>((x - lo) / width);
        if (b >= 0 && b < bins) hist[b] += 1.0;
    }

    // Coarse peak of a Gaussian-smoothed histogram.
    const double bandwidth = 0.1 * spread;
    const int radius = static_cast<int>(std::ceil(3.0 * bandwidth / width));
    int peak = 0;
    double best = -1.0;
    for (int i = 0; i < bins; ++i) {
        double acc = 0.0;
        for (int k = std::max(0, i - radius); k <= std::min(bins - 1, i + radius); ++k) {
            const double t = (k - i) * width / bandwidth;
            acc += hist[k] * std::exp(-0.5 * t * t);
        }
        if (acc > best) {
            best = acc;
            peak = i;
        }
    }

    // Degree-6 least squares on log counts within one IQR of the coarse peak; the
    // log density is far closer to a low-order polynomial than the density itself.
    constexpr int degree = 6;
    const double center = lo + (peak + 0.5) * width;
    const double half = spread;
    std::vector<std::pair<double, double>> pts;
    for (int i = 0; i < bins; ++i) {
        const double x = lo + (i + 0.5) * width - center;
        if (std::abs(x) <= half && hist[i] > 0.0) pts.emplace_back(x / half, std::log(hist[i]));
    }
    Eigen::MatrixXd design(static_cast<Eigen::Index>(pts.size()), degree + 1);
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(pts.size()));
    for (std::size_t r = 0; r < pts.size(); ++r) {
        double pw = 1.0;
        for (int c = 0; c <= degree; ++c, pw *= pts[r].first) design(static_cast<Eigen::Index>(r), c) = pw;
        rhs(static_cast<Eigen::Index>(r)) = pts[r].second;
    }
    const Eigen::VectorXd coef = design.colPivHouseholderQr().solve(rhs);
    double arg = 0.0, val = -1e300;
    for (int i = -2000; i <= 2000; ++i) {
        const double t = i / 2000.0;
        double v = 0.0;
        for (int c = degree; c >= 0; --c) v = v * t + coef(c);
        if (v > val) {
            val = v;
            arg = t;
        }
    }
    return center + arg * half;
}

}  // namespace aqem
