#include "aqem/engine.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include "aqem/format.hpp"
#include "aqem/parallel.hpp"

namespace aqem {

namespace {

// Probe states are reused across trials; building one costs O(N^3).
const SymmetricState& probe_state(int n, bool product) {
    static std::mutex mutex;
    static std::map<std::pair<int, bool>, SymmetricState> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto key = std::make_pair(n, product);
    auto it = cache.find(key);
    if (it == cache.end())
        it = cache.emplace(key, product ? SymmetricState::product(n) : sine_state(n)).first;
    return it->second;
}

struct NoTrace {
    void record(int, double) {}
};

struct VectorTrace {
    ShotTrace* out;
    void record(int port, double feedback) {
        out->outcomes.push_back(port);
        out->feedback.push_back(feedback);
    }
};

template <class Trace>
PhaseAngle simulate(const MarkovPolicy& policy, int n, const NoiseParams& params, PhaseAngle phi0, Rng& rng,
                    Trace trace) {
    if (policy.size() != n)
        throw std::invalid_argument("policy has " + std::to_string(policy.size()) + " entries, N=" +
                                    std::to_string(n));
    SymmetricState state = probe_state(n, false);
    PhaseAngle feedback(0.0);
    for (int m = 1; m <= n; ++m) {
        const PhaseAngle phi = sample_phase(params, phi0, rng);
        const double theta = 0.5 * (phi.value() - feedback.value());
        auto det = sample_detection(state, theta, uniform01(rng));
        trace.record(det.port, feedback.value());
        feedback = policy.next_phase(feedback, m, det.port);
        state = std::move(det.state);
    }
    return feedback;
}

template <class Trace>
PhaseAngle simulate(const BayesController& ctl, int n, const NoiseParams& params, PhaseAngle phi0, Rng& rng,
                    Trace trace) {
    const SymmetricState& probe = probe_state(n, ctl.product_input);
    SymmetricState state = probe;
    BayesState belief = bayes_init(probe);
    PhaseAngle feedback(0.0);
    for (int m = 1; m <= n; ++m) {
        const PhaseAngle phi = sample_phase(params, phi0, rng);
        const double theta = 0.5 * (phi.value() - feedback.value());
        auto det = sample_detection(state, theta, uniform01(rng));
        trace.record(det.port, feedback.value());
        belief = bayes_update(belief, feedback, det.port);
        feedback = (m < n) ? bayes_optimal_phase(belief) : bayes_estimate(belief);
        state = std::move(det.state);
    }
    return feedback;
}

}  // namespace

PhaseAngle run_single_shot(const Controller& controller, int n, const NoiseParams& params, PhaseAngle phi0,
                           Rng& rng) {
    if (n < 1 || n > kMaxPhotons) throw std::domain_error("run_single_shot: N must lie in [1, 100]");
    return std::visit([&](const auto& c) { return simulate(c, n, params, phi0, rng, NoTrace{}); }, controller);
}

ShotTrace trace_single_shot(const Controller& controller, int n, const NoiseParams& params, PhaseAngle phi0,
                            Rng& rng) {
    if (n < 1 || n > kMaxPhotons) throw std::domain_error("trace_single_shot: N must lie in [1, 100]");
    ShotTrace out;
    out.estimate =
        std::visit([&](const auto& c) { return simulate(c, n, params, phi0, rng, VectorTrace{&out}); }, controller);
    return out;
}

double sharpness_of(const std::vector<double>& errors) {
    if (errors.empty()) throw std::invalid_argument("sharpness_of: no trials");
    double re = 0.0, im = 0.0;
    for (double e : errors) {
        re += std::cos(e);
        im += std::sin(e);
    }
    const double k = static_cast<double>(errors.size());
    return std::min(1.0, std::hypot(re, im) / k);
}

double holevo_variance(double sharpness) {
    if (!(sharpness > 0.0)) return std::numeric_limits<double>::infinity();
    return std::max(0.0, 1.0 / (sharpness * sharpness) - 1.0);
}

RunRecord estimate_sharpness_variance(const ShotFunction& shot, long trials, std::uint64_t point_seed,
                                      const RunOptions& options) {
    if (trials < 100) throw std::invalid_argument("estimate_sharpness_variance: K must be >= 100");
    const auto start = std::chrono::steady_clock::now();
    std::vector<double> errors(static_cast<std::size_t>(trials));
    std::vector<int> aborts(static_cast<std::size_t>(trials), 0);

    parallel_for(errors.size(), options.workers, [&](std::size_t k) {
        for (int attempt = 0;; ++attempt) {
            if (attempt >= options.max_attempts)
                throw std::runtime_error("trial " + std::to_string(k) + " aborted too often");
            Rng rng = make_stream(point_seed, k, static_cast<std::uint64_t>(attempt));
            const PhaseAngle phi0(kTwoPi * uniform01(rng));
            try {
                const PhaseAngle est = shot(phi0, rng);
                errors[k] = circular_difference(phi0.value(), est.value());
                return;
            } catch (const ZeroProbabilityError&) {
                ++aborts[k];
            }
        }
    });

    RunRecord rec;
    rec.trials = trials;
    rec.seed = point_seed;
    for (int a : aborts) rec.aborts += a;
    rec.valid = rec.aborts <= static_cast<long>(std::floor(0.001 * static_cast<double>(trials)));
    rec.sharpness = sharpness_of(errors);
    rec.holevo = holevo_variance(rec.sharpness);

    // Delta method on the phasor component along the mean direction.
    double re = 0.0, im = 0.0;
    for (double e : errors) {
        re += std::cos(e);
        im += std::sin(e);
    }
    const double dir = std::atan2(im, re);
    double mean_r = 0.0, sq = 0.0;
    for (double e : errors) mean_r += std::cos(e - dir);
    mean_r /= static_cast<double>(trials);
    for (double e : errors) {
        const double d = std::cos(e - dir) - mean_r;
        sq += d * d;
    }
    const double var_r = sq / static_cast<double>(trials - 1);
    if (rec.sharpness > 0.0)
        rec.holevo_stderr = 2.0 / std::pow(rec.sharpness, 3) * std::sqrt(var_r / static_cast<double>(trials));

    if (options.keep_errors) rec.errors = std::move(errors);
    if (options.record_timing)
        rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return rec;
}

RunRecord estimate_sharpness_variance(const Controller& controller, int n, const NoiseSpec& noise, long trials,
                                      std::uint64_t master_seed, const RunOptions& options) {
    const NoiseParams params = params_from_spec(noise);
    const std::string id = std::holds_alternative<MarkovPolicy>(controller)
                               ? "rl"
                               : (std::get<BayesController>(controller).product_input ? "sql" : "bayes");
    const ShotFunction shot = [&](PhaseAngle phi0, Rng& rng) {
        return run_single_shot(controller, n, params, phi0, rng);
    };
    RunRecord rec = estimate_sharpness_variance(shot, trials, point_seed(master_seed, id, noise, n), options);
    rec.n = n;
    rec.policy = id;
    rec.noise = noise;
    rec.seed = master_seed;
    return rec;
}

long TrialRule::trials_for(int n) const {
    long k = fixed > 0 ? fixed : 10L * n * n;
    if (floor > 0) k = std::max(k, floor);
    if (cap > 0) k = std::min(k, cap);
    return k;
}

std::string ControllerFamily::id() const {
    switch (kind) {
        case Kind::bayes: return "bayes";
        case Kind::markov: return "rl";
        case Kind::product_reference: return "sql";
    }
    return "bayes";
}

Controller ControllerFamily::for_size(int n) const {
    switch (kind) {
        case Kind::bayes: return BayesController{false};
        case Kind::product_reference: return BayesController{true};
        case Kind::markov: {
            auto it = policies.find(n);
            if (it == policies.end()) throw std::invalid_argument("no policy for N=" + std::to_string(n));
            return it->second;
        }
    }
    return BayesController{};
}

std::uint64_t point_seed(std::uint64_t master_seed, const std::string& policy, const NoiseSpec& noise, int n) {
    return derive_seed(master_seed, fnv1a(policy + "|" + noise.tag()), static_cast<std::uint64_t>(n));
}

std::vector<RunRecord> sweep_curve(const ControllerFamily& family, const std::vector<int>& sizes,
                                   const NoiseSpec& noise, std::uint64_t master_seed, const TrialRule& rule,
                                   const RunOptions& options, const std::function<void(const RunRecord&)>& progress) {
    if (sizes.empty()) throw std::invalid_argument("sweep_curve: empty N range");
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        if (sizes[i] < 1 || sizes[i] > kMaxPhotons)
            throw std::invalid_argument("sweep_curve: N outside [1, 100]");
        if (i > 0 && sizes[i] <= sizes[i - 1])
            throw std::invalid_argument("sweep_curve: N values must be strictly increasing");
    }
    if (family.kind == ControllerFamily::Kind::markov) {
        std::string missing;
        for (int n : sizes)
            if (!family.policies.count(n)) missing += (missing.empty() ? "" : ",") + std::to_string(n);
        if (!missing.empty()) throw std::invalid_argument("missing policies for N=" + missing);
    }
    std::vector<RunRecord> out;
    out.reserve(sizes.size());
    for (int n : sizes) {
        RunRecord rec =
            estimate_sharpness_variance(family.for_size(n), n, noise, rule.trials_for(n), master_seed, options);
        rec.policy = family.id();
        rec.trials_overridden = rule.overridden();
        if (progress) progress(rec);
        out.push_back(std::move(rec));
    }
    return out;
}

VarianceCurve curve_from_records(const std::vector<RunRecord>& records) {
    VarianceCurve c;
    if (records.empty()) return c;
    c.policy = records.front().policy;
    c.noise = records.front().noise;
    for (const auto& r : records) {
        if (!c.n.empty() && r.n <= c.n.back())
            throw std::invalid_argument("curve_from_records: N must be strictly increasing");
        c.n.push_back(r.n);
        c.holevo.push_back(r.holevo);
    }
    return c;
}

std::string format_record(const RunRecord& r) {
    std::ostringstream os;
    os << r.n << ',' << r.policy << ',' << to_string(r.noise.model) << ',' << format_double(r.noise.variance) << ','
       << format_double(r.noise.skewness) << ',' << r.trials << ',' << format_double(r.sharpness) << ','
       << format_double(r.holevo) << ',' << r.seed << ',' << r.aborts << ',' << format_double(r.wall_ms);
    return os.str();
}

void append_results(const std::filesystem::path& path, const std::vector<RunRecord>& records) {
    const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::app);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    if (fresh) out << kResultsHeader << '\n';
    for (const auto& r : records) out << format_record(r) << '\n';
}

std::vector<RunRecord> read_results(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != kResultsHeader)
        throw std::invalid_argument(path.string() + ": unexpected results header");
    std::vector<RunRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (f.size() != 11) throw std::invalid_argument(path.string() + ": malformed row '" + line + "'");
        RunRecord r;
        r.n = std::stoi(f[0]);
        r.policy = f[1];
        r.noise.model = noise_model_from_string(f[2]);
        r.noise.variance = parse_double(f[3]);
        r.noise.skewness = parse_double(f[4]);
        r.trials = std::stol(f[5]);
        r.sharpness = parse_double(f[6]);
        r.holevo = parse_double(f[7]);
        r.seed = std::stoull(f[8]);
        r.aborts = std::stol(f[9]);
        r.wall_ms = parse_double(f[10]);
        r.valid = r.aborts <= static_cast<long>(std::floor(0.001 * static_cast<double>(r.trials)));
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace aqem
