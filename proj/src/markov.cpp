#include "aqem/policies.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace aqem {

MarkovPolicy::MarkovPolicy(std::vector<double> deltas) : deltas_(std::move(deltas)) {
    if (deltas_.empty()) throw std::invalid_argument("MarkovPolicy: empty phase-adjustment vector");
    for (auto& d : deltas_) {
        if (!std::isfinite(d)) throw std::invalid_argument("MarkovPolicy: non-finite delta");
        d = PhaseAngle::reduce(d);
    }
}

PhaseAngle MarkovPolicy::next_phase(PhaseAngle current, int m, int outcome) const {
    if (m < 1 || m > size())
        throw std::out_of_range("markov_next_phase: step " + std::to_string(m) + " outside [1, " +
                                std::to_string(size()) + "]");
    if (outcome != 0 && outcome != 1) throw std::invalid_argument("outcome must be 0 or 1");
    const double d = deltas_[static_cast<std::size_t>(m - 1)];
    return PhaseAngle(outcome == 0 ? current.value() - d : current.value() + d);
}

PhaseAngle markov_next_phase(const MarkovPolicy& policy, PhaseAngle current, int m, int outcome) {
    return policy.next_phase(current, m, outcome);
}

nlohmann::json noise_to_json(const NoiseSpec& spec) {
    return {{"model", std::string(to_string(spec.model))},
            {"variance", spec.variance},
            {"skewness", spec.skewness}};
}

NoiseSpec noise_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("noise spec must be a JSON object");
    NoiseSpec spec;
    spec.model = noise_model_from_string(j.at("model").get<std::string>());
    spec.variance = j.value("variance", 0.0);
    spec.skewness = j.value("skewness", 0.0);
    spec.validate();
    return spec;
}

nlohmann::json policy_to_json(const MarkovPolicy& policy) {
    nlohmann::json j;
    j["n"] = policy.size();
    j["deltas"] = policy.deltas();
    j["trained_on"] = noise_to_json(policy.trained_on);
    j["seed"] = policy.seed;
    j["objective"] = policy.objective;
    j["metadata"] = policy.metadata;
    return j;
}

MarkovPolicy policy_from_json(const nlohmann::json& j) {
    try {
        const int n = j.at("n").get<int>();
        auto deltas = j.at("deltas").get<std::vector<double>>();
        if (n < 1 || static_cast<int>(deltas.size()) != n)
            throw std::invalid_argument("policy: 'deltas' must hold exactly n entries");
        MarkovPolicy p(std::move(deltas));
        p.trained_on = noise_from_json(j.at("trained_on"));
        p.seed = j.at("seed").get<std::uint64_t>();
        p.objective = j.at("objective").get<double>();
        if (j.contains("metadata")) p.metadata = j.at("metadata");
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("policy JSON: ") + e.what());
    }
}

void save_policy(const MarkovPolicy& policy, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << policy_to_json(policy).dump(2) << '\n';
}

MarkovPolicy load_policy(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return policy_from_json(nlohmann::json::parse(buf.str()));
}

}  // namespace aqem
