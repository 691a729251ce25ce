#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "framesel/errors.hpp"
#include "framesel/rng.hpp"
#include "framesel/tape.hpp"

namespace framesel {

// Reward trade-off between frame usage and recognition correctness.
struct RewardConfig {
    double gamma = 1.0;

    void validate() const {
        if (gamma < 0.0) throw ConfigError("gamma must be >= 0");
    }
};

inline constexpr double kPolicyProbClamp = 1e-6;

// One sampled action vector with its log-likelihood under the Bernoulli
// policy. Frames forced to "keep" by the curriculum are marked and excluded
// from log_prob.
struct ActionSample {
    std::vector<std::uint8_t> actions;
    std::vector<std::uint8_t> forced;
    double log_prob = 0.0;
    double reward = 0.0;

    std::size_t kept() const {
        std::size_t k = 0;
        for (auto a : actions) k += a;
        return k;
    }
};

inline double clamp_prob(double p) {
    if (p < kPolicyProbClamp) return kPolicyProbClamp;
    if (p > 1.0 - kPolicyProbClamp) return 1.0 - kPolicyProbClamp;
    return p;
}

// Independent Bernoulli(p_i) draws per frame. keep_floor is the curriculum
// probability of overriding a frame's action to "keep".
inline ActionSample sample_actions(std::span<const double> p, Rng& rng, double keep_floor = 0.0) {
    ActionSample s;
    s.actions.resize(p.size());
    s.forced.assign(p.size(), 0);
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (keep_floor > 0.0 && rng.bernoulli(keep_floor)) {
            s.actions[i] = 1;
            s.forced[i] = 1;
            continue;
        }
        double pc = clamp_prob(p[i]);
        s.actions[i] = rng.bernoulli(pc) ? 1 : 0;
        s.log_prob += std::log(s.actions[i] ? pc : 1.0 - pc);
    }
    return s;
}

// Likelihood of a fixed action vector under the policy (product over frames).
inline double action_likelihood(std::span<const double> p, std::span<const std::uint8_t> actions) {
    if (p.size() != actions.size()) throw ShapeError("action_likelihood: length mismatch");
    double l = 1.0;
    for (std::size_t i = 0; i < p.size(); ++i) l *= actions[i] ? p[i] : 1.0 - p[i];
    return l;
}

// R = 1 - (K/N)^2 when the prediction is correct, -gamma otherwise.
inline double reward(bool correct, std::size_t kept, std::size_t total, const RewardConfig& cfg) {
    if (total < 1) throw ShapeError("reward: total frames must be >= 1");
    if (kept > total) throw ShapeError("reward: kept frames exceed total");
    if (!correct) return -cfg.gamma;
    double usage = static_cast<double>(kept) / static_cast<double>(total);
    return 1.0 - usage * usage;
}

// Single-sample policy-gradient surrogate: -R * sum_i log(p_i Y_i + (1-p_i)(1-Y_i)),
// with R treated as a constant. Minimizing it ascends the expected reward.
// Forced frames contribute no term.
template <typename T>
inline Var reinforce_term(Tape<T>& tape, std::span<const Var> p, const ActionSample& sample) {
    if (p.size() != sample.actions.size()) throw ShapeError("reinforce_term: length mismatch");
    std::vector<Var> logs;
    logs.reserve(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (sample.forced[i]) continue;
        Var prob = sample.actions[i] ? p[i] : tape.one_minus(p[i]);
        logs.push_back(tape.log(tape.clamp(prob, T(kPolicyProbClamp), T(1.0 - kPolicyProbClamp))));
    }
    if (logs.empty()) return tape.leaf_scalar(T(0));
    return tape.scale(tape.sum(tape.stack(logs)), static_cast<T>(-sample.reward));
}

// Final RL loss L = L_C + (-R * log pi), the sampled surrogate of L_C - E[R].
template <typename T>
inline Var rl_total_loss(Tape<T>& tape, Var l_c, Var reinforce) {
    return tape.add(l_c, reinforce);
}

inline double rl_total_loss(double l_c, const ActionSample& sample) {
    return l_c - sample.reward * sample.log_prob;
}

// Curriculum keep-floor: full keep for `warmup` epochs, then a linear decay to
// zero over `anneal` epochs.
inline double curriculum_keep_floor(std::size_t epoch, std::size_t warmup, std::size_t anneal) {
    if (epoch < warmup) return 1.0;
    if (anneal == 0) return 0.0;
    std::size_t t = epoch - warmup;
    if (t >= anneal) return 0.0;
    return 1.0 - static_cast<double>(t) / static_cast<double>(anneal);
}

} // namespace framesel
