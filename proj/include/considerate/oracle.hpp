#pragma once

// Exhaustive policy enumeration. Each policy is evaluated exactly by solving
// (I - gamma P_pi) v = r_pi over the non-terminal states, so this oracle shares
// no code path with the iterative solvers in mdp.hpp.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "considerate/mdp.hpp"

namespace considerate {

inline constexpr std::uint64_t kEnumerationLimit = 1'000'000;

/// Exact value of a deterministic policy, or nullopt when the policy is
/// improper (the linear system is singular, e.g. a gamma = 1 loop that never
/// reaches a terminal state).
inline std::optional<ValueTable> exact_policy_value(const TabularMdp& mdp, const Policy& policy) {
    std::vector<StateId> free_states;
    std::vector<long> index(mdp.num_states, -1);
    for (StateId s = 0; s < mdp.num_states; ++s) {
        if (!mdp.terminal[s]) {
            index[s] = static_cast<long>(free_states.size());
            free_states.push_back(s);
        }
    }
    const auto n = static_cast<Eigen::Index>(free_states.size());
    ValueTable v(mdp.num_states);
    if (n == 0) return v;

    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const StateId s = free_states[static_cast<std::size_t>(i)];
        for (const Transition& t : mdp.outcomes(s, policy[s])) {
            b(i) += t.probability * t.reward;
            if (index[t.next] >= 0) a(i, index[t.next]) -= mdp.gamma * t.probability;
        }
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    lu.setThreshold(1e-10);
    if (!lu.isInvertible()) return std::nullopt;
    const Eigen::VectorXd x = lu.solve(b);
    for (Eigen::Index i = 0; i < n; ++i) v[free_states[static_cast<std::size_t>(i)]] = x(i);
    return v;
}

struct BruteForceResult {
    Policy policy;
    ValueTable values;
    std::uint64_t policies_checked = 0;
};

/// Enumerates every deterministic policy and keeps the one with the highest
/// initial-state value (first found wins ties). Actions at terminal states are
/// irrelevant and fixed to 0, so only non-terminal states are enumerated;
/// the guard still applies to num_actions^num_states.
inline BruteForceResult brute_force_optimal(const TabularMdp& mdp) {
    double space = std::pow(static_cast<double>(mdp.num_actions), static_cast<double>(mdp.num_states));
    if (space > static_cast<double>(kEnumerationLimit)) {
        throw std::invalid_argument("brute_force_optimal: policy space exceeds enumeration limit");
    }
    std::vector<StateId> free_states;
    for (StateId s = 0; s < mdp.num_states; ++s) {
        if (!mdp.terminal[s]) free_states.push_back(s);
    }

    std::vector<ActionId> current(mdp.num_states, 0);
    BruteForceResult best;
    double best_value = -std::numeric_limits<double>::infinity();
    bool found = false;
    while (true) {
        Policy candidate(current);
        ++best.policies_checked;
        if (auto v = exact_policy_value(mdp, candidate)) {
            const double value = (*v)[mdp.initial_state];
            if (!found || value > best_value) {
                found = true;
                best_value = value;
                best.policy = candidate;
                best.values = std::move(*v);
            }
        }
        // Odometer increment over the non-terminal states.
        std::size_t k = 0;
        for (; k < free_states.size(); ++k) {
            ActionId& a = current[free_states[k]];
            if (++a < mdp.num_actions) break;
            a = 0;
        }
        if (k == free_states.size()) break;
    }
    if (!found) throw std::domain_error("brute_force_optimal: every policy is improper");
    return best;
}

}  // namespace considerate
