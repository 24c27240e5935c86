#pragma once

// Shared test models and seeded generators.

#include <cstdint>
#include <random>
#include <vector>

#include "considerate/alignment.hpp"
#include "considerate/mdp.hpp"
#include "considerate/options.hpp"

namespace considerate::testing {

/// s0 --(a, p=1, r)--> t (terminal).
inline TabularMdp chain_mdp(double gamma = 0.9, double reward = 1.0) {
    TabularMdp m(2, 1, gamma, 0);
    m.set_deterministic(0, 0, 1, reward);
    m.make_terminal(1);
    return m;
}

/// n-state corridor, last state terminal. Action 0 = left (stays at 0),
/// action 1 = right. Every move costs -1.
inline TabularMdp corridor_mdp(std::size_t n, double gamma) {
    TabularMdp m(n, 2, gamma, 0);
    for (StateId s = 0; s + 1 < n; ++s) {
        m.set_deterministic(s, 0, s == 0 ? 0 : s - 1, -1.0);
        m.set_deterministic(s, 1, s + 1, -1.0);
    }
    m.make_terminal(n - 1);
    return m;
}

/// 2x2 grid, start top-left (state 0), goal bottom-right (state 3, terminal).
/// Actions up/down/left/right; bumping a wall stays put. Every step costs -1,
/// except entering the top-right cell (state 1), which costs -5.
inline TabularMdp grid2x2_mdp(double gamma = 0.9) {
    TabularMdp m(4, 4, gamma, 0);
    auto cost = [](StateId next) { return next == 1 ? -5.0 : -1.0; };
    for (StateId s = 0; s < 3; ++s) {
        const int r = static_cast<int>(s) / 2;
        const int c = static_cast<int>(s) % 2;
        const int moves[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
        for (ActionId a = 0; a < 4; ++a) {
            int nr = moves[a][0];
            int nc = moves[a][1];
            if (nr < 0 || nr > 1 || nc < 0 || nc > 1) {
                nr = r;
                nc = c;
            }
            const auto next = static_cast<StateId>(nr * 2 + nc);
            m.set_deterministic(s, a, next, cost(next));
        }
    }
    m.make_terminal(3);
    return m;
}

struct RandomMdpParams {
    std::size_t max_states = 5;
    std::size_t max_actions = 3;
    double min_gamma = 0.5;
    double max_gamma = 0.95;
};

/// Random valid MDP: state 0 is initial, the last one or two states are
/// terminal, every (s,a) has 1-3 successors with random probabilities.
inline TabularMdp random_mdp(std::mt19937_64& rng, const RandomMdpParams& params = {}) {
    std::uniform_int_distribution<std::size_t> states(2, params.max_states);
    std::uniform_int_distribution<std::size_t> actions(1, params.max_actions);
    std::uniform_real_distribution<double> gamma(params.min_gamma, params.max_gamma);
    std::uniform_real_distribution<double> reward(-1.0, 1.0);
    std::uniform_real_distribution<double> weight(0.05, 1.0);

    const std::size_t n = states(rng);
    const std::size_t k = actions(rng);
    TabularMdp m(n, k, gamma(rng), 0);
    const std::size_t terminals = (n >= 4 && rng() % 2 == 0) ? 2 : 1;
    for (std::size_t t = 0; t < terminals; ++t) m.make_terminal(n - 1 - t);
    std::uniform_int_distribution<StateId> any_state(0, n - 1);
    std::uniform_int_distribution<std::size_t> support(1, std::min<std::size_t>(3, n));
    for (StateId s = 0; s < n; ++s) {
        if (m.is_terminal(s)) continue;
        for (ActionId a = 0; a < k; ++a) {
            const std::size_t count = support(rng);
            std::vector<Transition> outs;
            double total = 0.0;
            for (std::size_t i = 0; i < count; ++i) {
                const double w = weight(rng);
                outs.push_back({any_state(rng), w, reward(rng)});
                total += w;
            }
            double assigned = 0.0;
            for (std::size_t i = 0; i + 1 < outs.size(); ++i) {
                outs[i].probability /= total;
                assigned += outs[i].probability;
            }
            outs.back().probability = 1.0 - assigned;
            m.set_outcomes(s, a, std::move(outs));
        }
    }
    return m;
}

/// Random value table over n states, entries in [lo, hi].
inline ValueTable random_table(std::mt19937_64& rng, std::size_t n, double lo = -10.0, double hi = 10.0) {
    std::uniform_real_distribution<double> v(lo, hi);
    ValueTable t(n);
    for (StateId s = 0; s < n; ++s) t[s] = v(rng);
    return t;
}

inline std::vector<double> random_probabilities(std::mt19937_64& rng, std::size_t count, bool allow_zero = true) {
    std::uniform_real_distribution<double> w(0.0, 1.0);
    std::vector<double> p(count);
    double total = 0.0;
    for (auto& x : p) {
        x = w(rng);
        if (allow_zero && rng() % 5 == 0) x = 0.0;
        total += x;
    }
    if (total == 0.0) {
        p[0] = 1.0;
        total = 1.0;
    }
    double assigned = 0.0;
    for (std::size_t i = 0; i + 1 < count; ++i) {
        p[i] /= total;
        assigned += p[i];
    }
    p.back() = std::max(0.0, 1.0 - assigned);
    return p;
}

inline ValueFunctionDistribution random_distribution(std::mt19937_64& rng, std::size_t num_states,
                                                     std::size_t max_entries = 4) {
    std::uniform_int_distribution<std::size_t> count(1, max_entries);
    const std::size_t n = count(rng);
    auto probs = random_probabilities(rng, n);
    std::vector<ValueFunctionDistribution::Entry> entries;
    for (std::size_t i = 0; i < n; ++i) entries.push_back({random_table(rng, num_states), probs[i]});
    return ValueFunctionDistribution(std::move(entries));
}

inline std::vector<AgentValueModel> random_agents(std::mt19937_64& rng, std::size_t num_states,
                                                  std::size_t max_agents = 3) {
    std::uniform_int_distribution<std::size_t> count(1, max_agents);
    std::uniform_real_distribution<double> alpha(0.0, 3.0);
    std::vector<AgentValueModel> out;
    const std::size_t n = count(rng);
    for (std::size_t i = 0; i < n; ++i) out.emplace_back(i + 2, random_distribution(rng, num_states), alpha(rng));
    return out;
}

inline InitiationDistribution random_initiation(std::mt19937_64& rng, std::size_t num_states,
                                                std::size_t max_sets = 4) {
    std::uniform_int_distribution<std::size_t> count(1, max_sets);
    const std::size_t n = count(rng);
    auto probs = random_probabilities(rng, n);
    std::vector<InitiationDistribution::Entry> entries;
    for (std::size_t i = 0; i < n; ++i) {
        StateSet set;
        for (StateId s = 0; s < num_states; ++s) {
            if (rng() % 2) set.insert(s);
        }
        entries.push_back({set, probs[i]});
    }
    return InitiationDistribution(std::move(entries));
}

/// True when every non-terminal state has a unique best action by a margin.
inline bool tie_free(const TabularMdp& m, const ValueTable& v, double margin = 1e-6) {
    for (StateId s = 0; s < m.num_states; ++s) {
        if (m.is_terminal(s) || m.num_actions < 2) continue;
        std::vector<double> q;
        for (ActionId a = 0; a < m.num_actions; ++a) q.push_back(backup(m, v, s, a));
        std::sort(q.begin(), q.end());
        if (q[q.size() - 1] - q[q.size() - 2] < margin) return false;
    }
    return true;
}

}  // namespace considerate::testing
