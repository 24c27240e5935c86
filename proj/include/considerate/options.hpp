#pragma once

// Other agents' agency modelled through options <I, pi, beta>. Only the
// initiation sets (optionally paired with value tables) enter the reward
// augmentation; the full option is kept so it can be executed.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "considerate/alignment.hpp"
#include "considerate/mdp.hpp"

namespace considerate {

using StateSet = std::set<StateId>;

struct OptionSpec {
    StateSet initiation_set;
    Policy policy;
    /// beta(s): probability of terminating on arrival at s.
    std::vector<double> termination;

    OptionSpec(StateSet init, Policy pi, std::vector<double> beta)
        : initiation_set(std::move(init)), policy(std::move(pi)), termination(std::move(beta)) {
        if (initiation_set.empty()) throw std::invalid_argument("OptionSpec: empty initiation set");
        for (double b : termination) {
            if (!(b >= 0.0 && b <= 1.0)) throw std::invalid_argument("OptionSpec: termination probability outside [0,1]");
        }
    }
};

inline int initiation_indicator(const StateSet& initiation_set, StateId s) {
    return initiation_set.contains(s) ? 1 : 0;
}

namespace detail {
template <typename Entry>
void check_probabilities(const std::vector<Entry>& entries, const char* what) {
    double total = 0.0;
    for (const auto& e : entries) {
        if (!(e.probability >= 0.0 && e.probability <= 1.0)) {
            throw std::invalid_argument(std::string(what) + ": probability outside [0,1]");
        }
        total += e.probability;
    }
    if (std::abs(total - 1.0) > kProbabilityTolerance) {
        throw std::invalid_argument(std::string(what) + ": probabilities do not sum to 1");
    }
}
}  // namespace detail

/// Probability function over initiation sets of the option that will be
/// attempted once the acting agent terminates.
class InitiationDistribution {
public:
    struct Entry {
        StateSet initiation_set;
        double probability = 0.0;
    };

    InitiationDistribution() = default;
    explicit InitiationDistribution(std::vector<Entry> entries) : entries_(std::move(entries)) {
        detail::check_probabilities(entries_, "InitiationDistribution");
        const double share = 1.0 / static_cast<double>(entries_.size());
        uniform_ = std::all_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.probability == share; });
    }

    static InitiationDistribution uniform(const std::vector<StateSet>& sets) {
        if (sets.empty()) throw std::invalid_argument("InitiationDistribution: no sets");
        std::vector<Entry> entries;
        for (const auto& s : sets) entries.push_back({s, 1.0 / static_cast<double>(sets.size())});
        return InitiationDistribution(std::move(entries));
    }

    [[nodiscard]] const std::vector<Entry>& entries() const { return entries_; }
    /// Every set has probability 1/n.
    [[nodiscard]] bool is_uniform() const { return uniform_; }

private:
    std::vector<Entry> entries_;
    bool uniform_ = false;
};

/// Distribution over <initiation set, value table> pairs.
class OptionValueDistribution {
public:
    struct Entry {
        StateSet initiation_set;
        ValueTable table;
        double probability = 0.0;
    };

    OptionValueDistribution() = default;
    explicit OptionValueDistribution(std::vector<Entry> entries) : entries_(std::move(entries)) {
        detail::check_probabilities(entries_, "OptionValueDistribution");
    }

    [[nodiscard]] const std::vector<Entry>& entries() const { return entries_; }

private:
    std::vector<Entry> entries_;
};

/// Sum_I P(I) 1_I(s). Uniform distributions use count/n, which is exact
/// after multiplying back by n.
inline double option_agency_bonus(const InitiationDistribution& dist, StateId s) {
    if (dist.is_uniform()) {
        std::size_t count = 0;
        for (const auto& e : dist.entries()) count += initiation_indicator(e.initiation_set, s);
        return static_cast<double>(count) / static_cast<double>(dist.entries().size());
    }
    double total = 0.0;
    for (const auto& e : dist.entries()) total += e.probability * initiation_indicator(e.initiation_set, s);
    return total;
}

/// Sum_<I,V> P(<I,V>) 1_I(s) V(s).
inline double option_value_bonus(const OptionValueDistribution& dist, StateId s) {
    double total = 0.0;
    for (const auto& e : dist.entries()) {
        if (initiation_indicator(e.initiation_set, s)) total += e.probability * e.table.at(s);
    }
    return total;
}

namespace detail {
inline void check_sets(const TabularMdp& base, const StateSet& set, const char* where) {
    if (!set.empty() && *set.rbegin() >= base.num_states) {
        throw std::invalid_argument(std::string(where) + ": initiation set references an unknown state");
    }
}
}  // namespace detail

/// r_option: alpha1 r1 everywhere, + gamma alpha2 Sum_I P(I) 1_I(s') on terminal entry.
inline TabularMdp augment_mdp_options(const TabularMdp& base, const InitiationDistribution& dist, double alpha1,
                                      double alpha2) {
    for (const auto& e : dist.entries()) detail::check_sets(base, e.initiation_set, "augment_mdp_options");
    return augment_terminal_entries(base, alpha1, [&](StateId terminal) {
        return base.gamma * alpha2 * option_agency_bonus(dist, terminal);
    });
}

/// r'_option: alpha1 r1 everywhere, + alpha2 Sum P(<I,V>) 1_I(s') V(s') on
/// terminal entry. The bonus is not discounted unless discount_bonus is set,
/// which multiplies it by gamma as r_option does.
inline TabularMdp augment_mdp_option_values(const TabularMdp& base, const OptionValueDistribution& dist,
                                            double alpha1, double alpha2, bool discount_bonus = false) {
    for (const auto& e : dist.entries()) {
        detail::check_sets(base, e.initiation_set, "augment_mdp_option_values");
        require_state_space(base, e.table.size(), "augment_mdp_option_values");
    }
    const double scale = discount_bonus ? base.gamma : 1.0;
    return augment_terminal_entries(base, alpha1, [&](StateId terminal) {
        return scale * alpha2 * option_value_bonus(dist, terminal);
    });
}

/// Follows the option's policy from start. After each arrival at s' the
/// option terminates with probability beta(s'); it also stops on entering a
/// terminal state of the MDP, and after max_steps regardless.
inline Trajectory execute_option(const TabularMdp& mdp, const OptionSpec& option, StateId start,
                                 std::size_t max_steps, std::uint64_t seed) {
    if (!option.initiation_set.contains(start)) {
        throw std::invalid_argument("execute_option: start state is outside the initiation set");
    }
    if (option.policy.size() != mdp.num_states || option.termination.size() != mdp.num_states) {
        throw std::invalid_argument("execute_option: option does not match the MDP state space");
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Trajectory traj;
    StateId s = start;
    double discount = 1.0;
    for (std::size_t k = 0; k < max_steps; ++k) {
        const ActionId a = option.policy[s];
        const Transition& t = sample_outcome(mdp.outcomes(s, a), unit(rng));
        traj.steps.push_back(Step{s, a, t.reward, t.next});
        traj.discounted_return += discount * t.reward;
        discount *= mdp.gamma;
        s = t.next;
        if (mdp.terminal[s]) {
            traj.reached_terminal = true;
            break;
        }
        if (unit(rng) < option.termination[s]) break;
    }
    return traj;
}

}  // namespace considerate
