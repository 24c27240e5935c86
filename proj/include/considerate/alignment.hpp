#pragma once

/**
 * @file alignment.hpp
 * @brief Reward augmentation from distributions over other agents' value functions.
 *
 * The acting agent's reward is scaled by alpha1 everywhere; on transitions that
 * enter a terminal state from a non-terminal state it additionally receives
 * gamma * alpha2 * F(s'), where F aggregates the value functions of the other
 * agents at the terminal state reached. Terminal self-loops keep reward 0, so
 * augmented models remain valid.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "considerate/mdp.hpp"

namespace considerate {

/// Finite set of candidate value tables with probabilities.
class ValueFunctionDistribution {
public:
    struct Entry {
        ValueTable table;
        double probability = 0.0;
    };

    ValueFunctionDistribution() = default;

    explicit ValueFunctionDistribution(std::vector<Entry> entries) : entries_(std::move(entries)) {
        if (entries_.empty()) throw std::invalid_argument("ValueFunctionDistribution: no entries");
        double total = 0.0;
        for (const Entry& e : entries_) {
            if (!(e.probability >= 0.0 && e.probability <= 1.0)) {
                throw std::invalid_argument("ValueFunctionDistribution: probability outside [0,1]");
            }
            if (e.table.size() != entries_.front().table.size()) {
                throw std::invalid_argument("ValueFunctionDistribution: value tables differ in size");
            }
            total += e.probability;
        }
        if (std::abs(total - 1.0) > kProbabilityTolerance) {
            throw std::invalid_argument("ValueFunctionDistribution: probabilities do not sum to 1");
        }
    }

    static ValueFunctionDistribution singleton(ValueTable table) {
        return ValueFunctionDistribution({Entry{std::move(table), 1.0}});
    }

    [[nodiscard]] const std::vector<Entry>& entries() const { return entries_; }
    [[nodiscard]] std::size_t num_states() const { return entries_.empty() ? 0 : entries_.front().table.size(); }

private:
    std::vector<Entry> entries_;
};

/// Sum_V P(V) V(s).
inline double f_expected(const ValueFunctionDistribution& dist, StateId s) {
    double total = 0.0;
    for (const auto& e : dist.entries()) total += e.probability * e.table.at(s);
    return total;
}

/// min over {V : P(V) > 0} of V(s).
inline double f_worst_case(const ValueFunctionDistribution& dist, StateId s) {
    double worst = std::numeric_limits<double>::infinity();
    bool any = false;
    for (const auto& e : dist.entries()) {
        if (e.probability > 0.0) {
            worst = std::min(worst, e.table.at(s));
            any = true;
        }
    }
    if (!any) throw std::invalid_argument("f_worst_case: no entry has positive probability");
    return worst;
}

/// Sum_V P(V) min(V(s), V(s0)): losses relative to s0 count, gains do not.
inline double f_penalize_negative(const ValueFunctionDistribution& dist, StateId s, StateId initial_state) {
    double total = 0.0;
    for (const auto& e : dist.entries()) {
        total += e.probability * std::min(e.table.at(s), e.table.at(initial_state));
    }
    return total;
}

enum class Aggregator { Expected, WorstCase, PenalizeNegativeChange };

inline std::string to_string(Aggregator a) {
    switch (a) {
        case Aggregator::Expected: return "expected";
        case Aggregator::WorstCase: return "worst_case";
        case Aggregator::PenalizeNegativeChange: return "penalize_negative_change";
    }
    return "?";
}

inline Aggregator aggregator_from_string(const std::string& name) {
    if (name == "expected") return Aggregator::Expected;
    if (name == "worst_case") return Aggregator::WorstCase;
    if (name == "penalize_negative_change") return Aggregator::PenalizeNegativeChange;
    throw std::invalid_argument("unknown aggregator '" + name + "'");
}

struct AlignedRewardSpec {
    double alpha1 = 1.0;
    double alpha2 = 0.0;
    Aggregator aggregator = Aggregator::Expected;
};

inline double aggregate(const ValueFunctionDistribution& dist, Aggregator agg, StateId s, StateId initial_state) {
    switch (agg) {
        case Aggregator::Expected: return f_expected(dist, s);
        case Aggregator::WorstCase: return f_worst_case(dist, s);
        case Aggregator::PenalizeNegativeChange: return f_penalize_negative(dist, s, initial_state);
    }
    throw std::invalid_argument("aggregate: unknown aggregator");
}

// ---------------------------------------------------------------------------
// Per-agent models and social welfare

/// Distribution over one agent's (or subgroup's) value functions plus its
/// caring coefficient.
class AgentValueModel {
public:
    AgentValueModel(std::size_t agent_id, ValueFunctionDistribution distribution, double caring_coefficient,
                    std::string name = {})
        : agent_id_(agent_id),
          distribution_(std::move(distribution)),
          caring_(caring_coefficient),
          name_(std::move(name)) {
        if (!std::isfinite(caring_) || caring_ < 0.0) {
            throw std::invalid_argument("AgentValueModel: caring coefficient must be finite and non-negative");
        }
    }

    [[nodiscard]] std::size_t agent_id() const { return agent_id_; }
    [[nodiscard]] const ValueFunctionDistribution& distribution() const { return distribution_; }
    [[nodiscard]] double caring_coefficient() const { return caring_; }
    [[nodiscard]] const std::string& name() const { return name_; }

    /// e_i(s) = Sum_j P(V_ij) V_j^(i)(s).
    [[nodiscard]] double expected_value(StateId s) const { return f_expected(distribution_, s); }

    [[nodiscard]] AgentValueModel with_caring_coefficient(double alpha) const {
        return AgentValueModel(agent_id_, distribution_, alpha, name_);
    }

private:
    std::size_t agent_id_;
    ValueFunctionDistribution distribution_;
    double caring_;
    std::string name_;
};

/// w_k = (2(n-k)+1)/n^2 for k = 1..n, applied to ascending-sorted utilities.
inline std::vector<double> classic_gini_weights(std::size_t n) {
    std::vector<double> w(n);
    const double n2 = static_cast<double>(n) * static_cast<double>(n);
    for (std::size_t k = 1; k <= n; ++k) w[k - 1] = (2.0 * static_cast<double>(n - k) + 1.0) / n2;
    return w;
}

struct SocialWelfareSpec {
    enum class Kind { WeightedSum, Maximin, GeneralizedGini };

    Kind kind = Kind::WeightedSum;
    /// GeneralizedGini only. Empty selects classic_gini_weights(agent count).
    std::vector<double> gini_weights;

    static SocialWelfareSpec weighted_sum() { return {Kind::WeightedSum, {}}; }
    static SocialWelfareSpec maximin() { return {Kind::Maximin, {}}; }
    static SocialWelfareSpec gini(std::vector<double> weights = {}) {
        for (std::size_t k = 0; k < weights.size(); ++k) {
            if (!(weights[k] >= 0.0) || (k > 0 && weights[k] > weights[k - 1])) {
                throw std::invalid_argument("SocialWelfareSpec: Gini weights must be non-negative and non-increasing");
            }
        }
        return {Kind::GeneralizedGini, std::move(weights)};
    }
};

inline std::string to_string(const SocialWelfareSpec& spec) {
    switch (spec.kind) {
        case SocialWelfareSpec::Kind::WeightedSum: return "weighted_sum";
        case SocialWelfareSpec::Kind::Maximin: return "maximin";
        case SocialWelfareSpec::Kind::GeneralizedGini: return "gini";
    }
    return "?";
}

/// Social welfare over per-agent utilities e. alphas are used by WeightedSum only.
inline double social_welfare(std::span<const double> utilities, std::span<const double> alphas,
                             const SocialWelfareSpec& spec) {
    if (utilities.empty()) throw std::invalid_argument("social_welfare: no agents");
    switch (spec.kind) {
        case SocialWelfareSpec::Kind::WeightedSum: {
            if (alphas.size() != utilities.size()) throw std::invalid_argument("social_welfare: alpha count mismatch");
            double total = 0.0;
            for (std::size_t i = 0; i < utilities.size(); ++i) total += alphas[i] * utilities[i];
            return total;
        }
        case SocialWelfareSpec::Kind::Maximin:
            return *std::min_element(utilities.begin(), utilities.end());
        case SocialWelfareSpec::Kind::GeneralizedGini: {
            const std::vector<double> weights =
                spec.gini_weights.empty() ? classic_gini_weights(utilities.size()) : spec.gini_weights;
            if (weights.size() != utilities.size()) {
                throw std::invalid_argument("social_welfare: Gini weight count does not match agent count");
            }
            std::vector<double> sorted(utilities.begin(), utilities.end());
            std::sort(sorted.begin(), sorted.end());
            double total = 0.0;
            for (std::size_t k = 0; k < sorted.size(); ++k) total += weights[k] * sorted[k];
            return total;
        }
    }
    throw std::invalid_argument("social_welfare: unknown kind");
}

inline double swf_value(const std::vector<AgentValueModel>& models, const SocialWelfareSpec& spec, StateId s) {
    if (models.empty()) throw std::invalid_argument("swf_value: no agent models");
    std::vector<double> e;
    std::vector<double> alphas;
    e.reserve(models.size());
    alphas.reserve(models.size());
    for (const auto& m : models) {
        e.push_back(m.expected_value(s));
        alphas.push_back(m.caring_coefficient());
    }
    return social_welfare(e, alphas, spec);
}

// ---------------------------------------------------------------------------
// Augmentation

/// Copies base with rewards r -> alpha1 r, plus bonus(s') on every transition
/// from a non-terminal state into a terminal state.
template <typename TerminalBonus>
TabularMdp augment_terminal_entries(const TabularMdp& base, double alpha1, TerminalBonus&& bonus) {
    TabularMdp out = base;
    std::vector<double> cache(base.num_states, std::numeric_limits<double>::quiet_NaN());
    for (StateId s = 0; s < base.num_states; ++s) {
        if (base.terminal[s]) continue;
        for (ActionId a = 0; a < base.num_actions; ++a) {
            std::vector<Transition> outs(base.outcomes(s, a).begin(), base.outcomes(s, a).end());
            for (Transition& t : outs) {
                t.reward *= alpha1;
                if (base.terminal[t.next]) {
                    if (std::isnan(cache[t.next])) cache[t.next] = bonus(t.next);
                    t.reward += cache[t.next];
                }
            }
            out.set_outcomes(s, a, std::move(outs));
        }
    }
    return out;
}

inline void require_state_space(const TabularMdp& base, std::size_t n, const char* where) {
    if (n != base.num_states) {
        throw std::invalid_argument(std::string(where) + ": value tables do not match the MDP state space");
    }
}

/// r_aligned: alpha1 r1 everywhere, + gamma alpha2 F(V, P, s') on terminal entry.
inline TabularMdp augment_mdp(const TabularMdp& base, const ValueFunctionDistribution& dist,
                              const AlignedRewardSpec& spec) {
    require_state_space(base, dist.num_states(), "augment_mdp");
    if (spec.aggregator == Aggregator::PenalizeNegativeChange && base.initial_state >= base.num_states) {
        throw std::invalid_argument("augment_mdp: penalize-negative-change needs a valid initial state");
    }
    return augment_terminal_entries(base, spec.alpha1, [&](StateId terminal) {
        return base.gamma * spec.alpha2 * aggregate(dist, spec.aggregator, terminal, base.initial_state);
    });
}

/// r'_aligned: alpha1 r1 everywhere, + gamma SWF(models, s') on terminal entry.
/// WeightedSum gives gamma Sum_i alpha_i Sum_j P(V_ij) V_j^(i)(s').
inline TabularMdp augment_mdp_per_agent(const TabularMdp& base, const std::vector<AgentValueModel>& models,
                                        const SocialWelfareSpec& swf, double alpha1) {
    for (const auto& m : models) require_state_space(base, m.distribution().num_states(), "augment_mdp_per_agent");
    return augment_terminal_entries(base, alpha1,
                                    [&](StateId terminal) { return base.gamma * swf_value(models, swf, terminal); });
}

}  // namespace considerate
