#pragma once

/**
 * @file mdp.hpp
 * @brief Finite tabular MDPs with absorbing terminal states, and exact solvers.
 *
 * Rewards are stored per (s, a, s') so that reward augmentations can depend on
 * the successor state. A terminal state is absorbing under every action and
 * yields zero reward on its self-loop.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace considerate {

using StateId = std::size_t;
using ActionId = std::size_t;

inline constexpr double kProbabilityTolerance = 1e-12;
inline constexpr double kDefaultTolerance = 1e-9;
inline constexpr std::size_t kDefaultMaxIterations = 100000;

struct Transition {
    StateId next = 0;
    double probability = 0.0;
    double reward = 0.0;

    friend bool operator==(const Transition&, const Transition&) = default;
};

/// Finite MDP <S, A, T, r, gamma> with a terminal set and an initial state.
///
/// This is a plain value type; it may hold an inconsistent model, which
/// validate_mdp() reports. Solvers assume a valid model.
struct TabularMdp {
    std::size_t num_states = 0;
    std::size_t num_actions = 0;
    double gamma = 1.0;
    StateId initial_state = 0;
    std::vector<bool> terminal;
    /// Outcome lists indexed by s * num_actions + a.
    std::vector<std::vector<Transition>> outcome_table;

    TabularMdp() = default;

    TabularMdp(std::size_t states, std::size_t actions, double discount, StateId start)
        : num_states(states),
          num_actions(actions),
          gamma(discount),
          initial_state(start),
          terminal(states, false),
          outcome_table(states * actions) {
        if (states == 0 || actions == 0) {
            throw std::invalid_argument("TabularMdp needs at least one state and one action");
        }
    }

    [[nodiscard]] std::span<const Transition> outcomes(StateId s, ActionId a) const {
        return outcome_table.at(s * num_actions + a);
    }

    void set_outcomes(StateId s, ActionId a, std::vector<Transition> outs) {
        outcome_table.at(s * num_actions + a) = std::move(outs);
    }

    /// Deterministic shortcut: (s, a) leads to next with probability 1.
    void set_deterministic(StateId s, ActionId a, StateId next, double reward) {
        set_outcomes(s, a, {Transition{next, 1.0, reward}});
    }

    /// Marks s terminal and installs the zero-reward self-loop for every action.
    void make_terminal(StateId s) {
        terminal.at(s) = true;
        for (ActionId a = 0; a < num_actions; ++a) {
            set_deterministic(s, a, s, 0.0);
        }
    }

    [[nodiscard]] bool is_terminal(StateId s) const { return terminal.at(s); }

    [[nodiscard]] std::vector<StateId> terminal_states() const {
        std::vector<StateId> out;
        for (StateId s = 0; s < num_states; ++s) {
            if (terminal[s]) out.push_back(s);
        }
        return out;
    }

    [[nodiscard]] bool has_terminal() const {
        return std::find(terminal.begin(), terminal.end(), true) != terminal.end();
    }

    friend bool operator==(const TabularMdp&, const TabularMdp&) = default;
};

struct ValueTable {
    std::vector<double> values;

    ValueTable() = default;
    explicit ValueTable(std::vector<double> v) : values(std::move(v)) {}
    explicit ValueTable(std::size_t n, double fill = 0.0) : values(n, fill) {}

    [[nodiscard]] std::size_t size() const { return values.size(); }
    double operator[](StateId s) const { return values[s]; }
    double& operator[](StateId s) { return values[s]; }
    [[nodiscard]] double at(StateId s) const { return values.at(s); }

    friend bool operator==(const ValueTable&, const ValueTable&) = default;
};

/// Deterministic stationary policy.
struct Policy {
    std::vector<ActionId> actions;

    Policy() = default;
    explicit Policy(std::vector<ActionId> a) : actions(std::move(a)) {}

    [[nodiscard]] std::size_t size() const { return actions.size(); }
    ActionId operator[](StateId s) const { return actions[s]; }

    friend bool operator==(const Policy&, const Policy&) = default;
};

class QTable {
public:
    QTable() = default;
    QTable(std::size_t states, std::size_t actions)
        : num_states_(states), num_actions_(actions), q_(states * actions, 0.0) {}

    [[nodiscard]] std::size_t num_states() const { return num_states_; }
    [[nodiscard]] std::size_t num_actions() const { return num_actions_; }

    double& at(StateId s, ActionId a) { return q_.at(s * num_actions_ + a); }
    [[nodiscard]] double at(StateId s, ActionId a) const { return q_.at(s * num_actions_ + a); }

    [[nodiscard]] std::span<const double> row(StateId s) const {
        return std::span<const double>(q_).subspan(s * num_actions_, num_actions_);
    }

    /// Lowest action id among the maximisers of row s.
    [[nodiscard]] ActionId argmax(StateId s) const {
        const auto r = row(s);
        return static_cast<ActionId>(std::max_element(r.begin(), r.end()) - r.begin());
    }

    [[nodiscard]] double max(StateId s) const { return row(s)[argmax(s)]; }

    [[nodiscard]] const std::vector<double>& raw() const { return q_; }

    friend bool operator==(const QTable&, const QTable&) = default;

private:
    std::size_t num_states_ = 0;
    std::size_t num_actions_ = 0;
    std::vector<double> q_;
};

// ---------------------------------------------------------------------------
// Validation

struct Violation {
    std::optional<StateId> state;
    std::optional<ActionId> action;
    std::string rule;

    [[nodiscard]] std::string describe() const {
        std::ostringstream os;
        os << rule;
        if (state) os << " (state " << *state;
        if (state && action) os << ", action " << *action;
        if (state) os << ")";
        return os.str();
    }
};

namespace rules {
inline constexpr const char* kShape = "transition table size mismatch";
inline constexpr const char* kNextOutOfRange = "next state out of range";
inline constexpr const char* kProbabilityRange = "probability outside [0,1]";
inline constexpr const char* kProbabilitySum = "probabilities do not sum to 1";
inline constexpr const char* kNonFiniteReward = "reward not finite";
inline constexpr const char* kTerminalExit = "terminal state can be exited";
inline constexpr const char* kTerminalReward = "terminal reward nonzero";
inline constexpr const char* kInitialRange = "initial state out of range";
inline constexpr const char* kInitialTerminal = "initial state is terminal";
inline constexpr const char* kGamma = "discount outside (0,1]";
}  // namespace rules

/// Lists every broken invariant of the model. An empty report means valid.
inline std::vector<Violation> validate_mdp(const TabularMdp& mdp) {
    std::vector<Violation> report;
    auto flag = [&](std::optional<StateId> s, std::optional<ActionId> a, const char* rule) {
        report.push_back(Violation{s, a, rule});
    };

    if (!(mdp.gamma > 0.0 && mdp.gamma <= 1.0)) flag(std::nullopt, std::nullopt, rules::kGamma);
    if (mdp.outcome_table.size() != mdp.num_states * mdp.num_actions ||
        mdp.terminal.size() != mdp.num_states) {
        flag(std::nullopt, std::nullopt, rules::kShape);
        return report;
    }
    if (mdp.initial_state >= mdp.num_states) {
        flag(mdp.initial_state, std::nullopt, rules::kInitialRange);
    } else if (mdp.terminal[mdp.initial_state]) {
        flag(mdp.initial_state, std::nullopt, rules::kInitialTerminal);
    }

    for (StateId s = 0; s < mdp.num_states; ++s) {
        for (ActionId a = 0; a < mdp.num_actions; ++a) {
            double total = 0.0;
            bool leaves = false;
            bool paid = false;
            bool range_ok = true;
            for (const Transition& t : mdp.outcomes(s, a)) {
                if (t.next >= mdp.num_states) {
                    flag(s, a, rules::kNextOutOfRange);
                    range_ok = false;
                }
                if (!(t.probability >= 0.0 && t.probability <= 1.0)) {
                    flag(s, a, rules::kProbabilityRange);
                }
                if (!std::isfinite(t.reward)) flag(s, a, rules::kNonFiniteReward);
                total += t.probability;
                if (t.probability > 0.0 && t.next != s) leaves = true;
                if (t.probability > 0.0 && t.reward != 0.0) paid = true;
            }
            if (std::abs(total - 1.0) > kProbabilityTolerance) flag(s, a, rules::kProbabilitySum);
            if (mdp.terminal[s] && range_ok) {
                if (leaves) flag(s, a, rules::kTerminalExit);
                if (paid) flag(s, a, rules::kTerminalReward);
            }
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Dynamic programming

/// Expected one-step backup sum_{s'} T(s'|s,a) [r(s,a,s') + gamma v(s')].
inline double backup(const TabularMdp& mdp, const ValueTable& v, StateId s, ActionId a) {
    double q = 0.0;
    for (const Transition& t : mdp.outcomes(s, a)) {
        q += t.probability * (t.reward + mdp.gamma * v[t.next]);
    }
    return q;
}

struct ValueIterationResult {
    ValueTable values;
    bool converged = false;
    std::size_t iterations = 0;
    /// Sup-norm change of each sweep, in order.
    std::vector<double> residuals;
};

/// Synchronous (Jacobi) value iteration from V = 0.
///
/// Stops when the sup-norm change of a sweep drops below tol. Terminal states
/// are pinned at 0. With gamma = 1 and a model whose optimal return is
/// unbounded, the loop runs out of iterations and reports converged = false.
inline ValueIterationResult value_iteration(const TabularMdp& mdp, double tol = kDefaultTolerance,
                                            std::size_t max_iters = kDefaultMaxIterations) {
    if (!(tol > 0.0)) throw std::invalid_argument("value_iteration: tol must be positive");
    ValueIterationResult out;
    ValueTable v(mdp.num_states);
    ValueTable next(mdp.num_states);
    for (std::size_t it = 0; it < max_iters; ++it) {
        double delta = 0.0;
        for (StateId s = 0; s < mdp.num_states; ++s) {
            if (mdp.terminal[s]) {
                next[s] = 0.0;
                continue;
            }
            double best = -std::numeric_limits<double>::infinity();
            for (ActionId a = 0; a < mdp.num_actions; ++a) best = std::max(best, backup(mdp, v, s, a));
            next[s] = best;
            delta = std::max(delta, std::abs(best - v[s]));
        }
        std::swap(v, next);
        out.residuals.push_back(delta);
        out.iterations = it + 1;
        if (!std::isfinite(delta)) break;
        if (delta < tol) {
            out.converged = true;
            break;
        }
    }
    out.values = std::move(v);
    return out;
}

/// Greedy policy w.r.t. v; ties go to the lowest action id, terminals map to 0.
inline Policy greedy_policy(const TabularMdp& mdp, const ValueTable& v) {
    if (v.size() != mdp.num_states) throw std::invalid_argument("greedy_policy: value table size mismatch");
    std::vector<ActionId> actions(mdp.num_states, 0);
    for (StateId s = 0; s < mdp.num_states; ++s) {
        if (mdp.terminal[s]) continue;
        double best = backup(mdp, v, s, 0);
        for (ActionId a = 1; a < mdp.num_actions; ++a) {
            const double q = backup(mdp, v, s, a);
            if (q > best) {
                best = q;
                actions[s] = a;
            }
        }
    }
    return Policy(std::move(actions));
}

struct PolicyEvaluationResult {
    ValueTable values;
    bool converged = false;
    std::size_t iterations = 0;
};

/// Iterative evaluation of a fixed deterministic policy.
inline PolicyEvaluationResult policy_evaluation(const TabularMdp& mdp, const Policy& policy,
                                                double tol = kDefaultTolerance,
                                                std::size_t max_iters = kDefaultMaxIterations) {
    if (policy.size() != mdp.num_states) throw std::invalid_argument("policy_evaluation: policy size mismatch");
    for (ActionId a : policy.actions) {
        if (a >= mdp.num_actions) throw std::invalid_argument("policy_evaluation: invalid action id");
    }
    PolicyEvaluationResult out;
    ValueTable v(mdp.num_states);
    ValueTable next(mdp.num_states);
    for (std::size_t it = 0; it < max_iters; ++it) {
        double delta = 0.0;
        for (StateId s = 0; s < mdp.num_states; ++s) {
            next[s] = mdp.terminal[s] ? 0.0 : backup(mdp, v, s, policy[s]);
            delta = std::max(delta, std::abs(next[s] - v[s]));
        }
        std::swap(v, next);
        out.iterations = it + 1;
        if (!std::isfinite(delta)) break;
        if (delta < tol) {
            out.converged = true;
            break;
        }
    }
    out.values = std::move(v);
    return out;
}

/// States with positive probability of being visited from start under policy.
inline std::vector<bool> reachable_states(const TabularMdp& mdp, const Policy& policy, StateId start) {
    std::vector<bool> seen(mdp.num_states, false);
    std::vector<StateId> stack{start};
    seen.at(start) = true;
    while (!stack.empty()) {
        const StateId s = stack.back();
        stack.pop_back();
        for (const Transition& t : mdp.outcomes(s, policy[s])) {
            if (t.probability > 0.0 && !seen[t.next]) {
                seen[t.next] = true;
                stack.push_back(t.next);
            }
        }
    }
    return seen;
}

/// Evaluates policy on the part of the MDP it can reach from start. States it
/// never visits are treated as terminal, so their loops (common for learned
/// policies at unexplored states) cannot stall convergence. Values outside the
/// reachable set are 0.
inline PolicyEvaluationResult policy_evaluation_from(const TabularMdp& mdp, const Policy& policy, StateId start,
                                                     double tol = kDefaultTolerance,
                                                     std::size_t max_iters = kDefaultMaxIterations) {
    if (policy.size() != mdp.num_states) throw std::invalid_argument("policy_evaluation: policy size mismatch");
    const std::vector<bool> reach = reachable_states(mdp, policy, start);
    TabularMdp restricted = mdp;
    for (StateId s = 0; s < mdp.num_states; ++s) {
        if (!reach[s]) restricted.terminal[s] = true;
    }
    return policy_evaluation(restricted, policy, tol, max_iters);
}

inline QTable q_from_v(const TabularMdp& mdp, const ValueTable& v) {
    QTable q(mdp.num_states, mdp.num_actions);
    for (StateId s = 0; s < mdp.num_states; ++s) {
        if (mdp.terminal[s]) continue;
        for (ActionId a = 0; a < mdp.num_actions; ++a) q.at(s, a) = backup(mdp, v, s, a);
    }
    return q;
}

/// Greedy policy read off a Q table; terminals map to action 0.
inline Policy greedy_policy(const TabularMdp& mdp, const QTable& q) {
    std::vector<ActionId> actions(mdp.num_states, 0);
    for (StateId s = 0; s < mdp.num_states; ++s) {
        if (!mdp.terminal[s]) actions[s] = q.argmax(s);
    }
    return Policy(std::move(actions));
}

// ---------------------------------------------------------------------------
// Simulation

struct Step {
    StateId state = 0;
    ActionId action = 0;
    double reward = 0.0;
    StateId next = 0;

    friend bool operator==(const Step&, const Step&) = default;
};

struct Trajectory {
    std::vector<Step> steps;
    double discounted_return = 0.0;
    bool reached_terminal = false;

    friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// Samples s' ~ T(.|s,a) with u drawn uniformly from [0,1).
inline const Transition& sample_outcome(std::span<const Transition> outs, double u) {
    double acc = 0.0;
    for (const Transition& t : outs) {
        acc += t.probability;
        if (u < acc) return t;
    }
    // Rounding left u above the cumulative sum; take the last positive outcome.
    for (auto it = outs.rbegin(); it != outs.rend(); ++it) {
        if (it->probability > 0.0) return *it;
    }
    return outs.back();
}

/// Rolls out a policy from the initial state until terminal entry or max_steps.
inline Trajectory simulate(const TabularMdp& mdp, const Policy& policy, std::size_t max_steps,
                           std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Trajectory traj;
    StateId s = mdp.initial_state;
    double discount = 1.0;
    if (mdp.terminal.at(s)) {
        traj.reached_terminal = true;
        return traj;
    }
    for (std::size_t k = 0; k < max_steps; ++k) {
        const ActionId a = policy.actions.at(s);
        const Transition& t = sample_outcome(mdp.outcomes(s, a), unit(rng));
        traj.steps.push_back(Step{s, a, t.reward, t.next});
        traj.discounted_return += discount * t.reward;
        discount *= mdp.gamma;
        s = t.next;
        if (mdp.terminal[s]) {
            traj.reached_terminal = true;
            break;
        }
    }
    return traj;
}

}  // namespace considerate
