#pragma once

// Tabular epsilon-greedy Q-learning over a TabularMdp used as a simulator.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include "considerate/mdp.hpp"

namespace considerate {

/// Step-size or exploration schedule.
///
///   Constant     value
///   Linear       start -> end over `horizon` episodes, then held at end
///   Exponential  max(end, start * decay^episode)
///   InverseCount 1 / n(s,a)^power, n counting updates of the pair (step sizes only)
struct Schedule {
    enum class Kind { Constant, Linear, Exponential, InverseCount };

    Kind kind = Kind::Constant;
    double start = 0.1;
    double end = 0.0;
    double decay = 1.0;
    double horizon = 1.0;
    double power = 1.0;

    static Schedule constant(double v) { return Schedule{Kind::Constant, v, v}; }
    static Schedule linear(double from, double to, double episodes) {
        Schedule s{Kind::Linear, from, to};
        s.horizon = episodes;
        return s;
    }
    static Schedule exponential(double from, double rate, double floor) {
        Schedule s{Kind::Exponential, from, floor};
        s.decay = rate;
        return s;
    }
    static Schedule inverse_count(double exponent = 1.0) {
        Schedule s{Kind::InverseCount, 1.0, 0.0};
        s.power = exponent;
        return s;
    }

    [[nodiscard]] double at(std::size_t episode, std::size_t visits = 1) const {
        switch (kind) {
            case Kind::Constant:
                return start;
            case Kind::Linear: {
                if (horizon <= 0.0) return end;
                const double frac = std::min(1.0, static_cast<double>(episode) / horizon);
                return start + (end - start) * frac;
            }
            case Kind::Exponential:
                return std::max(end, start * std::pow(decay, static_cast<double>(episode)));
            case Kind::InverseCount:
                return 1.0 / std::pow(static_cast<double>(std::max<std::size_t>(visits, 1)), power);
        }
        return start;
    }
};

struct QLearningOptions {
    std::size_t episodes = 0;
    Schedule learning_rate = Schedule::constant(0.1);
    Schedule epsilon = Schedule::constant(0.1);
    std::uint64_t seed = 0;
    std::size_t max_steps_per_episode = 1000;
};

/// Runs Q-learning from the initial state. Deterministic for a fixed seed.
inline QTable q_learning(const TabularMdp& mdp, const QLearningOptions& opts) {
    if (mdp.gamma >= 1.0 && !mdp.has_terminal()) {
        throw std::invalid_argument("q_learning: gamma = 1 requires at least one terminal state");
    }
    if (opts.learning_rate.kind != Schedule::Kind::InverseCount &&
        !(opts.learning_rate.start > 0.0 && opts.learning_rate.start <= 1.0)) {
        throw std::invalid_argument("q_learning: learning rate must lie in (0,1]");
    }

    QTable q(mdp.num_states, mdp.num_actions);
    std::vector<std::size_t> visits(mdp.num_states * mdp.num_actions, 0);
    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<ActionId> any_action(0, mdp.num_actions - 1);

    for (std::size_t ep = 0; ep < opts.episodes; ++ep) {
        const double eps = opts.epsilon.at(ep);
        StateId s = mdp.initial_state;
        for (std::size_t k = 0; k < opts.max_steps_per_episode && !mdp.terminal[s]; ++k) {
            const ActionId a = unit(rng) < eps ? any_action(rng) : q.argmax(s);
            const Transition& t = sample_outcome(mdp.outcomes(s, a), unit(rng));
            const double future = mdp.terminal[t.next] ? 0.0 : q.max(t.next);
            const std::size_t n = ++visits[s * mdp.num_actions + a];
            const double lr = opts.learning_rate.at(ep, n);
            double& cell = q.at(s, a);
            cell += lr * (t.reward + mdp.gamma * future - cell);
            s = t.next;
        }
    }
    return q;
}

}  // namespace considerate
