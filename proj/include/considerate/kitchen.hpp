#pragma once

// Shared-kitchen options demo. The acting agent cooks and walks from 'S' to
// 'E'. The short route passes the pantry 'M' and uses up the last milk;
// the surface starts dirty and can be cleaned with an extra action. Other
// agents' follow-up options need the milk or a clean surface, so the
// initiation sets are the terminal states where those flags survive.

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "considerate/gridworld.hpp"
#include "considerate/mdp.hpp"
#include "considerate/options.hpp"

namespace considerate {

struct KitchenConfig {
    double step_reward = -1.0;
    double clean_cost = -2.0;
    double gamma = 1.0;
    /// Weight of the agent's own reward when the demo is augmented.
    double alpha_self = 1.0;
};

struct KitchenState {
    Cell position;
    bool milk_remaining = true;
    bool surface_clean = false;

    friend bool operator==(const KitchenState&, const KitchenState&) = default;
};

inline constexpr ActionId kClean = 4;
inline constexpr std::array<const char*, kNumGridActions> kKitchenActionNames = {"up", "down", "left", "right",
                                                                                 "clean"};

class KitchenWorld {
public:
    explicit KitchenWorld(KitchenConfig config = {}) : config_(config) {
        if (!(config_.gamma > 0.0 && config_.gamma <= 1.0)) {
            throw std::invalid_argument("KitchenConfig: gamma must lie in (0,1]");
        }
    }

    static const std::vector<std::string>& layout() {
        static const std::vector<std::string> rows = {
            "S.M.E",
            ".....",
        };
        return rows;
    }

    static int width() { return static_cast<int>(layout().front().size()); }
    static int height() { return static_cast<int>(layout().size()); }
    static char at(Cell c) {
        return layout()[static_cast<std::size_t>(c.row)][static_cast<std::size_t>(c.col)];
    }

    [[nodiscard]] const KitchenConfig& config() const { return config_; }
    [[nodiscard]] std::size_t num_states() const { return static_cast<std::size_t>(width() * height()) * 4; }

    [[nodiscard]] StateId encode(const KitchenState& st) const {
        const auto p = static_cast<StateId>(st.position.row * width() + st.position.col);
        return (p * 2 + (st.milk_remaining ? 1 : 0)) * 2 + (st.surface_clean ? 1 : 0);
    }

    [[nodiscard]] KitchenState decode(StateId s) const {
        const auto p = static_cast<int>(s / 4);
        return KitchenState{Cell{p / width(), p % width()}, ((s / 2) % 2) == 1, (s % 2) == 1};
    }

    [[nodiscard]] bool is_terminal(StateId s) const { return at(decode(s).position) == 'E'; }
    [[nodiscard]] StateId initial_state() const { return encode({Cell{0, 0}, true, false}); }

    [[nodiscard]] TabularMdp compile() const {
        TabularMdp mdp(num_states(), kNumGridActions, config_.gamma, initial_state());
        for (StateId s = 0; s < num_states(); ++s) {
            if (is_terminal(s)) {
                mdp.make_terminal(s);
                continue;
            }
            const KitchenState st = decode(s);
            for (ActionId a = 0; a < kNumGridActions; ++a) {
                KitchenState next = st;
                double reward = config_.step_reward;
                if (a == kClean) {
                    if (!st.surface_clean) {
                        next.surface_clean = true;
                        reward += config_.clean_cost;
                    }
                } else {
                    const Cell t = step_towards(st.position, a);
                    if (t.row >= 0 && t.row < height() && t.col >= 0 && t.col < width()) {
                        next.position = t;
                        if (at(t) == 'M') next.milk_remaining = false;
                    }
                }
                mdp.set_deterministic(s, a, encode(next), reward);
            }
        }
        return mdp;
    }

    /// Terminal states where the milk is left, and where the surface is clean.
    [[nodiscard]] std::vector<StateSet> initiation_sets() const {
        StateSet milk;
        StateSet clean;
        for (StateId s = 0; s < num_states(); ++s) {
            if (!is_terminal(s)) continue;
            const KitchenState st = decode(s);
            if (st.milk_remaining) milk.insert(s);
            if (st.surface_clean) clean.insert(s);
        }
        return {milk, clean};
    }

    /// Pairs each initiation set with a table worth values[i] on its states.
    [[nodiscard]] OptionValueDistribution option_values(const std::vector<double>& values) const {
        const auto sets = initiation_sets();
        if (values.size() != sets.size()) {
            throw std::invalid_argument("KitchenWorld::option_values: need one value per initiation set");
        }
        std::vector<OptionValueDistribution::Entry> entries;
        for (std::size_t i = 0; i < sets.size(); ++i) {
            ValueTable table(num_states());
            for (StateId s : sets[i]) table[s] = values[i];
            entries.push_back({sets[i], std::move(table), 1.0 / static_cast<double>(sets.size())});
        }
        return OptionValueDistribution(std::move(entries));
    }

private:
    KitchenConfig config_;
};

struct KitchenDemo {
    TabularMdp mdp;
    InitiationDistribution initiation;
};

inline KitchenDemo build_kitchen_options_demo(const KitchenConfig& config = {}) {
    const KitchenWorld world(config);
    return KitchenDemo{world.compile(), InitiationDistribution::uniform(world.initiation_sets())};
}

}  // namespace considerate
