#include <gtest/gtest.h>

#include <random>

#include "considerate/gridworld.hpp"
#include "considerate/kitchen.hpp"
#include "considerate/mdp.hpp"

using namespace considerate;

namespace {

std::string map_error_rule(const std::string& text) {
    try {
        parse_map(text);
    } catch (const MapError& e) {
        return e.rule();
    }
    return "";
}

struct Outcome {
    double value;
    FlowerWorldState terminal;
    std::size_t steps;
};

Outcome solve_flower(const ScenarioConfig& config) {
    const GridMap map = parse_map(kFlowerGardenMap);
    const FlowerWorld world(map, config);
    const FlowerScenario sc = build_scenario(map, config);
    const TabularMdp aug = augment_mdp_per_agent(sc.mdp, sc.agents, SocialWelfareSpec::weighted_sum(), config.alpha_self);
    const auto vi = value_iteration(aug);
    EXPECT_TRUE(vi.converged);
    const Trajectory t = simulate(aug, greedy_policy(aug, vi.values), aug.num_states, 0);
    EXPECT_TRUE(t.reached_terminal);
    return Outcome{vi.values[aug.initial_state], world.decode(t.steps.back().next), t.steps.size()};
}

ScenarioConfig with_alice(double alpha) {
    ScenarioConfig c;
    c.alpha_alice = alpha;
    return c;
}

}  // namespace

TEST(ParseMap, TwoByThree) {
    const GridMap m = parse_map("S.E\n.F.\n");
    EXPECT_EQ(m.width(), 3);
    EXPECT_EQ(m.height(), 2);
    EXPECT_EQ(m.start(), (Cell{0, 0}));
    EXPECT_EQ(m.exit(), (Cell{0, 2}));
    ASSERT_EQ(m.flowers().size(), 1u);
    EXPECT_EQ(m.flowers()[0], (Cell{1, 1}));
}

TEST(ParseMap, CarriageReturnsAndNoTrailingNewline) {
    const GridMap m = parse_map("S.E\r\n.F.");
    EXPECT_EQ(m.height(), 2);
    EXPECT_EQ(m.rows()[1], ".F.");
}

TEST(ParseMap, Errors) {
    EXPECT_EQ(map_error_rule(""), "empty map");
    EXPECT_EQ(map_error_rule("S.E\n.."), "map is not rectangular");
    EXPECT_EQ(map_error_rule("S.E\n.Q."), "unknown character");
    EXPECT_EQ(map_error_rule("S.S\n.E."), "map needs exactly one 'S'");
    EXPECT_EQ(map_error_rule("S..\n.F."), "map needs exactly one 'E'");
    EXPECT_EQ(map_error_rule("SfE\n.f."), "map allows at most one 'f'");
    EXPECT_EQ(map_error_rule("SBE\n.B."), "map allows at most one 'B'");
}

TEST(ParseMap, UnknownCharacterLocation) {
    try {
        parse_map("S.E\n.Q.");
        FAIL();
    } catch (const MapError& e) {
        EXPECT_NE(std::string(e.what()).find("(1,1)"), std::string::npos);
    }
}

TEST(FlowerWorld, ConstructionErrors) {
    EXPECT_THROW(FlowerWorld(parse_map("S.E"), ScenarioConfig{}), MapError);
    EXPECT_THROW(FlowerWorld(parse_map("SFE"), ScenarioConfig{}), MapError);
    ScenarioConfig no_fence;
    no_fence.enable_fence = false;
    EXPECT_NO_THROW(FlowerWorld(parse_map("SFE"), no_fence));
}

TEST(FlowerWorld, EncodingIsABijection) {
    const FlowerWorld w(parse_map(kFlowerGardenMap), ScenarioConfig{});
    EXPECT_EQ(w.num_states(), w.num_positions() * 4);
    for (StateId s = 0; s < w.num_states(); ++s) ASSERT_EQ(w.encode(w.decode(s)), s);
    EXPECT_THROW((void)w.encode({Cell{1, 1}, true, false}), std::invalid_argument);
}

TEST(FlowerWorld, Dynamics) {
    const FlowerWorld w(parse_map(kFlowerGardenMap), ScenarioConfig{});
    const FlowerWorldState at_fence{Cell{4, 2}, true, false};
    auto [moved, r1] = w.step(at_fence, kRight);
    EXPECT_EQ(moved, (FlowerWorldState{Cell{4, 3}, false, false}));
    EXPECT_DOUBLE_EQ(r1, -1.0);
    auto [built, r2] = w.step(at_fence, kBuild);
    EXPECT_EQ(built, (FlowerWorldState{Cell{4, 2}, true, true}));
    EXPECT_DOUBLE_EQ(r2, -51.0);
    auto [blocked, r3] = w.step(built, kRight);
    EXPECT_EQ(blocked, built);
    EXPECT_DOUBLE_EQ(r3, -1.0);
    auto [again, r4] = w.step(built, kBuild);
    EXPECT_EQ(again, built);
    EXPECT_DOUBLE_EQ(r4, -1.0);
    auto [wall, r5] = w.step(FlowerWorldState{Cell{4, 1}, true, false}, kUp);
    EXPECT_EQ(wall.ai_position, (Cell{4, 1}));
    EXPECT_DOUBLE_EQ(r5, -1.0);
}

TEST(FlowerWorld, CompiledMdpIsValidAndDeterministic) {
    const GridMap map = parse_map(kFlowerGardenMap);
    const TabularMdp a = compile_flower_world(map, ScenarioConfig{});
    EXPECT_TRUE(validate_mdp(a).empty());
    EXPECT_EQ(a, compile_flower_world(map, ScenarioConfig{}));
    EXPECT_EQ(a.terminal_states().size(), 4u);
}

TEST(FlowerWorld, FlagsNeverRevert) {
    const FlowerWorld w(parse_map(kFlowerGardenMap), ScenarioConfig{});
    const TabularMdp m = w.compile();
    for (StateId s = 0; s < m.num_states; ++s) {
        const FlowerWorldState st = w.decode(s);
        for (ActionId a = 0; a < m.num_actions; ++a) {
            for (const auto& t : m.outcomes(s, a)) {
                const FlowerWorldState nx = w.decode(t.next);
                ASSERT_FALSE(!st.flowers_intact && nx.flowers_intact);
                ASSERT_FALSE(st.fence_built && !nx.fence_built);
            }
        }
    }
}

TEST(FlowerWorld, RandomMapsCompileToValidMdps) {
    std::mt19937_64 rng(8);
    const char alphabet[] = {'.', '.', '.', '#', 'F'};
    int compiled = 0;
    for (int i = 0; i < 200; ++i) {
        const int h = 2 + static_cast<int>(rng() % 4);
        const int w = 2 + static_cast<int>(rng() % 4);
        std::vector<std::string> rows(static_cast<std::size_t>(h), std::string(static_cast<std::size_t>(w), '.'));
        for (auto& row : rows) {
            for (auto& ch : row) ch = alphabet[rng() % 5];
        }
        const auto cells = static_cast<std::size_t>(h * w);
        std::vector<std::size_t> idx(cells);
        for (std::size_t k = 0; k < cells; ++k) idx[k] = k;
        std::shuffle(idx.begin(), idx.end(), rng);
        const char marks[] = {'S', 'E', 'f', 'F'};
        for (std::size_t k = 0; k < 4 && k < cells; ++k) {
            rows[idx[k] / static_cast<std::size_t>(w)][idx[k] % static_cast<std::size_t>(w)] = marks[k];
        }
        if (cells < 4) continue;
        std::string text;
        for (const auto& row : rows) text += row + "\n";
        const GridMap map = parse_map(text);
        const TabularMdp m = compile_flower_world(map, ScenarioConfig{});
        ASSERT_TRUE(validate_mdp(m).empty()) << text;
        ++compiled;
    }
    EXPECT_GT(compiled, 100);
}

TEST(BobPath, ReferenceMap) {
    const GridMap map = parse_map(kFlowerGardenMap);
    const BobPath open = bob_predicted_path(map, false);
    EXPECT_EQ(open.length, 7u);
    EXPECT_TRUE(open.tramples);
    const BobPath fenced = bob_predicted_path(map, true);
    EXPECT_EQ(fenced.length, 13u);
    EXPECT_FALSE(fenced.tramples);
    EXPECT_EQ(fenced.cells.front(), (Cell{3, 0}));
    EXPECT_EQ(fenced.cells.back(), (Cell{4, 6}));
}

TEST(BobPath, Errors) {
    EXPECT_THROW(bob_predicted_path(parse_map("S.E"), false), MapError);
    EXPECT_THROW(bob_predicted_path(parse_map("SB#E"), false), MapError);
}

TEST(AgentModels, TerminalValues) {
    const GridMap map = parse_map(kFlowerGardenMap);
    const FlowerWorld w(map, ScenarioConfig{});
    const auto models = build_agent_value_models(map, ScenarioConfig{});
    ASSERT_EQ(models.size(), 2u);
    EXPECT_EQ(models[0].agent_id(), kAliceId);
    EXPECT_EQ(models[1].agent_id(), kBobId);
    const Cell e = map.exit();
    auto value = [&](std::size_t agent, bool intact, bool fence) {
        return models[agent].expected_value(w.encode({e, intact, fence}));
    };
    EXPECT_DOUBLE_EQ(value(0, false, false), -40.0);
    EXPECT_DOUBLE_EQ(value(0, true, false), -20.0);
    EXPECT_DOUBLE_EQ(value(0, true, true), 0.0);
    EXPECT_DOUBLE_EQ(value(1, true, false), -7.0);
    EXPECT_DOUBLE_EQ(value(1, true, true), -13.0);
    EXPECT_DOUBLE_EQ(models[0].expected_value(w.initial_state()), 0.0);

    ScenarioConfig once;
    once.trample_mode = TrampleMode::Once;
    const auto capped = build_agent_value_models(map, once);
    EXPECT_DOUBLE_EQ(capped[0].expected_value(w.encode({e, false, false})), -20.0);
}

TEST(AgentModels, NoBobMeansZeroValue) {
    const GridMap map = parse_map("S.fF.E");
    const FlowerWorld w(map, ScenarioConfig{});
    const auto models = build_agent_value_models(map, ScenarioConfig{});
    EXPECT_DOUBLE_EQ(models[1].expected_value(w.encode({map.exit(), true, false})), 0.0);
    EXPECT_DOUBLE_EQ(models[0].expected_value(w.encode({map.exit(), true, false})), 0.0);
}

TEST(FlowerScenario, CaringCoefficientSelectsBehaviour) {
    const Outcome oblivious = solve_flower(with_alice(0.0));
    EXPECT_DOUBLE_EQ(oblivious.value, -13.0);
    EXPECT_EQ(oblivious.steps, 6u);
    EXPECT_FALSE(oblivious.terminal.flowers_intact);
    EXPECT_FALSE(oblivious.terminal.fence_built);

    const Outcome detour = solve_flower(with_alice(1.0));
    EXPECT_DOUBLE_EQ(detour.value, -41.0);
    EXPECT_EQ(detour.steps, 14u);
    EXPECT_TRUE(detour.terminal.flowers_intact);
    EXPECT_FALSE(detour.terminal.fence_built);

    const Outcome fence = solve_flower(with_alice(10.0));
    EXPECT_DOUBLE_EQ(fence.value, -82.0);
    EXPECT_EQ(fence.steps, 19u);
    EXPECT_TRUE(fence.terminal.flowers_intact);
    EXPECT_TRUE(fence.terminal.fence_built);
}

TEST(FlowerScenario, SingleGardenPenaltyCannotJustifyTheDetour) {
    ScenarioConfig c = with_alice(1.0);
    c.trample_mode = TrampleMode::Once;
    const Outcome o = solve_flower(c);
    EXPECT_FALSE(o.terminal.flowers_intact);
    EXPECT_DOUBLE_EQ(o.value, -33.0);
}

TEST(Kitchen, EncodingAndValidity) {
    const KitchenWorld w;
    EXPECT_EQ(w.num_states(), 40u);
    for (StateId s = 0; s < w.num_states(); ++s) ASSERT_EQ(w.encode(w.decode(s)), s);
    EXPECT_TRUE(validate_mdp(w.compile()).empty());
    const auto sets = w.initiation_sets();
    ASSERT_EQ(sets.size(), 2u);
    EXPECT_EQ(sets[0].size(), 2u);
    EXPECT_EQ(sets[1].size(), 2u);
}

TEST(Kitchen, BonusesAtTerminals) {
    const KitchenWorld w;
    const auto demo = build_kitchen_options_demo();
    const Cell e{0, 4};
    EXPECT_DOUBLE_EQ(option_agency_bonus(demo.initiation, w.encode({e, true, true})), 1.0);
    EXPECT_DOUBLE_EQ(option_agency_bonus(demo.initiation, w.encode({e, true, false})), 0.5);
    EXPECT_DOUBLE_EQ(option_agency_bonus(demo.initiation, w.encode({e, false, true})), 0.5);
    EXPECT_DOUBLE_EQ(option_agency_bonus(demo.initiation, w.encode({e, false, false})), 0.0);
}

TEST(Kitchen, Alpha2Sweep) {
    const auto demo = build_kitchen_options_demo();
    const std::vector<std::pair<double, double>> expected = {{0.0, -4.0}, {2.0, -4.0}, {5.0, -3.5}, {10.0, 1.0}};
    for (const auto& [alpha2, value] : expected) {
        const TabularMdp aug = augment_mdp_options(demo.mdp, demo.initiation, 1.0, alpha2);
        const auto vi = value_iteration(aug);
        EXPECT_NEAR(vi.values[aug.initial_state], value, 1e-9) << "alpha2 " << alpha2;
    }
}
