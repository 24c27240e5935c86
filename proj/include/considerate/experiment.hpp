#pragma once

/**
 * @file experiment.hpp
 * @brief Config-driven experiment runs: solve, sweep, render.
 *
 * Config and result files are JSON with a schema_version field. Exit codes of
 * the command functions are a stable contract: 0 success, 1 domain failure
 * (validation or convergence), 2 I/O or parse failure.
 */

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "considerate/alignment.hpp"
#include "considerate/gridworld.hpp"
#include "considerate/kitchen.hpp"
#include "considerate/mdp.hpp"
#include "considerate/options.hpp"
#include "considerate/q_learning.hpp"

namespace considerate {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

enum ExitCode : int { kExitOk = 0, kExitDomain = 1, kExitIo = 2 };

/// Unreadable or malformed input file (exit code 2).
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Logging

enum class LogLevel { Quiet = 0, Info = 1, Debug = 2 };

/// Read from CONSIDERATE_LOG (quiet | info | debug); default quiet.
inline LogLevel log_level() {
    const char* env = std::getenv("CONSIDERATE_LOG");
    if (env == nullptr) return LogLevel::Quiet;
    const std::string v(env);
    if (v == "debug") return LogLevel::Debug;
    if (v == "info") return LogLevel::Info;
    return LogLevel::Quiet;
}

inline void log(LogLevel level, const std::string& msg) {
    if (static_cast<int>(level) <= static_cast<int>(log_level())) std::cerr << "[considerate] " << msg << '\n';
}

// ---------------------------------------------------------------------------
// Config

struct AugmentationConfig {
    enum class Kind { None, Aligned, PerAgent, Options, OptionValues };

    Kind kind = Kind::None;
    Aggregator aggregator = Aggregator::Expected;
    double alpha2 = 1.0;
    SocialWelfareSpec swf;
    /// option_values only: value attached to each initiation set.
    std::vector<double> option_values;
    /// option_values only: multiply the bonus by gamma.
    bool discount_bonus = false;
};

struct SolverConfig {
    enum class Kind { ValueIteration, QLearning };

    Kind kind = Kind::ValueIteration;
    double tol = kDefaultTolerance;
    std::size_t max_iters = kDefaultMaxIterations;
    QLearningOptions q;
};

struct SweepAxis {
    std::string parameter;
    std::vector<double> values;
};

struct ExperimentConfig {
    enum class ScenarioKind { FlowerWorld, Kitchen };

    ScenarioKind scenario_kind = ScenarioKind::FlowerWorld;
    /// As written in the config; resolved against base_dir.
    std::string map_path;
    std::filesystem::path base_dir;
    ScenarioConfig scenario;
    KitchenConfig kitchen;
    AugmentationConfig augmentation;
    SolverConfig solver;
    /// 0 selects the number of states.
    std::size_t max_steps = 0;
    std::uint64_t simulation_seed = 0;
    std::vector<SweepAxis> sweep;

    [[nodiscard]] std::filesystem::path resolved_map_path() const {
        std::filesystem::path p(map_path);
        return p.is_absolute() ? p : base_dir / p;
    }
};

namespace detail {

inline void reject_unknown_keys(const json& obj, const std::vector<std::string>& known, const std::string& where) {
    if (!obj.is_object()) throw InputError(where + " must be an object");
    for (const auto& [key, _] : obj.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw InputError("unknown field '" + key + "' in " + where);
        }
    }
}

inline Schedule schedule_from_json(const json& j, const std::string& where) {
    reject_unknown_keys(j, {"kind", "value", "start", "end", "episodes", "decay", "min", "power"}, where);
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "constant") return Schedule::constant(j.at("value").get<double>());
    if (kind == "linear") {
        return Schedule::linear(j.at("start").get<double>(), j.at("end").get<double>(), j.at("episodes").get<double>());
    }
    if (kind == "exponential") {
        return Schedule::exponential(j.at("start").get<double>(), j.at("decay").get<double>(), j.value("min", 0.0));
    }
    if (kind == "inverse_count") return Schedule::inverse_count(j.value("power", 1.0));
    throw InputError("unknown schedule kind '" + kind + "' in " + where);
}

inline json schedule_to_json(const Schedule& s) {
    switch (s.kind) {
        case Schedule::Kind::Constant: return {{"kind", "constant"}, {"value", s.start}};
        case Schedule::Kind::Linear: return {{"kind", "linear"}, {"start", s.start}, {"end", s.end}, {"episodes", s.horizon}};
        case Schedule::Kind::Exponential:
            return {{"kind", "exponential"}, {"start", s.start}, {"decay", s.decay}, {"min", s.end}};
        case Schedule::Kind::InverseCount: return {{"kind", "inverse_count"}, {"power", s.power}};
    }
    return {};
}

inline std::string kind_name(AugmentationConfig::Kind k) {
    switch (k) {
        case AugmentationConfig::Kind::None: return "none";
        case AugmentationConfig::Kind::Aligned: return "aligned";
        case AugmentationConfig::Kind::PerAgent: return "per_agent";
        case AugmentationConfig::Kind::Options: return "options";
        case AugmentationConfig::Kind::OptionValues: return "option_values";
    }
    return "?";
}

}  // namespace detail

/// Parses a config document. Missing optional fields take their defaults;
/// unknown fields are rejected so that typos do not silently change a run.
inline ExperimentConfig config_from_json(const json& j, const std::filesystem::path& base_dir = {}) {
    try {
        detail::reject_unknown_keys(j, {"schema_version", "scenario", "augmentation", "solver", "simulation", "sweep"},
                                    "config");
        const int version = j.at("schema_version").get<int>();
        if (version != kSchemaVersion) throw InputError("unsupported schema_version " + std::to_string(version));

        ExperimentConfig cfg;
        cfg.base_dir = base_dir;

        const json& sc = j.at("scenario");
        const std::string kind = sc.value("kind", std::string("flower_world"));
        if (kind == "flower_world") {
            detail::reject_unknown_keys(sc,
                                        {"kind", "map_path", "step_reward", "trample_penalty", "fence_cost", "alpha_self",
                                         "alpha_alice", "alpha_bob", "gamma", "enable_fence", "trample_mode"},
                                        "scenario");
            cfg.scenario_kind = ExperimentConfig::ScenarioKind::FlowerWorld;
            cfg.map_path = sc.at("map_path").get<std::string>();
            ScenarioConfig& s = cfg.scenario;
            s.step_reward = sc.value("step_reward", s.step_reward);
            s.trample_penalty = sc.value("trample_penalty", s.trample_penalty);
            s.fence_cost = sc.value("fence_cost", s.fence_cost);
            s.alpha_self = sc.value("alpha_self", s.alpha_self);
            s.alpha_alice = sc.value("alpha_alice", s.alpha_alice);
            s.alpha_bob = sc.value("alpha_bob", s.alpha_bob);
            s.gamma = sc.value("gamma", s.gamma);
            s.enable_fence = sc.value("enable_fence", s.enable_fence);
            s.trample_mode = trample_mode_from_string(sc.value("trample_mode", to_string(s.trample_mode)));
        } else if (kind == "kitchen") {
            detail::reject_unknown_keys(sc, {"kind", "step_reward", "clean_cost", "gamma", "alpha_self"}, "scenario");
            cfg.scenario_kind = ExperimentConfig::ScenarioKind::Kitchen;
            KitchenConfig& k = cfg.kitchen;
            k.step_reward = sc.value("step_reward", k.step_reward);
            k.clean_cost = sc.value("clean_cost", k.clean_cost);
            k.gamma = sc.value("gamma", k.gamma);
            k.alpha_self = sc.value("alpha_self", k.alpha_self);
        } else {
            throw InputError("unknown scenario kind '" + kind + "'");
        }

        if (j.contains("augmentation")) {
            const json& aj = j.at("augmentation");
            detail::reject_unknown_keys(aj, {"kind", "aggregator", "alpha2", "swf", "values", "discount_bonus"},
                                        "augmentation");
            AugmentationConfig& a = cfg.augmentation;
            const std::string ak = aj.at("kind").get<std::string>();
            if (ak == "none") a.kind = AugmentationConfig::Kind::None;
            else if (ak == "aligned") a.kind = AugmentationConfig::Kind::Aligned;
            else if (ak == "per_agent") a.kind = AugmentationConfig::Kind::PerAgent;
            else if (ak == "options") a.kind = AugmentationConfig::Kind::Options;
            else if (ak == "option_values") a.kind = AugmentationConfig::Kind::OptionValues;
            else throw InputError("unknown augmentation kind '" + ak + "'");
            a.aggregator = aggregator_from_string(aj.value("aggregator", to_string(a.aggregator)));
            a.alpha2 = aj.value("alpha2", a.alpha2);
            if (aj.contains("swf")) {
                const json& sj = aj.at("swf");
                detail::reject_unknown_keys(sj, {"kind", "weights"}, "augmentation.swf");
                const std::string sk = sj.at("kind").get<std::string>();
                if (sk == "weighted_sum") a.swf = SocialWelfareSpec::weighted_sum();
                else if (sk == "maximin") a.swf = SocialWelfareSpec::maximin();
                else if (sk == "gini") a.swf = SocialWelfareSpec::gini(sj.value("weights", std::vector<double>{}));
                else throw InputError("unknown swf kind '" + sk + "'");
            }
            a.option_values = aj.value("values", std::vector<double>{1.0, 1.0});
            a.discount_bonus = aj.value("discount_bonus", false);
        }

        if (j.contains("solver")) {
            const json& sj = j.at("solver");
            detail::reject_unknown_keys(sj,
                                        {"kind", "tol", "max_iters", "episodes", "learning_rate", "epsilon", "seed",
                                         "max_steps_per_episode"},
                                        "solver");
            SolverConfig& s = cfg.solver;
            const std::string sk = sj.value("kind", std::string("value_iteration"));
            if (sk == "value_iteration") s.kind = SolverConfig::Kind::ValueIteration;
            else if (sk == "q_learning") s.kind = SolverConfig::Kind::QLearning;
            else throw InputError("unknown solver kind '" + sk + "'");
            s.tol = sj.value("tol", s.tol);
            s.max_iters = sj.value("max_iters", s.max_iters);
            s.q.episodes = sj.value("episodes", s.q.episodes);
            s.q.seed = sj.value("seed", s.q.seed);
            s.q.max_steps_per_episode = sj.value("max_steps_per_episode", s.q.max_steps_per_episode);
            if (sj.contains("learning_rate")) s.q.learning_rate = detail::schedule_from_json(sj.at("learning_rate"), "solver.learning_rate");
            if (sj.contains("epsilon")) s.q.epsilon = detail::schedule_from_json(sj.at("epsilon"), "solver.epsilon");
        }

        if (j.contains("simulation")) {
            const json& mj = j.at("simulation");
            detail::reject_unknown_keys(mj, {"max_steps", "seed"}, "simulation");
            cfg.max_steps = mj.value("max_steps", cfg.max_steps);
            cfg.simulation_seed = mj.value("seed", cfg.simulation_seed);
        }

        if (j.contains("sweep")) {
            for (const json& axis : j.at("sweep")) {
                detail::reject_unknown_keys(axis, {"parameter", "values"}, "sweep entry");
                cfg.sweep.push_back({axis.at("parameter").get<std::string>(), axis.at("values").get<std::vector<double>>()});
            }
        }
        return cfg;
    } catch (const json::exception& e) {
        throw InputError(std::string("config: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw InputError(std::string("config: ") + e.what());
    }
}

/// Full config document with every default spelled out.
inline json config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["schema_version"] = kSchemaVersion;
    if (cfg.scenario_kind == ExperimentConfig::ScenarioKind::FlowerWorld) {
        const ScenarioConfig& s = cfg.scenario;
        j["scenario"] = {{"kind", "flower_world"},        {"map_path", cfg.map_path},
                         {"step_reward", s.step_reward},  {"trample_penalty", s.trample_penalty},
                         {"fence_cost", s.fence_cost},    {"alpha_self", s.alpha_self},
                         {"alpha_alice", s.alpha_alice},  {"alpha_bob", s.alpha_bob},
                         {"gamma", s.gamma},              {"enable_fence", s.enable_fence},
                         {"trample_mode", to_string(s.trample_mode)}};
    } else {
        const KitchenConfig& k = cfg.kitchen;
        j["scenario"] = {{"kind", "kitchen"},
                         {"step_reward", k.step_reward},
                         {"clean_cost", k.clean_cost},
                         {"gamma", k.gamma},
                         {"alpha_self", k.alpha_self}};
    }
    const AugmentationConfig& a = cfg.augmentation;
    json swf = {{"kind", to_string(a.swf)}};
    if (a.swf.kind == SocialWelfareSpec::Kind::GeneralizedGini) swf["weights"] = a.swf.gini_weights;
    j["augmentation"] = {{"kind", detail::kind_name(a.kind)}, {"aggregator", to_string(a.aggregator)},
                         {"alpha2", a.alpha2},                {"swf", swf},
                         {"values", a.option_values},         {"discount_bonus", a.discount_bonus}};
    const SolverConfig& s = cfg.solver;
    j["solver"] = {{"kind", s.kind == SolverConfig::Kind::ValueIteration ? "value_iteration" : "q_learning"},
                   {"tol", s.tol},
                   {"max_iters", s.max_iters},
                   {"episodes", s.q.episodes},
                   {"learning_rate", detail::schedule_to_json(s.q.learning_rate)},
                   {"epsilon", detail::schedule_to_json(s.q.epsilon)},
                   {"seed", s.q.seed},
                   {"max_steps_per_episode", s.q.max_steps_per_episode}};
    j["simulation"] = {{"max_steps", cfg.max_steps}, {"seed", cfg.simulation_seed}};
    json sweep = json::array();
    for (const SweepAxis& axis : cfg.sweep) sweep.push_back({{"parameter", axis.parameter}, {"values", axis.values}});
    j["sweep"] = sweep;
    return j;
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline json read_json_file(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw InputError("malformed JSON in '" + path.string() + "': " + e.what());
    }
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    return config_from_json(read_json_file(path), path.parent_path());
}

/// Sets a numeric field named "section.field" (e.g. "scenario.alpha_alice").
inline ExperimentConfig with_parameter(const ExperimentConfig& cfg, const std::string& parameter, double value) {
    json j = config_to_json(cfg);
    const auto dot = parameter.find('.');
    if (dot == std::string::npos) throw InputError("sweep parameter '" + parameter + "' must be section.field");
    const std::string section = parameter.substr(0, dot);
    const std::string field = parameter.substr(dot + 1);
    if (!j.contains(section) || !j[section].is_object() || !j[section].contains(field) ||
        !j[section][field].is_number()) {
        throw InputError("sweep parameter '" + parameter + "' does not name a numeric config field");
    }
    if (j[section][field].is_number_integer()) {
        j[section][field] = static_cast<std::int64_t>(value);
    } else {
        j[section][field] = value;
    }
    j["sweep"] = json::array();
    return config_from_json(j, cfg.base_dir);
}

// ---------------------------------------------------------------------------
// Scenario instances

/// A compiled scenario with what the harness needs to run and render it.
struct ScenarioInstance {
    std::string kind;
    TabularMdp base;
    std::vector<std::string> layout;
    std::vector<Cell> cell_of_state;
    std::vector<std::string> flag_names;
    /// flags[s][k] is flag k at state s.
    std::vector<std::vector<bool>> flags;
    std::vector<std::string> action_names;
    double alpha_self = 1.0;
    std::vector<AgentValueModel> agents;
    std::optional<InitiationDistribution> initiation;
    std::optional<OptionValueDistribution> option_values;
};

inline ScenarioInstance build_instance(const ExperimentConfig& cfg) {
    ScenarioInstance inst;
    if (cfg.scenario_kind == ExperimentConfig::ScenarioKind::FlowerWorld) {
        const GridMap map = parse_map(read_text_file(cfg.resolved_map_path()));
        const FlowerWorld world(map, cfg.scenario);
        inst.kind = "flower_world";
        inst.base = world.compile();
        inst.layout = map.rows();
        inst.flag_names = {"trampled", "fence_built"};
        for (StateId s = 0; s < world.num_states(); ++s) {
            const FlowerWorldState st = world.decode(s);
            inst.cell_of_state.push_back(st.ai_position);
            inst.flags.push_back({!st.flowers_intact, st.fence_built});
        }
        inst.action_names.assign(kGridActionNames.begin(), kGridActionNames.end());
        inst.alpha_self = cfg.scenario.alpha_self;
        inst.agents = build_agent_value_models(map, cfg.scenario);
    } else {
        const KitchenWorld world(cfg.kitchen);
        inst.kind = "kitchen";
        inst.base = world.compile();
        inst.layout = KitchenWorld::layout();
        inst.flag_names = {"milk_remaining", "surface_clean"};
        for (StateId s = 0; s < world.num_states(); ++s) {
            const KitchenState st = world.decode(s);
            inst.cell_of_state.push_back(st.position);
            inst.flags.push_back({st.milk_remaining, st.surface_clean});
        }
        inst.action_names.assign(kKitchenActionNames.begin(), kKitchenActionNames.end());
        inst.alpha_self = cfg.kitchen.alpha_self;
        inst.initiation = InitiationDistribution::uniform(world.initiation_sets());
        if (cfg.augmentation.kind == AugmentationConfig::Kind::OptionValues) {
            inst.option_values = world.option_values(cfg.augmentation.option_values);
        }
    }
    return inst;
}

/// Mixture of every agent's value-function distribution, each agent weighted 1/n.
inline ValueFunctionDistribution pooled_distribution(const std::vector<AgentValueModel>& agents) {
    std::vector<ValueFunctionDistribution::Entry> entries;
    for (const auto& m : agents) {
        for (const auto& e : m.distribution().entries()) {
            entries.push_back({e.table, e.probability / static_cast<double>(agents.size())});
        }
    }
    return ValueFunctionDistribution(std::move(entries));
}

inline TabularMdp augmented_mdp(const ScenarioInstance& inst, const AugmentationConfig& aug) {
    switch (aug.kind) {
        case AugmentationConfig::Kind::None:
            return inst.base;
        case AugmentationConfig::Kind::Aligned:
            if (inst.agents.empty()) throw std::invalid_argument("aligned augmentation needs agent value models");
            return augment_mdp(inst.base, pooled_distribution(inst.agents),
                               AlignedRewardSpec{inst.alpha_self, aug.alpha2, aug.aggregator});
        case AugmentationConfig::Kind::PerAgent:
            if (inst.agents.empty()) throw std::invalid_argument("per_agent augmentation needs agent value models");
            return augment_mdp_per_agent(inst.base, inst.agents, aug.swf, inst.alpha_self);
        case AugmentationConfig::Kind::Options:
            if (!inst.initiation) throw std::invalid_argument("options augmentation needs initiation sets");
            return augment_mdp_options(inst.base, *inst.initiation, inst.alpha_self, aug.alpha2);
        case AugmentationConfig::Kind::OptionValues:
            if (!inst.option_values) throw std::invalid_argument("option_values augmentation needs option values");
            return augment_mdp_option_values(inst.base, *inst.option_values, inst.alpha_self, aug.alpha2,
                                             aug.discount_bonus);
    }
    throw std::invalid_argument("unknown augmentation");
}

// ---------------------------------------------------------------------------
// Results

struct TrajectoryRecord {
    StateId state = 0;
    ActionId action = 0;
    std::string action_name;
    double reward = 0.0;
    StateId next_state = 0;
    Cell cell;
    Cell next_cell;

    friend bool operator==(const TrajectoryRecord&, const TrajectoryRecord&) = default;
};

struct AgentValueRecord {
    std::string name;
    std::size_t id = 0;
    double value = 0.0;

    friend bool operator==(const AgentValueRecord&, const AgentValueRecord&) = default;
};

struct RunResult {
    int schema_version = kSchemaVersion;
    json config;
    std::string label;
    std::string scenario_kind;
    std::string augmentation;
    std::vector<std::string> layout;
    bool converged = false;
    std::size_t iterations = 0;
    double initial_value = 0.0;
    std::vector<ActionId> policy;
    std::vector<TrajectoryRecord> trajectory;
    double discounted_return = 0.0;
    bool reached_terminal = false;
    std::map<std::string, bool> terminal_flags;
    std::vector<AgentValueRecord> agent_values;
    double duration_ms = 0.0;
    /// Non-empty when the run failed; the other fields are then partial.
    std::string error;

    friend bool operator==(const RunResult&, const RunResult&) = default;

    [[nodiscard]] bool flag(const std::string& name) const {
        auto it = terminal_flags.find(name);
        return it != terminal_flags.end() && it->second;
    }
};

inline json to_json(const RunResult& r) {
    json steps = json::array();
    for (const auto& t : r.trajectory) {
        steps.push_back({{"state", t.state},
                         {"action", t.action},
                         {"action_name", t.action_name},
                         {"reward", t.reward},
                         {"next_state", t.next_state},
                         {"cell", {t.cell.row, t.cell.col}},
                         {"next_cell", {t.next_cell.row, t.next_cell.col}}});
    }
    json agents = json::array();
    for (const auto& a : r.agent_values) agents.push_back({{"name", a.name}, {"id", a.id}, {"value", a.value}});
    return {{"schema_version", r.schema_version},
            {"kind", "run_result"},
            {"config", r.config},
            {"label", r.label},
            {"scenario_kind", r.scenario_kind},
            {"augmentation", r.augmentation},
            {"layout", r.layout},
            {"converged", r.converged},
            {"iterations", r.iterations},
            {"initial_value", r.initial_value},
            {"policy", r.policy},
            {"trajectory", steps},
            {"discounted_return", r.discounted_return},
            {"reached_terminal", r.reached_terminal},
            {"terminal_flags", r.terminal_flags},
            {"agent_values", agents},
            {"duration_ms", r.duration_ms},
            {"error", r.error}};
}

inline RunResult run_result_from_json(const json& j) {
    try {
        if (j.at("kind").get<std::string>() != "run_result") throw InputError("not a run_result document");
        RunResult r;
        r.schema_version = j.at("schema_version").get<int>();
        if (r.schema_version != kSchemaVersion) throw InputError("unsupported schema_version");
        r.config = j.at("config");
        r.label = j.at("label").get<std::string>();
        r.scenario_kind = j.at("scenario_kind").get<std::string>();
        r.augmentation = j.at("augmentation").get<std::string>();
        r.layout = j.at("layout").get<std::vector<std::string>>();
        r.converged = j.at("converged").get<bool>();
        r.iterations = j.at("iterations").get<std::size_t>();
        r.initial_value = j.at("initial_value").get<double>();
        r.policy = j.at("policy").get<std::vector<ActionId>>();
        for (const json& t : j.at("trajectory")) {
            const auto cell = t.at("cell").get<std::array<int, 2>>();
            const auto next_cell = t.at("next_cell").get<std::array<int, 2>>();
            r.trajectory.push_back(TrajectoryRecord{t.at("state").get<StateId>(), t.at("action").get<ActionId>(),
                                                    t.at("action_name").get<std::string>(), t.at("reward").get<double>(),
                                                    t.at("next_state").get<StateId>(), Cell{cell[0], cell[1]},
                                                    Cell{next_cell[0], next_cell[1]}});
        }
        r.discounted_return = j.at("discounted_return").get<double>();
        r.reached_terminal = j.at("reached_terminal").get<bool>();
        r.terminal_flags = j.at("terminal_flags").get<std::map<std::string, bool>>();
        for (const json& a : j.at("agent_values")) {
            r.agent_values.push_back(
                {a.at("name").get<std::string>(), a.at("id").get<std::size_t>(), a.at("value").get<double>()});
        }
        r.duration_ms = j.at("duration_ms").get<double>();
        r.error = j.at("error").get<std::string>();
        return r;
    } catch (const json::exception& e) {
        throw InputError(std::string("malformed run result: ") + e.what());
    }
}

inline std::string format_number(double v) {
    std::ostringstream os;
    os << std::setprecision(10) << v;
    return os.str();
}

inline std::string augmentation_summary(const ExperimentConfig& cfg) {
    const AugmentationConfig& a = cfg.augmentation;
    switch (a.kind) {
        case AugmentationConfig::Kind::None: return "none";
        case AugmentationConfig::Kind::Aligned:
            return "aligned(" + to_string(a.aggregator) + ", alpha2=" + format_number(a.alpha2) + ")";
        case AugmentationConfig::Kind::PerAgent: return "per_agent(" + to_string(a.swf) + ")";
        case AugmentationConfig::Kind::Options: return "options(alpha2=" + format_number(a.alpha2) + ")";
        case AugmentationConfig::Kind::OptionValues:
            return "option_values(alpha2=" + format_number(a.alpha2) + (a.discount_bonus ? ", discounted" : "") + ")";
    }
    return "?";
}

/// Plain-ASCII picture of a run: header with the caring coefficients, the map
/// with the path overlaid ('*' path, 'x' trampled/consumed cell, '+' fence),
/// and the action log. A pure function of the result.
inline std::string render(const RunResult& r) {
    std::ostringstream os;
    const json& sc = r.config.contains("scenario") ? r.config.at("scenario") : json::object();
    os << "scenario: " << r.scenario_kind << "  augmentation: " << r.augmentation;
    if (!r.label.empty()) os << "  [" << r.label << "]";
    os << '\n';
    bool first = true;
    for (const char* key : {"alpha_self", "alpha_alice", "alpha_bob", "gamma"}) {
        if (sc.contains(key) && sc.at(key).is_number()) {
            os << (first ? "" : " ") << key << '=' << format_number(sc.at(key).get<double>());
            first = false;
        }
    }
    os << '\n';

    std::vector<std::string> grid = r.layout;
    auto mark = [&](Cell c) {
        if (c.row < 0 || c.col < 0 || static_cast<std::size_t>(c.row) >= grid.size() ||
            static_cast<std::size_t>(c.col) >= grid[static_cast<std::size_t>(c.row)].size()) {
            return;
        }
        char& ch = grid[static_cast<std::size_t>(c.row)][static_cast<std::size_t>(c.col)];
        if (ch == '.' || ch == 'B' || ch == 'f') ch = '*';
        else if (ch == 'F' || ch == 'M') ch = 'x';
    };
    for (const auto& t : r.trajectory) mark(t.next_cell);
    if (r.flag("fence_built")) {
        for (std::size_t row = 0; row < r.layout.size(); ++row) {
            for (std::size_t col = 0; col < r.layout[row].size(); ++col) {
                if (r.layout[row][col] == 'f') grid[row][col] = '+';
            }
        }
    }
    for (const auto& line : grid) os << line << '\n';

    os << "actions:";
    for (const auto& t : r.trajectory) os << ' ' << t.action_name;
    os << '\n';
    os << "terminal:";
    for (const auto& [name, value] : r.terminal_flags) os << ' ' << name << '=' << (value ? "true" : "false");
    if (!r.reached_terminal) os << " (not reached)";
    os << '\n';
    os << "steps=" << r.trajectory.size() << " return=" << format_number(r.discounted_return)
       << " initial_value=" << format_number(r.initial_value) << (r.converged ? "" : " NOT CONVERGED") << '\n';
    for (const auto& a : r.agent_values) os << "  " << a.name << ": " << format_number(a.value) << '\n';
    if (!r.error.empty()) os << "error: " << r.error << '\n';
    return os.str();
}

// ---------------------------------------------------------------------------
// Running

inline RunResult run_experiment(const ExperimentConfig& cfg, std::string label = {}) {
    const auto started = std::chrono::steady_clock::now();
    RunResult r;
    r.config = config_to_json(cfg);
    r.config["sweep"] = json::array();
    r.label = std::move(label);
    r.augmentation = augmentation_summary(cfg);

    const ScenarioInstance inst = build_instance(cfg);
    r.scenario_kind = inst.kind;
    r.layout = inst.layout;
    const TabularMdp mdp = augmented_mdp(inst, cfg.augmentation);
    if (const auto violations = validate_mdp(mdp); !violations.empty()) {
        throw std::domain_error("augmented MDP is invalid: " + violations.front().describe());
    }

    Policy policy;
    if (cfg.solver.kind == SolverConfig::Kind::ValueIteration) {
        const auto vi = value_iteration(mdp, cfg.solver.tol, cfg.solver.max_iters);
        r.converged = vi.converged;
        r.iterations = vi.iterations;
        r.initial_value = vi.values[mdp.initial_state];
        policy = greedy_policy(mdp, vi.values);
        log(LogLevel::Info, "value iteration: " + std::to_string(vi.iterations) + " sweeps, converged=" +
                                (vi.converged ? "true" : "false"));
    } else {
        const QTable q = q_learning(mdp, cfg.solver.q);
        policy = greedy_policy(mdp, q);
        const auto eval = policy_evaluation_from(mdp, policy, mdp.initial_state, cfg.solver.tol, cfg.solver.max_iters);
        r.converged = eval.converged;
        r.iterations = cfg.solver.q.episodes;
        r.initial_value = eval.values[mdp.initial_state];
        log(LogLevel::Info, "q-learning: " + std::to_string(cfg.solver.q.episodes) + " episodes");
    }
    r.policy = policy.actions;

    const std::size_t cap = cfg.max_steps == 0 ? mdp.num_states : cfg.max_steps;
    const Trajectory traj = simulate(mdp, policy, cap, cfg.simulation_seed);
    for (const Step& st : traj.steps) {
        r.trajectory.push_back(TrajectoryRecord{st.state, st.action, inst.action_names.at(st.action), st.reward, st.next,
                                                inst.cell_of_state.at(st.state), inst.cell_of_state.at(st.next)});
    }
    r.discounted_return = traj.discounted_return;
    r.reached_terminal = traj.reached_terminal;
    const StateId final_state = traj.steps.empty() ? mdp.initial_state : traj.steps.back().next;
    for (std::size_t k = 0; k < inst.flag_names.size(); ++k) {
        r.terminal_flags[inst.flag_names[k]] = inst.flags[final_state][k];
    }
    for (const auto& m : inst.agents) r.agent_values.push_back({m.name(), m.agent_id(), m.expected_value(final_state)});
    if (inst.initiation) {
        r.agent_values.push_back({"option_agency_bonus", 0, option_agency_bonus(*inst.initiation, final_state)});
    }
    r.duration_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    if (!r.converged) r.error = "solver did not converge";
    return r;
}

struct SweepPoint {
    std::string label;
    ExperimentConfig config;
};

/// Cartesian product of the sweep axes; each axis is visited in ascending value order.
inline std::vector<SweepPoint> expand_sweep(const ExperimentConfig& cfg) {
    if (cfg.sweep.empty()) throw InputError("config has no sweep");
    std::vector<SweepPoint> points{{"", cfg}};
    for (const SweepAxis& axis : cfg.sweep) {
        if (axis.values.empty()) throw InputError("sweep axis '" + axis.parameter + "' has no values");
        std::vector<double> values = axis.values;
        std::stable_sort(values.begin(), values.end());
        const auto field = axis.parameter.substr(axis.parameter.find('.') + 1);
        std::vector<SweepPoint> next;
        for (const SweepPoint& p : points) {
            for (double v : values) {
                std::string label = p.label.empty() ? "" : p.label + " ";
                next.push_back({label + field + "=" + format_number(v), with_parameter(p.config, axis.parameter, v)});
            }
        }
        points = std::move(next);
    }
    return points;
}

/// Runs every sweep point. Rows are independent; with jobs > 1 they are
/// spread over threads and the output is the same as a sequential run. A row
/// that throws is reported through its error field.
inline std::vector<RunResult> run_sweep(const std::vector<SweepPoint>& points, unsigned jobs = 1) {
    std::vector<RunResult> rows(points.size());
    auto run_row = [&](std::size_t i) {
        try {
            rows[i] = run_experiment(points[i].config, points[i].label);
        } catch (const std::exception& e) {
            rows[i] = RunResult{};
            rows[i].config = config_to_json(points[i].config);
            rows[i].label = points[i].label;
            rows[i].error = e.what();
        }
    };
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(points.size())));
    if (jobs == 1) {
        for (std::size_t i = 0; i < points.size(); ++i) run_row(i);
        return rows;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    for (unsigned w = 0; w < jobs; ++w) {
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < points.size(); i = next++) run_row(i);
        });
    }
    for (auto& t : workers) t.join();
    return rows;
}

inline json sweep_to_json(const std::vector<RunResult>& rows) {
    json out = {{"schema_version", kSchemaVersion}, {"kind", "sweep_result"}, {"rows", json::array()}};
    for (const auto& r : rows) out["rows"].push_back(to_json(r));
    return out;
}

inline std::string sweep_table(const std::vector<RunResult>& rows) {
    std::ostringstream os;
    os << std::left << std::setw(28) << "point" << std::setw(16) << "initial_value" << std::setw(7) << "steps";
    std::vector<std::string> flags;
    for (const auto& r : rows) {
        for (const auto& [name, _] : r.terminal_flags) {
            if (std::find(flags.begin(), flags.end(), name) == flags.end()) flags.push_back(name);
        }
    }
    for (const auto& f : flags) os << std::setw(16) << f;
    os << "status\n";
    for (const auto& r : rows) {
        os << std::setw(28) << r.label << std::setw(16) << format_number(r.initial_value) << std::setw(7)
           << r.trajectory.size();
        for (const auto& f : flags) os << std::setw(16) << (r.flag(f) ? "true" : "false");
        os << (r.error.empty() ? "ok" : r.error) << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Commands

inline void write_json_file(const std::filesystem::path& path, const json& doc) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path.string() + "'");
    out << doc.dump(2) << '\n';
    if (!out) throw InputError("failed writing '" + path.string() + "'");
}

template <typename Body>
int guarded(std::ostream& err, Body&& body) {
    try {
        return body();
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitDomain;
    }
}

inline int cmd_validate(const std::filesystem::path& config_path, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const ExperimentConfig cfg = load_config(config_path);
        const ScenarioInstance inst = build_instance(cfg);
        auto violations = validate_mdp(inst.base);
        const TabularMdp augmented = augmented_mdp(inst, cfg.augmentation);
        for (auto& v : validate_mdp(augmented)) violations.push_back(std::move(v));
        for (const auto& v : violations) out << v.describe() << '\n';
        if (!violations.empty()) return static_cast<int>(kExitDomain);
        out << "ok: " << inst.kind << ", " << inst.base.num_states << " states, " << inst.base.num_actions
            << " actions, " << inst.base.terminal_states().size() << " terminal\n";
        return static_cast<int>(kExitOk);
    });
}

inline int cmd_solve(const std::filesystem::path& config_path, const std::optional<std::filesystem::path>& output,
                     std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const ExperimentConfig cfg = load_config(config_path);
        const RunResult r = run_experiment(cfg);
        if (output) write_json_file(*output, to_json(r));
        out << render(r);
        return static_cast<int>(r.converged ? kExitOk : kExitDomain);
    });
}

inline int cmd_sweep(const std::filesystem::path& config_path, const std::optional<std::filesystem::path>& output,
                     std::ostream& out, std::ostream& err, unsigned jobs = 1) {
    return guarded(err, [&] {
        const ExperimentConfig cfg = load_config(config_path);
        const auto rows = run_sweep(expand_sweep(cfg), jobs);
        if (output) write_json_file(*output, sweep_to_json(rows));
        out << sweep_table(rows);
        const bool all_ok = std::all_of(rows.begin(), rows.end(), [](const RunResult& r) { return r.error.empty(); });
        return static_cast<int>(all_ok ? kExitOk : kExitDomain);
    });
}

/// Re-renders a stored run_result (or every row of a sweep_result).
inline int cmd_render(const std::filesystem::path& result_path, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const json doc = read_json_file(result_path);
        std::vector<RunResult> rows;
        try {
            const std::string kind = doc.at("kind").get<std::string>();
            if (kind == "sweep_result") {
                for (const json& row : doc.at("rows")) rows.push_back(run_result_from_json(row));
            } else {
                rows.push_back(run_result_from_json(doc));
            }
        } catch (const json::exception& e) {
            throw InputError(std::string("malformed result file: ") + e.what());
        }
        for (std::size_t i = 0; i < rows.size(); ++i) out << (i ? "\n" : "") << render(rows[i]);
        return static_cast<int>(kExitOk);
    });
}

}  // namespace considerate
