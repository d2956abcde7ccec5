#include "ntn/baselines.hpp"

#include <fmt/format.h>

#include "ntn/errors.hpp"

namespace ntn {

std::string to_string(PolicyKind kind) {
    switch (kind) {
        case PolicyKind::RandomFeasible: return "random_feasible";
        case PolicyKind::FullPower: return "full_power";
        case PolicyKind::FixedTask: return "fixed_task";
        case PolicyKind::Learned: return "learned";
    }
    return "?";
}

PolicyKind policy_from_string(const std::string& name) {
    if (name == "random_feasible") return PolicyKind::RandomFeasible;
    if (name == "full_power") return PolicyKind::FullPower;
    if (name == "fixed_task") return PolicyKind::FixedTask;
    if (name == "learned") return PolicyKind::Learned;
    throw ConfigError(fmt::format("unknown policy '{}'", name));
}

std::vector<std::vector<double>> random_raw_action(Rng& rng, const ScenarioConfig& cfg) {
    std::vector<std::vector<double>> raw(num_agents(cfg));
    for (int i = 0; i < num_agents(cfg); ++i) {
        raw[i].resize(action_size(cfg, i));
        for (double& x : raw[i]) x = 2.0 * uniform01(rng) - 1.0;
    }
    return raw;
}

JointAction random_feasible_policy(Rng& rng, const ScenarioConfig& cfg) {
    const auto raw = random_raw_action(rng, cfg);
    return decode_action(raw, cfg);
}

JointAction full_power_policy(JointAction base, const ScenarioConfig& cfg) {
    for (UavAction& ua : base.uavs) {
        for (std::size_t m = 0; m < ua.assign.rows(); ++m) {
            int count = 0;
            for (std::size_t n = 0; n < ua.assign.cols(); ++n) count += ua.assign(m, n);
            for (std::size_t n = 0; n < ua.assign.cols(); ++n) {
                ua.power(m, n) = ua.assign(m, n) ? cfg.p_max_user / count : 0.0;
            }
        }
    }
    for (double& p : base.hap.backhaul_power) p = cfg.p_max_uav;
    return base;
}

ScenarioConfig fixed_task_scheduler(ScenarioConfig cfg) {
    cfg.scheduler = SchedulerKind::Fixed;
    return cfg;
}

}  // namespace ntn
