#pragma once

#include <string>
#include <vector>

#include "ntn/config.hpp"
#include "ntn/env.hpp"
#include "ntn/rng.hpp"

namespace ntn {

enum class PolicyKind { RandomFeasible, FullPower, FixedTask, Learned };

std::string to_string(PolicyKind kind);
PolicyKind policy_from_string(const std::string& name);

/// Uniform raw vectors in [-1, 1] for every agent, in agent order.
std::vector<std::vector<double>> random_raw_action(Rng& rng, const ScenarioConfig& cfg);

/// Uniform raw action pushed through decode_action.
JointAction random_feasible_policy(Rng& rng, const ScenarioConfig& cfg);

/// Every user spreads p_max evenly over its assigned subchannels and every UAV
/// transmits to the HAP at p_max_uav. Other fields pass through.
JointAction full_power_policy(JointAction base, const ScenarioConfig& cfg);

/// The scenario with whole-task (non-separable) transfers and computation.
ScenarioConfig fixed_task_scheduler(ScenarioConfig cfg);

}  // namespace ntn
