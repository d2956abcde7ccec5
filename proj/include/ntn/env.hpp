#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "ntn/channel.hpp"
#include "ntn/config.hpp"
#include "ntn/scheduler.hpp"
#include "ntn/world.hpp"

namespace ntn {

// Agent ids: 0..U-1 are the UAVs, U is the HAP.
inline int hap_agent_id(const ScenarioConfig& cfg) { return cfg.num_uavs; }
inline int num_agents(const ScenarioConfig& cfg) { return cfg.num_uavs + 1; }

/// UAV observation: 3U + 2M + 4MS + M entries.
///   [all UAV poses (x, y, z) | user positions (x, y) |
///    per task (m, s): I, C^u_{m,s}, remaining-at-user, O^u_{m,s} | AoI per user]
std::size_t uav_obs_size(const ScenarioConfig& cfg);
/// HAP observation: 3U + 3MS + M + UMS entries.
///   [all UAV poses | per task: I, C^HAP_{m,s}, O^HAP_{m,s} | AoI per user |
///    per UAV and task: O^u_{m,s}(t-1)]
std::size_t hap_obs_size(const ScenarioConfig& cfg);
/// UAV action: 3 + 2MN + MS = [velocity | K(m, n) | p(m, n) | theta(m, s)].
std::size_t uav_action_size(const ScenarioConfig& cfg);
/// HAP action: MU + MS = [backhaul power block of M entries per UAV | eta(m, s)].
std::size_t hap_action_size(const ScenarioConfig& cfg);

std::size_t obs_size(const ScenarioConfig& cfg, int agent);
std::size_t action_size(const ScenarioConfig& cfg, int agent);

/// Flat, normalized observation for one agent. Positions are divided by the
/// area extents (altitudes by h_max), CPU usage by capacity, bit counts by the
/// task size and ages by the horizon.
std::vector<double> encode_state(const WorldState& w, int agent, const ScenarioConfig& cfg);

struct UavAction {
    Velocity velocity;
    Grid2<unsigned char> assign;  // (M, N)
    Grid2<double> power;          // (M, N) watts
    std::vector<double> theta;    // M*S
};

struct HapAction {
    std::vector<double> backhaul_power;  // per UAV, watts
    std::vector<double> eta;             // M*S
};

/// Decoded, feasibility-projected actions of every agent for one slot.
struct JointAction {
    std::vector<UavAction> uavs;
    HapAction hap;
};

/// Raw actor outputs (one vector per agent, entries in [-1, 1]) to a feasible
/// JointAction. Flags are 1 for raw >= 0; continuous entries map affinely onto
/// their range. Subchannel caps keep the highest raw flags (ties to the lower
/// index); per-user power is scaled down to p_max. Throws InterfaceError on
/// wrong vector count or length.
JointAction decode_action(std::span<const std::vector<double>> raw, const ScenarioConfig& cfg);

struct StepInfo {
    Grid3<double> rates;               // (M, U, N) bit/s
    ChannelRealization channel;
    SlotOutcome outcome;
    std::vector<double> backhaul_rate;  // bit/s per UAV at the chosen power
    std::vector<EntityPose> users_at_move;  // user positions the UAV move was projected against
    int rate_shortfalls = 0;            // assigned links whose robust rate is below R_min
};

struct StepResult {
    WorldState world;
    double reward = 0.0;  // shared by every agent
    bool done = false;
    StepInfo info;
};

/// Simulate slot w.t: move UAVs, move users, realize channels, transmit, UAV CPU,
/// forward earlier remnants, HAP CPU, completions and AoI, task generation, reward.
StepResult step(WorldState w, const JointAction& action, const ScenarioConfig& cfg);

/// Episode ends at the horizon or once every task of every user is processed.
bool episode_done(const WorldState& w, const ScenarioConfig& cfg);

/// Violation counts per constraint name for one transition. Keys: C1..C6,
/// subchannel_per_user, users_per_subchannel, altitude, speed, fractions.
using ConstraintReport = std::map<std::string, int>;
ConstraintReport check_constraints(const WorldState& before, const JointAction& action, const StepResult& after,
                                   const ScenarioConfig& cfg);
int total_violations(const ConstraintReport& r);

/// Bit balance of every generated task: |user + in-flight + processed - total|
/// relative to the task size. Returns the worst case.
double worst_bit_imbalance(const TaskLedger& ledger);

/// Stateful convenience wrapper used by the training and simulation loops.
class Environment {
public:
    explicit Environment(ScenarioConfig cfg);

    void reset(std::uint64_t seed);
    const WorldState& world() const { return world_; }
    const ScenarioConfig& config() const { return cfg_; }
    std::vector<std::vector<double>> observe() const;
    /// Advances one slot and returns the shared reward.
    double step(const JointAction& action);
    const StepInfo& last_info() const { return info_; }
    bool done() const { return done_; }

private:
    ScenarioConfig cfg_;
    WorldState world_;
    StepInfo info_;
    bool done_ = false;
};

}  // namespace ntn
