#pragma once

#include <cmath>
#include <vector>

#include "ntn/aoi.hpp"
#include "ntn/config.hpp"
#include "ntn/grid.hpp"
#include "ntn/rng.hpp"
#include "ntn/scheduler.hpp"

namespace ntn {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double k) const { return {x * k, y * k, z * k}; }
    double norm() const { return std::sqrt(x * x + y * y + z * z); }
    bool operator==(const Vec3&) const = default;
};

/// Position in meters. Users sit at z = 0, UAVs at their altitude, the HAP at h_hap.
using EntityPose = Vec3;
using Velocity = Vec3;

inline double distance(const EntityPose& a, const EntityPose& b) { return (a - b).norm(); }

/// Everything that evolves from slot to slot in one simulation run.
struct WorldState {
    int t = 0;  // next slot to be simulated
    std::vector<EntityPose> users;
    std::vector<EntityPose> uavs;
    EntityPose hap;

    TaskLedger ledger;
    AoiTracker aoi;

    // Last slot's CPU bookkeeping, part of the agents' observations.
    std::vector<double> uav_cycles;        // C^u_usage
    double hap_cycles = 0.0;               // C^HAP_usage
    Grid2<double> uav_task_cycles;         // (U, M*S)
    std::vector<double> hap_task_cycles;   // M*S
    Grid2<double> prev_uav_remnant;        // (U, M*S), O^u_{m,s}(t-1)

    Rng mobility_rng;
    Rng task_rng;

    bool operator==(const WorldState&) const = default;
};

/// Users uniform in the area; UAVs uniform in the users' bounding box and the
/// altitude band, resampled (up to kPlacementAttempts times) until all pairs
/// are d_min apart.
/// Every user starts with its first task active at slot 0.
WorldState init_world(const ScenarioConfig& cfg);

inline constexpr int kPlacementAttempts = 1000;

/// Gaussian random-walk step for every user (std user_speed_std per axis), clamped to the area.
void move_users(WorldState& w, const ScenarioConfig& cfg);

/// Axis-aligned bounding box of the users' horizontal positions.
struct UserBox {
    double x_lo, x_hi, y_lo, y_hi;
};
UserBox user_box(const std::vector<EntityPose>& users);

/// Point reachable from `pose` within v_max that lies in the box and altitude
/// band and is closest to `target` along the segment from the box projection of
/// `pose`. When the box is out of reach, moves v_max straight toward it.
EntityPose project_move(const EntityPose& pose, const EntityPose& target, const UserBox& box,
                        const ScenarioConfig& cfg);

/// One slot of UAV flight. Speed is capped at v_max and the candidate projected
/// with project_move; a candidate closer than d_min to another UAV is rejected.
/// On rejection the UAV stays put, pulled into the box when that is itself
/// collision free.
EntityPose move_uav(const EntityPose& pose, const Velocity& velocity, int self,
                    const std::vector<EntityPose>& all_uavs, const std::vector<EntityPose>& users,
                    const ScenarioConfig& cfg);

/// Serialized form used for determinism checks (bitwise comparison).
std::string serialize(const WorldState& w);

}  // namespace ntn
