#include "ntn/world.hpp"

#include <algorithm>
#include <sstream>

#include <fmt/format.h>

#include "ntn/errors.hpp"

namespace ntn {

std::string rng_to_string(const Rng& rng) {
    std::ostringstream os;
    os << rng;
    return os.str();
}

Rng rng_from_string(const std::string& text) {
    std::istringstream is(text);
    Rng rng;
    is >> rng;
    if (!is) throw InterfaceError("malformed RNG state");
    return rng;
}

namespace {

bool separated(const std::vector<EntityPose>& uavs, double d_min) {
    for (std::size_t a = 0; a < uavs.size(); ++a) {
        for (std::size_t b = a + 1; b < uavs.size(); ++b) {
            if (distance(uavs[a], uavs[b]) < d_min) return false;
        }
    }
    return true;
}

bool clear_of_others(const EntityPose& p, int self, const std::vector<EntityPose>& uavs, double d_min) {
    for (int k = 0; k < static_cast<int>(uavs.size()); ++k) {
        if (k != self && distance(p, uavs[k]) < d_min) return false;
    }
    return true;
}

EntityPose clamp_to_box(EntityPose p, const UserBox& box, const ScenarioConfig& cfg) {
    p.x = std::clamp(p.x, box.x_lo, box.x_hi);
    p.y = std::clamp(p.y, box.y_lo, box.y_hi);
    p.z = std::clamp(p.z, cfg.h_min, cfg.h_max);
    return p;
}

}  // namespace

WorldState init_world(const ScenarioConfig& cfg) {
    validate(cfg);
    const int U = cfg.num_uavs;
    const int M = cfg.num_users;
    const int S = cfg.max_tasks_per_user;

    WorldState w;
    Rng placement = make_stream(cfg.rng_seed, Stream::Placement);
    w.users.resize(M);
    for (auto& p : w.users) {
        p.x = uniform01(placement) * cfg.area_x;
        p.y = uniform01(placement) * cfg.area_y;
        p.z = 0.0;
    }
    // UAVs start inside the users' bounding box so the coverage constraint holds from slot 0.
    const UserBox box = user_box(w.users);
    w.uavs.resize(U);
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
        for (auto& q : w.uavs) {
            q.x = box.x_lo + uniform01(placement) * (box.x_hi - box.x_lo);
            q.y = box.y_lo + uniform01(placement) * (box.y_hi - box.y_lo);
            q.z = cfg.h_min + uniform01(placement) * (cfg.h_max - cfg.h_min);
        }
        placed = separated(w.uavs, cfg.d_min);
    }
    if (!placed) {
        throw ConfigError(fmt::format("cannot place {} UAVs at least {} m apart after {} attempts", U,
                                      cfg.d_min, kPlacementAttempts));
    }
    w.hap = {cfg.hap_x, cfg.hap_y, cfg.h_hap};

    w.ledger = TaskLedger(M, S, U);
    w.aoi = AoiTracker(M);
    for (int m = 0; m < M; ++m) {
        w.ledger.activate_next(m, cfg.task_size, 0);
        w.aoi.on_generate(m, 0);
    }
    w.uav_cycles.assign(U, 0.0);
    w.uav_task_cycles = Grid2<double>(U, M * S, 0.0);
    w.hap_task_cycles.assign(M * S, 0.0);
    w.prev_uav_remnant = Grid2<double>(U, M * S, 0.0);
    w.mobility_rng = make_stream(cfg.rng_seed, Stream::Mobility);
    w.task_rng = make_stream(cfg.rng_seed, Stream::TaskGeneration);
    return w;
}

void move_users(WorldState& w, const ScenarioConfig& cfg) {
    for (auto& p : w.users) {
        // Draw both axes even when std is zero so the stream position never depends on it.
        const double dx = gaussian(w.mobility_rng, 0.0, 1.0) * cfg.user_speed_std;
        const double dy = gaussian(w.mobility_rng, 0.0, 1.0) * cfg.user_speed_std;
        p.x = std::clamp(p.x + dx, 0.0, cfg.area_x);
        p.y = std::clamp(p.y + dy, 0.0, cfg.area_y);
    }
}

UserBox user_box(const std::vector<EntityPose>& users) {
    UserBox box{users.front().x, users.front().x, users.front().y, users.front().y};
    for (const auto& p : users) {
        box.x_lo = std::min(box.x_lo, p.x);
        box.x_hi = std::max(box.x_hi, p.x);
        box.y_lo = std::min(box.y_lo, p.y);
        box.y_hi = std::max(box.y_hi, p.y);
    }
    return box;
}

EntityPose project_move(const EntityPose& pose, const EntityPose& target, const UserBox& box,
                        const ScenarioConfig& cfg) {
    // The box and altitude band form one axis-aligned box, so clamping is the Euclidean projection.
    const EntityPose anchor = clamp_to_box(pose, box, cfg);
    const double gap = distance(anchor, pose);
    if (gap > cfg.v_max) return pose + (anchor - pose) * (cfg.v_max / gap);

    const EntityPose candidate = clamp_to_box(target, box, cfg);
    if (distance(candidate, pose) <= cfg.v_max) return candidate;

    // Distance to `pose` is convex along anchor -> candidate; keep the farthest reachable point.
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 64; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (distance(anchor + (candidate - anchor) * mid, pose) <= cfg.v_max) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return anchor + (candidate - anchor) * lo;
}

EntityPose move_uav(const EntityPose& pose, const Velocity& velocity, int self,
                    const std::vector<EntityPose>& all_uavs, const std::vector<EntityPose>& users,
                    const ScenarioConfig& cfg) {
    Velocity v = velocity;
    const double speed = v.norm();
    if (speed > cfg.v_max) v = v * (cfg.v_max / speed);

    const UserBox box = user_box(users);
    const EntityPose candidate = project_move(pose, pose + v, box, cfg);
    if (clear_of_others(candidate, self, all_uavs, cfg.d_min)) return candidate;

    const EntityPose fallback = project_move(pose, pose, box, cfg);
    if (clear_of_others(fallback, self, all_uavs, cfg.d_min)) return fallback;
    return pose;
}

std::string serialize(const WorldState& w) {
    std::ostringstream os;
    os << std::hexfloat;
    os << "t " << w.t << '\n';
    auto poses = [&](const char* tag, const std::vector<EntityPose>& v) {
        os << tag;
        for (const auto& p : v) os << ' ' << p.x << ' ' << p.y << ' ' << p.z;
        os << '\n';
    };
    poses("users", w.users);
    poses("uavs", w.uavs);
    os << "hap " << w.hap.x << ' ' << w.hap.y << ' ' << w.hap.z << '\n';
    const TaskLedger& L = w.ledger;
    for (int m = 0; m < L.num_users(); ++m) {
        os << "user " << m << " cur " << L.current(m) << " gen " << L.generated_count(m);
        for (int s = 0; s < L.max_tasks(); ++s) {
            const TaskRecord& r = L.task(m, s);
            os << " [" << r.total_bits << ' ' << r.user_remaining << ' ' << r.gen_slot << ' ' << r.completed << ' '
               << r.completion_slot << ' ' << r.processed_uav << ' ' << r.processed_hap << ' ' << L.hap_pool(m, s)
               << ']';
        }
        os << '\n';
    }
    for (int u = 0; u < L.num_uavs(); ++u) {
        os << "queue " << u;
        for (const auto& c : L.uav_queue(u)) os << " (" << c.arrival_slot << ' ' << c.user << ' ' << c.task << ' ' << c.bits << ')';
        os << '\n';
    }
    os << "aoi";
    for (long a : w.aoi.age) os << ' ' << a;
    for (int f : w.aoi.pending_gen) os << ' ' << f;
    os << ' ' << w.aoi.cumulative << ' ' << w.aoi.slots << '\n';
    os << "cpu";
    for (double c : w.uav_cycles) os << ' ' << c;
    os << ' ' << w.hap_cycles << '\n';
    os << "rng " << w.mobility_rng << '\n' << "rng " << w.task_rng << '\n';
    return os.str();
}

}  // namespace ntn
