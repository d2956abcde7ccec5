#include "ntn/env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "ntn/errors.hpp"

namespace ntn {

std::size_t uav_obs_size(const ScenarioConfig& c) {
    const std::size_t M = c.num_users, S = c.max_tasks_per_user, U = c.num_uavs;
    return 2 * M + 4 * (M * S) + 3 * U + M;
}

std::size_t hap_obs_size(const ScenarioConfig& c) {
    const std::size_t M = c.num_users, S = c.max_tasks_per_user, U = c.num_uavs;
    return 3 * U + 3 * (M * S) + M + (U * M * S);
}

std::size_t uav_action_size(const ScenarioConfig& c) {
    const std::size_t M = c.num_users, S = c.max_tasks_per_user, N = c.num_subchannels;
    return 3 + 2 * (M * N) + (M * S);
}

std::size_t hap_action_size(const ScenarioConfig& c) {
    const std::size_t M = c.num_users, S = c.max_tasks_per_user, U = c.num_uavs;
    return (M * U) + (M * S);
}

std::size_t obs_size(const ScenarioConfig& cfg, int agent) {
    return agent == hap_agent_id(cfg) ? hap_obs_size(cfg) : uav_obs_size(cfg);
}

std::size_t action_size(const ScenarioConfig& cfg, int agent) {
    return agent == hap_agent_id(cfg) ? hap_action_size(cfg) : uav_action_size(cfg);
}

std::vector<double> encode_state(const WorldState& w, int agent, const ScenarioConfig& cfg) {
    const int U = cfg.num_uavs, M = cfg.num_users, S = cfg.max_tasks_per_user;
    if (agent < 0 || agent > U) throw InterfaceError(fmt::format("no agent {}", agent));
    const TaskLedger& L = w.ledger;
    const double horizon = cfg.horizon;
    const double alpha = cfg.task_size;

    std::vector<double> obs;
    obs.reserve(obs_size(cfg, agent));
    for (const auto& q : w.uavs) {
        obs.push_back(q.x / cfg.area_x);
        obs.push_back(q.y / cfg.area_y);
        obs.push_back(q.z / cfg.h_max);
    }
    auto user_bits = [&](int m, int s) {
        const TaskRecord& r = L.task(m, s);
        return (r.generated && !r.completed) ? r.user_remaining / alpha : 0.0;
    };

    if (agent < U) {
        const int u = agent;
        for (const auto& p : w.users) {
            obs.push_back(p.x / cfg.area_x);
            obs.push_back(p.y / cfg.area_y);
        }
        for (int m = 0; m < M; ++m) {
            for (int s = 0; s < S; ++s) {
                obs.push_back(L.has_bits_to_send(m, s) ? 1.0 : 0.0);
                obs.push_back(w.uav_task_cycles(u, m * S + s) / cfg.cpu_max_uav);
                obs.push_back(user_bits(m, s));
                obs.push_back(L.uav_remnant(u, m, s) / alpha);
            }
        }
        for (long a : w.aoi.age) obs.push_back(static_cast<double>(a) / horizon);
    } else {
        for (int m = 0; m < M; ++m) {
            for (int s = 0; s < S; ++s) {
                obs.push_back(L.has_bits_to_send(m, s) ? 1.0 : 0.0);
                obs.push_back(w.hap_task_cycles[m * S + s] / cfg.cpu_max_hap);
                obs.push_back(L.hap_pool(m, s) / alpha);
            }
        }
        for (long a : w.aoi.age) obs.push_back(static_cast<double>(a) / horizon);
        for (int u = 0; u < U; ++u) {
            for (int k = 0; k < M * S; ++k) obs.push_back(w.prev_uav_remnant(u, k) / alpha);
        }
    }
    if (obs.size() != obs_size(cfg, agent)) {
        throw ConsistencyError(fmt::format("observation of agent {} has {} entries, expected {}", agent, obs.size(),
                                           obs_size(cfg, agent)));
    }
    return obs;
}

namespace {

double unit_interval(double raw) { return std::clamp(0.5 * (raw + 1.0), 0.0, 1.0); }

double clip(double raw) {
    if (std::isnan(raw)) throw InterfaceError("NaN in raw action");
    return std::clamp(raw, -1.0, 1.0);
}

// Keep at most `cap` of `candidates`, highest raw score first, ties to the lower index.
std::vector<int> keep_best(std::vector<int> candidates, const std::vector<double>& score, int cap) {
    std::stable_sort(candidates.begin(), candidates.end(), [&](int a, int b) {
        if (score[a] != score[b]) return score[a] > score[b];
        return a < b;
    });
    if (static_cast<int>(candidates.size()) > cap) candidates.resize(cap);
    return candidates;
}

}  // namespace

JointAction decode_action(std::span<const std::vector<double>> raw, const ScenarioConfig& cfg) {
    const int U = cfg.num_uavs, M = cfg.num_users, S = cfg.max_tasks_per_user, N = cfg.num_subchannels;
    if (static_cast<int>(raw.size()) != U + 1) {
        throw InterfaceError(fmt::format("expected {} raw action vectors, got {}", U + 1, raw.size()));
    }
    for (int i = 0; i <= U; ++i) {
        if (raw[i].size() != action_size(cfg, i)) {
            throw InterfaceError(fmt::format("agent {} raw action has {} entries, expected {}", i, raw[i].size(),
                                             action_size(cfg, i)));
        }
    }

    JointAction a;
    a.uavs.resize(U);
    for (int u = 0; u < U; ++u) {
        const auto& r = raw[u];
        UavAction& ua = a.uavs[u];
        ua.velocity = {clip(r[0]) * cfg.v_max, clip(r[1]) * cfg.v_max, clip(r[2]) * cfg.v_max};
        const std::size_t flag0 = 3, pow0 = 3 + M * N, theta0 = 3 + 2 * M * N;

        // (a) per-user subchannel cap.
        Grid2<unsigned char> keep(M, N, 0);
        for (int m = 0; m < M; ++m) {
            std::vector<double> score(N);
            std::vector<int> wanted;
            for (int n = 0; n < N; ++n) {
                score[n] = clip(r[flag0 + m * N + n]);
                if (score[n] >= 0.0) wanted.push_back(n);
            }
            for (int n : keep_best(wanted, score, cfg.sc_per_user_cap)) keep(m, n) = 1;
        }
        // (b) per-subchannel user cap.
        ua.assign = Grid2<unsigned char>(M, N, 0);
        for (int n = 0; n < N; ++n) {
            std::vector<double> score(M);
            std::vector<int> wanted;
            for (int m = 0; m < M; ++m) {
                score[m] = clip(r[flag0 + m * N + n]);
                if (keep(m, n)) wanted.push_back(m);
            }
            for (int m : keep_best(wanted, score, cfg.users_per_sc_cap)) ua.assign(m, n) = 1;
        }
        // (c) powers on assigned subchannels, scaled to the per-user budget.
        ua.power = Grid2<double>(M, N, 0.0);
        for (int m = 0; m < M; ++m) {
            double total = 0.0;
            for (int n = 0; n < N; ++n) {
                if (!ua.assign(m, n)) continue;
                ua.power(m, n) = unit_interval(clip(r[pow0 + m * N + n])) * cfg.p_max_user;
                total += ua.power(m, n);
            }
            if (total > cfg.p_max_user) {
                const double k = cfg.p_max_user / total;
                for (int n = 0; n < N; ++n) ua.power(m, n) *= k;
            }
        }
        ua.theta.resize(M * S);
        for (int k = 0; k < M * S; ++k) ua.theta[k] = unit_interval(clip(r[theta0 + k]));
    }

    const auto& h = raw[U];
    a.hap.backhaul_power.resize(U);
    for (int u = 0; u < U; ++u) {
        double mean = 0.0;
        for (int m = 0; m < M; ++m) mean += clip(h[u * M + m]);
        a.hap.backhaul_power[u] = unit_interval(mean / M) * cfg.p_max_uav;
    }
    a.hap.eta.resize(M * S);
    for (int k = 0; k < M * S; ++k) a.hap.eta[k] = unit_interval(clip(h[M * U + k]));
    return a;
}

bool episode_done(const WorldState& w, const ScenarioConfig& cfg) {
    return w.t >= cfg.horizon || w.ledger.all_done();
}

StepResult step(WorldState w, const JointAction& action, const ScenarioConfig& cfg) {
    const int U = cfg.num_uavs, M = cfg.num_users, S = cfg.max_tasks_per_user, N = cfg.num_subchannels;
    if (static_cast<int>(action.uavs.size()) != U) throw InterfaceError("joint action has wrong UAV count");
    const int t = w.t;
    StepResult res;
    StepInfo& info = res.info;

    // (1) UAV kinematics, projected against the users' current positions.
    info.users_at_move = w.users;
    for (int u = 0; u < U; ++u) {
        w.uavs[u] = move_uav(w.uavs[u], action.uavs[u].velocity, u, w.uavs, w.users, cfg);
    }
    // (2) user mobility.
    move_users(w, cfg);

    // (3) channels and robust rates.
    UplinkAllocation alloc{Grid3<unsigned char>(M, U, N, 0), Grid3<double>(M, U, N, 0.0)};
    for (int u = 0; u < U; ++u) {
        for (int m = 0; m < M; ++m) {
            for (int n = 0; n < N; ++n) {
                alloc.assigned(m, u, n) = action.uavs[u].assign(m, n);
                alloc.power(m, u, n) = action.uavs[u].assign(m, n) ? action.uavs[u].power(m, n) : 0.0;
            }
        }
    }
    info.channel = realize_channels(w.users, w.uavs, alloc.assigned, cfg);
    info.rates = noma_rates(info.channel, alloc, cfg);

    SlotDecisions d;
    d.rate_bits = Grid2<double>(M, U, 0.0);
    for (int m = 0; m < M; ++m) {
        for (int u = 0; u < U; ++u) {
            for (int n = 0; n < N; ++n) {
                d.rate_bits(m, u) += info.rates(m, u, n);
                if (alloc.assigned(m, u, n) && info.rates(m, u, n) < cfg.rate_min) ++info.rate_shortfalls;
            }
        }
    }
    info.backhaul_rate.resize(U);
    d.backhaul_bits.resize(U);
    for (int u = 0; u < U; ++u) {
        info.backhaul_rate[u] = uav_hap_rate(w.uavs[u], w.hap, action.hap.backhaul_power[u], cfg);
        d.backhaul_bits[u] = info.backhaul_rate[u];
    }
    d.theta.resize(U);
    for (int u = 0; u < U; ++u) d.theta[u] = action.uavs[u].theta;
    d.eta = action.hap.eta;

    for (int u = 0; u < U; ++u) {
        for (int k = 0; k < M * S; ++k) w.prev_uav_remnant(u, k) = w.ledger.uav_remnant(u, k / S, k % S);
    }

    // (4)-(7) transmission, UAV CPU, forwarding, HAP CPU; completions.
    info.outcome = cfg.scheduler == SchedulerKind::Elastic ? run_elastic_slot(w.ledger, d, cfg, t)
                                                           : run_fixed_slot(w.ledger, d, cfg, t);
    w.uav_cycles = info.outcome.uav_cycles;
    w.uav_task_cycles = info.outcome.uav_task_cycles;
    w.hap_cycles = info.outcome.hap_cycles;
    w.hap_task_cycles = info.outcome.hap_task_cycles;

    // (8) AoI, (9) new tasks, (10) reward.
    update_aoi(w.aoi, info.outcome.completions, t);
    maybe_generate_task(w.ledger, w.aoi, w.task_rng, cfg, t);
    res.reward = reward(w.aoi);

    w.t = t + 1;
    res.done = episode_done(w, cfg);
    res.world = std::move(w);
    return res;
}

ConstraintReport check_constraints(const WorldState& before, const JointAction& action, const StepResult& after,
                                   const ScenarioConfig& cfg) {
    const int U = cfg.num_uavs, M = cfg.num_users, N = cfg.num_subchannels;
    constexpr double rel = 1e-12;
    const double pos_tol = 1e-9;
    ConstraintReport r{{"C1", 0},  {"C2", 0},       {"C3", 0},
                       {"C4", 0},  {"C5", 0},       {"C6", 0},
                       {"subchannel_per_user", 0}, {"users_per_subchannel", 0},
                       {"altitude", 0}, {"speed", 0}, {"fractions", 0}};
    const auto& q0 = before.uavs;
    const auto& q1 = after.world.uavs;

    for (int a = 0; a < U; ++a) {
        for (int b = a + 1; b < U; ++b) {
            if (distance(q1[a], q1[b]) < cfg.d_min && distance(q0[a], q0[b]) >= cfg.d_min) ++r["C1"];
        }
    }
    const UserBox box = user_box(after.info.users_at_move);
    for (int u = 0; u < U; ++u) {
        const auto& q = q1[u];
        if (q.x < box.x_lo - pos_tol || q.x > box.x_hi + pos_tol || q.y < box.y_lo - pos_tol ||
            q.y > box.y_hi + pos_tol) {
            ++r["C2"];
        }
        if (q.z < cfg.h_min - pos_tol || q.z > cfg.h_max + pos_tol) ++r["altitude"];
        if (distance(q, q0[u]) > cfg.v_max * (1.0 + rel) + pos_tol) ++r["speed"];
    }

    for (int u = 0; u < U; ++u) {
        const UavAction& ua = action.uavs[u];
        for (int m = 0; m < M; ++m) {
            int count = 0;
            double p = 0.0;
            for (int n = 0; n < N; ++n) {
                if (ua.assign(m, n)) {
                    ++count;
                    p += ua.power(m, n);
                }
            }
            if (count > cfg.sc_per_user_cap) ++r["subchannel_per_user"];
            if (p > cfg.p_max_user * (1.0 + rel)) ++r["C3"];
        }
        for (int n = 0; n < N; ++n) {
            int count = 0;
            for (int m = 0; m < M; ++m) count += ua.assign(m, n);
            if (count > cfg.users_per_sc_cap) ++r["users_per_subchannel"];
        }
        for (double th : ua.theta) {
            if (!(th >= 0.0 && th <= 1.0)) ++r["fractions"];
        }
        const bool active = after.info.outcome.backhaul_active[u];
        if (active && action.hap.backhaul_power[u] > cfg.p_max_uav * (1.0 + rel)) ++r["C4"];
        if (after.info.outcome.uav_cycles[u] > cfg.cpu_max_uav * (1.0 + rel)) ++r["C5"];
    }
    for (double e : action.hap.eta) {
        if (!(e >= 0.0 && e <= 1.0)) ++r["fractions"];
    }
    if (after.info.outcome.hap_cycles > cfg.cpu_max_hap * (1.0 + rel)) ++r["C6"];
    return r;
}

int total_violations(const ConstraintReport& r) {
    int n = 0;
    for (const auto& [k, v] : r) n += v;
    return n;
}

double worst_bit_imbalance(const TaskLedger& L) {
    double worst = 0.0;
    for (int m = 0; m < L.num_users(); ++m) {
        for (int s = 0; s < L.max_tasks(); ++s) {
            const TaskRecord& r = L.task(m, s);
            if (!r.generated) continue;
            const double balance = r.user_remaining + L.in_flight(m, s) + r.processed_total() - r.total_bits;
            worst = std::max(worst, std::abs(balance) / r.total_bits);
        }
    }
    return worst;
}

Environment::Environment(ScenarioConfig cfg) : cfg_(std::move(cfg)) { reset(cfg_.rng_seed); }

void Environment::reset(std::uint64_t seed) {
    ScenarioConfig c = cfg_;
    c.rng_seed = seed;
    world_ = init_world(c);
    info_ = StepInfo{};
    done_ = false;
}

std::vector<std::vector<double>> Environment::observe() const {
    std::vector<std::vector<double>> out;
    for (int i = 0; i < num_agents(cfg_); ++i) out.push_back(encode_state(world_, i, cfg_));
    return out;
}

double Environment::step(const JointAction& action) {
    if (done_) throw PreconditionError("step called on a finished episode");
    StepResult r = ntn::step(std::move(world_), action, cfg_);
    world_ = std::move(r.world);
    info_ = std::move(r.info);
    done_ = r.done;
    return r.reward;
}

}  // namespace ntn
