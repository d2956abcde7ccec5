#include "ntn/scheduler.hpp"

#include <algorithm>
#include <map>
#include <utility>

#include <fmt/format.h>

#include "ntn/errors.hpp"

namespace ntn {

TaskLedger::TaskLedger(int num_users, int max_tasks, int num_uavs)
    : num_users_(num_users),
      max_tasks_(max_tasks),
      tasks_(static_cast<std::size_t>(num_users) * max_tasks),
      current_(num_users, -1),
      generated_(num_users, 0),
      uav_queue_(num_uavs),
      hap_pool_(static_cast<std::size_t>(num_users) * max_tasks, 0.0) {}

bool TaskLedger::has_bits_to_send(int m, int s) const {
    const TaskRecord& rec = task(m, s);
    return rec.generated && !rec.completed && rec.user_remaining > 0.0;
}

double TaskLedger::uav_remnant(int u, int m, int s) const {
    double sum = 0.0;
    for (const RemnantChunk& c : uav_queue_[u]) {
        if (c.user == m && c.task == s) sum += c.bits;
    }
    return sum;
}

double TaskLedger::uav_remnant_total(int u) const {
    double sum = 0.0;
    for (const RemnantChunk& c : uav_queue_[u]) sum += c.bits;
    return sum;
}

double TaskLedger::hap_remnant_total() const {
    double sum = 0.0;
    for (double b : hap_pool_) sum += b;
    return sum;
}

double TaskLedger::in_flight(int m, int s) const {
    double sum = hap_pool(m, s);
    for (int u = 0; u < num_uavs(); ++u) sum += uav_remnant(u, m, s);
    return sum;
}

void TaskLedger::activate_next(int m, double size_bits, int t) {
    if (current_[m] != -1) throw ConsistencyError(fmt::format("user {} already has a task in flight", m));
    if (generated_[m] >= max_tasks_) throw ConsistencyError(fmt::format("user {} has no tasks left", m));
    const int s = generated_[m]++;
    TaskRecord& rec = task(m, s);
    rec = TaskRecord{};
    rec.total_bits = size_bits;
    rec.user_remaining = size_bits;
    rec.gen_slot = t;
    rec.generated = true;
    current_[m] = s;
}

void TaskLedger::complete(int m, int s, int t) {
    TaskRecord& rec = task(m, s);
    if (!rec.generated || rec.completed || current_[m] != s) {
        throw ConsistencyError(fmt::format("completing inactive task ({}, {})", m, s));
    }
    double residue = hap_pool(m, s);
    hap_pool(m, s) = 0.0;
    for (auto& queue : uav_queue_) {
        for (const RemnantChunk& c : queue) {
            if (c.user == m && c.task == s) residue += c.bits;
        }
        std::erase_if(queue, [&](const RemnantChunk& c) { return c.user == m && c.task == s; });
    }
    rec.processed_hap += residue;
    rec.completed = true;
    rec.completion_slot = t;
    current_[m] = -1;
}

bool TaskLedger::all_done() const {
    for (int m = 0; m < num_users_; ++m) {
        if (generated_[m] < max_tasks_ || current_[m] != -1) return false;
    }
    return true;
}

int TaskLedger::completed_count() const {
    return static_cast<int>(std::count_if(tasks_.begin(), tasks_.end(), [](const TaskRecord& r) { return r.completed; }));
}

Grid2<double> transmit_user_bits(TaskLedger& ledger, const Grid2<double>& rate_bits) {
    const int M = ledger.num_users();
    const int U = ledger.num_uavs();
    Grid2<double> sent(M, U, 0.0);
    for (int m = 0; m < M; ++m) {
        const int s = ledger.current(m);
        if (s < 0) continue;
        TaskRecord& rec = ledger.task(m, s);
        for (int u = 0; u < U && rec.user_remaining > 0.0; ++u) {
            const double rate = rate_bits(m, u);
            if (rate <= 0.0) continue;
            if (rate >= rec.user_remaining) {
                sent(m, u) = rec.user_remaining;
                rec.user_remaining = 0.0;
            } else {
                sent(m, u) = rate;
                rec.user_remaining -= rate;
            }
        }
    }
    return sent;
}

CpuAllocation allocate_cpu(std::span<const double> bits, std::span<const double> fraction,
                           double cycles_per_bit, double capacity) {
    if (bits.size() != fraction.size()) throw PreconditionError("allocate_cpu: size mismatch");
    double request = 0.0;
    for (std::size_t k = 0; k < bits.size(); ++k) {
        if (!(fraction[k] >= 0.0 && fraction[k] <= 1.0)) {
            throw PreconditionError(fmt::format("CPU fraction {} outside [0, 1]", fraction[k]));
        }
        if (!(bits[k] >= 0.0)) throw PreconditionError("allocate_cpu: negative bits");
        request += fraction[k] * cycles_per_bit * bits[k];
    }
    CpuAllocation out;
    out.scale = request > capacity ? capacity / request : 1.0;
    out.processed.resize(bits.size());
    out.remnant.resize(bits.size());
    out.cycles.resize(bits.size());
    for (std::size_t k = 0; k < bits.size(); ++k) {
        const double f = fraction[k] * out.scale;
        out.processed[k] = f * bits[k];
        out.remnant[k] = bits[k] - out.processed[k];
        out.cycles[k] = f * cycles_per_bit * bits[k];
        out.cycles_used += out.cycles[k];
    }
    return out;
}

CpuAllocation allocate_uav_cpu(std::span<const double> arrived, std::span<const double> theta,
                               const ScenarioConfig& cfg) {
    return allocate_cpu(arrived, theta, cfg.cycles_per_bit_uav, cfg.cpu_max_uav);
}

CpuAllocation allocate_hap_cpu(std::span<const double> pool, std::span<const double> eta,
                               const ScenarioConfig& cfg) {
    return allocate_cpu(pool, eta, cfg.cycles_per_bit_hap, cfg.cpu_max_hap);
}

std::vector<Forwarded> forward_to_hap(std::deque<RemnantChunk>& queue, double capacity_bits, int t) {
    std::map<std::pair<int, int>, double> merged;
    std::vector<std::pair<int, int>> order;
    double left = capacity_bits;
    while (!queue.empty() && left > 0.0) {
        RemnantChunk& head = queue.front();
        if (head.arrival_slot >= t) break;
        const double take = std::min(head.bits, left);
        const auto key = std::make_pair(head.user, head.task);
        if (!merged.contains(key)) order.push_back(key);
        merged[key] += take;
        left -= take;
        if (take >= head.bits) {
            queue.pop_front();
        } else {
            head.bits -= take;
        }
    }
    std::vector<Forwarded> out;
    for (const auto& key : order) out.push_back({key.first, key.second, merged[key]});
    return out;
}

std::vector<int> maybe_generate_task(TaskLedger& ledger, AoiTracker& aoi, Rng& rng,
                                     const ScenarioConfig& cfg, int t) {
    std::vector<int> started;
    for (int m = 0; m < ledger.num_users(); ++m) {
        const double draw = uniform01(rng);
        const bool eligible = ledger.current(m) == -1 && ledger.generated_count(m) < ledger.max_tasks();
        if (eligible && draw < cfg.task_gen_prob) {
            ledger.activate_next(m, cfg.task_size, t);
            aoi.on_generate(m, t);
            started.push_back(m);
        }
    }
    return started;
}

namespace {

SlotOutcome make_outcome(int M, int U, int S) {
    SlotOutcome out;
    out.sent = Grid2<double>(M, U, 0.0);
    out.uav_task_cycles = Grid2<double>(U, M * S, 0.0);
    out.uav_cycles.assign(U, 0.0);
    out.forwarded = Grid2<double>(U, M * S, 0.0);
    out.backhaul_active.assign(U, false);
    out.hap_task_cycles.assign(M * S, 0.0);
    return out;
}

void check_fractions(const SlotDecisions& d) {
    auto check = [](double f) {
        if (!(f >= 0.0 && f <= 1.0)) throw PreconditionError(fmt::format("CPU fraction {} outside [0, 1]", f));
    };
    for (const auto& th : d.theta) std::for_each(th.begin(), th.end(), check);
    std::for_each(d.eta.begin(), d.eta.end(), check);
}

void detect_completions(TaskLedger& ledger, SlotOutcome& out, int t) {
    for (int m = 0; m < ledger.num_users(); ++m) {
        const int s = ledger.current(m);
        if (s < 0) continue;
        const TaskRecord& rec = ledger.task(m, s);
        if (rec.user_remaining > 0.0) continue;
        if (ledger.in_flight(m, s) <= kBitTolerance * rec.total_bits) {
            out.completions.push_back({m, s, rec.gen_slot});
            ledger.complete(m, s, t);
        }
    }
}

}  // namespace

SlotOutcome run_elastic_slot(TaskLedger& ledger, const SlotDecisions& d, const ScenarioConfig& cfg, int t) {
    const int M = ledger.num_users();
    const int U = ledger.num_uavs();
    const int S = ledger.max_tasks();
    check_fractions(d);
    SlotOutcome out = make_outcome(M, U, S);

    out.sent = transmit_user_bits(ledger, d.rate_bits);

    for (int u = 0; u < U; ++u) {
        std::vector<double> arrived(M, 0.0), theta(M, 0.0);
        for (int m = 0; m < M; ++m) {
            const int s = ledger.current(m);
            if (s < 0) continue;
            arrived[m] = out.sent(m, u);
            theta[m] = d.theta[u][m * S + s];
        }
        const CpuAllocation alloc = allocate_uav_cpu(arrived, theta, cfg);
        out.uav_cycles[u] = alloc.cycles_used;
        for (int m = 0; m < M; ++m) {
            const int s = ledger.current(m);
            if (s < 0 || arrived[m] <= 0.0) continue;
            ledger.task(m, s).processed_uav += alloc.processed[m];
            out.uav_task_cycles(u, m * S + s) = alloc.cycles[m];
            if (alloc.remnant[m] > 0.0) ledger.uav_queue(u).push_back({t, m, s, alloc.remnant[m]});
        }
    }

    for (int u = 0; u < U; ++u) {
        const auto fw = forward_to_hap(ledger.uav_queue(u), d.backhaul_bits[u], t);
        for (const Forwarded& f : fw) {
            ledger.hap_pool(f.user, f.task) += f.bits;
            out.forwarded(u, f.user * S + f.task) += f.bits;
        }
        out.backhaul_active[u] = !fw.empty();
    }

    std::vector<double> pool(M * S, 0.0), eta(M * S, 0.0);
    for (int k = 0; k < M * S; ++k) {
        pool[k] = ledger.hap_pool(k / S, k % S);
        eta[k] = d.eta[k];
    }
    const CpuAllocation hap = allocate_hap_cpu(pool, eta, cfg);
    out.hap_cycles = hap.cycles_used;
    for (int k = 0; k < M * S; ++k) {
        if (pool[k] <= 0.0) continue;
        ledger.task(k / S, k % S).processed_hap += hap.processed[k];
        ledger.hap_pool(k / S, k % S) = hap.remnant[k];
        out.hap_task_cycles[k] = hap.cycles[k];
    }

    detect_completions(ledger, out, t);
    return out;
}

SlotOutcome run_fixed_slot(TaskLedger& ledger, const SlotDecisions& d, const ScenarioConfig& cfg, int t) {
    const int M = ledger.num_users();
    const int U = ledger.num_uavs();
    const int S = ledger.max_tasks();
    check_fractions(d);
    SlotOutcome out = make_outcome(M, U, S);

    // Whole task in one slot to a single UAV, or nothing.
    std::vector<int> delivered_to(M, -1);
    for (int m = 0; m < M; ++m) {
        const int s = ledger.current(m);
        if (s < 0) continue;
        TaskRecord& rec = ledger.task(m, s);
        if (rec.user_remaining < rec.total_bits) continue;
        for (int u = 0; u < U; ++u) {
            if (d.rate_bits(m, u) >= rec.total_bits) {
                out.sent(m, u) = rec.total_bits;
                rec.user_remaining = 0.0;
                delivered_to[m] = u;
                break;
            }
        }
    }

    for (int m = 0; m < M; ++m) {
        const int u = delivered_to[m];
        if (u < 0) continue;
        const int s = ledger.current(m);
        TaskRecord& rec = ledger.task(m, s);
        const double need = cfg.cycles_per_bit_uav * rec.total_bits;
        const bool wants = d.theta[u][m * S + s] >= 0.5;
        if (wants && out.uav_cycles[u] + need <= cfg.cpu_max_uav) {
            out.uav_cycles[u] += need;
            out.uav_task_cycles(u, m * S + s) = need;
            rec.processed_uav = rec.total_bits;
        } else {
            ledger.uav_queue(u).push_back({t, m, s, rec.total_bits});
        }
    }

    for (int u = 0; u < U; ++u) {
        auto& queue = ledger.uav_queue(u);
        double left = d.backhaul_bits[u];
        while (!queue.empty() && queue.front().arrival_slot < t && queue.front().bits <= left) {
            const RemnantChunk c = queue.front();
            queue.pop_front();
            left -= c.bits;
            ledger.hap_pool(c.user, c.task) += c.bits;
            out.forwarded(u, c.user * S + c.task) += c.bits;
            out.backhaul_active[u] = true;
        }
    }

    for (int k = 0; k < M * S; ++k) {
        const double pool = ledger.hap_pool(k / S, k % S);
        if (pool <= 0.0) continue;
        const double need = cfg.cycles_per_bit_hap * pool;
        if (d.eta[k] >= 0.5 && out.hap_cycles + need <= cfg.cpu_max_hap) {
            out.hap_cycles += need;
            out.hap_task_cycles[k] = need;
            ledger.task(k / S, k % S).processed_hap += pool;
            ledger.hap_pool(k / S, k % S) = 0.0;
        }
    }

    detect_completions(ledger, out, t);
    return out;
}

}  // namespace ntn
