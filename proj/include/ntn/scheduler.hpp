#pragma once

#include <deque>
#include <span>
#include <vector>

#include "ntn/aoi.hpp"
#include "ntn/config.hpp"
#include "ntn/grid.hpp"
#include "ntn/rng.hpp"

namespace ntn {

struct TaskRecord {
    double total_bits = 0.0;
    double user_remaining = 0.0;
    int gen_slot = -1;
    bool generated = false;
    bool completed = false;
    int completion_slot = -1;
    double processed_uav = 0.0;
    double processed_hap = 0.0;

    double processed_total() const { return processed_uav + processed_hap; }
    bool operator==(const TaskRecord&) const = default;
};

/// Bits of one task left unprocessed at a UAV in one slot, waiting for the backhaul.
struct RemnantChunk {
    int arrival_slot = 0;
    int user = 0;
    int task = 0;
    double bits = 0.0;
    bool operator==(const RemnantChunk&) const = default;
};

/// The three remaining-task ledgers (user side, UAV side, HAP side) plus
/// per-task totals. A user has at most one task in flight at a time.
class TaskLedger {
public:
    TaskLedger() = default;
    TaskLedger(int num_users, int max_tasks, int num_uavs);

    int num_users() const { return num_users_; }
    int max_tasks() const { return max_tasks_; }
    int num_uavs() const { return static_cast<int>(uav_queue_.size()); }

    TaskRecord& task(int m, int s) { return tasks_[m * max_tasks_ + s]; }
    const TaskRecord& task(int m, int s) const { return tasks_[m * max_tasks_ + s]; }

    /// Index of the task user `m` is working through, or -1.
    int current(int m) const { return current_[m]; }
    int generated_count(int m) const { return generated_[m]; }

    /// I_{m,s}: the task exists and still has bits at the user.
    bool has_bits_to_send(int m, int s) const;

    std::deque<RemnantChunk>& uav_queue(int u) { return uav_queue_[u]; }
    const std::deque<RemnantChunk>& uav_queue(int u) const { return uav_queue_[u]; }
    double uav_remnant(int u, int m, int s) const;
    double uav_remnant_total(int u) const;

    double& hap_pool(int m, int s) { return hap_pool_[m * max_tasks_ + s]; }
    double hap_pool(int m, int s) const { return hap_pool_[m * max_tasks_ + s]; }
    double hap_remnant_total() const;

    /// Bits of (m, s) sitting in UAV queues or the HAP pool.
    double in_flight(int m, int s) const;

    /// Activate the next task of user `m` with generation slot `t`.
    void activate_next(int m, double size_bits, int t);
    /// Mark (m, s) complete at slot t, folding any sub-tolerance residue into the
    /// processed total so the bit balance stays exact.
    void complete(int m, int s, int t);

    bool all_done() const;
    int completed_count() const;

    bool operator==(const TaskLedger&) const = default;

private:
    int num_users_ = 0;
    int max_tasks_ = 0;
    std::vector<TaskRecord> tasks_;
    std::vector<int> current_;
    std::vector<int> generated_;
    std::vector<std::deque<RemnantChunk>> uav_queue_;
    std::vector<double> hap_pool_;
};

/// Relative slack on the per-task bit balance and on completion detection.
inline constexpr double kBitTolerance = 1e-6;

/// Send this slot's bits of each user's current task. `rate_bits(m, u)` is the
/// total one-slot rate from user m to UAV u (already summed over subchannels).
/// Bits go to UAVs in ascending index until the user-side remainder runs out.
/// Returns sent(m, u).
Grid2<double> transmit_user_bits(TaskLedger& ledger, const Grid2<double>& rate_bits);

/// Proportional CPU projection shared by the UAV and HAP allocators.
struct CpuAllocation {
    std::vector<double> processed;  // bits processed per entry
    std::vector<double> remnant;    // bits left per entry
    std::vector<double> cycles;     // cycles spent per entry
    double cycles_used = 0.0;
    double scale = 1.0;             // factor applied to every fraction (1 if within budget)
};

/// Process `fraction[k]` of `bits[k]` at `cycles_per_bit`; if the request exceeds
/// `capacity`, every fraction is scaled by capacity / request.
/// Throws PreconditionError when a fraction is outside [0, 1] or bits are negative.
CpuAllocation allocate_cpu(std::span<const double> bits, std::span<const double> fraction,
                           double cycles_per_bit, double capacity);

/// UAV side: `arrived` bits this slot, `theta` per task.
CpuAllocation allocate_uav_cpu(std::span<const double> arrived, std::span<const double> theta,
                               const ScenarioConfig& cfg);
/// HAP side: `pool` bits (buffered + newly forwarded), `eta` per task.
CpuAllocation allocate_hap_cpu(std::span<const double> pool, std::span<const double> eta,
                               const ScenarioConfig& cfg);

struct Forwarded {
    int user = 0;
    int task = 0;
    double bits = 0.0;
};

/// Serve a UAV's remnant queue over the backhaul, oldest first, up to
/// `capacity_bits`. Only chunks that arrived before slot `t` are eligible.
/// Returned entries are merged per (user, task); phi = 1 exactly for those.
std::vector<Forwarded> forward_to_hap(std::deque<RemnantChunk>& queue, double capacity_bits, int t);

/// One Bernoulli(task_gen_prob) draw per user per slot. Users whose current task
/// is finished and who have tasks left start a new one when their draw hits.
/// Returns the users that received a new task.
std::vector<int> maybe_generate_task(TaskLedger& ledger, AoiTracker& aoi, Rng& rng,
                                     const ScenarioConfig& cfg, int t);

/// Agent decisions the scheduler consumes for one slot.
struct SlotDecisions {
    Grid2<double> rate_bits;            // (M, U) one-slot rate per user and UAV
    std::vector<std::vector<double>> theta;  // per UAV, M*S fractions
    std::vector<double> eta;            // M*S fractions
    std::vector<double> backhaul_bits;  // per UAV, one-slot backhaul capacity if transmitting
};

struct SlotOutcome {
    Grid2<double> sent;                 // (M, U)
    Grid2<double> uav_task_cycles;      // (U, M*S)
    std::vector<double> uav_cycles;     // per UAV
    Grid2<double> forwarded;            // (U, M*S) beta
    std::vector<bool> backhaul_active;  // per UAV: phi = 1 for some task
    std::vector<double> hap_task_cycles;  // M*S
    double hap_cycles = 0.0;
    std::vector<Completion> completions;
};

/// Elastic pipeline: transmit, UAV CPU, forward earlier remnants, HAP CPU, completion.
SlotOutcome run_elastic_slot(TaskLedger& ledger, const SlotDecisions& d, const ScenarioConfig& cfg, int t);

/// Non-separable baseline: every transfer and every computation moves a whole
/// task or nothing. Fractions are read as binary (>= 0.5 means 1).
SlotOutcome run_fixed_slot(TaskLedger& ledger, const SlotDecisions& d, const ScenarioConfig& cfg, int t);

}  // namespace ntn
