#pragma once

#include <span>
#include <vector>

namespace ntn {

/// A task of `user` generated at slot `gen_slot` that finished processing this slot.
struct Completion {
    int user = 0;
    int task = 0;
    int gen_slot = 0;
    bool operator==(const Completion&) const = default;
};

/// Per-user Age of Information.
///
/// The age grows by one every slot and drops to `t - F` when the task generated
/// at slot F completes. `pending_gen[m]` remembers F for the task currently in
/// flight, or -1 when the user has nothing outstanding.
struct AoiTracker {
    std::vector<long> age;
    std::vector<int> pending_gen;
    double cumulative = 0.0;  // sum over processed slots and users of A_m(t)
    long slots = 0;

    explicit AoiTracker(int num_users = 0) : age(num_users, 0), pending_gen(num_users, -1) {}

    int num_users() const { return static_cast<int>(age.size()); }
    /// Record that user `m` now has a task generated at `gen_slot` in flight.
    void on_generate(int m, int gen_slot);
    double mean_age() const;

    bool operator==(const AoiTracker&) const = default;
};

/// Advance every user's age to slot `t`. Throws ConsistencyError on a completion
/// for a user with no task in flight or whose generation slot does not match.
void update_aoi(AoiTracker& tracker, std::span<const Completion> completions, int t);

/// r_t = -(1/M) sum_m A_m(t).
double reward(const AoiTracker& tracker);

}  // namespace ntn
