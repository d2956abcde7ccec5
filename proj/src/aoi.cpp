#include "ntn/aoi.hpp"

#include <numeric>

#include <fmt/format.h>

#include "ntn/errors.hpp"

namespace ntn {

void AoiTracker::on_generate(int m, int gen_slot) {
    if (pending_gen[m] != -1) {
        throw ConsistencyError(fmt::format("user {} already has a pending task (F={})", m, pending_gen[m]));
    }
    pending_gen[m] = gen_slot;
}

double AoiTracker::mean_age() const {
    if (age.empty()) return 0.0;
    return static_cast<double>(std::accumulate(age.begin(), age.end(), 0L)) / static_cast<double>(age.size());
}

void update_aoi(AoiTracker& tracker, std::span<const Completion> completions, int t) {
    std::vector<bool> reset(tracker.age.size(), false);
    for (const Completion& c : completions) {
        if (c.user < 0 || c.user >= tracker.num_users()) {
            throw ConsistencyError(fmt::format("completion for unknown user {}", c.user));
        }
        if (tracker.pending_gen[c.user] != c.gen_slot || reset[c.user]) {
            throw ConsistencyError(fmt::format("completion for inactive task of user {} (F={})", c.user, c.gen_slot));
        }
        if (c.gen_slot > t) throw ConsistencyError("completion precedes generation");
        reset[c.user] = true;
        tracker.age[c.user] = t - c.gen_slot;
        tracker.pending_gen[c.user] = -1;
    }
    for (std::size_t m = 0; m < tracker.age.size(); ++m) {
        if (!reset[m]) tracker.age[m] += 1;
    }
    tracker.cumulative += static_cast<double>(std::accumulate(tracker.age.begin(), tracker.age.end(), 0L));
    tracker.slots += 1;
}

double reward(const AoiTracker& tracker) { return -tracker.mean_age(); }

}  // namespace ntn
