#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ntn/agents.hpp"
#include "ntn/baselines.hpp"
#include "ntn/config.hpp"
#include "ntn/env.hpp"

namespace ntn {

enum class RunMode { Simulate, Train, Evaluate, Sweep };

std::string to_string(RunMode mode);
RunMode run_mode_from_string(const std::string& name);

/// Everything that determines a run's outputs.
struct RunManifest {
    Profile profile = desk_profile();
    RunMode mode = RunMode::Simulate;
    PolicyKind policy = PolicyKind::RandomFeasible;
    TrainMode algo = TrainMode::Maddpg;
    std::vector<std::uint64_t> seeds{1};
    std::string out_dir = "out";
    std::string axis;
    std::vector<double> values;
    int episodes = 1;          // simulated episodes per seed (simulate, evaluate, sweep)
    std::string checkpoint;    // trainer state used by the learned policy
    std::string resume;        // trainer state to continue from (train)
    int threads = 1;           // sweep workers
};

/// Throws ConfigError on an empty seed list, unknown axis, or missing checkpoint.
void validate(const RunManifest& m);
nlohmann::json to_json(const RunManifest& m);

inline const std::vector<std::string>& sweep_axes() {
    static const std::vector<std::string> axes{"uav_cpu",     "hap_cpu",   "user_power",  "uav_power",
                                               "subchannels", "task_size", "uncertainty", "num_users"};
    return axes;
}

/// Scenario with `axis` set to `value`.
ScenarioConfig apply_axis(ScenarioConfig cfg, const std::string& axis, double value);

/// Scenario actually simulated under a policy (fixed_task switches the scheduler).
ScenarioConfig scenario_for(const ScenarioConfig& cfg, PolicyKind policy);

/// Action source for one episode.
class Policy {
public:
    /// `learned` must outlive the policy and is required for PolicyKind::Learned.
    Policy(PolicyKind kind, const ScenarioConfig& cfg, Rng rng, const std::vector<AgentModel>* learned = nullptr);
    JointAction operator()(const WorldState& world);

private:
    PolicyKind kind_;
    ScenarioConfig cfg_;
    Rng rng_;
    const std::vector<AgentModel>* learned_;
};

struct EpisodeResult {
    int steps = 0;
    double average_aoi = 0.0;
    double total_reward = 0.0;
    int completed_tasks = 0;
    int generated_tasks = 0;
    int rate_shortfalls = 0;
    double worst_bit_imbalance = 0.0;
    int constraint_violations = 0;
};

/// Called after every slot with the state before it, the applied action and the step result.
using SlotObserver = std::function<void(const WorldState& before, const JointAction&, const StepResult&)>;

/// One episode of `cfg` from `env_seed`, policy randomness from `policy_rng`.
/// Checks constraints and bit balance each slot.
EpisodeResult simulate_episode(const ScenarioConfig& cfg, PolicyKind policy, std::uint64_t env_seed, Rng policy_rng,
                               const std::vector<AgentModel>* learned = nullptr, const SlotObserver& observer = {});

/// Seeds used for the `episode`-th episode of run seed `seed`.
std::uint64_t simulation_env_seed(std::uint64_t seed, int episode);
Rng simulation_policy_rng(std::uint64_t seed, int episode);

struct BootstrapCi {
    double mean = 0.0;
    double low = 0.0;
    double high = 0.0;
};
/// Percentile bootstrap (95%) of the mean over `samples`.
BootstrapCi bootstrap_mean_ci(const std::vector<double>& samples, int resamples, Rng& rng);

/// Training state plus the learning curve so far; what --resume reads.
struct TrainingCheckpoint {
    Trainer trainer;
    std::vector<EpisodeRecord> history;
};
/// Writes `path` (JSON) and `path` + ".buffer" (replay contents, raw doubles).
void save_checkpoint(const TrainingCheckpoint& c, const std::string& path);
TrainingCheckpoint load_checkpoint(const std::string& path);

void cmd_simulate(const RunManifest& m);
void cmd_train(const RunManifest& m);
void cmd_evaluate(const RunManifest& m);
void cmd_sweep(const RunManifest& m);
void run(const RunManifest& m);

}  // namespace ntn
