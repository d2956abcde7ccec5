#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "ntn/config.hpp"
#include "ntn/nn.hpp"
#include "ntn/rng.hpp"

namespace ntn {

enum class TrainMode { Maddpg, P2pVfrl };
enum class AgentType { Uav, Hap };

std::string to_string(TrainMode mode);
TrainMode train_mode_from_string(const std::string& name);

/// One joint transition; every vector is the concatenation over agents in id order.
struct Transition {
    Eigen::VectorXd obs;
    Eigen::VectorXd act;
    double reward = 0.0;
    Eigen::VectorXd next_obs;
    bool done = false;
};

/// Fixed-capacity ring. Once full, each insert evicts the oldest transition.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity = 0);

    void push(Transition t);
    std::size_t size() const { return data_.size(); }
    std::size_t capacity() const { return capacity_; }
    /// Total inserts so far (the memory counter).
    long writes() const { return writes_; }
    /// i-th stored transition, oldest first.
    const Transition& at(std::size_t i) const;
    /// `count` uniform draws with replacement.
    std::vector<std::size_t> sample(Rng& rng, std::size_t count) const;

    /// Contents as raw native doubles, oldest first; sizes are written up front.
    void write_binary(std::ostream& os) const;
    static ReplayBuffer read_binary(std::istream& is);

    bool operator==(const ReplayBuffer& o) const;

private:
    std::size_t capacity_ = 0;
    long writes_ = 0;
    std::size_t head_ = 0;  // slot of the oldest transition once full
    std::vector<Transition> data_;
};

/// Actor, critic, their targets and optimizer states for one agent.
struct AgentModel {
    AgentType type = AgentType::Uav;
    Mlp actor, critic, target_actor, target_critic;
    Optimizer actor_opt, critic_opt;
};

/// Where each agent's slice sits in the joint observation and action vectors.
struct JointLayout {
    std::vector<int> obs_offset, obs_dim, act_offset, act_dim;
    int obs_total = 0;
    int act_total = 0;
    int num_agents() const { return static_cast<int>(obs_dim.size()); }
};
JointLayout joint_layout(const ScenarioConfig& cfg);

/// Actors map local observations to [-1, 1]; critics read the joint observation and joint action.
std::vector<AgentModel> make_agents(const ScenarioConfig& cfg, const TrainingConfig& tc, Rng& init_rng);

/// Greedy actor output, plus clipped Gaussian noise of std `noise_std` when `rng` is given.
std::vector<double> act(const AgentModel& agent, std::span<const double> obs, double noise_std, Rng* rng);

struct TrainStats {
    bool trained = false;  // false when the buffer is still below warm-up
    std::vector<double> critic_loss;
    std::vector<double> actor_objective;
};

/// One centralized-critic update for every agent on a shared mini-batch.
TrainStats train_step_maddpg(std::vector<AgentModel>& agents, const ReplayBuffer& buffer, const JointLayout& layout,
                             const TrainingConfig& tc, Rng& replay_rng);

/// Replace each actor with sum_j w_j * actor_j. Throws AggregationError on a
/// shape mismatch or a weight count that differs from the actor count.
void frl_aggregate(std::span<Mlp* const> actors, std::span<const double> weights);

/// Agents that may share parameters: all UAVs form one group, the HAP is alone.
std::vector<std::vector<int>> aggregation_groups(const std::vector<AgentModel>& agents);

struct OverheadCounters {
    long rounds = 0;
    long parameter_exchanges = 0;  // p2p_vfrl: N_agents per round
    long observation_shares = 0;   // maddpg: N_agents (N_agents - 1) per round
    bool operator==(const OverheadCounters&) const = default;
};

struct EpisodeRecord {
    int episode = 0;
    int steps = 0;
    double total_reward = 0.0;
    double average_aoi = 0.0;
    double critic_loss = 0.0;      // mean over trained steps and agents
    double actor_objective = 0.0;  // mean over trained steps and agents
    double noise_std = 0.0;
    int completed_tasks = 0;
    long parameter_exchanges = 0;
    long observation_shares = 0;
};

/// Algorithm driver: exploration, replay, MADDPG updates, soft target updates
/// every T_up environment steps and, in p2p_vfrl mode, grouped actor averaging
/// every T_FL environment steps. State, including RNGs, round-trips through JSON;
/// the replay buffer is stored beside it in binary form.
class Trainer {
public:
    Trainer(ScenarioConfig scenario, TrainingConfig training, TrainMode mode, std::uint64_t seed);

    /// Runs the next episode and returns its record.
    EpisodeRecord run_episode();
    int next_episode() const { return next_episode_; }
    double noise_std_for(int episode) const;

    const std::vector<AgentModel>& agents() const { return agents_; }
    std::vector<AgentModel>& agents() { return agents_; }
    const ReplayBuffer& buffer() const { return buffer_; }
    const OverheadCounters& counters() const { return counters_; }
    const ScenarioConfig& scenario() const { return scenario_; }
    const TrainingConfig& training() const { return training_; }
    TrainMode mode() const { return mode_; }
    long global_step() const { return global_step_; }

    /// Greedy evaluation on episode seeds derived from `eval_seed`; returns the mean average AoI.
    double evaluate(std::uint64_t eval_seed, int episodes) const;

    /// Full state except the replay contents, which travel separately.
    nlohmann::json to_json() const;
    static Trainer from_json(const nlohmann::json& j, ReplayBuffer buffer);

    static constexpr const char* kFormat = "ntn.trainer.v1";

private:
    Trainer() = default;
    void after_env_step();

    ScenarioConfig scenario_;
    TrainingConfig training_;
    TrainMode mode_ = TrainMode::Maddpg;
    std::uint64_t seed_ = 0;
    JointLayout layout_;
    std::vector<AgentModel> agents_;
    ReplayBuffer buffer_;
    Rng exploration_rng_;
    Rng replay_rng_;
    OverheadCounters counters_;
    long global_step_ = 0;
    int next_episode_ = 0;
};

/// Greedy actions of every agent for the given observations.
std::vector<std::vector<double>> greedy_actions(const std::vector<AgentModel>& agents,
                                                const std::vector<std::vector<double>>& obs);

nlohmann::json to_json(const AgentModel& a);
AgentModel agent_from_json(const nlohmann::json& j);

}  // namespace ntn
