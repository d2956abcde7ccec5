#include "ntn/agents.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include <fmt/format.h>

#include "ntn/env.hpp"
#include "ntn/errors.hpp"

namespace ntn {

std::string to_string(TrainMode mode) { return mode == TrainMode::Maddpg ? "maddpg" : "p2p_vfrl"; }

TrainMode train_mode_from_string(const std::string& name) {
    if (name == "maddpg") return TrainMode::Maddpg;
    if (name == "p2p_vfrl") return TrainMode::P2pVfrl;
    throw ConfigError(fmt::format("unknown training algorithm '{}'", name));
}

// ---------------------------------------------------------------- replay

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {}

void ReplayBuffer::push(Transition t) {
    if (capacity_ == 0) throw PreconditionError("replay buffer has zero capacity");
    ++writes_;
    if (data_.size() < capacity_) {
        data_.push_back(std::move(t));
        return;
    }
    data_[head_] = std::move(t);
    head_ = (head_ + 1) % capacity_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
    if (i >= data_.size()) throw PreconditionError("replay index out of range");
    return data_[(head_ + i) % data_.size()];
}

std::vector<std::size_t> ReplayBuffer::sample(Rng& rng, std::size_t count) const {
    if (data_.empty()) throw PreconditionError("sampling an empty replay buffer");
    std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
    std::vector<std::size_t> idx(count);
    for (auto& i : idx) i = pick(rng);
    return idx;
}

namespace {

template <class T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw InterfaceError("truncated replay buffer file");
    return v;
}

void put_vector(std::ostream& os, const Eigen::VectorXd& v) {
    put<std::uint64_t>(os, static_cast<std::uint64_t>(v.size()));
    os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

Eigen::VectorXd get_vector(std::istream& is) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(get<std::uint64_t>(is)));
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!is) throw InterfaceError("truncated replay buffer file");
    return v;
}

}  // namespace

void ReplayBuffer::write_binary(std::ostream& os) const {
    os.write("NTNRB001", 8);
    put<std::uint64_t>(os, capacity_);
    put<std::int64_t>(os, writes_);
    put<std::uint64_t>(os, data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i) {
        const Transition& t = at(i);
        put_vector(os, t.obs);
        put_vector(os, t.act);
        put<double>(os, t.reward);
        put_vector(os, t.next_obs);
        put<std::uint8_t>(os, t.done ? 1 : 0);
    }
}

ReplayBuffer ReplayBuffer::read_binary(std::istream& is) {
    char magic[8];
    is.read(magic, 8);
    if (!is || std::string(magic, 8) != "NTNRB001") throw InterfaceError("not a replay buffer file");
    ReplayBuffer b(get<std::uint64_t>(is));
    const auto writes = get<std::int64_t>(is);
    const auto count = get<std::uint64_t>(is);
    for (std::uint64_t i = 0; i < count; ++i) {
        Transition t;
        t.obs = get_vector(is);
        t.act = get_vector(is);
        t.reward = get<double>(is);
        t.next_obs = get_vector(is);
        t.done = get<std::uint8_t>(is) != 0;
        b.push(std::move(t));
    }
    b.writes_ = writes;
    return b;
}

bool ReplayBuffer::operator==(const ReplayBuffer& o) const {
    if (capacity_ != o.capacity_ || writes_ != o.writes_ || size() != o.size()) return false;
    for (std::size_t i = 0; i < size(); ++i) {
        const Transition &a = at(i), &b = o.at(i);
        if (a.obs != b.obs || a.act != b.act || a.reward != b.reward || a.next_obs != b.next_obs || a.done != b.done) {
            return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------- agents

JointLayout joint_layout(const ScenarioConfig& cfg) {
    JointLayout l;
    for (int i = 0; i < num_agents(cfg); ++i) {
        l.obs_offset.push_back(l.obs_total);
        l.obs_dim.push_back(static_cast<int>(obs_size(cfg, i)));
        l.obs_total += l.obs_dim.back();
        l.act_offset.push_back(l.act_total);
        l.act_dim.push_back(static_cast<int>(action_size(cfg, i)));
        l.act_total += l.act_dim.back();
    }
    return l;
}

std::vector<AgentModel> make_agents(const ScenarioConfig& cfg, const TrainingConfig& tc, Rng& init_rng) {
    const JointLayout l = joint_layout(cfg);
    std::vector<AgentModel> agents;
    for (int i = 0; i < l.num_agents(); ++i) {
        AgentModel a;
        a.type = i == hap_agent_id(cfg) ? AgentType::Hap : AgentType::Uav;
        std::vector<int> as{l.obs_dim[i]};
        as.insert(as.end(), tc.actor_hidden.begin(), tc.actor_hidden.end());
        as.push_back(l.act_dim[i]);
        std::vector<int> cs{l.obs_total + l.act_total};
        cs.insert(cs.end(), tc.critic_hidden.begin(), tc.critic_hidden.end());
        cs.push_back(1);
        a.actor = Mlp(as, Activation::Tanh, init_rng);
        a.critic = Mlp(cs, Activation::Identity, init_rng);
        a.target_actor = a.actor;
        a.target_critic = a.critic;
        a.actor_opt = Optimizer(a.actor, tc.actor_lr, tc.adaptive_moments);
        a.critic_opt = Optimizer(a.critic, tc.critic_lr, tc.adaptive_moments);
        agents.push_back(std::move(a));
    }
    return agents;
}

std::vector<double> act(const AgentModel& agent, std::span<const double> obs, double noise_std, Rng* rng) {
    if (static_cast<int>(obs.size()) != agent.actor.input_size()) {
        throw PreconditionError(
            fmt::format("observation has {} entries, actor expects {}", obs.size(), agent.actor.input_size()));
    }
    const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(obs.data(), static_cast<Eigen::Index>(obs.size()));
    Eigen::VectorXd y = agent.actor.forward(x);
    std::vector<double> out(y.data(), y.data() + y.size());
    if (rng && noise_std > 0.0) {
        for (double& v : out) v = std::clamp(v + gaussian(*rng, 0.0, noise_std), -1.0, 1.0);
    }
    return out;
}

std::vector<std::vector<double>> greedy_actions(const std::vector<AgentModel>& agents,
                                                const std::vector<std::vector<double>>& obs) {
    std::vector<std::vector<double>> out;
    for (std::size_t i = 0; i < agents.size(); ++i) out.push_back(act(agents[i], obs[i], 0.0, nullptr));
    return out;
}

TrainStats train_step_maddpg(std::vector<AgentModel>& agents, const ReplayBuffer& buffer, const JointLayout& layout,
                             const TrainingConfig& tc, Rng& replay_rng) {
    TrainStats stats;
    const std::size_t needed = static_cast<std::size_t>(std::max(tc.warmup, tc.minibatch));
    if (buffer.size() < needed) return stats;
    stats.trained = true;

    const int D = tc.minibatch;
    const int n = layout.num_agents();
    const auto idx = buffer.sample(replay_rng, D);
    Eigen::MatrixXd O(layout.obs_total, D), A(layout.act_total, D), O2(layout.obs_total, D);
    Eigen::RowVectorXd r(D), live(D);
    for (int k = 0; k < D; ++k) {
        const Transition& t = buffer.at(idx[k]);
        O.col(k) = t.obs;
        A.col(k) = t.act;
        O2.col(k) = t.next_obs;
        r(k) = t.reward;
        live(k) = t.done ? 0.0 : 1.0;
    }

    Eigen::MatrixXd A2(layout.act_total, D);
    for (int j = 0; j < n; ++j) {
        A2.middleRows(layout.act_offset[j], layout.act_dim[j]) =
            agents[j].target_actor.forward(O2.middleRows(layout.obs_offset[j], layout.obs_dim[j]), nullptr);
    }
    Eigen::MatrixXd X(layout.obs_total + layout.act_total, D), X2(layout.obs_total + layout.act_total, D);
    X << O, A;
    X2 << O2, A2;

    for (int i = 0; i < n; ++i) {
        AgentModel& ag = agents[i];

        // Critic: squared TD error against the target networks.
        const Eigen::RowVectorXd q2 = ag.target_critic.forward(X2, nullptr).row(0);
        const Eigen::RowVectorXd y = r + tc.gamma * live.cwiseProduct(q2);
        ForwardCache cc;
        const Eigen::RowVectorXd q = ag.critic.forward(X, &cc).row(0);
        const Eigen::RowVectorXd diff = q - y;
        stats.critic_loss.push_back(diff.squaredNorm() / D);
        ag.critic_opt.step(ag.critic, ag.critic.backward(cc, Eigen::MatrixXd(2.0 * diff / D)));

        // Actor: ascend Q through the agent's own action slice.
        ForwardCache ac;
        const Eigen::MatrixXd a_i = ag.actor.forward(O.middleRows(layout.obs_offset[i], layout.obs_dim[i]), &ac);
        Eigen::MatrixXd Xi = X;
        Xi.middleRows(layout.obs_total + layout.act_offset[i], layout.act_dim[i]) = a_i;
        ForwardCache qc;
        const Eigen::MatrixXd qi = ag.critic.forward(Xi, &qc);
        stats.actor_objective.push_back(qi.mean());
        Eigen::MatrixXd dx;
        ag.critic.backward(qc, Eigen::MatrixXd::Constant(1, D, -1.0 / D), &dx);
        const Eigen::MatrixXd da = dx.middleRows(layout.obs_total + layout.act_offset[i], layout.act_dim[i]);
        ag.actor_opt.step(ag.actor, ag.actor.backward(ac, da));
    }
    return stats;
}

void frl_aggregate(std::span<Mlp* const> actors, std::span<const double> weights) {
    if (actors.empty()) return;
    if (weights.size() != actors.size()) {
        throw AggregationError(fmt::format("{} weights for {} actors", weights.size(), actors.size()));
    }
    for (const Mlp* a : actors) {
        if (!a->same_shape(*actors.front())) throw AggregationError("actors in one aggregation group differ in shape");
    }
    Mlp mixed = *actors.front();
    for (std::size_t l = 0; l < mixed.layers().size(); ++l) {
        auto& out = mixed.layers()[l];
        out.weight.setZero();
        out.bias.setZero();
        for (std::size_t j = 0; j < actors.size(); ++j) {
            out.weight += weights[j] * actors[j]->layers()[l].weight;
            out.bias += weights[j] * actors[j]->layers()[l].bias;
        }
    }
    for (Mlp* a : actors) *a = mixed;
}

std::vector<std::vector<int>> aggregation_groups(const std::vector<AgentModel>& agents) {
    std::vector<std::vector<int>> groups(2);
    for (int i = 0; i < static_cast<int>(agents.size()); ++i) {
        groups[agents[i].type == AgentType::Uav ? 0 : 1].push_back(i);
    }
    std::erase_if(groups, [](const auto& g) { return g.empty(); });
    return groups;
}

nlohmann::json to_json(const AgentModel& a) {
    return {{"type", a.type == AgentType::Uav ? "uav" : "hap"},
            {"actor", to_json(a.actor)},
            {"critic", to_json(a.critic)},
            {"target_actor", to_json(a.target_actor)},
            {"target_critic", to_json(a.target_critic)},
            {"actor_opt", a.actor_opt.to_json()},
            {"critic_opt", a.critic_opt.to_json()}};
}

AgentModel agent_from_json(const nlohmann::json& j) {
    AgentModel a;
    a.type = j.at("type") == "uav" ? AgentType::Uav : AgentType::Hap;
    a.actor = mlp_from_json(j.at("actor"));
    a.critic = mlp_from_json(j.at("critic"));
    a.target_actor = mlp_from_json(j.at("target_actor"));
    a.target_critic = mlp_from_json(j.at("target_critic"));
    a.actor_opt = Optimizer::from_json(j.at("actor_opt"));
    a.critic_opt = Optimizer::from_json(j.at("critic_opt"));
    return a;
}

// ---------------------------------------------------------------- trainer

Trainer::Trainer(ScenarioConfig scenario, TrainingConfig training, TrainMode mode, std::uint64_t seed)
    : scenario_(std::move(scenario)), training_(std::move(training)), mode_(mode), seed_(seed) {
    validate(scenario_);
    validate(training_);
    layout_ = joint_layout(scenario_);
    Rng init = make_stream(seed_, Stream::NetworkInit);
    agents_ = make_agents(scenario_, training_, init);
    buffer_ = ReplayBuffer(training_.buffer_capacity);
    exploration_rng_ = make_stream(seed_, Stream::Exploration);
    replay_rng_ = make_stream(seed_, Stream::Replay);
}

double Trainer::noise_std_for(int episode) const {
    const double anneal = 0.5 * training_.episodes;
    const double frac = anneal > 0.0 ? std::min(1.0, episode / anneal) : 1.0;
    return training_.noise_start + (training_.noise_end - training_.noise_start) * frac;
}

void Trainer::after_env_step() {
    ++global_step_;
    const long k = global_step_ - 1;
    if (k % training_.target_period == 0) {
        for (auto& a : agents_) {
            soft_update(a.actor, a.target_actor, training_.tau);
            soft_update(a.critic, a.target_critic, training_.tau);
        }
    }
    if (k % training_.frl_period == 0) {
        const long n = static_cast<long>(agents_.size());
        ++counters_.rounds;
        if (mode_ == TrainMode::P2pVfrl) {
            for (const auto& group : aggregation_groups(agents_)) {
                std::vector<Mlp*> actors;
                for (int i : group) actors.push_back(&agents_[i].actor);
                const std::vector<double> w(actors.size(), 1.0 / static_cast<double>(actors.size()));
                frl_aggregate(actors, w);
            }
            counters_.parameter_exchanges += n;
        } else {
            counters_.observation_shares += n * (n - 1);
        }
    }
}

namespace {

Eigen::VectorXd concat(const std::vector<std::vector<double>>& parts, int total) {
    Eigen::VectorXd v(total);
    Eigen::Index k = 0;
    for (const auto& p : parts) {
        for (double x : p) v(k++) = x;
    }
    return v;
}

}  // namespace

EpisodeRecord Trainer::run_episode() {
    EpisodeRecord rec;
    rec.episode = next_episode_;
    rec.noise_std = noise_std_for(next_episode_);
    Environment env(scenario_);
    env.reset(episode_seed(seed_, static_cast<std::uint64_t>(next_episode_)));

    double loss_sum = 0.0, obj_sum = 0.0;
    long trained = 0;
    auto obs = env.observe();
    while (!env.done()) {
        std::vector<std::vector<double>> raw;
        for (std::size_t i = 0; i < agents_.size(); ++i) {
            raw.push_back(act(agents_[i], obs[i], rec.noise_std, &exploration_rng_));
        }
        const double r = env.step(decode_action(raw, scenario_));
        auto next = env.observe();
        buffer_.push({concat(obs, layout_.obs_total), concat(raw, layout_.act_total), r * training_.reward_scale,
                      concat(next, layout_.obs_total), env.done()});
        const TrainStats s = train_step_maddpg(agents_, buffer_, layout_, training_, replay_rng_);
        if (s.trained) {
            for (double v : s.critic_loss) loss_sum += v;
            for (double v : s.actor_objective) obj_sum += v;
            trained += static_cast<long>(s.critic_loss.size());
        }
        after_env_step();
        rec.total_reward += r;
        ++rec.steps;
        obs = std::move(next);
    }
    const auto& w = env.world();
    rec.average_aoi = w.aoi.cumulative / (static_cast<double>(w.aoi.slots) * scenario_.num_users);
    rec.completed_tasks = w.ledger.completed_count();
    rec.critic_loss = trained ? loss_sum / trained : 0.0;
    rec.actor_objective = trained ? obj_sum / trained : 0.0;
    rec.parameter_exchanges = counters_.parameter_exchanges;
    rec.observation_shares = counters_.observation_shares;
    ++next_episode_;
    return rec;
}

double Trainer::evaluate(std::uint64_t eval_seed, int episodes) const {
    double sum = 0.0;
    for (int e = 0; e < episodes; ++e) {
        Environment env(scenario_);
        env.reset(episode_seed(eval_seed, static_cast<std::uint64_t>(e)));
        while (!env.done()) env.step(decode_action(greedy_actions(agents_, env.observe()), scenario_));
        const auto& w = env.world();
        sum += w.aoi.cumulative / (static_cast<double>(w.aoi.slots) * scenario_.num_users);
    }
    return episodes > 0 ? sum / episodes : 0.0;
}

nlohmann::json Trainer::to_json() const {
    nlohmann::json agents = nlohmann::json::array();
    for (const auto& a : agents_) agents.push_back(ntn::to_json(a));
    return {{"format", kFormat},
            {"scenario", ntn::to_json(scenario_)},
            {"training", ntn::to_json(training_)},
            {"mode", to_string(mode_)},
            {"seed", seed_},
            {"agents", agents},
            {"exploration_rng", rng_to_string(exploration_rng_)},
            {"replay_rng", rng_to_string(replay_rng_)},
            {"counters",
             {{"rounds", counters_.rounds},
              {"parameter_exchanges", counters_.parameter_exchanges},
              {"observation_shares", counters_.observation_shares}}},
            {"global_step", global_step_},
            {"next_episode", next_episode_}};
}

Trainer Trainer::from_json(const nlohmann::json& j, ReplayBuffer buffer) {
    if (!j.contains("format") || j.at("format") != kFormat) throw InterfaceError("not a trainer state document");
    Trainer t;
    apply_json(t.scenario_, j.at("scenario"));
    apply_json(t.training_, j.at("training"));
    t.mode_ = train_mode_from_string(j.at("mode").get<std::string>());
    t.seed_ = j.at("seed").get<std::uint64_t>();
    t.layout_ = joint_layout(t.scenario_);
    for (const auto& a : j.at("agents")) t.agents_.push_back(agent_from_json(a));
    t.buffer_ = std::move(buffer);
    t.exploration_rng_ = rng_from_string(j.at("exploration_rng").get<std::string>());
    t.replay_rng_ = rng_from_string(j.at("replay_rng").get<std::string>());
    const auto& c = j.at("counters");
    t.counters_ = {c.at("rounds").get<long>(), c.at("parameter_exchanges").get<long>(),
                   c.at("observation_shares").get<long>()};
    t.global_step_ = j.at("global_step").get<long>();
    t.next_episode_ = j.at("next_episode").get<int>();
    return t;
}

}  // namespace ntn
