#include "ntn/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "ntn/errors.hpp"
#include "ntn/metrics.hpp"

namespace fs = std::filesystem;

namespace ntn {

std::string to_string(RunMode mode) {
    switch (mode) {
        case RunMode::Simulate: return "simulate";
        case RunMode::Train: return "train";
        case RunMode::Evaluate: return "evaluate";
        case RunMode::Sweep: return "sweep";
    }
    return "?";
}

RunMode run_mode_from_string(const std::string& name) {
    if (name == "simulate") return RunMode::Simulate;
    if (name == "train") return RunMode::Train;
    if (name == "evaluate") return RunMode::Evaluate;
    if (name == "sweep") return RunMode::Sweep;
    throw ConfigError(fmt::format("unknown mode '{}'", name));
}

void validate(const RunManifest& m) {
    validate(m.profile.scenario);
    validate(m.profile.training);
    if (m.seeds.empty()) throw ConfigError("seed list is empty");
    if (m.episodes < 0) throw ConfigError("episodes must be >= 0");
    if (m.threads < 1) throw ConfigError("threads must be >= 1");
    if (m.mode == RunMode::Sweep) {
        if (std::find(sweep_axes().begin(), sweep_axes().end(), m.axis) == sweep_axes().end()) {
            throw ConfigError(fmt::format("unknown sweep axis '{}'", m.axis));
        }
        if (m.values.empty()) throw ConfigError("sweep needs at least one value");
    }
    const bool needs_learned = m.policy == PolicyKind::Learned || m.mode == RunMode::Evaluate;
    if (needs_learned && m.checkpoint.empty()) throw ConfigError("the learned policy needs --checkpoint");
}

nlohmann::json to_json(const RunManifest& m) {
    return {{"profile", m.profile.name},
            {"scenario", to_json(m.profile.scenario)},
            {"training", to_json(m.profile.training)},
            {"mode", to_string(m.mode)},
            {"policy", to_string(m.policy)},
            {"algo", to_string(m.algo)},
            {"seeds", m.seeds},
            {"axis", m.axis},
            {"values", m.values},
            {"episodes", m.episodes},
            {"checkpoint", m.checkpoint},
            {"resume", m.resume}};
}

ScenarioConfig apply_axis(ScenarioConfig cfg, const std::string& axis, double value) {
    auto as_int = [&](const char* what) {
        if (value != std::floor(value)) throw ConfigError(fmt::format("{} must be an integer, got {}", what, value));
        return static_cast<int>(value);
    };
    if (axis == "uav_cpu") cfg.cpu_max_uav = value;
    else if (axis == "hap_cpu") cfg.cpu_max_hap = value;
    else if (axis == "user_power") cfg.p_max_user = value;
    else if (axis == "uav_power") cfg.p_max_uav = value;
    else if (axis == "subchannels") cfg.num_subchannels = as_int("subchannels");
    else if (axis == "task_size") cfg.task_size = value;
    else if (axis == "uncertainty") cfg.csi_uncertainty = value;
    else if (axis == "num_users") cfg.num_users = as_int("num_users");
    else throw ConfigError(fmt::format("unknown sweep axis '{}'", axis));
    validate(cfg);
    return cfg;
}

ScenarioConfig scenario_for(const ScenarioConfig& cfg, PolicyKind policy) {
    return policy == PolicyKind::FixedTask ? fixed_task_scheduler(cfg) : cfg;
}

Policy::Policy(PolicyKind kind, const ScenarioConfig& cfg, Rng rng, const std::vector<AgentModel>* learned)
    : kind_(kind), cfg_(cfg), rng_(std::move(rng)), learned_(learned) {
    if (kind_ == PolicyKind::Learned && !learned_) throw PreconditionError("learned policy without networks");
}

JointAction Policy::operator()(const WorldState& world) {
    std::vector<std::vector<double>> raw;
    if (learned_) {
        std::vector<std::vector<double>> obs;
        for (int i = 0; i < num_agents(cfg_); ++i) obs.push_back(encode_state(world, i, cfg_));
        raw = greedy_actions(*learned_, obs);
    } else {
        raw = random_raw_action(rng_, cfg_);
    }
    JointAction a = decode_action(raw, cfg_);
    if (kind_ == PolicyKind::FullPower) a = full_power_policy(std::move(a), cfg_);
    return a;
}

std::uint64_t simulation_env_seed(std::uint64_t seed, int episode) {
    return episode_seed(seed, static_cast<std::uint64_t>(episode));
}

Rng simulation_policy_rng(std::uint64_t seed, int episode) {
    return make_stream(seed, Stream::Policy, static_cast<std::uint64_t>(episode));
}

EpisodeResult simulate_episode(const ScenarioConfig& cfg, PolicyKind policy, std::uint64_t env_seed, Rng policy_rng,
                               const std::vector<AgentModel>* learned, const SlotObserver& observer) {
    ScenarioConfig c = cfg;
    c.rng_seed = env_seed;
    Policy choose(policy, c, std::move(policy_rng), policy == PolicyKind::Learned ? learned : nullptr);
    WorldState w = init_world(c);
    EpisodeResult res;
    bool done = episode_done(w, c);
    while (!done) {
        const JointAction a = choose(w);
        StepResult r = step(w, a, c);
        res.constraint_violations += total_violations(check_constraints(w, a, r, c));
        res.worst_bit_imbalance = std::max(res.worst_bit_imbalance, worst_bit_imbalance(r.world.ledger));
        res.rate_shortfalls += r.info.rate_shortfalls;
        res.total_reward += r.reward;
        ++res.steps;
        if (observer) observer(w, a, r);
        done = r.done;
        w = std::move(r.world);
    }
    res.average_aoi = w.aoi.slots ? w.aoi.cumulative / (static_cast<double>(w.aoi.slots) * c.num_users) : 0.0;
    res.completed_tasks = w.ledger.completed_count();
    for (int m = 0; m < c.num_users; ++m) res.generated_tasks += w.ledger.generated_count(m);
    return res;
}

BootstrapCi bootstrap_mean_ci(const std::vector<double>& samples, int resamples, Rng& rng) {
    BootstrapCi ci;
    if (samples.empty()) return ci;
    double sum = 0.0;
    for (double x : samples) sum += x;
    ci.mean = sum / samples.size();
    std::uniform_int_distribution<std::size_t> pick(0, samples.size() - 1);
    std::vector<double> means(resamples);
    for (double& mean : means) {
        double s = 0.0;
        for (std::size_t k = 0; k < samples.size(); ++k) s += samples[pick(rng)];
        mean = s / samples.size();
    }
    std::sort(means.begin(), means.end());
    auto quantile = [&](double q) {
        const double pos = q * (means.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, means.size() - 1);
        return means[lo] + (pos - lo) * (means[hi] - means[lo]);
    };
    ci.low = quantile(0.025);
    ci.high = quantile(0.975);
    return ci;
}

// ---------------------------------------------------------------- checkpoints

namespace {

nlohmann::json record_to_json(const EpisodeRecord& r) {
    return {r.episode,         r.steps,     r.total_reward,        r.average_aoi,        r.critic_loss,
            r.actor_objective, r.noise_std, r.completed_tasks, r.parameter_exchanges, r.observation_shares};
}

EpisodeRecord record_from_json(const nlohmann::json& j) {
    EpisodeRecord r;
    r.episode = j[0].get<int>();
    r.steps = j[1].get<int>();
    r.total_reward = j[2].get<double>();
    r.average_aoi = j[3].get<double>();
    r.critic_loss = j[4].get<double>();
    r.actor_objective = j[5].get<double>();
    r.noise_std = j[6].get<double>();
    r.completed_tasks = j[7].get<int>();
    r.parameter_exchanges = j[8].get<long>();
    r.observation_shares = j[9].get<long>();
    return r;
}

}  // namespace

void save_checkpoint(const TrainingCheckpoint& c, const std::string& path) {
    nlohmann::json doc = c.trainer.to_json();
    nlohmann::json history = nlohmann::json::array();
    for (const auto& r : c.history) history.push_back(record_to_json(r));
    doc["history"] = history;
    doc["buffer_file"] = fs::path(path).filename().string() + ".buffer";
    write_json(path, doc);
    std::ofstream os(path + ".buffer", std::ios::binary);
    if (!os) throw InterfaceError(fmt::format("cannot write {}.buffer", path));
    c.trainer.buffer().write_binary(os);
}

TrainingCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw InterfaceError(fmt::format("cannot read {}", path));
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw InterfaceError(fmt::format("{}: {}", path, e.what()));
    }
    const fs::path buffer_path = fs::path(path).parent_path() / doc.at("buffer_file").get<std::string>();
    std::ifstream bs(buffer_path, std::ios::binary);
    if (!bs) throw InterfaceError(fmt::format("cannot read {}", buffer_path.string()));
    TrainingCheckpoint c{Trainer::from_json(doc, ReplayBuffer::read_binary(bs)), {}};
    for (const auto& r : doc.at("history")) c.history.push_back(record_from_json(r));
    return c;
}

// ---------------------------------------------------------------- commands

namespace {

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw InterfaceError(fmt::format("cannot create output directory {}", dir));
}

std::string num(double v) { return format_number(v); }
std::string num(long v) { return std::to_string(v); }
std::string num(int v) { return std::to_string(v); }
std::string num(std::uint64_t v) { return std::to_string(v); }

std::vector<std::string> trace_header(const ScenarioConfig& c) {
    std::vector<std::string> h{"seed", "episode", "t", "reward", "mean_aoi"};
    for (int m = 0; m < c.num_users; ++m) h.push_back(fmt::format("aoi_{}", m));
    for (int m = 0; m < c.num_users; ++m) h.push_back(fmt::format("rate_{}", m));
    for (int u = 0; u < c.num_uavs; ++u) h.push_back(fmt::format("uav_cycles_{}", u));
    h.push_back("hap_cycles");
    for (int u = 0; u < c.num_uavs; ++u) {
        h.push_back(fmt::format("uav_{}_x", u));
        h.push_back(fmt::format("uav_{}_y", u));
        h.push_back(fmt::format("uav_{}_z", u));
    }
    h.push_back("completions");
    return h;
}

std::vector<std::string> trace_row(std::uint64_t seed, int episode, const StepResult& r, const ScenarioConfig& c) {
    const WorldState& w = r.world;
    std::vector<std::string> row{num(seed), num(episode), num(w.t - 1), num(r.reward), num(w.aoi.mean_age())};
    for (long a : w.aoi.age) row.push_back(num(a));
    for (int m = 0; m < c.num_users; ++m) {
        double rate = 0.0;
        for (int u = 0; u < c.num_uavs; ++u) {
            for (int n = 0; n < c.num_subchannels; ++n) rate += r.info.rates(m, u, n);
        }
        row.push_back(num(rate));
    }
    for (double cyc : r.info.outcome.uav_cycles) row.push_back(num(cyc));
    row.push_back(num(r.info.outcome.hap_cycles));
    for (const auto& q : w.uavs) {
        row.push_back(num(q.x));
        row.push_back(num(q.y));
        row.push_back(num(q.z));
    }
    std::string events;
    for (const Completion& e : r.info.outcome.completions) {
        if (!events.empty()) events += ';';
        events += fmt::format("{}:{}", e.user, e.gen_slot);
    }
    row.push_back(events);
    return row;
}

const std::vector<std::string> kEpisodeHeader{"seed",           "episode",         "steps",
                                              "average_aoi",    "total_reward",    "completed_tasks",
                                              "generated_tasks", "transmission_fail", "rate_shortfalls",
                                              "constraint_violations", "worst_bit_imbalance"};

std::vector<std::string> episode_row(std::uint64_t seed, int episode, const EpisodeResult& e) {
    return {num(seed),
            num(episode),
            num(e.steps),
            num(e.average_aoi),
            num(e.total_reward),
            num(e.completed_tasks),
            num(e.generated_tasks),
            e.completed_tasks == 0 ? "1" : "0",
            num(e.rate_shortfalls),
            num(e.constraint_violations),
            num(e.worst_bit_imbalance)};
}

// Simulate/evaluate share everything but the policy source.
void simulate_runs(const RunManifest& m, const std::vector<AgentModel>* learned, PolicyKind policy) {
    ensure_dir(m.out_dir);
    const ScenarioConfig cfg = scenario_for(m.profile.scenario, policy);
    CsvWriter trace(m.out_dir + "/trace.csv", kTraceSchema, trace_header(cfg));
    CsvWriter episodes(m.out_dir + "/episodes.csv", kEpisodesSchema, kEpisodeHeader);
    nlohmann::json per_seed = nlohmann::json::array();
    double grand = 0.0;
    int runs = 0, failed = 0;
    for (std::uint64_t seed : m.seeds) {
        double seed_sum = 0.0;
        for (int e = 0; e < m.episodes; ++e) {
            const EpisodeResult r = simulate_episode(
                cfg, policy, simulation_env_seed(seed, e), simulation_policy_rng(seed, e), learned,
                [&](const WorldState&, const JointAction&, const StepResult& s) {
                    trace.row(trace_row(seed, e, s, cfg));
                });
            episodes.row(episode_row(seed, e, r));
            seed_sum += r.average_aoi;
            grand += r.average_aoi;
            ++runs;
            failed += r.completed_tasks == 0;
        }
        per_seed.push_back({{"seed", seed}, {"mean_average_aoi", m.episodes ? seed_sum / m.episodes : 0.0}});
    }
    write_json(m.out_dir + "/summary.json", {{"manifest", to_json(m)},
                                             {"episodes_run", runs},
                                             {"mean_average_aoi", runs ? grand / runs : 0.0},
                                             {"transmission_fail_runs", failed},
                                             {"per_seed", per_seed}});
}

}  // namespace

void cmd_simulate(const RunManifest& m) {
    validate(m);
    if (m.policy == PolicyKind::Learned) {
        const TrainingCheckpoint c = load_checkpoint(m.checkpoint);
        RunManifest own = m;
        own.profile.scenario = c.trainer.scenario();
        simulate_runs(own, &c.trainer.agents(), m.policy);
        return;
    }
    simulate_runs(m, nullptr, m.policy);
}

void cmd_evaluate(const RunManifest& m) {
    validate(m);
    const TrainingCheckpoint c = load_checkpoint(m.checkpoint);
    RunManifest learned = m;
    learned.policy = PolicyKind::Learned;
    // The networks fix the scenario's shape, so the checkpoint's scenario is the one evaluated.
    learned.profile.scenario = c.trainer.scenario();
    simulate_runs(learned, &c.trainer.agents(), PolicyKind::Learned);
}

void cmd_train(const RunManifest& m) {
    validate(m);
    ensure_dir(m.out_dir);
    if (!m.resume.empty() && m.seeds.size() != 1) throw ConfigError("--resume works with a single seed");
    const std::vector<std::string> header{"seed",        "episode",         "steps",     "total_reward",
                                          "average_aoi", "critic_loss",     "actor_objective", "noise_std",
                                          "completed_tasks", "parameter_exchanges", "observation_shares"};
    CsvWriter curve(m.out_dir + "/learning_curve.csv", kLearningCurveSchema, header);
    auto curve_row = [&](std::uint64_t seed, const EpisodeRecord& r) {
        curve.row({num(seed), num(r.episode), num(r.steps), num(r.total_reward), num(r.average_aoi),
                   num(r.critic_loss), num(r.actor_objective), num(r.noise_std), num(r.completed_tasks),
                   num(r.parameter_exchanges), num(r.observation_shares)});
    };
    nlohmann::json per_seed = nlohmann::json::array();
    const int total = m.profile.training.episodes;
    const int every = m.profile.training.checkpoint_every;
    const int eval_n = m.profile.training.eval_episodes;
    for (std::uint64_t seed : m.seeds) {
        const std::string dir = fmt::format("{}/checkpoints/seed_{}", m.out_dir, seed);
        ensure_dir(dir);
        TrainingCheckpoint c = m.resume.empty()
                                   ? TrainingCheckpoint{Trainer(m.profile.scenario, m.profile.training, m.algo, seed), {}}
                                   : load_checkpoint(m.resume);
        auto save_actors = [&](int episode) {
            const std::string edir = fmt::format("{}/episode_{}", dir, episode);
            ensure_dir(edir);
            for (std::size_t i = 0; i < c.trainer.agents().size(); ++i) {
                save_mlp(c.trainer.agents()[i].actor, fmt::format("{}/agent_{}_actor.json", edir, i));
            }
        };
        if (c.trainer.next_episode() == 0) save_actors(0);
        for (const auto& r : c.history) curve_row(seed, r);
        while (c.trainer.next_episode() < total) {
            const EpisodeRecord r = c.trainer.run_episode();
            c.history.push_back(r);
            curve_row(seed, r);
            if (every > 0 && c.trainer.next_episode() % every == 0) {
                save_actors(c.trainer.next_episode());
                save_checkpoint(c, dir + "/state.json");
            }
        }
        save_actors(c.trainer.next_episode());
        save_checkpoint(c, dir + "/state.json");

        // Greedy policy against the random baseline on the same held-out episodes.
        const std::uint64_t eval_seed = seed + 1000003ULL;
        double random_sum = 0.0;
        for (int e = 0; e < eval_n; ++e) {
            random_sum += simulate_episode(m.profile.scenario, PolicyKind::RandomFeasible,
                                           episode_seed(eval_seed, static_cast<std::uint64_t>(e)),
                                           simulation_policy_rng(eval_seed, e))
                              .average_aoi;
        }
        per_seed.push_back({{"seed", seed},
                            {"episodes", c.trainer.next_episode()},
                            {"greedy_average_aoi", c.trainer.evaluate(eval_seed, eval_n)},
                            {"random_average_aoi", eval_n ? random_sum / eval_n : 0.0},
                            {"parameter_exchanges", c.trainer.counters().parameter_exchanges},
                            {"observation_shares", c.trainer.counters().observation_shares},
                            {"aggregation_rounds", c.trainer.counters().rounds}});
    }
    write_json(m.out_dir + "/summary.json", {{"manifest", to_json(m)}, {"per_seed", per_seed}});
}

void cmd_sweep(const RunManifest& m) {
    validate(m);
    ensure_dir(m.out_dir);
    std::vector<AgentModel> learned;
    ScenarioConfig base = m.profile.scenario;
    if (m.policy == PolicyKind::Learned) {
        const TrainingCheckpoint c = load_checkpoint(m.checkpoint);
        learned = c.trainer.agents();
        base = c.trainer.scenario();
    }

    struct Job {
        std::size_t value_index;
        std::uint64_t seed;
        double average_aoi = 0.0;
        int completed = 0;
        int generated = 0;
    };
    std::vector<Job> jobs;
    for (std::size_t v = 0; v < m.values.size(); ++v) {
        for (std::uint64_t seed : m.seeds) jobs.push_back({v, seed});
    }
    std::vector<ScenarioConfig> point_cfg;
    for (double value : m.values) {
        point_cfg.push_back(scenario_for(apply_axis(base, m.axis, value), m.policy));
    }

    std::size_t next = 0;
    std::mutex lock;
    std::exception_ptr failure;
    auto worker = [&] {
        for (;;) {
            std::size_t k;
            {
                std::lock_guard<std::mutex> g(lock);
                if (next >= jobs.size() || failure) return;
                k = next++;
            }
            try {
                Job& j = jobs[k];
                double sum = 0.0;
                for (int e = 0; e < m.episodes; ++e) {
                    const EpisodeResult r =
                        simulate_episode(point_cfg[j.value_index], m.policy, simulation_env_seed(j.seed, e),
                                         simulation_policy_rng(j.seed, e), learned.empty() ? nullptr : &learned);
                    sum += r.average_aoi;
                    j.completed += r.completed_tasks;
                    j.generated += r.generated_tasks;
                }
                j.average_aoi = m.episodes ? sum / m.episodes : 0.0;
            } catch (...) {
                std::lock_guard<std::mutex> g(lock);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int i = 0; i < m.threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);

    CsvWriter raw(m.out_dir + "/sweep_raw.csv", kSweepRawSchema,
                  {"axis", "value", "seed", "average_aoi", "completed_tasks", "generated_tasks", "transmission_fail"});
    for (const Job& j : jobs) {
        raw.row({m.axis, num(m.values[j.value_index]), num(j.seed), num(j.average_aoi), num(j.completed),
                 num(j.generated), j.completed == 0 ? "1" : "0"});
    }
    CsvWriter summary(m.out_dir + "/sweep_summary.csv", kSweepSummarySchema,
                      {"axis", "value", "policy", "seeds", "mean_average_aoi", "ci_low", "ci_high",
                       "transmission_fail_runs", "transmission_fail"});
    nlohmann::json points = nlohmann::json::array();
    for (std::size_t v = 0; v < m.values.size(); ++v) {
        std::vector<double> samples;
        int failed = 0;
        for (const Job& j : jobs) {
            if (j.value_index != v) continue;
            samples.push_back(j.average_aoi);
            failed += j.completed == 0;
        }
        Rng boot = make_stream(m.seeds.front(), Stream::Bootstrap, v);
        const BootstrapCi ci = bootstrap_mean_ci(samples, 1000, boot);
        const bool all_failed = failed == static_cast<int>(samples.size());
        summary.row({m.axis, num(m.values[v]), to_string(m.policy), num(static_cast<int>(samples.size())),
                     num(ci.mean), num(ci.low), num(ci.high), num(failed), all_failed ? "1" : "0"});
        points.push_back({{"value", m.values[v]},
                          {"mean_average_aoi", ci.mean},
                          {"ci_low", ci.low},
                          {"ci_high", ci.high},
                          {"transmission_fail_runs", failed}});
    }
    write_json(m.out_dir + "/summary.json", {{"manifest", to_json(m)}, {"points", points}});
}

void run(const RunManifest& m) {
    switch (m.mode) {
        case RunMode::Simulate: cmd_simulate(m); break;
        case RunMode::Train: cmd_train(m); break;
        case RunMode::Evaluate: cmd_evaluate(m); break;
        case RunMode::Sweep: cmd_sweep(m); break;
    }
}

}  // namespace ntn
