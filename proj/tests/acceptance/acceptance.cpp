// Acceptance criteria. Each criterion prints one PASS/FAIL line; run a single
// one with --only <name>.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "ntn/agents.hpp"
#include "ntn/channel.hpp"
#include "ntn/experiment.hpp"
#include "ntn/metrics.hpp"

using namespace ntn;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

// ------------------------------------------------------------ bit conservation

constexpr int kRandomEpisodes = 1000;

struct RandomRuns {
    int episodes = 0;
    int completed = 0;
    double worst_imbalance = 0.0;
    double worst_completed_error = 0.0;
    std::map<std::string, int> violations;
};

RandomRuns random_desk_runs() {
    const ScenarioConfig cfg = desk_profile().scenario;
    RandomRuns out;
    for (int e = 0; e < kRandomEpisodes; ++e) {
        const std::uint64_t seed = 1000 + e;
        Environment env(cfg);
        env.reset(seed);
        Policy policy(PolicyKind::RandomFeasible, cfg, simulation_policy_rng(seed, 0));
        while (!env.done()) {
            const WorldState before = env.world();
            const JointAction a = policy(before);
            const StepResult r = step(before, a, cfg);
            for (const auto& [k, v] : check_constraints(before, a, r, cfg)) out.violations[k] += v;
            out.worst_imbalance = std::max(out.worst_imbalance, worst_bit_imbalance(r.world.ledger));
            env.step(a);
        }
        const TaskLedger& L = env.world().ledger;
        for (int m = 0; m < L.num_users(); ++m)
            for (int s = 0; s < L.max_tasks(); ++s) {
                const TaskRecord& rec = L.task(m, s);
                if (!rec.completed) continue;
                ++out.completed;
                out.worst_completed_error =
                    std::max(out.worst_completed_error, std::abs(rec.processed_total() - rec.total_bits) / rec.total_bits);
            }
        ++out.episodes;
    }
    return out;
}

Verdict bit_conservation() {
    const auto t0 = std::chrono::steady_clock::now();
    const RandomRuns r = random_desk_runs();
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool ok = r.completed > 0 && r.worst_completed_error <= 1e-6 && r.worst_imbalance <= 1e-6;
    return {ok, fmt::format("{} episodes, {} completed tasks, worst completed-task error {:.3g}, worst slot "
                            "imbalance {:.3g}, {:.1f} s",
                            r.episodes, r.completed, r.worst_completed_error, r.worst_imbalance, secs)};
}

Verdict constraints() {
    const RandomRuns r = random_desk_runs();
    int total = 0;
    std::string parts;
    for (const auto& [k, v] : r.violations) {
        total += v;
        if (v) parts += fmt::format(" {}={}", k, v);
    }
    return {total == 0, fmt::format("{} episodes, {} constraint families checked each slot, {} violations{}",
                                    r.episodes, r.violations.size(), total, parts)};
}

// ------------------------------------------------------------ SIC oracle

// Direct formula: user m on one subchannel is interfered by every user decoded after it.
double direct_rate(const std::vector<double>& g, const std::vector<double>& p, int m, double bn) {
    double interference = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
        if (static_cast<int>(j) == m) continue;
        const bool later = g[j] < g[m] || (g[j] == g[m] && static_cast<int>(j) > m);
        if (later) interference += g[j] * p[j];
    }
    return bn * std::log2(1.0 + g[m] * p[m] / (interference + 1.0));
}

Verdict sic_oracle() {
    ScenarioConfig c;
    c.num_subchannels = 1;
    c.users_per_sc_cap = 3;
    c.p_max_user = 1.0;
    const double bn = c.subchannel_bandwidth();
    std::vector<double> levels_g, levels_p;
    for (int i = 0; i < 10; ++i) {
        levels_g.push_back(std::pow(10.0, -1.0 + 0.5 * i));
        levels_p.push_back(0.1 * (i + 1));
    }
    long cases = 0;
    double worst = 0.0;
    for (int users = 1; users <= 3; ++users) {
        // Every user picks a gain level and a power level from the 10x10 grid.
        long combos = 1;
        for (int k = 0; k < users; ++k) combos *= 100;
        for (long code = 0; code < combos; ++code) {
            std::vector<double> g(users), p(users);
            long rest = code;
            for (int k = 0; k < users; ++k) {
                const int cell = static_cast<int>(rest % 100);
                rest /= 100;
                g[k] = levels_g[cell / 10];
                p[k] = levels_p[cell % 10];
            }
            Grid3<unsigned char> assigned(users, 1, 1, 1);
            ChannelRealization ch;
            ch.est_gain = Grid3<double>(users, 1, 1);
            for (int k = 0; k < users; ++k) ch.est_gain(k, 0, 0) = g[k];
            ch.eff_gain = ch.est_gain;
            ch.err_std = Grid3<double>(users, 1, 1, 0.0);
            std::vector<int> who(users);
            for (int k = 0; k < users; ++k) who[k] = k;
            ch.sic = {sic_order(who, g)};
            UplinkAllocation a{assigned, Grid3<double>(users, 1, 1)};
            for (int k = 0; k < users; ++k) a.power(k, 0, 0) = p[k];
            const Grid3<double> r = noma_rates(ch, a, c);
            for (int k = 0; k < users; ++k) {
                const double want = direct_rate(g, p, k, bn);
                worst = std::max(worst, std::abs(r(k, 0, 0) - want) / std::max(want, 1e-300));
            }
            ++cases;
        }
    }
    return {worst <= 1e-12, fmt::format("{} assignments of 1-3 users, worst relative error {:.3g}", cases, worst)};
}

// ------------------------------------------------------------ outage

Verdict outage() {
    const auto t0 = std::chrono::steady_clock::now();
    const double eps = 0.05;
    const int samples = 100000;
    std::mt19937_64 rng(2024);
    std::string detail;
    bool ok = true;
    for (double sigma : {0.10, 0.20}) {
        const double est = 1.0;
        const double err = sigma * est;
        const double robust = robust_effective_gain(est, err, eps);
        std::normal_distribution<double> truth(est, err);
        int out = 0;
        for (int k = 0; k < samples; ++k) out += truth(rng) < robust;
        const double rate = static_cast<double>(out) / samples;
        ok = ok && rate <= 0.07;
        detail += fmt::format("sigma={}: outage {:.4f}; ", sigma, rate);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {ok, detail + fmt::format("{:.2f} s", secs)};
}

// ------------------------------------------------------------ gradient check

double half_square(const Mlp& net, const Eigen::MatrixXd& x) { return 0.5 * net.forward(x, nullptr).squaredNorm(); }

// Worst relative error over sampled parameters of `net`.
double check_network(Mlp net, std::mt19937_64& rng, int per_layer) {
    Eigen::MatrixXd x(net.input_size(), 2);
    std::normal_distribution<double> n01(0.0, 1.0);
    for (int i = 0; i < x.size(); ++i) x.data()[i] = 0.5 * n01(rng);
    ForwardCache cache;
    const Eigen::MatrixXd y = net.forward(x, &cache);
    const MlpGrad g = net.backward(cache, y);
    const double h = 1e-6;
    double worst = 0.0;
    auto compare = [&](double analytic, double& param) {
        const double keep = param;
        param = keep + h;
        const double up = half_square(net, x);
        param = keep - h;
        const double down = half_square(net, x);
        param = keep;
        const double numeric = (up - down) / (2 * h);
        const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
        worst = std::max(worst, std::abs(analytic - numeric) / scale);
    };
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        auto& W = net.layers()[l].weight;
        auto& b = net.layers()[l].bias;
        std::uniform_int_distribution<Eigen::Index> wi(0, W.size() - 1), bi(0, b.size() - 1);
        const int nw = static_cast<int>(std::min<Eigen::Index>(per_layer, W.size()));
        const int nb = static_cast<int>(std::min<Eigen::Index>(per_layer / 4 + 1, b.size()));
        for (int k = 0; k < nw; ++k) {
            const Eigen::Index i = W.size() <= per_layer ? k : wi(rng);
            compare(g.weight[l].data()[i], W.data()[i]);
        }
        for (int k = 0; k < nb; ++k) {
            const Eigen::Index i = b.size() <= per_layer / 4 + 1 ? k : bi(rng);
            compare(g.bias[l](i), b(i));
        }
    }
    return worst;
}

Verdict gradient_check() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(77);
    double worst = 0.0;
    int nets = 0;
    std::string shapes;
    for (const Profile& p : {desk_profile(), paper_profile()}) {
        Rng init(5);
        const auto agents = make_agents(p.scenario, p.training, init);
        std::vector<std::vector<int>> seen;
        for (const auto& a : agents) {
            for (const Mlp* net : {&a.actor, &a.critic}) {
                if (std::find(seen.begin(), seen.end(), net->sizes()) != seen.end()) continue;
                seen.push_back(net->sizes());
                worst = std::max(worst, check_network(*net, rng, 60));
                ++nets;
                std::string s;
                for (int d : net->sizes()) s += (s.empty() ? "" : "-") + std::to_string(d);
                shapes += fmt::format(" {}:{}", p.name, s);
            }
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {worst < 1e-4, fmt::format("{} network shapes, worst relative error {:.3g}, {:.1f} s;{}", nets, worst,
                                      secs, shapes)};
}

// ------------------------------------------------------------ elastic vs fixed

// Upper bound on what one user can push to one UAV in one slot: alone on a
// subchannel, full power, UAV directly overhead at minimum altitude.
double max_one_slot_rate(const ScenarioConfig& c) {
    const double g = c.beta0 / (c.h_min * c.h_min) / c.subchannel_noise_power();
    return c.sc_per_user_cap * c.subchannel_bandwidth() * std::log2(1.0 + g * c.p_max_user);
}

Verdict elastic_vs_fixed() {
    const ScenarioConfig cfg = desk_profile().scenario;
    const ScenarioConfig fixed = fixed_task_scheduler(cfg);
    int wins = 0;
    double sum_e = 0.0, sum_f = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const std::uint64_t env_seed = simulation_env_seed(seed, 0);
        const double e =
            simulate_episode(cfg, PolicyKind::RandomFeasible, env_seed, simulation_policy_rng(seed, 0)).average_aoi;
        const double f =
            simulate_episode(fixed, PolicyKind::RandomFeasible, env_seed, simulation_policy_rng(seed, 0)).average_aoi;
        wins += e <= f;
        sum_e += e;
        sum_f += f;
    }

    ScenarioConfig big = cfg;
    big.task_size = 1.01 * max_one_slot_rate(cfg);
    int fixed_done = 0, elastic_done = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const std::uint64_t env_seed = simulation_env_seed(seed, 0);
        elastic_done +=
            simulate_episode(big, PolicyKind::RandomFeasible, env_seed, simulation_policy_rng(seed, 0)).completed_tasks;
        fixed_done += simulate_episode(fixed_task_scheduler(big), PolicyKind::RandomFeasible, env_seed,
                                       simulation_policy_rng(seed, 0))
                          .completed_tasks;
    }
    const bool ok = wins >= 18 && fixed_done == 0 && elastic_done > 0;
    return {ok, fmt::format("elastic <= fixed on {}/20 seeds (means {:.3f} vs {:.3f}); task of {:.4g} bits: fixed "
                            "completed {}, elastic completed {} over 5 seeds",
                            wins, sum_e / 20, sum_f / 20, big.task_size, fixed_done, elastic_done)};
}

// ------------------------------------------------------------ uncertainty

Verdict uncertainty() {
    const ScenarioConfig base = desk_profile().scenario;
    std::vector<double> means;
    for (double sigma : {0.0, 0.1, 0.2}) {
        const ScenarioConfig cfg = apply_axis(base, "uncertainty", sigma);
        double sum = 0.0;
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            sum += simulate_episode(cfg, PolicyKind::FullPower, simulation_env_seed(seed, 0),
                                    simulation_policy_rng(seed, 0))
                       .average_aoi;
        }
        means.push_back(sum / 10);
    }
    const bool ok = means[0] <= means[1] && means[1] <= means[2];
    return {ok, fmt::format("10-seed mean AoI at sigma 0/10%/20%: {:.4f} {:.4f} {:.4f}", means[0], means[1], means[2])};
}

// ------------------------------------------------------------ learning sanity

Profile learning_profile() {
    Profile p = desk_profile();
    ScenarioConfig& s = p.scenario;
    s.num_uavs = 1;
    s.num_users = 2;
    s.num_subchannels = 2;
    s.task_size = 1e5;
    TrainingConfig& t = p.training;
    t.actor_hidden = {128, 64};
    t.critic_hidden = {128, 64};
    t.episodes = 300;
    // Per-slot rewards sit near -20 under a random policy; scaling keeps critic targets near unit size.
    t.reward_scale = 0.05;
    t.actor_lr = 1e-3;
    return p;
}

Verdict learning_sanity() {
    const auto t0 = std::chrono::steady_clock::now();
    const Profile p = learning_profile();
    const int eval_n = p.training.eval_episodes;
    std::vector<double> learned, random;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Trainer trainer(p.scenario, p.training, TrainMode::Maddpg, seed);
        while (trainer.next_episode() < p.training.episodes) trainer.run_episode();
        const std::uint64_t eval_seed = seed + 1000003ULL;
        learned.push_back(trainer.evaluate(eval_seed, eval_n));
        double sum = 0.0;
        for (int e = 0; e < eval_n; ++e) {
            sum += simulate_episode(p.scenario, PolicyKind::RandomFeasible,
                                    episode_seed(eval_seed, static_cast<std::uint64_t>(e)),
                                    simulation_policy_rng(eval_seed, e))
                       .average_aoi;
        }
        random.push_back(sum / eval_n);
    }
    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return v[v.size() / 2];
    };
    const double ml = median(learned), mr = median(random);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::string per;
    for (std::size_t k = 0; k < learned.size(); ++k) per += fmt::format(" {:.3f}/{:.3f}", learned[k], random[k]);
    return {ml <= 0.8 * mr, fmt::format("{} episodes x 5 seeds: median learned AoI {:.3f} vs random {:.3f} (ratio "
                                        "{:.3f}); per seed learned/random{}; {:.0f} s",
                                        p.training.episodes, ml, mr, ml / mr, per, secs)};
}

// ------------------------------------------------------------ FRL mechanics

Verdict frl_mechanics() {
    std::vector<std::string> failures;
    auto expect = [&](bool cond, const std::string& what) {
        if (!cond) failures.push_back(what);
    };
    Rng rng(3);
    std::vector<Mlp> nets;
    for (int k = 0; k < 4; ++k) nets.emplace_back(std::vector<int>{6, 5, 3}, Activation::Tanh, rng);

    // Uniform mean, checked parameter by parameter against a direct sum.
    {
        std::vector<Mlp> work = nets;
        std::vector<Mlp*> ptrs;
        for (auto& n : work) ptrs.push_back(&n);
        const std::vector<double> w(4, 0.25);
        frl_aggregate(ptrs, w);
        bool exact = true;
        for (std::size_t l = 0; l < nets[0].layers().size(); ++l) {
            Eigen::MatrixXd W = Eigen::MatrixXd::Zero(nets[0].layers()[l].weight.rows(), nets[0].layers()[l].weight.cols());
            for (int k = 0; k < 4; ++k) W += 0.25 * nets[k].layers()[l].weight;
            for (const auto& n : work) exact = exact && n.layers()[l].weight == W;
        }
        expect(exact, "uniform mean");

        std::vector<Mlp> again = work;
        std::vector<Mlp*> again_ptrs;
        for (auto& n : again) again_ptrs.push_back(&n);
        frl_aggregate(again_ptrs, w);
        expect(again == work, "idempotence");
    }
    {
        Mlp solo = nets[0];
        std::vector<Mlp*> one{&solo};
        const std::vector<double> w{1.0};
        frl_aggregate(one, w);
        expect(solo == nets[0], "singleton pass-through");
    }

    ScenarioConfig c = desk_profile().scenario;
    c.horizon = 25;
    TrainingConfig tc = desk_profile().training;
    tc.actor_hidden = {8};
    tc.critic_hidden = {8};
    tc.warmup = 8;
    for (TrainMode mode : {TrainMode::P2pVfrl, TrainMode::Maddpg}) {
        Trainer t(c, tc, mode, 9);
        t.run_episode();
        const long n = num_agents(c);
        const long rounds = t.counters().rounds;
        expect(rounds == (t.global_step() - 1) / tc.frl_period + 1, "round count");
        if (mode == TrainMode::P2pVfrl) {
            expect(t.counters().parameter_exchanges == n * rounds, "p2p exchanges per round");
            expect(t.counters().observation_shares == 0, "p2p shares no observations");
        } else {
            expect(t.counters().observation_shares == n * (n - 1) * rounds, "maddpg shares per round");
            expect(t.counters().parameter_exchanges == 0, "maddpg exchanges no parameters");
        }
    }
    // Right after an aggregation step the UAV actors coincide.
    {
        TrainingConfig every = tc;
        every.frl_period = 1;
        Trainer t(c, every, TrainMode::P2pVfrl, 9);
        t.run_episode();
        expect(t.agents()[0].actor == t.agents()[1].actor, "UAV actors equal after aggregation");
    }
    std::string detail = failures.empty() ? "mean, idempotence, singleton, counters (N=3: 3 and 6 per round)" : "";
    for (const auto& f : failures) detail += f + " failed; ";
    return {failures.empty(), detail};
}

// ------------------------------------------------------------ determinism

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

Verdict determinism() {
    std::vector<std::string> mismatched;
    int files = 0;
    auto twice = [&](RunManifest m, const std::vector<std::string>& outputs) {
        const std::string a = "det_" + to_string(m.mode) + "_a", b = "det_" + to_string(m.mode) + "_b";
        fs::remove_all(a);
        fs::remove_all(b);
        m.out_dir = a;
        run(m);
        m.out_dir = b;
        run(m);
        for (const auto& f : outputs) {
            ++files;
            if (slurp(a + "/" + f) != slurp(b + "/" + f) || slurp(a + "/" + f).empty()) {
                mismatched.push_back(to_string(m.mode) + "/" + f);
            }
        }
        fs::remove_all(a);
        fs::remove_all(b);
    };
    RunManifest sim;
    sim.profile.scenario.horizon = 60;
    sim.seeds = {1, 2, 3};
    sim.episodes = 2;
    twice(sim, {"trace.csv", "episodes.csv"});

    RunManifest sweep = sim;
    sweep.mode = RunMode::Sweep;
    sweep.axis = "uav_cpu";
    sweep.values = {5e8, 1e9};
    sweep.threads = 2;
    twice(sweep, {"sweep_raw.csv", "sweep_summary.csv"});

    RunManifest train = sim;
    train.mode = RunMode::Train;
    train.algo = TrainMode::P2pVfrl;
    train.seeds = {4};
    train.profile.training.episodes = 2;
    train.profile.training.eval_episodes = 2;
    train.profile.training.actor_hidden = {16};
    train.profile.training.critic_hidden = {16};
    twice(train, {"learning_curve.csv", "checkpoints/seed_4/state.json"});

    std::string detail = fmt::format("{} files compared byte for byte", files);
    for (const auto& f : mismatched) detail += "; differs: " + f;
    return {mismatched.empty(), detail};
}

const std::vector<std::pair<std::string, std::function<Verdict()>>>& criteria() {
    static const std::vector<std::pair<std::string, std::function<Verdict()>>> all{
        {"bit_conservation", bit_conservation}, {"constraints", constraints},
        {"sic_oracle", sic_oracle},             {"outage", outage},
        {"gradient_check", gradient_check},     {"elastic_vs_fixed", elastic_vs_fixed},
        {"uncertainty", uncertainty},           {"learning_sanity", learning_sanity},
        {"frl_mechanics", frl_mechanics},       {"determinism", determinism},
    };
    return all;
}

}  // namespace

int main(int argc, char** argv) {
    std::string only;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--only" && i + 1 < argc) {
            only = argv[++i];
        } else {
            std::cerr << "usage: ntn_acceptance [--only <criterion>]\n";
            return 2;
        }
    }
    int failed = 0, ran = 0;
    for (const auto& [name, fn] : criteria()) {
        if (!only.empty() && name != only) continue;
        ++ran;
        Verdict v;
        try {
            v = fn();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        std::cout << (v.pass ? "PASS " : "FAIL ") << name << ": " << v.detail << std::endl;
        failed += !v.pass;
    }
    if (ran == 0) {
        std::cerr << "no criterion named '" << only << "'\n";
        return 2;
    }
    return failed ? 1 : 0;
}
