#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ntn/errors.hpp"
#include "ntn/experiment.hpp"

namespace {

template <class T>
std::vector<T> parse_list(const std::string& text, const char* what) {
    std::vector<T> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::istringstream is(item);
        T v{};
        if (!(is >> v) || !is.eof()) throw ntn::ConfigError("bad " + std::string(what) + " entry '" + item + "'");
        out.push_back(v);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"NOMA UAV/HAP aerial computing simulator and multi-agent trainer"};

    std::string mode = "simulate", policy = "random_feasible", algo = "maddpg", profile = "desk";
    std::string config, seeds = "1", axis, values, out = "out", checkpoint, resume;
    int episodes = -1, threads = 1, train_episodes = -1;

    app.add_option("--mode", mode, "simulate | train | evaluate | sweep")->capture_default_str();
    app.add_option("--policy", policy, "random_feasible | full_power | fixed_task | learned")->capture_default_str();
    app.add_option("--algo", algo, "maddpg | p2p_vfrl (train mode)")->capture_default_str();
    app.add_option("--profile", profile, "paper | desk")->capture_default_str();
    app.add_option("--config", config, "JSON configuration overlay");
    app.add_option("--seeds", seeds, "comma-separated run seeds")->capture_default_str();
    app.add_option("--axis", axis, "sweep axis");
    app.add_option("--values", values, "comma-separated sweep values");
    app.add_option("--out", out, "output directory")->capture_default_str();
    app.add_option("--episodes", episodes, "episodes per seed (simulate/evaluate/sweep; default 1)");
    app.add_option("--train-episodes", train_episodes, "training episodes (overrides the profile)");
    app.add_option("--checkpoint", checkpoint, "trainer state for the learned policy");
    app.add_option("--resume", resume, "trainer state to continue training from");
    app.add_option("--threads", threads, "sweep worker threads")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        ntn::RunManifest m;
        if (config.empty()) {
            m.profile = ntn::profile_by_name(profile);
        } else {
            std::ifstream in(config);
            if (!in) throw ntn::ConfigError("cannot open config file '" + config + "'");
            nlohmann::json doc = nlohmann::json::parse(in);
            // The file's own base profile wins; --profile fills in when it names none.
            if (doc.is_object() && !doc.contains("profile")) doc["profile"] = profile;
            m.profile = ntn::profile_from_json(doc);
        }
        m.mode = ntn::run_mode_from_string(mode);
        m.policy = ntn::policy_from_string(policy);
        m.algo = ntn::train_mode_from_string(algo);
        m.seeds = parse_list<std::uint64_t>(seeds, "seed");
        m.axis = axis;
        m.values = parse_list<double>(values, "value");
        m.out_dir = out;
        if (episodes >= 0) m.episodes = episodes;
        if (train_episodes >= 0) m.profile.training.episodes = train_episodes;
        m.checkpoint = checkpoint;
        m.resume = resume;
        m.threads = threads;
        ntn::run(m);
    } catch (const std::exception& e) {
        std::cerr << "ntn_sim: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
