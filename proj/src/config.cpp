#include "ntn/config.hpp"

#include <cmath>
#include <fstream>
#include <type_traits>

#include <fmt/format.h>

#include "ntn/errors.hpp"

namespace ntn {

namespace {

template <class F>
void visit_fields(ScenarioConfig& c, F&& f) {
    f("num_uavs", c.num_uavs);
    f("num_users", c.num_users);
    f("num_subchannels", c.num_subchannels);
    f("max_tasks_per_user", c.max_tasks_per_user);
    f("horizon", c.horizon);
    f("area_x", c.area_x);
    f("area_y", c.area_y);
    f("h_min", c.h_min);
    f("h_max", c.h_max);
    f("h_hap", c.h_hap);
    f("hap_x", c.hap_x);
    f("hap_y", c.hap_y);
    f("d_min", c.d_min);
    f("v_max", c.v_max);
    f("user_speed_std", c.user_speed_std);
    f("task_size", c.task_size);
    f("task_gen_prob", c.task_gen_prob);
    f("bandwidth", c.bandwidth);
    f("uav_hap_bandwidth", c.uav_hap_bandwidth);
    f("p_max_user", c.p_max_user);
    f("p_max_uav", c.p_max_uav);
    f("cycles_per_bit_uav", c.cycles_per_bit_uav);
    f("cycles_per_bit_hap", c.cycles_per_bit_hap);
    f("cpu_max_uav", c.cpu_max_uav);
    f("cpu_max_hap", c.cpu_max_hap);
    f("beta0", c.beta0);
    f("noise_psd", c.noise_psd);
    f("boltzmann", c.boltzmann);
    f("noise_temperature", c.noise_temperature);
    f("antenna_gain", c.antenna_gain);
    f("line_loss", c.line_loss);
    f("carrier_freq", c.carrier_freq);
    f("rate_min", c.rate_min);
    f("outage_eps", c.outage_eps);
    f("csi_uncertainty", c.csi_uncertainty);
    f("sc_per_user_cap", c.sc_per_user_cap);
    f("users_per_sc_cap", c.users_per_sc_cap);
    f("scheduler", c.scheduler);
    f("rng_seed", c.rng_seed);
}

template <class F>
void visit_fields(TrainingConfig& c, F&& f) {
    f("actor_hidden", c.actor_hidden);
    f("critic_hidden", c.critic_hidden);
    f("actor_lr", c.actor_lr);
    f("critic_lr", c.critic_lr);
    f("adaptive_moments", c.adaptive_moments);
    f("gamma", c.gamma);
    f("tau", c.tau);
    f("buffer_capacity", c.buffer_capacity);
    f("minibatch", c.minibatch);
    f("warmup", c.warmup);
    f("frl_period", c.frl_period);
    f("target_period", c.target_period);
    f("episodes", c.episodes);
    f("noise_start", c.noise_start);
    f("noise_end", c.noise_end);
    f("checkpoint_every", c.checkpoint_every);
    f("eval_episodes", c.eval_episodes);
    f("reward_scale", c.reward_scale);
}

template <class T>
void read_value(const nlohmann::json& v, const std::string& key, T& out) {
    try {
        if constexpr (std::is_same_v<T, SchedulerKind>) {
            out = scheduler_from_string(v.get<std::string>());
        } else if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ConfigError("expected boolean");
            out = v.get<bool>();
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) throw ConfigError("expected integer");
            out = v.get<T>();
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) throw ConfigError("expected number");
            out = v.get<T>();
        } else {
            out = v.get<T>();
        }
    } catch (const std::exception& e) {
        throw ConfigError(fmt::format("config key '{}': {}", key, e.what()));
    }
}

template <class Cfg>
void apply_json_impl(Cfg& cfg, const nlohmann::json& j, const char* section) {
    if (!j.is_object()) throw ConfigError(fmt::format("section '{}' must be an object", section));
    for (const auto& [key, value] : j.items()) {
        bool found = false;
        visit_fields(cfg, [&](const char* name, auto& field) {
            if (key == name) {
                read_value(value, key, field);
                found = true;
            }
        });
        if (!found) throw ConfigError(fmt::format("unknown key '{}' in section '{}'", key, section));
    }
}

template <class Cfg>
nlohmann::json to_json_impl(const Cfg& cfg) {
    nlohmann::json j = nlohmann::json::object();
    visit_fields(const_cast<Cfg&>(cfg), [&](const char* name, auto& field) {
        using T = std::decay_t<decltype(field)>;
        if constexpr (std::is_same_v<T, SchedulerKind>) {
            j[name] = to_string(field);
        } else {
            j[name] = field;
        }
    });
    return j;
}

}  // namespace

std::string to_string(SchedulerKind kind) {
    return kind == SchedulerKind::Elastic ? "elastic" : "fixed";
}

SchedulerKind scheduler_from_string(const std::string& name) {
    if (name == "elastic") return SchedulerKind::Elastic;
    if (name == "fixed") return SchedulerKind::Fixed;
    throw ConfigError(fmt::format("unknown scheduler '{}'", name));
}

Profile paper_profile() {
    Profile p;
    p.name = "paper";
    ScenarioConfig& s = p.scenario;
    s.num_uavs = 2;
    s.num_users = 20;
    s.num_subchannels = 8;
    s.max_tasks_per_user = 5;
    s.horizon = 400;
    s.area_x = s.area_y = 200e3;
    s.hap_x = s.hap_y = 100e3;
    s.h_min = s.h_max = 400.0;
    s.h_hap = 20e3;
    s.task_size = 10e6;
    s.task_gen_prob = 0.5;
    s.bandwidth = 10e6;
    s.uav_hap_bandwidth = 20e6;
    s.p_max_user = 0.2;
    s.p_max_uav = 0.5;
    s.cycles_per_bit_uav = 200.0;
    s.cycles_per_bit_hap = 500.0;
    s.cpu_max_uav = 1e9;
    s.cpu_max_hap = 5e9;
    s.v_max = 50.0;
    s.sc_per_user_cap = 1;
    s.users_per_sc_cap = 2;

    TrainingConfig& t = p.training;
    t.actor_hidden = {1024, 512};
    t.critic_hidden = {512, 256};
    t.actor_lr = 1e-5;
    t.critic_lr = 1e-4;
    t.gamma = 0.99;
    t.tau = 0.0005;
    t.buffer_capacity = 50000;
    t.minibatch = 8;
    t.warmup = 64;
    t.episodes = 1000;
    return p;
}

Profile desk_profile() {
    Profile p;
    p.name = "desk";
    // ScenarioConfig / TrainingConfig defaults are the desk values.
    return p;
}

Profile profile_by_name(const std::string& name) {
    if (name == "paper") return paper_profile();
    if (name == "desk") return desk_profile();
    throw ConfigError(fmt::format("unknown profile '{}'", name));
}

void validate(const ScenarioConfig& c) {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw ConfigError(fmt::format("invalid scenario: {}", what));
    };
    require(c.num_uavs >= 1, "num_uavs >= 1");
    require(c.num_users >= 1, "num_users >= 1");
    require(c.num_subchannels >= 1, "num_subchannels >= 1");
    require(c.max_tasks_per_user >= 1, "max_tasks_per_user >= 1");
    require(c.horizon >= 1, "horizon >= 1");
    require(c.area_x > 0 && c.area_y > 0, "area > 0");
    require(c.h_min > 0 && c.h_min <= c.h_max, "0 < h_min <= h_max");
    require(c.h_max < c.h_hap, "h_max < h_hap");
    require(c.d_min >= 0, "d_min >= 0");
    require(c.v_max >= 0, "v_max >= 0");
    require(c.user_speed_std >= 0, "user_speed_std >= 0");
    require(c.task_size > 0, "task_size > 0");
    require(c.task_gen_prob >= 0 && c.task_gen_prob <= 1, "0 <= task_gen_prob <= 1");
    require(c.outage_eps > 0 && c.outage_eps < 1, "0 < outage_eps < 1");
    require(c.sc_per_user_cap >= 1 && c.users_per_sc_cap >= 1, "caps >= 1");
    require(c.bandwidth > 0 && c.uav_hap_bandwidth > 0, "bandwidths > 0");
    require(c.p_max_user > 0 && c.p_max_uav > 0, "powers > 0");
    require(c.cpu_max_uav > 0 && c.cpu_max_hap > 0, "cpu capacities > 0");
    require(c.cycles_per_bit_uav > 0 && c.cycles_per_bit_hap > 0, "cycles per bit > 0");
    require(c.beta0 > 0 && c.noise_psd > 0 && c.boltzmann > 0 && c.noise_temperature > 0,
            "link constants > 0");
    require(c.antenna_gain > 0 && c.line_loss > 0 && c.carrier_freq > 0, "backhaul constants > 0");
    require(c.rate_min >= 0, "rate_min >= 0");
    require(c.csi_uncertainty >= 0, "csi_uncertainty >= 0");
}

void validate(const TrainingConfig& c) {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw ConfigError(fmt::format("invalid training config: {}", what));
    };
    require(!c.actor_hidden.empty() && !c.critic_hidden.empty(), "hidden layers nonempty");
    for (int h : c.actor_hidden) require(h >= 1, "actor hidden sizes >= 1");
    for (int h : c.critic_hidden) require(h >= 1, "critic hidden sizes >= 1");
    require(c.actor_lr > 0 && c.critic_lr > 0, "learning rates > 0");
    require(c.gamma >= 0 && c.gamma <= 1, "0 <= gamma <= 1");
    require(c.tau > 0 && c.tau <= 1, "0 < tau <= 1");
    require(c.buffer_capacity >= 1, "buffer_capacity >= 1");
    require(c.minibatch >= 1, "minibatch >= 1");
    require(c.warmup >= c.minibatch, "warmup >= minibatch");
    require(c.frl_period >= 1 && c.target_period >= 1, "periods >= 1");
    require(c.episodes >= 0, "episodes >= 0");
    require(c.noise_start >= 0 && c.noise_end >= 0, "noise >= 0");
    require(c.checkpoint_every >= 0, "checkpoint_every >= 0");
    require(c.eval_episodes >= 0, "eval_episodes >= 0");
    require(c.reward_scale > 0, "reward_scale > 0");
}

void apply_json(ScenarioConfig& cfg, const nlohmann::json& j) { apply_json_impl(cfg, j, "scenario"); }
void apply_json(TrainingConfig& cfg, const nlohmann::json& j) { apply_json_impl(cfg, j, "training"); }
nlohmann::json to_json(const ScenarioConfig& cfg) { return to_json_impl(cfg); }
nlohmann::json to_json(const TrainingConfig& cfg) { return to_json_impl(cfg); }

Profile profile_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ConfigError("configuration document must be an object");
    for (const auto& [key, value] : doc.items()) {
        (void)value;
        if (key != "profile" && key != "scenario" && key != "training") {
            throw ConfigError(fmt::format("unknown top-level key '{}'", key));
        }
    }
    Profile p = profile_by_name(doc.value("profile", std::string("desk")));
    if (doc.contains("scenario")) apply_json(p.scenario, doc.at("scenario"));
    if (doc.contains("training")) apply_json(p.training, doc.at("training"));
    validate(p.scenario);
    validate(p.training);
    return p;
}

Profile load_profile_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot open config file '{}'", path));
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(fmt::format("config file '{}': {}", path, e.what()));
    }
    return profile_from_json(doc);
}

}  // namespace ntn
