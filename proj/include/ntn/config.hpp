#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace ntn {

enum class SchedulerKind { Elastic, Fixed };

std::string to_string(SchedulerKind kind);
SchedulerKind scheduler_from_string(const std::string& name);

/// Physical scenario. Units: meters, seconds (1 slot = 1 s), watts, hertz, bits, CPU cycles.
/// Gains and losses are linear, not dB.
struct ScenarioConfig {
    int num_uavs = 2;
    int num_users = 6;
    int num_subchannels = 4;
    int max_tasks_per_user = 3;
    int horizon = 400;

    double area_x = 200e3;
    double area_y = 200e3;
    double h_min = 100.0;
    double h_max = 500.0;
    double h_hap = 20e3;
    double hap_x = 100e3;
    double hap_y = 100e3;
    double d_min = 100.0;
    double v_max = 50.0;
    double user_speed_std = 10.0;

    double task_size = 1e6;
    double task_gen_prob = 0.5;

    double bandwidth = 5e5;
    double uav_hap_bandwidth = 20e6;
    double p_max_user = 0.2;
    double p_max_uav = 0.5;
    double cycles_per_bit_uav = 200.0;
    double cycles_per_bit_hap = 500.0;
    double cpu_max_uav = 1e9;
    double cpu_max_hap = 5e9;

    double beta0 = 1e-3;
    double noise_psd = 3.981071705534973e-21;  // -174 dBm/Hz
    double boltzmann = 1.38e-23;
    double noise_temperature = 1000.0;
    double antenna_gain = 31.622776601683793;  // 15 dB
    double line_loss = 1.0;
    double carrier_freq = 2.4e9;

    double rate_min = 1e5;
    double outage_eps = 0.05;
    double csi_uncertainty = 0.0;

    int sc_per_user_cap = 1;
    int users_per_sc_cap = 2;

    SchedulerKind scheduler = SchedulerKind::Elastic;
    std::uint64_t rng_seed = 1;

    /// Bandwidth of one subchannel, B / N.
    double subchannel_bandwidth() const { return bandwidth / num_subchannels; }
    /// Receiver noise power on one subchannel.
    double subchannel_noise_power() const { return noise_psd * subchannel_bandwidth(); }
};

struct TrainingConfig {
    std::vector<int> actor_hidden{128, 64};
    std::vector<int> critic_hidden{64, 32};
    double actor_lr = 1e-4;
    double critic_lr = 1e-3;
    bool adaptive_moments = true;
    double gamma = 0.95;
    double tau = 0.01;
    int buffer_capacity = 50000;
    int minibatch = 8;
    int warmup = 64;
    int frl_period = 10;
    int target_period = 1;
    int episodes = 200;
    double noise_start = 0.3;
    double noise_end = 0.05;
    int checkpoint_every = 0;
    int eval_episodes = 20;
    double reward_scale = 1.0;
};

struct Profile {
    std::string name;
    ScenarioConfig scenario;
    TrainingConfig training;
};

/// Full-scale scenario and training values.
Profile paper_profile();
/// Laptop-scale scenario used by tests and CI.
Profile desk_profile();
Profile profile_by_name(const std::string& name);

/// Throws ConfigError naming the first violated invariant.
void validate(const ScenarioConfig& cfg);
void validate(const TrainingConfig& cfg);

/// Overlay keys from `j` onto `cfg`; unknown keys and type mismatches are ConfigError.
void apply_json(ScenarioConfig& cfg, const nlohmann::json& j);
void apply_json(TrainingConfig& cfg, const nlohmann::json& j);
nlohmann::json to_json(const ScenarioConfig& cfg);
nlohmann::json to_json(const TrainingConfig& cfg);

/// Reads a configuration document of the form
/// `{"profile": "desk", "scenario": {...}, "training": {...}}`.
Profile load_profile_file(const std::string& path);
Profile profile_from_json(const nlohmann::json& doc);

}  // namespace ntn
