#pragma once

#include <span>
#include <vector>

#include "ntn/config.hpp"
#include "ntn/grid.hpp"
#include "ntn/world.hpp"

namespace ntn {

/// Large-scale power gain beta0 / d^2 between a UAV and a ground user.
/// Throws std::domain_error when the two points coincide.
double path_gain(const EntityPose& uav, const EntityPose& user, double beta0);

/// Gain normalized to the subchannel noise power, G = g / (N0 * B_n).
double normalized_gain(double gain, const ScenarioConfig& cfg);

/// Inverse standard normal CDF.
double normal_quantile(double p);

/// The eps-quantile of N(est, err_std^2), floored at zero: the gain the true
/// channel exceeds with probability 1 - eps.
double robust_effective_gain(double est, double err_std, double eps);

/// SIC decoding order for the users sharing one (UAV, subchannel): strongest
/// effective gain first, ties to the lower user index. `gains[k]` belongs to
/// `users[k]`. The user at position k is interfered by positions > k.
std::vector<int> sic_order(std::span<const int> users, std::span<const double> gains);

/// Subchannel assignment K(m, u, n) and transmit powers p(m, u, n).
struct UplinkAllocation {
    Grid3<unsigned char> assigned;
    Grid3<double> power;
};

struct ChannelRealization {
    Grid3<double> est_gain;  // normalized estimate G-hat
    Grid3<double> err_std;   // sigma_e
    Grid3<double> eff_gain;  // eps-quantile gain used for rates and ordering
    std::vector<std::vector<int>> sic;  // index u * N + n -> decoding order of assigned users
};

/// Gains for every (user, UAV, subchannel) at the current poses, with
/// err_std = csi_uncertainty * G-hat, plus SIC orders for the assigned users.
ChannelRealization realize_channels(const std::vector<EntityPose>& users, const std::vector<EntityPose>& uavs,
                                    const Grid3<unsigned char>& assigned, const ScenarioConfig& cfg);

/// Throws PreconditionError if the allocation breaks the per-user or per-subchannel
/// caps or the per-user power budget.
void check_uplink_allocation(const UplinkAllocation& a, const ScenarioConfig& cfg);

/// Uplink NOMA rates R(m, u, n) in bit/s (equivalently bits per slot).
/// Interference on (u, n) at decode position k: users later in the same order
/// (intra-cell) and users at positions > k in the other UAVs' orders on n (inter-cell).
Grid3<double> noma_rates(const ChannelRealization& ch, const UplinkAllocation& a, const ScenarioConfig& cfg);

struct LinkBudget {
    double distance = 0.0;
    double fspl = 0.0;         // L_s, linear
    double noise_power = 0.0;  // k_B T B
    double snr = 0.0;
    double rate = 0.0;         // bit/s
};

/// UAV -> HAP free-space link. Throws PreconditionError if power > p_max_uav.
LinkBudget uav_hap_link(const EntityPose& uav, const EntityPose& hap, double power, const ScenarioConfig& cfg);
double uav_hap_rate(const EntityPose& uav, const EntityPose& hap, double power, const ScenarioConfig& cfg);

inline constexpr double kSpeedOfLight = 299792458.0;

}  // namespace ntn
