#include "ntn/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>
#include <fmt/format.h>

#include "ntn/errors.hpp"

namespace ntn {

double path_gain(const EntityPose& uav, const EntityPose& user, double beta0) {
    const double dx = uav.x - user.x;
    const double dy = uav.y - user.y;
    const double dz = uav.z - user.z;
    const double d2 = dx * dx + dy * dy + dz * dz;
    if (!(d2 > 0.0)) throw std::domain_error("path_gain: zero distance");
    return beta0 / d2;
}

double normalized_gain(double gain, const ScenarioConfig& cfg) { return gain / cfg.subchannel_noise_power(); }

double normal_quantile(double p) {
    static const boost::math::normal_distribution<double> standard(0.0, 1.0);
    return boost::math::quantile(standard, p);
}

double robust_effective_gain(double est, double err_std, double eps) {
    if (err_std == 0.0) return est;
    return std::max(0.0, est + normal_quantile(eps) * err_std);
}

std::vector<int> sic_order(std::span<const int> users, std::span<const double> gains) {
    if (users.size() != gains.size()) throw PreconditionError("sic_order: size mismatch");
    std::vector<std::size_t> idx(users.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (gains[a] != gains[b]) return gains[a] > gains[b];
        return users[a] < users[b];
    });
    std::vector<int> order;
    order.reserve(idx.size());
    for (std::size_t k : idx) order.push_back(users[k]);
    return order;
}

ChannelRealization realize_channels(const std::vector<EntityPose>& users, const std::vector<EntityPose>& uavs,
                                    const Grid3<unsigned char>& assigned, const ScenarioConfig& cfg) {
    const int M = static_cast<int>(users.size());
    const int U = static_cast<int>(uavs.size());
    const int N = cfg.num_subchannels;
    ChannelRealization ch;
    ch.est_gain = Grid3<double>(M, U, N, 0.0);
    ch.err_std = Grid3<double>(M, U, N, 0.0);
    ch.eff_gain = Grid3<double>(M, U, N, 0.0);
    for (int m = 0; m < M; ++m) {
        for (int u = 0; u < U; ++u) {
            const double est = normalized_gain(path_gain(uavs[u], users[m], cfg.beta0), cfg);
            const double err = cfg.csi_uncertainty * est;
            const double eff = robust_effective_gain(est, err, cfg.outage_eps);
            for (int n = 0; n < N; ++n) {
                ch.est_gain(m, u, n) = est;
                ch.err_std(m, u, n) = err;
                ch.eff_gain(m, u, n) = eff;
            }
        }
    }
    ch.sic.resize(static_cast<std::size_t>(U) * N);
    for (int u = 0; u < U; ++u) {
        for (int n = 0; n < N; ++n) {
            std::vector<int> who;
            std::vector<double> g;
            for (int m = 0; m < M; ++m) {
                if (assigned(m, u, n)) {
                    who.push_back(m);
                    g.push_back(ch.eff_gain(m, u, n));
                }
            }
            if (!who.empty()) ch.sic[u * N + n] = sic_order(who, g);
        }
    }
    return ch;
}

void check_uplink_allocation(const UplinkAllocation& a, const ScenarioConfig& cfg) {
    const int M = static_cast<int>(a.assigned.dim0());
    const int U = static_cast<int>(a.assigned.dim1());
    const int N = static_cast<int>(a.assigned.dim2());
    for (int u = 0; u < U; ++u) {
        for (int m = 0; m < M; ++m) {
            int count = 0;
            double power = 0.0;
            for (int n = 0; n < N; ++n) {
                const double p = a.power(m, u, n);
                if (!(p >= 0.0) || !std::isfinite(p)) {
                    throw PreconditionError(fmt::format("power of user {} on ({}, {}) is {}", m, u, n, p));
                }
                if (a.assigned(m, u, n)) {
                    ++count;
                    power += p;
                }
            }
            if (count > cfg.sc_per_user_cap) {
                throw PreconditionError(fmt::format("user {} holds {} subchannels of UAV {}", m, count, u));
            }
            if (power > cfg.p_max_user * (1.0 + 1e-12)) {
                throw PreconditionError(fmt::format("user {} transmits {} W to UAV {}", m, power, u));
            }
        }
        for (int n = 0; n < N; ++n) {
            int count = 0;
            for (int m = 0; m < M; ++m) count += a.assigned(m, u, n) ? 1 : 0;
            if (count > cfg.users_per_sc_cap) {
                throw PreconditionError(fmt::format("subchannel {} of UAV {} carries {} users", n, u, count));
            }
        }
    }
}

Grid3<double> noma_rates(const ChannelRealization& ch, const UplinkAllocation& a, const ScenarioConfig& cfg) {
    check_uplink_allocation(a, cfg);
    const int M = static_cast<int>(a.assigned.dim0());
    const int U = static_cast<int>(a.assigned.dim1());
    const int N = static_cast<int>(a.assigned.dim2());
    const double bn = cfg.subchannel_bandwidth();
    Grid3<double> rate(M, U, N, 0.0);

    auto received = [&](int m, int u, int n) { return ch.eff_gain(m, u, n) * a.power(m, u, n); };
    // Interference contributed by decode positions > k of UAV u on subchannel n.
    auto tail = [&](int u, int n, std::size_t k) {
        double sum = 0.0;
        const auto& order = ch.sic[u * N + n];
        for (std::size_t j = k + 1; j < order.size(); ++j) sum += received(order[j], u, n);
        return sum;
    };

    for (int u = 0; u < U; ++u) {
        for (int n = 0; n < N; ++n) {
            const auto& order = ch.sic[u * N + n];
            for (std::size_t k = 0; k < order.size(); ++k) {
                const int m = order[k];
                if (!a.assigned(m, u, n)) throw PreconditionError("SIC order lists an unassigned user");
                const double intra = tail(u, n, k);
                double inter = 0.0;
                for (int v = 0; v < U; ++v) {
                    if (v != u) inter += tail(v, n, k);
                }
                const double sinr = received(m, u, n) / (intra + inter + 1.0);
                rate(m, u, n) = bn * std::log2(1.0 + sinr);
            }
        }
    }
    return rate;
}

LinkBudget uav_hap_link(const EntityPose& uav, const EntityPose& hap, double power, const ScenarioConfig& cfg) {
    if (!(power >= 0.0) || power > cfg.p_max_uav * (1.0 + 1e-12)) {
        throw PreconditionError(fmt::format("UAV transmit power {} W outside [0, {}]", power, cfg.p_max_uav));
    }
    LinkBudget b;
    b.distance = distance(uav, hap);
    const double ratio = kSpeedOfLight / (4.0 * std::numbers::pi * b.distance * cfg.carrier_freq);
    b.fspl = ratio * ratio;
    b.noise_power = cfg.boltzmann * cfg.noise_temperature * cfg.uav_hap_bandwidth;
    b.snr = power * cfg.antenna_gain * b.fspl * cfg.line_loss / b.noise_power;
    b.rate = cfg.uav_hap_bandwidth * std::log2(1.0 + b.snr);
    return b;
}

double uav_hap_rate(const EntityPose& uav, const EntityPose& hap, double power, const ScenarioConfig& cfg) {
    return uav_hap_link(uav, hap, power, cfg).rate;
}

}  // namespace ntn
