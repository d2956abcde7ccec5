#include "doctest.h"

#include <cmath>
#include <random>
#include <stdexcept>

#include "ntn/channel.hpp"
#include "ntn/errors.hpp"

using namespace ntn;

namespace {

// Direct formula evaluation: user m on (u, n) is interfered by every user j on
// subchannel n (any UAV) whose rank in its own cell is later than m's rank.
Grid3<double> brute_rates(const Grid3<double>& gain, const Grid3<unsigned char>& k, const Grid3<double>& p,
                          double bn) {
    const int M = static_cast<int>(gain.dim0()), U = static_cast<int>(gain.dim1()), N = static_cast<int>(gain.dim2());
    auto rank = [&](int m, int u, int n) {
        int r = 0;
        for (int j = 0; j < M; ++j) {
            if (j == m || !k(j, u, n)) continue;
            const bool ahead = gain(j, u, n) > gain(m, u, n) || (gain(j, u, n) == gain(m, u, n) && j < m);
            if (ahead) ++r;
        }
        return r;
    };
    Grid3<double> r(M, U, N, 0.0);
    for (int m = 0; m < M; ++m)
        for (int u = 0; u < U; ++u)
            for (int n = 0; n < N; ++n) {
                if (!k(m, u, n)) continue;
                const int mine = rank(m, u, n);
                double interference = 0.0;
                for (int v = 0; v < U; ++v)
                    for (int j = 0; j < M; ++j) {
                        if (!k(j, v, n) || (v == u && j == m)) continue;
                        if (rank(j, v, n) > mine) interference += gain(j, v, n) * p(j, v, n);
                    }
                r(m, u, n) = bn * std::log2(1.0 + gain(m, u, n) * p(m, u, n) / (interference + 1.0));
            }
    return r;
}

ChannelRealization with_gains(const Grid3<double>& g, const Grid3<unsigned char>& k) {
    ChannelRealization ch;
    ch.est_gain = g;
    ch.err_std = Grid3<double>(g.dim0(), g.dim1(), g.dim2(), 0.0);
    ch.eff_gain = g;
    const int M = static_cast<int>(g.dim0()), U = static_cast<int>(g.dim1()), N = static_cast<int>(g.dim2());
    ch.sic.resize(U * N);
    for (int u = 0; u < U; ++u)
        for (int n = 0; n < N; ++n) {
            std::vector<int> who;
            std::vector<double> gg;
            for (int m = 0; m < M; ++m)
                if (k(m, u, n)) {
                    who.push_back(m);
                    gg.push_back(g(m, u, n));
                }
            ch.sic[u * N + n] = sic_order(who, gg);
        }
    return ch;
}

}  // namespace

TEST_SUITE("channel") {

TEST_CASE("path gain") {
    CHECK(path_gain({0, 0, 1}, {0, 0, 0}, 1.0) == 1.0);
    CHECK(path_gain({300, 0, 400}, {0, 0, 0}, 1e-3) == doctest::Approx(1e-3 / 2.5e5).epsilon(1e-14));
    CHECK_THROWS_AS(path_gain({1, 2, 3}, {1, 2, 3}, 1.0), std::domain_error);
}

TEST_CASE("robust effective gain") {
    CHECK(robust_effective_gain(2.0, 0.0, 0.05) == 2.0);
    CHECK(robust_effective_gain(2.0, 0.3, 0.5) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(robust_effective_gain(1.0, 0.1, 0.05) == doctest::Approx(1.0 - 1.6448536269514722 * 0.1).epsilon(1e-12));
    CHECK(robust_effective_gain(1.0, 0.1, 0.05) == doctest::Approx(0.8355).epsilon(1e-4));
    CHECK(robust_effective_gain(1.0, 10.0, 0.05) == 0.0);
}

TEST_CASE("SIC order") {
    const std::vector<int> one{4};
    const std::vector<double> g1{0.3};
    CHECK(sic_order(one, g1) == std::vector<int>{4});
    const std::vector<int> users{1, 2};
    const std::vector<double> g{0.2, 0.9};
    CHECK(sic_order(users, g) == std::vector<int>{2, 1});
    const std::vector<int> tied{3, 1};
    const std::vector<double> eq{0.5, 0.5};
    CHECK(sic_order(tied, eq) == std::vector<int>{1, 3});
}

TEST_CASE("10 MHz over 8 subchannels") {
    ScenarioConfig c;
    c.bandwidth = 10e6;
    c.num_subchannels = 8;
    CHECK(c.subchannel_bandwidth() == 1.25e6);
}

TEST_CASE("NOMA rates") {
    ScenarioConfig c;
    c.num_subchannels = 1;
    const double bn = c.subchannel_bandwidth();

    SUBCASE("unit SNR single user gives B_n") {
        Grid3<double> g(1, 1, 1, 10.0);
        Grid3<unsigned char> k(1, 1, 1, 1);
        UplinkAllocation a{k, Grid3<double>(1, 1, 1, 0.1)};
        CHECK(noma_rates(with_gains(g, k), a, c)(0, 0, 0) == doctest::Approx(bn).epsilon(1e-14));
    }
    SUBCASE("two users on one subchannel") {
        Grid3<double> g(2, 1, 1);
        g(0, 0, 0) = 4.0;
        g(1, 0, 0) = 1.0;
        Grid3<unsigned char> k(2, 1, 1, 1);
        UplinkAllocation a{k, Grid3<double>(2, 1, 1, 0.1)};
        const Grid3<double> r = noma_rates(with_gains(g, k), a, c);
        CHECK(r(0, 0, 0) == doctest::Approx(bn * std::log2(1.0 + 0.4 / 1.1)).epsilon(1e-14));
        CHECK(r(1, 0, 0) == doctest::Approx(bn * std::log2(1.1)).epsilon(1e-14));
        const Grid3<double> b = brute_rates(g, k, a.power, bn);
        CHECK(r == b);
    }
    SUBCASE("infeasible allocation is rejected") {
        Grid3<double> g(3, 1, 1, 1.0);
        Grid3<unsigned char> k(3, 1, 1, 1);
        UplinkAllocation a{k, Grid3<double>(3, 1, 1, 0.1)};
        CHECK_THROWS_AS(noma_rates(with_gains(g, k), a, c), PreconditionError);
        UplinkAllocation hot{Grid3<unsigned char>(1, 1, 1, 1), Grid3<double>(1, 1, 1, 1.0)};
        CHECK_THROWS_AS(noma_rates(with_gains(Grid3<double>(1, 1, 1, 1.0), hot.assigned), hot, c),
                        PreconditionError);
    }
}

TEST_CASE("random multi-cell allocations match the direct formula") {
    ScenarioConfig c;
    c.num_subchannels = 3;
    c.users_per_sc_cap = 3;
    c.sc_per_user_cap = 2;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const int M = 5, U = 2, N = 3;
        Grid3<double> g(M, U, N), p(M, U, N, 0.0);
        Grid3<unsigned char> k(M, U, N, 0);
        for (int u = 0; u < U; ++u)
            for (int m = 0; m < M; ++m) {
                int held = 0;
                for (int n = 0; n < N; ++n) {
                    g(m, u, n) = std::pow(10.0, 4.0 * unit(rng) - 1.0);
                    if (held < 2 && unit(rng) < 0.4) {
                        int on_sc = 0;
                        for (int j = 0; j < m; ++j) on_sc += k(j, u, n);
                        if (on_sc < 3) {
                            k(m, u, n) = 1;
                            p(m, u, n) = 0.1 * unit(rng);
                            ++held;
                        }
                    }
                }
            }
        UplinkAllocation a{k, p};
        const Grid3<double> r = noma_rates(with_gains(g, k), a, c);
        const Grid3<double> b = brute_rates(g, k, p, c.subchannel_bandwidth());
        for (std::size_t i = 0; i < r.data().size(); ++i) {
            CHECK(r.data()[i] == doctest::Approx(b.data()[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("own power raises own rate while the decode order is unchanged") {
    ScenarioConfig c;
    c.num_subchannels = 1;
    Grid3<double> g(2, 1, 1);
    g(0, 0, 0) = 50.0;
    g(1, 0, 0) = 20.0;
    Grid3<unsigned char> k(2, 1, 1, 1);
    const ChannelRealization ch = with_gains(g, k);
    double last[2] = {-1.0, -1.0};
    for (double p = 0.01; p <= 0.2; p += 0.01) {
        for (int m = 0; m < 2; ++m) {
            Grid3<double> power(2, 1, 1, 0.05);
            power(m, 0, 0) = p;
            const double r = noma_rates(ch, {k, power}, c)(m, 0, 0);
            CHECK(r > last[m]);
            last[m] = r;
        }
    }
}

TEST_CASE("realized channels") {
    ScenarioConfig c;
    c.num_subchannels = 2;
    c.csi_uncertainty = 0.1;
    const std::vector<EntityPose> users{{0, 0, 0}, {300, 0, 0}};
    const std::vector<EntityPose> uavs{{0, 0, 400}};
    Grid3<unsigned char> k(2, 1, 2, 0);
    k(0, 0, 1) = 1;
    k(1, 0, 1) = 1;
    const ChannelRealization ch = realize_channels(users, uavs, k, c);
    const double g0 = c.beta0 / 1.6e5 / c.subchannel_noise_power();
    CHECK(ch.est_gain(0, 0, 0) == doctest::Approx(g0).epsilon(1e-14));
    CHECK(ch.err_std(0, 0, 0) == doctest::Approx(0.1 * g0).epsilon(1e-14));
    CHECK(ch.eff_gain(1, 0, 1) < ch.est_gain(1, 0, 1));
    CHECK(ch.sic[0].empty());
    CHECK(ch.sic[1] == std::vector<int>{0, 1});
}

TEST_CASE("UAV to HAP link budget") {
    const Profile p = paper_profile();
    const ScenarioConfig& c = p.scenario;
    const EntityPose uav{0, 0, 0}, hap{0, 0, 20e3};
    CHECK(uav_hap_rate(uav, hap, 0.0, c) == 0.0);
    const LinkBudget b = uav_hap_link(uav, hap, 0.5, c);
    const double pi = 3.14159265358979323846;
    const double ls = std::pow(299792458.0 / (4 * pi * 20e3 * 2.4e9), 2);
    CHECK(b.fspl == doctest::Approx(ls).epsilon(1e-13));
    CHECK(b.fspl == doctest::Approx(2.47e-13).epsilon(2e-3));
    CHECK(10.0 * std::log10(b.fspl) == doctest::Approx(-126.1).epsilon(1e-3));
    CHECK(b.noise_power == doctest::Approx(2.76e-13).epsilon(1e-12));
    const double snr = 0.5 * std::pow(10.0, 1.5) * ls / 2.76e-13;
    CHECK(b.rate == doctest::Approx(20e6 * std::log2(1.0 + snr)).epsilon(1e-12));
    CHECK(b.rate == doctest::Approx(7.8e7).epsilon(0.01));
    CHECK_THROWS_AS(uav_hap_link(uav, hap, 0.6, c), PreconditionError);
}

}
