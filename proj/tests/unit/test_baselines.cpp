#include "doctest.h"

#include "ntn/baselines.hpp"
#include "ntn/errors.hpp"

using namespace ntn;

TEST_SUITE("baselines") {

TEST_CASE("policy names round-trip") {
    for (PolicyKind k : {PolicyKind::RandomFeasible, PolicyKind::FullPower, PolicyKind::FixedTask, PolicyKind::Learned}) {
        CHECK(policy_from_string(to_string(k)) == k);
    }
    CHECK_THROWS_AS(policy_from_string("greedy"), ConfigError);
}

TEST_CASE("random raw actions have the right shape and range") {
    const ScenarioConfig c = desk_profile().scenario;
    Rng rng(1);
    const auto raw = random_raw_action(rng, c);
    REQUIRE(static_cast<int>(raw.size()) == num_agents(c));
    for (int i = 0; i < num_agents(c); ++i) {
        CHECK(raw[i].size() == action_size(c, i));
        for (double x : raw[i]) {
            CHECK(x >= -1.0);
            CHECK(x <= 1.0);
        }
    }
    Rng a(4), b(4);
    CHECK(random_raw_action(a, c) == random_raw_action(b, c));
}

TEST_CASE("full power meets the power budgets with equality") {
    ScenarioConfig c = desk_profile().scenario;
    c.sc_per_user_cap = 2;
    Rng rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        const JointAction a = full_power_policy(random_feasible_policy(rng, c), c);
        for (const UavAction& ua : a.uavs) {
            for (std::size_t m = 0; m < ua.assign.rows(); ++m) {
                int count = 0;
                double p = 0.0;
                for (std::size_t n = 0; n < ua.assign.cols(); ++n) {
                    count += ua.assign(m, n);
                    p += ua.power(m, n);
                }
                for (std::size_t n = 0; n < ua.assign.cols(); ++n) {
                    CHECK(ua.power(m, n) == (ua.assign(m, n) ? c.p_max_user / count : 0.0));
                }
                if (count > 0) CHECK(p == doctest::Approx(c.p_max_user).epsilon(1e-15));
                if (count == 0) CHECK(p == 0.0);
            }
        }
        for (double p : a.hap.backhaul_power) CHECK(p == c.p_max_uav);
    }
}

TEST_CASE("equal split") {
    ScenarioConfig c = desk_profile().scenario;
    c.num_uavs = 1;
    c.num_users = 1;
    c.num_subchannels = 2;
    c.sc_per_user_cap = 2;
    JointAction a;
    a.uavs.resize(1);
    a.uavs[0].assign = Grid2<unsigned char>(1, 2, 0);
    a.uavs[0].power = Grid2<double>(1, 2, 0.0);
    a.hap.backhaul_power = {0.0};
    a.uavs[0].assign(0, 1) = 1;
    JointAction one = full_power_policy(a, c);
    CHECK(one.uavs[0].power(0, 1) == c.p_max_user);
    CHECK(one.uavs[0].power(0, 0) == 0.0);
    a.uavs[0].assign(0, 0) = 1;
    JointAction two = full_power_policy(a, c);
    CHECK(two.uavs[0].power(0, 0) == c.p_max_user / 2);
    CHECK(two.uavs[0].power(0, 1) == c.p_max_user / 2);
}

TEST_CASE("fixed-task baseline only swaps the scheduler") {
    const ScenarioConfig c = desk_profile().scenario;
    ScenarioConfig f = fixed_task_scheduler(c);
    CHECK(f.scheduler == SchedulerKind::Fixed);
    f.scheduler = c.scheduler;
    CHECK(to_json(f) == to_json(c));
}

}
