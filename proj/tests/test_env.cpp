#include <doctest.h>

#include "hybridctl/env.hpp"

using namespace hybridctl;

TEST_CASE("pendulum spec matches the documented shapes") {
    EnvSpec s = EnvSpec::pendulum();
    CHECK(s.state_dim == 3);
    CHECK(s.action_dim == 1);
    CHECK(s.episode_len == 200);
    CHECK(s.dt == 0.05);
    CHECK(s.action_low(0) < s.action_high(0));

    EnvSpec c = EnvSpec::cartpole();
    CHECK(c.state_dim == 5);
    CHECK(c.action_dim == 1);
    CHECK(c.dt == 0.02);
}

TEST_CASE("pendulum resets hanging down") {
    Env env(EnvSpec::pendulum(), 0);
    Vec phys(2);
    phys << kPi, 0.0;  // exact pole-down, no perturbation
    env.set_internal_state(phys);
    Vec obs = env.observe();
    CHECK(obs(0) == doctest::Approx(-1.0));
    CHECK(obs(1) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(obs(2) == 0.0);

    // seeded reset stays within the documented +-0.05 rad band
    Vec o = env.reset(11);
    CHECK(std::abs(wrap_angle(std::atan2(o(1), o(0))) ) > kPi - 0.05 - 1e-12);
}

TEST_CASE("reset is deterministic per seed") {
    Env a(EnvSpec::pendulum(), 7);
    Env b(EnvSpec::pendulum(), 7);
    CHECK(a.reset(7) == b.reset(7));
}

TEST_CASE("cartpole resets pole-down at track center") {
    Env env(EnvSpec::cartpole(), 3);
    Vec o = env.observe();
    CHECK(o(0) == 0.0);   // x
    CHECK(o(1) == 0.0);   // xdot
    CHECK(o(2) < -0.99);  // cos theta
    CHECK(o(4) == 0.0);   // thetadot
}

TEST_CASE("pendulum equilibria") {
    Env env(EnvSpec::pendulum(), 0);
    Vec zero_action = Vec::Zero(1);

    SUBCASE("upright rest is a fixed point with zero reward") {
        Vec phys(2);
        phys << 0.0, 0.0;
        env.set_internal_state(phys);
        auto r = env.step(zero_action);
        CHECK(r.reward == 0.0);
        CHECK(env.internal_state()(0) == 0.0);
        CHECK(env.internal_state()(1) == 0.0);
    }
    SUBCASE("hanging rest stays at rest, reward -pi^2") {
        Vec phys(2);
        phys << kPi, 0.0;
        env.set_internal_state(phys);
        auto r = env.step(zero_action);
        CHECK(r.reward == doctest::Approx(-kPi * kPi));
        CHECK(env.internal_state()(1) == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("cartpole pole-down rest is an equilibrium") {
    Env env(EnvSpec::cartpole(), 0);
    Vec phys(4);
    phys << 0.0, 0.0, kPi, 0.0;
    env.set_internal_state(phys);
    env.step(Vec::Zero(1));
    Vec after = env.internal_state();
    CHECK(std::abs(after(0)) <= 1e-12);
    CHECK(std::abs(after(1)) <= 1e-12);
    CHECK(std::abs(wrap_angle(after(2) - kPi)) <= 1e-12);
    CHECK(std::abs(after(3)) <= 1e-12);
}

TEST_CASE("non-finite action is a caller bug") {
    Env env(EnvSpec::pendulum(), 0);
    Vec bad(1);
    bad << std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(env.step(bad), std::invalid_argument);
}

TEST_CASE("determinism: same seed and actions give bitwise-identical rewards") {
    auto run = [] {
        Env env(EnvSpec::pendulum(), 42);
        env.reset(42);
        Rng rng(5);
        std::vector<double> rewards;
        for (int t = 0; t < 50; ++t) {
            Vec a(1);
            a << rng.uniform(-2.0, 2.0);
            rewards.push_back(env.step(a).reward);
        }
        return rewards;
    };
    CHECK(run() == run());
}

TEST_CASE("pendulum reward is nonpositive") {
    Env env(EnvSpec::pendulum(), 9);
    Rng rng(17);
    for (int i = 0; i < 1000; ++i) {
        Vec phys(2);
        phys << rng.uniform(-kPi, kPi), rng.uniform(-8.0, 8.0);
        env.set_internal_state(phys);
        Vec a(1);
        a << rng.uniform(-2.0, 2.0);
        CHECK(env.step(a).reward <= 0.0);
    }
}

TEST_CASE("free pendulum conserves mechanical energy to first order") {
    // Fine-step test mode: drift of the symplectic integrator scales with dt.
    EnvSpec sp = EnvSpec::pendulum();
    sp.dt = 0.005;
    Env env(sp, 0);
    Vec phys(2);
    phys << 2.0, 0.0;
    env.set_internal_state(phys);
    const double e0 = env.pendulum_energy();
    double max_drift = 0.0;
    for (int t = 0; t < 200; ++t) {
        env.step(Vec::Zero(1));
        max_drift = std::max(max_drift, std::abs(env.pendulum_energy() - e0));
    }
    // per-step relative drift bound over the 200-step window
    CHECK(max_drift / std::abs(e0) / 200.0 <= 1e-4);
}

TEST_CASE("expert behavior") {
    Env env(EnvSpec::pendulum(), 0);

    SUBCASE("zero at upright rest") {
        Vec phys(2);
        phys << 0.0, 0.0;
        env.set_internal_state(phys);
        CHECK(env.expert_action()(0) == 0.0);
    }
    SUBCASE("pumps from hanging rest, within bounds") {
        Vec phys(2);
        phys << kPi, 0.0;
        env.set_internal_state(phys);
        Vec u = env.expert_action();
        CHECK(u(0) != 0.0);
        CHECK(std::abs(u(0)) <= 2.0);
    }
    SUBCASE("always within bounds") {
        Rng rng(3);
        for (int i = 0; i < 1000; ++i) {
            Vec phys(2);
            phys << rng.uniform(-kPi, kPi), rng.uniform(-8.0, 8.0);
            env.set_internal_state(phys);
            Vec u = env.expert_action();
            CHECK(u(0) >= -2.0);
            CHECK(u(0) <= 2.0);
        }
    }
    SUBCASE("unsupported environment") {
        Env cart(EnvSpec::cartpole(), 0);
        CHECK_THROWS_AS(cart.expert_action(), std::invalid_argument);
    }
}

TEST_CASE("expert swings up within 150 steps") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull}) {
        Env env(EnvSpec::pendulum(), seed);
        bool reached = false;
        for (int t = 0; t < 150 && !reached; ++t) {
            env.step(env.expert_action());
            reached = std::abs(env.internal_state()(0)) < 0.2;
        }
        CHECK(reached);
    }
}
