#include <doctest.h>

#include "hybridctl/hybrid_det.hpp"
#include "oracle.hpp"
#include "test_util.hpp"

using namespace hybridctl;
using namespace hybridctl::testutil;

TEST_CASE("rollout with a zero model keeps the state fixed") {
    DynNet model = DynNet::zeros(3, 1, 8, Nonlin::Sin);
    RewardNet reward = RewardNet::zeros(3, 1, 8);
    PolicyNet policy = PolicyNet::zeros(3, 1, 8);
    Vec s0(3);
    s0 << 0.3, -0.7, 1.1;
    Trajectory traj = rollout(model, reward, policy, s0, 5, 0.05);
    CHECK(traj.states.size() == 6);
    for (const auto& s : traj.states) CHECK(s == s0);
}

TEST_CASE("rollout matches the closed-form linear recursion") {
    const int n = 2, m = 1;
    Mat M = Mat::Zero(n, n + m);
    M << 0.3, -0.5, 1.0,
         0.2, 0.1, -0.4;
    DynNet model = make_linear_dyn(M, n, m);
    RewardNet reward = RewardNet::zeros(n, m, 4);
    PolicyNet policy = PolicyNet::zeros(n, m, 4);  // mu = 0
    Vec s0(2);
    s0 << 1.0, -0.5;
    const double dt = 0.05;
    Trajectory traj = rollout(model, reward, policy, s0, 6, dt);

    Mat A = M.leftCols(n);
    Mat step = Mat::Identity(n, n) + A * dt;
    Vec expect = s0;
    for (int i = 0; i <= 6; ++i) {
        CHECK((traj.states[i] - expect).cwiseAbs().maxCoeff() <= 1e-12);
        expect = step * expect;
    }
}

TEST_CASE("rollout caches Jacobians consistent with the visited pairs") {
    DynNet model = DynNet::init(3, 1, 16, Nonlin::Sin, 5);
    RewardNet reward = RewardNet::init(3, 1, 16, 6);
    PolicyNet policy = PolicyNet::init(3, 1, 16, 7);
    Vec s0(3);
    s0 << -0.2, 0.6, 0.1;
    Trajectory traj = rollout(model, reward, policy, s0, 5, 0.05);
    for (int i = 0; i < traj.horizon(); ++i) {
        Mat dfds, dfda;
        dyn_jacobians(model, traj.states[i], traj.actions[i], dfds, dfda);
        CHECK(traj.df_ds[i] == dfds);
        CHECK(traj.df_da[i] == dfda);
        CHECK(traj.dmu_ds[i] == policy_mean_jacobian(policy, traj.states[i]));
        CHECK(traj.dr_ds[i] == reward_grad_s(reward, traj.states[i], traj.actions[i]));
        Vec mu, var;
        policy_mean_var(policy, traj.states[i], mu, var);
        CHECK(traj.actions[i] == mu);
    }
}

TEST_CASE("rollout reports the diverging step") {
    DynNet model = DynNet::zeros(2, 1, 4, Nonlin::Sin);
    model.b2 = Vec::Constant(2, 1e308);
    RewardNet reward = RewardNet::zeros(2, 1, 4);
    PolicyNet policy = PolicyNet::zeros(2, 1, 4);
    try {
        rollout(model, reward, policy, Vec::Zero(2), 5, 10.0);
        FAIL("expected RolloutDivergence");
    } catch (const RolloutDivergence& e) {
        CHECK(e.step == 0);
    }
}

TEST_CASE("backward_adjoint: zero reward gradient gives zero rho") {
    DynNet model = DynNet::init(3, 1, 16, Nonlin::Sin, 11);
    RewardNet reward = RewardNet::zeros(3, 1, 8);
    PolicyNet policy = PolicyNet::init(3, 1, 16, 12);
    Trajectory traj = rollout(model, reward, policy, Vec::Ones(3) * 0.2, 8, 0.05);
    AdjointTrace adj = backward_adjoint(traj);
    CHECK(adj.rho.size() == 9);
    for (const auto& r : adj.rho) CHECK(r.isZero(0.0));
}

namespace {

// Hand-built trajectory for a time-invariant linear system with no policy
// feedback: rho_dot = -source - A^T rho.
Trajectory linear_traj(const Mat& A, const Vec& source, int steps, double dt) {
    const int n = static_cast<int>(A.rows());
    Trajectory traj;
    traj.dt = dt;
    traj.states.assign(steps + 1, Vec::Zero(n));
    traj.actions.assign(steps, Vec::Zero(1));
    traj.rewards.assign(steps, 0.0);
    traj.df_ds.assign(steps, A);
    traj.df_da.assign(steps, Mat::Zero(n, 1));
    traj.dmu_ds.assign(steps, Mat::Zero(1, n));
    traj.dr_ds.assign(steps, source);
    return traj;
}

}  // namespace

TEST_CASE("backward_adjoint matches the scalar linear closed form") {
    // s_dot = a*s, r = s: rho(t) = (exp(a (tH - t)) - 1)/a
    const double a = 0.8, dt = 1e-3, t_h = 1.0;
    const int steps = 1000;
    Mat A(1, 1);
    A << a;
    Trajectory traj = linear_traj(A, Vec::Ones(1), steps, dt);
    AdjointTrace adj = backward_adjoint(traj);
    for (int i = 0; i <= steps; i += 100) {
        double t = i * dt;
        double expect = (std::exp(a * (t_h - t)) - 1.0) / a;
        CHECK(std::abs(adj.rho[i](0) - expect) <= 1e-3);
    }
}

TEST_CASE("backward_adjoint converges at first order (Richardson)") {
    const double a = -0.5, t_h = 1.0;
    auto err_at = [&](double dt) {
        int steps = static_cast<int>(std::llround(t_h / dt));
        Mat A(1, 1);
        A << a;
        Trajectory traj = linear_traj(A, Vec::Ones(1), steps, dt);
        AdjointTrace adj = backward_adjoint(traj);
        double expect = (std::exp(a * t_h) - 1.0) / a;
        return std::abs(adj.rho[0](0) - expect);
    };
    double e1 = err_at(2e-3);
    double e2 = err_at(1e-3);
    CHECK(e2 / e1 == doctest::Approx(0.5).epsilon(0.15));
}

TEST_CASE("backward_adjoint matches the matrix-exponential reference in 3-D") {
    Mat A(3, 3);
    A << -0.2, 0.4, 0.0,
         -0.3, -0.1, 0.2,
          0.1, 0.0, -0.4;
    Vec source(3);
    source << 1.0, -0.5, 0.25;
    const double dt = 1e-3, t_h = 0.5;
    const int steps = 500;
    Trajectory traj = linear_traj(A, source, steps, dt);
    AdjointTrace adj = backward_adjoint(traj);
    auto ref = oracle::linear_adjoint_reference(A, [&](double) { return source; }, t_h, dt);
    for (int i = 0; i < steps; i += 50) {
        CHECK((adj.rho[i] - ref[i]).cwiseAbs().maxCoeff() <= 2e-3);
    }
}

TEST_CASE("backward_adjoint rejects a trajectory with missing Jacobians") {
    Trajectory traj;
    traj.dt = 0.05;
    traj.states.assign(3, Vec::Zero(2));
    traj.actions.assign(2, Vec::Zero(1));
    CHECK_THROWS(backward_adjoint(traj));
}

TEST_CASE("mode_insertion_gradient trivials") {
    Vec rho(2), f(2);
    rho << 1.0, -2.0;
    f << 0.3, 0.4;
    CHECK(mode_insertion_gradient(rho, f, f) == 0.0);
    CHECK(mode_insertion_gradient(Vec::Zero(2), f, 2.0 * f) == 0.0);
    Vec f2(2);
    f2 << 1.3, 0.4;
    CHECK(mode_insertion_gradient(rho, f, f2) == doctest::Approx(1.0));
    CHECK_THROWS(mode_insertion_gradient(rho, f, Vec::Zero(3)));
}

TEST_CASE("adjoint insertion gradient matches the finite-difference oracle") {
    // smooth sin nets, fine control grid; the oracle re-simulates and
    // differences the reward integral directly. tau stays in the first half of
    // the horizon: the finite insertion window biases the estimate by
    // O(dt / (t_H - tau)), which must stay below the comparison tolerance.
    const double dt = 1e-3, t_h = 1.0;
    const int steps = 1000;
    Rng rng(71);
    int tested = 0;
    for (int trial = 0; trial < 12; ++trial) {
        DynNet model = DynNet::init(2, 1, 12, Nonlin::Sin, 2000 + trial);
        RewardNet reward = RewardNet::init(2, 1, 12, 2100 + trial);
        // state-only reward, as in the continuous objective the adjoint solves
        reward.W1.rightCols(1).setZero();
        PolicyNet policy = PolicyNet::init(2, 1, 12, 2200 + trial);
        Vec s0 = rng.normal_vec(2) * 0.5;
        int tau = static_cast<int>(rng.next_u64() % (steps / 2));
        Vec a_hat = rng.normal_vec(1);

        Trajectory traj = rollout(model, reward, policy, s0, steps, dt);
        AdjointTrace adj = backward_adjoint(traj);
        Vec f1 = dyn_forward(model, traj.states[tau], traj.actions[tau]);
        Vec f2 = dyn_forward(model, traj.states[tau], a_hat);
        double mig = mode_insertion_gradient(adj.rho[tau], f1, f2);

        double fd = oracle::insertion_objective_delta(model, reward, policy, s0, tau, a_hat,
                                                      dt, dt, dt, t_h);
        double denom = std::max(std::abs(fd), 1e-6);
        if (std::abs(fd) < 1e-6) continue;  // degenerate, relative error unstable
        ++tested;
        CHECK(std::abs(mig - fd) / denom <= 1e-2);
    }
    CHECK(tested >= 8);
}

TEST_CASE("hybrid_action basics") {
    SUBCASE("rho = 0, no noise: returns the policy mean") {
        DynNet model = DynNet::init(3, 1, 16, Nonlin::Sin, 91);
        PolicyNet policy = PolicyNet::init(3, 1, 16, 92);
        Vec s(3);
        s << 0.1, -0.2, 0.5;
        Vec mu, var;
        policy_mean_var(policy, s, mu, var);
        CHECK(hybrid_action(s, Vec::Zero(3), policy, model, 0.0, Vec::Zero(1)) == mu);
    }
    SUBCASE("covariance scaling scales the correction exactly") {
        const int n = 2, m = 1;
        Mat M = Mat::Zero(n, n + m);
        M << 0.0, 0.0, 1.5,
             0.0, 0.0, -0.7;
        DynNet model = make_linear_dyn(M, n, m);
        Vec s = Vec::Zero(n), rho(2), mu = Vec::Constant(1, 0.3);
        rho << 0.4, -1.1;
        const double c = 3.0;
        PolicyNet p1 = make_const_policy(n, m, mu, Vec::Constant(1, 0.2));
        PolicyNet pc = make_const_policy(n, m, mu, Vec::Constant(1, c * 0.2));
        Vec corr1 = hybrid_action(s, rho, p1, model, 0.0, Vec::Zero(1)) - mu;
        Vec corrc = hybrid_action(s, rho, pc, model, 0.0, Vec::Zero(1)) - mu;
        CHECK((corrc - c * corr1).cwiseAbs().maxCoeff() <= 1e-12);
    }
    SUBCASE("1-D arithmetic: Sigma=1, h=2, rho=0.5, mu=0.1 -> 1.1") {
        const int n = 1, m = 1;
        Mat M(1, 2);
        M << 0.0, 2.0;
        DynNet model = make_linear_dyn(M, n, m);
        PolicyNet policy = make_const_policy(n, m, Vec::Constant(1, 0.1),
                                             Vec::Constant(1, 1.0));
        Vec a = hybrid_action(Vec::Zero(1), Vec::Constant(1, 0.5), policy, model, 0.0,
                              Vec::Zero(1));
        CHECK(a(0) == doctest::Approx(1.1).epsilon(1e-12));
    }
}

TEST_CASE("corollary value equals the insertion gradient at the optimal action") {
    // exactly-affine dynamics: Eq. 5 with the true f2 at a* reproduces
    // rho^T h Sigma h^T rho with no linearization error
    Rng rng(77);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 2, m = 1;
        Mat M(n, n + m);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n + m; ++j) M(i, j) = rng.uniform(-1.0, 1.0);
        DynNet model = make_linear_dyn(M, n, m);
        PolicyNet policy = make_const_policy(n, m, Vec::Constant(1, rng.normal() * 0.2),
                                             Vec::Constant(1, rng.uniform(0.01, 1.0)));
        Vec s = rng.normal_vec(n);
        Vec rho = rng.normal_vec(n);

        Vec mu, var;
        policy_mean_var(policy, s, mu, var);
        Vec a_star = hybrid_action(s, rho, policy, model, 0.0, Vec::Zero(m));
        Vec f1 = dyn_forward(model, s, mu);
        Vec f2 = dyn_forward(model, s, a_star);
        double lhs = mode_insertion_gradient(rho, f1, f2);
        double rhs = corollary_mig(s, rho, policy, model);
        CHECK(rhs >= 0.0);
        CHECK(std::abs(lhs - rhs) <= 1e-9);
    }
}

TEST_CASE("corollary value is zero iff h^T rho vanishes") {
    const int n = 2, m = 1;
    Mat M(n, n + m);
    M << 0.1, 0.0, 1.0,
         0.0, 0.1, -1.0;
    DynNet model = make_linear_dyn(M, n, m);
    PolicyNet policy = make_const_policy(n, m, Vec::Zero(1), Vec::Constant(1, 0.5));
    Vec rho_perp(2);
    rho_perp << 1.0, 1.0;  // h = (1, -1): h^T rho = 0
    CHECK(corollary_mig(Vec::Zero(n), rho_perp, policy, model) == doctest::Approx(0.0));
    Vec rho(2);
    rho << 1.0, 0.0;
    CHECK(corollary_mig(Vec::Zero(n), rho, policy, model) > 0.0);
}

TEST_CASE("exploration_scale") {
    CHECK(exploration_scale(0) == 1.0);
    CHECK(exploration_scale(1) == doctest::Approx(0.999));
    CHECK(exploration_scale(6907) == doctest::Approx(0.001).epsilon(0.01));
}

TEST_CASE("det_plan is deterministic and falls back on divergence") {
    DynNet model = DynNet::init(3, 1, 16, Nonlin::Sin, 120);
    RewardNet reward = RewardNet::init(3, 1, 16, 121);
    PolicyNet policy = PolicyNet::init(3, 1, 16, 122);
    Vec s(3);
    s << 0.9, -0.1, 0.3;

    Rng r1(99), r2(99);
    DetPlan p1 = det_plan(model, reward, policy, s, 5, 0.05, 0.1, r1);
    DetPlan p2 = det_plan(model, reward, policy, s, 5, 0.05, 0.1, r2);
    CHECK(p1.action == p2.action);
    CHECK(p1.mig == p2.mig);
    CHECK(!p1.fell_back);

    DynNet diverging = DynNet::zeros(3, 1, 4, Nonlin::Sin);
    diverging.b2 = Vec::Constant(3, 1e308);
    Rng r3(99);
    DetPlan fb = det_plan(diverging, reward, policy, s, 5, 10.0, 0.0, r3);
    CHECK(fb.fell_back);
    Vec mu, var;
    policy_mean_var(policy, s, mu, var);
    CHECK(fb.action == mu);  // eps 0: pure policy fallback
    CHECK(fb.mig == 0.0);
}

TEST_CASE("hybrid action improves the predicted objective on linear systems") {
    Rng rng(131);
    const int n = 2, m = 1, H = 10;
    const double dt = 0.05;
    int improved = 0, total = 0;
    while (total < 100) {
        Mat M(n, n + m);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) M(i, j) = rng.uniform(-0.5, 0.5);
            M(i, n) = rng.uniform(-1.0, 1.0);
        }
        DynNet model = make_linear_dyn(M, n, m);
        RewardNet reward = make_abs_reward(n, m);
        PolicyNet policy = make_const_policy(n, m, Vec::Zero(m), Vec::Constant(m, 0.05));
        Vec s0 = rng.normal_vec(n);

        Trajectory traj = rollout(model, reward, policy, s0, H, dt);
        AdjointTrace adj = backward_adjoint(traj);
        if (adj.rho[0].cwiseAbs().maxCoeff() < 1e-9) continue;
        Vec a_star = hybrid_action(s0, adj.rho[0], policy, model, 0.0, Vec::Zero(m));
        if ((a_star - traj.actions[0]).cwiseAbs().maxCoeff() < 1e-12) continue;
        ++total;

        auto objective = [&](const Vec& first_action) {
            Vec s = s0;
            double J = 0.0;
            for (int t = 0; t < H; ++t) {
                Vec mu, var;
                policy_mean_var(policy, s, mu, var);
                Vec a = (t == 0) ? first_action : mu;
                J += reward_forward(reward, s, a) * dt;
                s = s + dyn_forward(model, s, a) * dt;
            }
            return J;
        };
        if (objective(a_star) > objective(traj.actions[0])) ++improved;
    }
    CHECK(improved >= 95);
}
