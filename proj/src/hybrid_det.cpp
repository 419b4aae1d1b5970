#include "hybridctl/hybrid_det.hpp"

namespace hybridctl {

Trajectory rollout(const DynNet& model, const RewardNet& reward, const PolicyNet& policy,
                   const Vec& s0, int horizon_steps, double dt) {
    if (horizon_steps < 1) throw std::invalid_argument("rollout: horizon_steps must be >= 1");
    Trajectory traj;
    traj.dt = dt;
    traj.states.reserve(horizon_steps + 1);
    traj.states.push_back(s0);

    Vec s = s0;
    for (int i = 0; i < horizon_steps; ++i) {
        Vec mu, var;
        policy_mean_var(policy, s, mu, var);
        Vec f = dyn_forward(model, s, mu);

        Mat dfds, dfda;
        dyn_jacobians(model, s, mu, dfds, dfda);
        traj.actions.push_back(mu);
        traj.rewards.push_back(reward_forward(reward, s, mu));
        traj.df_ds.push_back(std::move(dfds));
        traj.df_da.push_back(std::move(dfda));
        traj.dmu_ds.push_back(policy_mean_jacobian(policy, s));
        traj.dr_ds.push_back(reward_grad_s(reward, s, mu));

        s = s + f * dt;
        if (!s.allFinite()) throw RolloutDivergence(i);
        traj.states.push_back(s);
    }
    return traj;
}

AdjointTrace backward_adjoint(const Trajectory& traj) {
    const int H = traj.horizon();
    if (static_cast<int>(traj.df_ds.size()) != H || static_cast<int>(traj.dr_ds.size()) != H ||
        static_cast<int>(traj.dmu_ds.size()) != H || static_cast<int>(traj.df_da.size()) != H) {
        throw std::invalid_argument("backward_adjoint: missing cached Jacobians");
    }
    const Eigen::Index n = traj.states.front().size();
    AdjointTrace out;
    out.rho.assign(H + 1, Vec::Zero(n));
    for (int i = H; i > 0; --i) {
        const Vec& rho = out.rho[i];
        const int j = i - 1;
        // rho_dot evaluated with the linearization cached at tau_j, so each
        // cached step is consumed exactly once on the way down.
        // closed-loop state Jacobian of f(s, mu(s)): df/ds + df/da * dmu/ds
        Vec rho_dot = -traj.dr_ds[j] -
                      (traj.df_ds[j] + traj.df_da[j] * traj.dmu_ds[j]).transpose() * rho;
        out.rho[j] = rho - rho_dot * traj.dt;
        if (!out.rho[j].allFinite()) {
            throw std::runtime_error("backward_adjoint: non-finite adjoint");
        }
    }
    return out;
}

double mode_insertion_gradient(const Vec& rho, const Vec& f1, const Vec& f2) {
    if (rho.size() != f1.size() || rho.size() != f2.size()) {
        throw std::invalid_argument("mode_insertion_gradient: dimension mismatch");
    }
    return rho.dot(f2 - f1);
}

Vec hybrid_action(const Vec& s, const Vec& rho, const PolicyNet& policy, const DynNet& model,
                  double eps_scale, const Vec& z) {
    Vec mu, var;
    policy_mean_var(policy, s, mu, var);
    Mat dfds, dfda;
    dyn_jacobians(model, s, mu, dfds, dfda);
    Vec a = var.cwiseProduct(dfda.transpose() * rho) + mu + eps_scale * z;
    if (!a.allFinite()) throw std::runtime_error("hybrid_action: non-finite action");
    return a;
}

Vec hybrid_action(const Vec& s, const Vec& rho, const PolicyNet& policy, const DynNet& model,
                  double eps_scale, Rng& rng) {
    return hybrid_action(s, rho, policy, model, eps_scale,
                         rng.normal_vec(policy.action_dim()));
}

double corollary_mig(const Vec& s, const Vec& rho, const PolicyNet& policy,
                     const DynNet& model) {
    Vec mu, var;
    policy_mean_var(policy, s, mu, var);
    Mat dfds, dfda;
    dyn_jacobians(model, s, mu, dfds, dfda);
    Vec hr = dfda.transpose() * rho;
    return hr.dot(var.cwiseProduct(hr));
}

double exploration_scale(long total_env_steps) {
    return std::pow(0.999, static_cast<double>(total_env_steps));
}

DetPlan det_plan(const DynNet& model, const RewardNet& reward, const PolicyNet& policy,
                 const Vec& s, int horizon_steps, double dt, double eps_scale, Rng& rng) {
    DetPlan plan;
    plan.fell_back = false;
    try {
        Trajectory traj = rollout(model, reward, policy, s, horizon_steps, dt);
        AdjointTrace adj = backward_adjoint(traj);
        plan.action = hybrid_action(s, adj.rho[0], policy, model, eps_scale, rng);
        plan.mig = corollary_mig(s, adj.rho[0], policy, model);
    } catch (const RolloutDivergence&) {
        // Diverging model: fall back to the raw policy for this step.
        Vec mu, var;
        policy_mean_var(policy, s, mu, var);
        plan.action = mu + eps_scale * rng.normal_vec(policy.action_dim());
        plan.mig = 0.0;
        plan.fell_back = true;
    }
    return plan;
}

}  // namespace hybridctl
