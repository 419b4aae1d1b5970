#pragma once

#include <stdexcept>
#include <vector>

#include "hybridctl/policy.hpp"

namespace hybridctl {

struct RolloutDivergence : std::runtime_error {
    explicit RolloutDivergence(int step_index)
        : std::runtime_error("model rollout diverged at step " + std::to_string(step_index)),
          step(step_index) {}
    int step;
};

// Forward model rollout under the policy mean, with the per-step Jacobians the
// backward adjoint pass needs.
struct Trajectory {
    double dt = 0.0;
    std::vector<Vec> states;    // horizon + 1
    std::vector<Vec> actions;   // horizon, mu(s_i)
    std::vector<double> rewards;
    std::vector<Mat> df_ds;
    std::vector<Mat> df_da;
    std::vector<Mat> dmu_ds;
    std::vector<Vec> dr_ds;

    int horizon() const { return static_cast<int>(actions.size()); }
};

struct AdjointTrace {
    std::vector<Vec> rho;  // horizon + 1 entries, rho.back() == 0
};

Trajectory rollout(const DynNet& model, const RewardNet& reward, const PolicyNet& policy,
                   const Vec& s0, int horizon_steps, double dt);

// rho(tau_{i-1}) = rho(tau_i) - rho_dot(tau_i) * dt with terminal rho = 0 and
// rho_dot = -dr/ds - (df/ds + dmu/ds^T df/da)^T rho.
AdjointTrace backward_adjoint(const Trajectory& traj);

// rho^T (f2 - f1): objective sensitivity to swapping mu(s) for an alternate
// action over an infinitesimal window.
double mode_insertion_gradient(const Vec& rho, const Vec& f1, const Vec& f2);

// a* = Sigma(s) h(s)^T rho + mu(s) + eps_scale * z, h(s) = df/da at (s, mu(s)).
Vec hybrid_action(const Vec& s, const Vec& rho, const PolicyNet& policy, const DynNet& model,
                  double eps_scale, const Vec& z);
Vec hybrid_action(const Vec& s, const Vec& rho, const PolicyNet& policy, const DynNet& model,
                  double eps_scale, Rng& rng);

// Value of the mode insertion gradient at the optimal action:
// rho^T h Sigma h^T rho (always >= 0).
double corollary_mig(const Vec& s, const Vec& rho, const PolicyNet& policy,
                     const DynNet& model);

// 0.999^t decay of the added exploration, t counting environment interactions.
double exploration_scale(long total_env_steps);

struct DetPlan {
    Vec action;      // pre-clip
    double mig;      // rho^T h Sigma h^T rho at the current state
    bool fell_back;  // model rollout diverged; action is mu(s) + noise
};

// One receding-horizon planning step of the deterministic controller.
DetPlan det_plan(const DynNet& model, const RewardNet& reward, const PolicyNet& policy,
                 const Vec& s, int horizon_steps, double dt, double eps_scale, Rng& rng);

}  // namespace hybridctl
