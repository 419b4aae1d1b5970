#pragma once

#include <memory>
#include <vector>

#include "hybridctl/nets.hpp"

namespace hybridctl {

// Diagonal-Gaussian policy pi(a|s) = N(mu(s), Sigma(s)).
// Mean head: single hidden sin layer; variance head: single hidden relu layer
// whose raw output is floored as var = relu(raw) + kVarFloor so Sigma stays
// invertible.
struct PolicyNet {
    static constexpr double kVarFloor = 1e-3;

    Mat mean_W1;  // hidden x n
    Vec mean_b1;
    Mat mean_W2;  // m x hidden
    Vec mean_b2;
    Mat var_W1;
    Vec var_b1;
    Mat var_W2;
    Vec var_b2;

    int state_dim() const { return static_cast<int>(mean_W1.cols()); }
    int action_dim() const { return static_cast<int>(mean_W2.rows()); }

    static PolicyNet init(int n, int m, int hidden, std::uint64_t seed);
    static PolicyNet zeros(int n, int m, int hidden);

    Vec flatten() const;
    void unflatten(const Vec& flat);
    Eigen::Index num_params() const;
};

void policy_mean_var(const PolicyNet& net, const Vec& s, Vec& mu, Vec& var);

// mu(s) + sqrt(var) .* z. Sampling is unclipped; clipping happens only at the
// environment boundary.
Vec policy_sample_with_noise(const PolicyNet& net, const Vec& s, const Vec& z);
Vec policy_sample(const PolicyNet& net, const Vec& s, Rng& rng);

double policy_log_prob(const PolicyNet& net, const Vec& s, const Vec& a);

// d mu / d s, m x n.
Mat policy_mean_jacobian(const PolicyNet& net, const Vec& s);

// Weighted Gaussian NLL: sum_i w_i * (-log pi(a_i | s_i)). Gradient over all
// parameters in flatten order.
double policy_nll_loss(const PolicyNet& net, const std::vector<Vec>& states,
                       const std::vector<Vec>& actions, const std::vector<double>& weights,
                       Vec& grad);

// One full-batch Adam step on the mean demo NLL.
double bc_update(PolicyNet& net, const std::vector<Vec>& states,
                 const std::vector<Vec>& actions, AdamState& adam);

// softmax(returns / temperature)
std::vector<double> rwr_weights(const std::vector<double>& returns, double temperature);

double rwr_update(PolicyNet& net, const std::vector<Vec>& states,
                  const std::vector<Vec>& actions, const std::vector<double>& returns,
                  double temperature, AdamState& adam);

// Experience-based policy improvement hook (Alg. 1's "any experience-based
// method"). The learner hands over a sampled batch with per-transition
// discounted returns.
class PolicyUpdater {
public:
    virtual ~PolicyUpdater() = default;
    virtual void update(PolicyNet& net, const std::vector<Vec>& states,
                        const std::vector<Vec>& actions,
                        const std::vector<double>& returns) = 0;
};

class BehaviorCloningUpdater : public PolicyUpdater {
public:
    BehaviorCloningUpdater(Eigen::Index num_params, double lr, int epochs)
        : adam_(num_params, lr), epochs_(epochs) {}
    void update(PolicyNet& net, const std::vector<Vec>& states,
                const std::vector<Vec>& actions, const std::vector<double>&) override {
        for (int e = 0; e < epochs_; ++e) bc_update(net, states, actions, adam_);
    }

private:
    AdamState adam_;
    int epochs_;
};

class RewardWeightedRegressionUpdater : public PolicyUpdater {
public:
    RewardWeightedRegressionUpdater(Eigen::Index num_params, double lr, double temperature,
                                    int steps)
        : adam_(num_params, lr), temperature_(temperature), steps_(steps) {}
    void update(PolicyNet& net, const std::vector<Vec>& states,
                const std::vector<Vec>& actions,
                const std::vector<double>& returns) override {
        for (int e = 0; e < steps_; ++e)
            rwr_update(net, states, actions, returns, temperature_, adam_);
    }

private:
    AdamState adam_;
    double temperature_;
    int steps_;
};

}  // namespace hybridctl
