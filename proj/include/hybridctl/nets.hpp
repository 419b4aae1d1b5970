#pragma once

#include <vector>

#include "hybridctl/math.hpp"

namespace hybridctl {

enum class Nonlin { Sin, Relu };

inline double act(Nonlin nl, double x) {
    return nl == Nonlin::Sin ? std::sin(x) : (x > 0.0 ? x : 0.0);
}
// Relu subgradient at the kink is fixed at 0.
inline double act_deriv(Nonlin nl, double x) {
    return nl == Nonlin::Sin ? std::cos(x) : (x > 0.0 ? 1.0 : 0.0);
}

// One-hidden-layer dynamics model. Forward pass is the state residual rate:
// rollouts advance s' = s + f(s, a) * dt and training targets are (s' - s)/dt.
// log_sigma holds the per-dimension log-variances of the model error.
struct DynNet {
    Mat W1;  // hidden x (n + m)
    Vec b1;
    Mat W2;  // n x hidden
    Vec b2;
    Vec log_sigma;  // n
    Nonlin nonlin = Nonlin::Sin;

    int state_dim() const { return static_cast<int>(W2.rows()); }
    int action_dim() const { return static_cast<int>(W1.cols() - W2.rows()); }

    static DynNet init(int n, int m, int hidden, Nonlin nonlin, std::uint64_t seed);
    static DynNet zeros(int n, int m, int hidden, Nonlin nonlin);

    Vec flatten() const;
    void unflatten(const Vec& flat);
    Eigen::Index num_params() const;
};

// Two-layer relu reward model, scalar output, input [s; a].
struct RewardNet {
    Mat W1;  // hidden x (n + m)
    Vec b1;
    Eigen::RowVectorXd W2;  // 1 x hidden
    double b2 = 0.0;
    int state_dim_ = 0;

    int state_dim() const { return state_dim_; }
    int action_dim() const { return static_cast<int>(W1.cols()) - state_dim_; }

    static RewardNet init(int n, int m, int hidden, std::uint64_t seed);
    static RewardNet zeros(int n, int m, int hidden);

    Vec flatten() const;
    void unflatten(const Vec& flat);
    Eigen::Index num_params() const;
};

Vec dyn_forward(const DynNet& net, const Vec& s, const Vec& a);
void dyn_jacobians(const DynNet& net, const Vec& s, const Vec& a, Mat& df_ds, Mat& df_da);

double reward_forward(const RewardNet& net, const Vec& s, const Vec& a);
Vec reward_grad_s(const RewardNet& net, const Vec& s, const Vec& a);

struct DynBatch {
    std::vector<Vec> s;
    std::vector<Vec> a;
    std::vector<Vec> target;  // residual rate (s' - s)/dt
};

struct RewardBatch {
    std::vector<Vec> s;
    std::vector<Vec> a;
    std::vector<double> r;
    std::vector<Vec> s_next;
    std::vector<Vec> a_next;
    std::vector<bool> has_next;
};

// Mean Gaussian NLL of the residual-rate targets under
// N(f(s,a), diag(exp(log_sigma))); gradient over all parameters including
// log_sigma, laid out as DynNet::flatten.
double dynamics_loss(const DynNet& net, const DynBatch& batch, Vec& grad);

// Mean squared TD-style error (r + 0.95 r(s',a') - r(s,a))^2 with the
// bootstrap treated as a constant target.
double reward_loss(const RewardNet& net, const RewardBatch& batch, Vec& grad);

struct AdamState {
    Vec m;
    Vec v;
    long step = 0;
    double lr = 0.003;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    explicit AdamState(Eigen::Index n = 0, double lr_ = 0.003)
        : m(Vec::Zero(n)), v(Vec::Zero(n)), lr(lr_) {}
};

// Standard bias-corrected Adam update; returns the new parameter vector.
Vec adam_step(AdamState& state, const Vec& params, const Vec& grad);

// Uniform +-1/sqrt(fan_in) initialization, row-major fill order.
void init_layer(Mat& W, Vec& b, Rng& rng);

}  // namespace hybridctl
