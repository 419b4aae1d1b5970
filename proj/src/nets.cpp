#include "hybridctl/nets.hpp"

#include <stdexcept>

namespace hybridctl {

namespace {

void check_dims(const char* what, Eigen::Index got, Eigen::Index want) {
    if (got != want) {
        throw std::invalid_argument(std::string(what) + ": dimension mismatch");
    }
}

Vec cat(const Vec& s, const Vec& a) {
    Vec x(s.size() + a.size());
    x << s, a;
    return x;
}

// Shared two-layer backprop: given dL/dout, accumulate parameter gradients.
// x is the input, pre the hidden pre-activation, phi the hidden activation.
template <typename W2T>
void backprop_two_layer(const Mat& W1, const W2T& W2, Nonlin nonlin, const Vec& x,
                        const Vec& pre, const Vec& phi, const Vec& dout, Mat& gW1,
                        Vec& gb1, Mat& gW2, Vec& gb2) {
    gW2.noalias() += dout * phi.transpose();
    gb2 += dout;
    Vec dh = W2.transpose() * dout;
    for (Eigen::Index i = 0; i < dh.size(); ++i) dh(i) *= act_deriv(nonlin, pre(i));
    gW1.noalias() += dh * x.transpose();
    gb1 += dh;
}

}  // namespace

void init_layer(Mat& W, Vec& b, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(W.cols()));
    for (Eigen::Index i = 0; i < W.rows(); ++i)
        for (Eigen::Index j = 0; j < W.cols(); ++j) W(i, j) = rng.uniform(-bound, bound);
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = rng.uniform(-bound, bound);
}

DynNet DynNet::zeros(int n, int m, int hidden, Nonlin nonlin) {
    DynNet net;
    net.W1 = Mat::Zero(hidden, n + m);
    net.b1 = Vec::Zero(hidden);
    net.W2 = Mat::Zero(n, hidden);
    net.b2 = Vec::Zero(n);
    net.log_sigma = Vec::Zero(n);
    net.nonlin = nonlin;
    return net;
}

DynNet DynNet::init(int n, int m, int hidden, Nonlin nonlin, std::uint64_t seed) {
    DynNet net = zeros(n, m, hidden, nonlin);
    Rng rng(seed);
    init_layer(net.W1, net.b1, rng);
    init_layer(net.W2, net.b2, rng);
    return net;
}

Eigen::Index DynNet::num_params() const {
    return W1.size() + b1.size() + W2.size() + b2.size() + log_sigma.size();
}

Vec DynNet::flatten() const {
    Vec flat(num_params());
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < W1.rows(); ++i)
        for (Eigen::Index j = 0; j < W1.cols(); ++j) flat(k++) = W1(i, j);
    for (Eigen::Index i = 0; i < b1.size(); ++i) flat(k++) = b1(i);
    for (Eigen::Index i = 0; i < W2.rows(); ++i)
        for (Eigen::Index j = 0; j < W2.cols(); ++j) flat(k++) = W2(i, j);
    for (Eigen::Index i = 0; i < b2.size(); ++i) flat(k++) = b2(i);
    for (Eigen::Index i = 0; i < log_sigma.size(); ++i) flat(k++) = log_sigma(i);
    return flat;
}

void DynNet::unflatten(const Vec& flat) {
    check_dims("DynNet::unflatten", flat.size(), num_params());
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < W1.rows(); ++i)
        for (Eigen::Index j = 0; j < W1.cols(); ++j) W1(i, j) = flat(k++);
    for (Eigen::Index i = 0; i < b1.size(); ++i) b1(i) = flat(k++);
    for (Eigen::Index i = 0; i < W2.rows(); ++i)
        for (Eigen::Index j = 0; j < W2.cols(); ++j) W2(i, j) = flat(k++);
    for (Eigen::Index i = 0; i < b2.size(); ++i) b2(i) = flat(k++);
    for (Eigen::Index i = 0; i < log_sigma.size(); ++i) log_sigma(i) = flat(k++);
}

RewardNet RewardNet::zeros(int n, int m, int hidden) {
    RewardNet net;
    net.W1 = Mat::Zero(hidden, n + m);
    net.b1 = Vec::Zero(hidden);
    net.W2 = Eigen::RowVectorXd::Zero(hidden);
    net.b2 = 0.0;
    net.state_dim_ = n;
    return net;
}

RewardNet RewardNet::init(int n, int m, int hidden, std::uint64_t seed) {
    RewardNet net = zeros(n, m, hidden);
    Rng rng(seed);
    init_layer(net.W1, net.b1, rng);
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (Eigen::Index i = 0; i < net.W2.size(); ++i) net.W2(i) = rng.uniform(-bound, bound);
    net.b2 = rng.uniform(-bound, bound);
    return net;
}

Eigen::Index RewardNet::num_params() const {
    return W1.size() + b1.size() + W2.size() + 1;
}

Vec RewardNet::flatten() const {
    Vec flat(num_params());
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < W1.rows(); ++i)
        for (Eigen::Index j = 0; j < W1.cols(); ++j) flat(k++) = W1(i, j);
    for (Eigen::Index i = 0; i < b1.size(); ++i) flat(k++) = b1(i);
    for (Eigen::Index i = 0; i < W2.size(); ++i) flat(k++) = W2(i);
    flat(k++) = b2;
    return flat;
}

void RewardNet::unflatten(const Vec& flat) {
    check_dims("RewardNet::unflatten", flat.size(), num_params());
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < W1.rows(); ++i)
        for (Eigen::Index j = 0; j < W1.cols(); ++j) W1(i, j) = flat(k++);
    for (Eigen::Index i = 0; i < b1.size(); ++i) b1(i) = flat(k++);
    for (Eigen::Index i = 0; i < W2.size(); ++i) W2(i) = flat(k++);
    b2 = flat(k++);
}

Vec dyn_forward(const DynNet& net, const Vec& s, const Vec& a) {
    check_dims("dyn_forward s", s.size(), net.state_dim());
    check_dims("dyn_forward a", a.size(), net.action_dim());
    Vec pre = net.W1 * cat(s, a) + net.b1;
    for (Eigen::Index i = 0; i < pre.size(); ++i) pre(i) = act(net.nonlin, pre(i));
    return net.W2 * pre + net.b2;
}

void dyn_jacobians(const DynNet& net, const Vec& s, const Vec& a, Mat& df_ds, Mat& df_da) {
    const int n = net.state_dim();
    const int m = net.action_dim();
    check_dims("dyn_jacobians s", s.size(), n);
    check_dims("dyn_jacobians a", a.size(), m);
    Vec pre = net.W1 * cat(s, a) + net.b1;
    // J = W2 * diag(phi'(pre)) * W1, split by input block.
    Mat scaled = net.W1;
    for (Eigen::Index i = 0; i < pre.size(); ++i) scaled.row(i) *= act_deriv(net.nonlin, pre(i));
    Mat full = net.W2 * scaled;  // n x (n + m)
    df_ds = full.leftCols(n);
    df_da = full.rightCols(m);
}

double reward_forward(const RewardNet& net, const Vec& s, const Vec& a) {
    check_dims("reward_forward s", s.size(), net.state_dim());
    check_dims("reward_forward a", a.size(), net.action_dim());
    Vec pre = net.W1 * cat(s, a) + net.b1;
    for (Eigen::Index i = 0; i < pre.size(); ++i) pre(i) = act(Nonlin::Relu, pre(i));
    return net.W2.dot(pre) + net.b2;
}

Vec reward_grad_s(const RewardNet& net, const Vec& s, const Vec& a) {
    const int n = net.state_dim();
    check_dims("reward_grad_s s", s.size(), n);
    check_dims("reward_grad_s a", a.size(), net.action_dim());
    Vec pre = net.W1 * cat(s, a) + net.b1;
    Vec dh(pre.size());
    for (Eigen::Index i = 0; i < pre.size(); ++i) dh(i) = net.W2(i) * act_deriv(Nonlin::Relu, pre(i));
    return net.W1.leftCols(n).transpose() * dh;
}

double dynamics_loss(const DynNet& net, const DynBatch& batch, Vec& grad) {
    const std::size_t B = batch.s.size();
    if (B == 0) throw std::invalid_argument("dynamics_loss: empty batch");
    const int n = net.state_dim();
    const double inv_b = 1.0 / static_cast<double>(B);

    Mat gW1 = Mat::Zero(net.W1.rows(), net.W1.cols());
    Vec gb1 = Vec::Zero(net.b1.size());
    Mat gW2 = Mat::Zero(net.W2.rows(), net.W2.cols());
    Vec gb2 = Vec::Zero(net.b2.size());
    Vec gls = Vec::Zero(n);
    const Vec inv_var = (-net.log_sigma.array()).exp();

    double loss = 0.0;
    for (std::size_t i = 0; i < B; ++i) {
        Vec x = cat(batch.s[i], batch.a[i]);
        Vec pre = net.W1 * x + net.b1;
        Vec phi(pre.size());
        for (Eigen::Index j = 0; j < pre.size(); ++j) phi(j) = act(net.nonlin, pre(j));
        Vec f = net.W2 * phi + net.b2;
        Vec err = batch.target[i] - f;

        for (int j = 0; j < n; ++j) {
            loss += 0.5 * inv_b * (err(j) * err(j) * inv_var(j) + net.log_sigma(j) +
                                   std::log(2.0 * kPi));
            gls(j) += 0.5 * inv_b * (1.0 - err(j) * err(j) * inv_var(j));
        }
        Vec dout = (-inv_b) * err.cwiseProduct(inv_var);
        backprop_two_layer(net.W1, net.W2, net.nonlin, x, pre, phi, dout, gW1, gb1, gW2, gb2);
    }

    DynNet g = DynNet::zeros(n, net.action_dim(), static_cast<int>(net.b1.size()), net.nonlin);
    g.W1 = gW1;
    g.b1 = gb1;
    g.W2 = gW2;
    g.b2 = gb2;
    g.log_sigma = gls;
    grad = g.flatten();
    return loss;
}

double reward_loss(const RewardNet& net, const RewardBatch& batch, Vec& grad) {
    const std::size_t B = batch.s.size();
    if (B == 0) throw std::invalid_argument("reward_loss: empty batch");
    const double inv_b = 1.0 / static_cast<double>(B);

    Mat gW1 = Mat::Zero(net.W1.rows(), net.W1.cols());
    Vec gb1 = Vec::Zero(net.b1.size());
    Mat gW2 = Mat::Zero(1, net.W2.size());
    Vec gb2 = Vec::Zero(1);

    double loss = 0.0;
    for (std::size_t i = 0; i < B; ++i) {
        double target = batch.r[i];
        if (batch.has_next[i]) {
            target += 0.95 * reward_forward(net, batch.s_next[i], batch.a_next[i]);
        }
        Vec x = cat(batch.s[i], batch.a[i]);
        Vec pre = net.W1 * x + net.b1;
        Vec phi(pre.size());
        for (Eigen::Index j = 0; j < pre.size(); ++j) phi(j) = act(Nonlin::Relu, pre(j));
        const double predicted = net.W2.dot(phi) + net.b2;
        const double delta = target - predicted;
        loss += inv_b * delta * delta;

        Vec dout(1);
        dout(0) = -2.0 * inv_b * delta;
        backprop_two_layer(net.W1, net.W2, Nonlin::Relu, x, pre, phi, dout, gW1, gb1, gW2, gb2);
    }

    RewardNet g = RewardNet::zeros(net.state_dim(), net.action_dim(),
                                   static_cast<int>(net.b1.size()));
    g.W1 = gW1;
    g.b1 = gb1;
    g.W2 = gW2.row(0);
    g.b2 = gb2(0);
    grad = g.flatten();
    return loss;
}

Vec adam_step(AdamState& state, const Vec& params, const Vec& grad) {
    if (params.size() != grad.size() || params.size() != state.m.size()) {
        throw std::invalid_argument("adam_step: shape mismatch");
    }
    state.step += 1;
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad.cwiseProduct(grad);
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    Vec mhat = state.m / bc1;
    Vec vhat = state.v / bc2;
    return params - state.lr * (mhat.array() / (vhat.array().sqrt() + state.eps)).matrix();
}

}  // namespace hybridctl
