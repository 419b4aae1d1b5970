#include "hybridctl/policy.hpp"

#include <stdexcept>

namespace hybridctl {

namespace {

void check(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

struct HeadEval {
    Vec pre;
    Vec phi;
    Vec out;
};

HeadEval eval_head(const Mat& W1, const Vec& b1, const Mat& W2, const Vec& b2, Nonlin nl,
                   const Vec& s) {
    HeadEval h;
    h.pre = W1 * s + b1;
    h.phi.resize(h.pre.size());
    for (Eigen::Index i = 0; i < h.pre.size(); ++i) h.phi(i) = act(nl, h.pre(i));
    h.out = W2 * h.phi + b2;
    return h;
}

}  // namespace

PolicyNet PolicyNet::zeros(int n, int m, int hidden) {
    PolicyNet net;
    net.mean_W1 = Mat::Zero(hidden, n);
    net.mean_b1 = Vec::Zero(hidden);
    net.mean_W2 = Mat::Zero(m, hidden);
    net.mean_b2 = Vec::Zero(m);
    net.var_W1 = Mat::Zero(hidden, n);
    net.var_b1 = Vec::Zero(hidden);
    net.var_W2 = Mat::Zero(m, hidden);
    net.var_b2 = Vec::Zero(m);
    return net;
}

PolicyNet PolicyNet::init(int n, int m, int hidden, std::uint64_t seed) {
    PolicyNet net = zeros(n, m, hidden);
    Rng rng(seed);
    init_layer(net.mean_W1, net.mean_b1, rng);
    init_layer(net.mean_W2, net.mean_b2, rng);
    init_layer(net.var_W1, net.var_b1, rng);
    init_layer(net.var_W2, net.var_b2, rng);
    return net;
}

Eigen::Index PolicyNet::num_params() const {
    return mean_W1.size() + mean_b1.size() + mean_W2.size() + mean_b2.size() +
           var_W1.size() + var_b1.size() + var_W2.size() + var_b2.size();
}

Vec PolicyNet::flatten() const {
    Vec flat(num_params());
    Eigen::Index k = 0;
    auto put_mat = [&](const Mat& M) {
        for (Eigen::Index i = 0; i < M.rows(); ++i)
            for (Eigen::Index j = 0; j < M.cols(); ++j) flat(k++) = M(i, j);
    };
    auto put_vec = [&](const Vec& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) flat(k++) = v(i);
    };
    put_mat(mean_W1); put_vec(mean_b1); put_mat(mean_W2); put_vec(mean_b2);
    put_mat(var_W1); put_vec(var_b1); put_mat(var_W2); put_vec(var_b2);
    return flat;
}

void PolicyNet::unflatten(const Vec& flat) {
    check(flat.size() == num_params(), "PolicyNet::unflatten: size mismatch");
    Eigen::Index k = 0;
    auto get_mat = [&](Mat& M) {
        for (Eigen::Index i = 0; i < M.rows(); ++i)
            for (Eigen::Index j = 0; j < M.cols(); ++j) M(i, j) = flat(k++);
    };
    auto get_vec = [&](Vec& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = flat(k++);
    };
    get_mat(mean_W1); get_vec(mean_b1); get_mat(mean_W2); get_vec(mean_b2);
    get_mat(var_W1); get_vec(var_b1); get_mat(var_W2); get_vec(var_b2);
}

void policy_mean_var(const PolicyNet& net, const Vec& s, Vec& mu, Vec& var) {
    check(s.size() == net.state_dim(), "policy_mean_var: state dim");
    mu = eval_head(net.mean_W1, net.mean_b1, net.mean_W2, net.mean_b2, Nonlin::Sin, s).out;
    Vec raw = eval_head(net.var_W1, net.var_b1, net.var_W2, net.var_b2, Nonlin::Relu, s).out;
    var.resize(raw.size());
    for (Eigen::Index i = 0; i < raw.size(); ++i)
        var(i) = act(Nonlin::Relu, raw(i)) + PolicyNet::kVarFloor;
}

Vec policy_sample_with_noise(const PolicyNet& net, const Vec& s, const Vec& z) {
    Vec mu, var;
    policy_mean_var(net, s, mu, var);
    return mu + var.cwiseSqrt().cwiseProduct(z);
}

Vec policy_sample(const PolicyNet& net, const Vec& s, Rng& rng) {
    return policy_sample_with_noise(net, s, rng.normal_vec(net.action_dim()));
}

double policy_log_prob(const PolicyNet& net, const Vec& s, const Vec& a) {
    check(a.size() == net.action_dim(), "policy_log_prob: action dim");
    Vec mu, var;
    policy_mean_var(net, s, mu, var);
    double lp = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double d = a(i) - mu(i);
        lp += -0.5 * (d * d / var(i) + std::log(2.0 * kPi * var(i)));
    }
    return lp;
}

Mat policy_mean_jacobian(const PolicyNet& net, const Vec& s) {
    check(s.size() == net.state_dim(), "policy_mean_jacobian: state dim");
    Vec pre = net.mean_W1 * s + net.mean_b1;
    Mat scaled = net.mean_W1;
    for (Eigen::Index i = 0; i < pre.size(); ++i) scaled.row(i) *= std::cos(pre(i));
    return net.mean_W2 * scaled;
}

double policy_nll_loss(const PolicyNet& net, const std::vector<Vec>& states,
                       const std::vector<Vec>& actions, const std::vector<double>& weights,
                       Vec& grad) {
    const std::size_t B = states.size();
    check(B > 0, "policy_nll_loss: empty batch");
    check(actions.size() == B && weights.size() == B, "policy_nll_loss: batch size mismatch");

    PolicyNet g = PolicyNet::zeros(net.state_dim(), net.action_dim(),
                                   static_cast<int>(net.mean_b1.size()));
    double loss = 0.0;
    for (std::size_t i = 0; i < B; ++i) {
        const Vec& s = states[i];
        const double w = weights[i];
        HeadEval mh = eval_head(net.mean_W1, net.mean_b1, net.mean_W2, net.mean_b2,
                                Nonlin::Sin, s);
        HeadEval vh = eval_head(net.var_W1, net.var_b1, net.var_W2, net.var_b2,
                                Nonlin::Relu, s);
        Vec var(vh.out.size());
        for (Eigen::Index j = 0; j < var.size(); ++j)
            var(j) = act(Nonlin::Relu, vh.out(j)) + PolicyNet::kVarFloor;

        Vec dmu(var.size()), draw(var.size());
        for (Eigen::Index j = 0; j < var.size(); ++j) {
            const double d = actions[i](j) - mh.out(j);
            loss += w * 0.5 * (d * d / var(j) + std::log(2.0 * kPi * var(j)));
            dmu(j) = w * (-d / var(j));
            const double dvar = w * 0.5 * (1.0 / var(j) - d * d / (var(j) * var(j)));
            draw(j) = dvar * act_deriv(Nonlin::Relu, vh.out(j));
        }

        // backprop mean head
        g.mean_W2.noalias() += dmu * mh.phi.transpose();
        g.mean_b2 += dmu;
        Vec dh = net.mean_W2.transpose() * dmu;
        for (Eigen::Index j = 0; j < dh.size(); ++j) dh(j) *= std::cos(mh.pre(j));
        g.mean_W1.noalias() += dh * s.transpose();
        g.mean_b1 += dh;

        // backprop variance head
        g.var_W2.noalias() += draw * vh.phi.transpose();
        g.var_b2 += draw;
        Vec dv = net.var_W2.transpose() * draw;
        for (Eigen::Index j = 0; j < dv.size(); ++j)
            dv(j) *= act_deriv(Nonlin::Relu, vh.pre(j));
        g.var_W1.noalias() += dv * s.transpose();
        g.var_b1 += dv;
    }
    grad = g.flatten();
    return loss;
}

double bc_update(PolicyNet& net, const std::vector<Vec>& states,
                 const std::vector<Vec>& actions, AdamState& adam) {
    check(!states.empty(), "bc_update: empty demo set");
    std::vector<double> w(states.size(), 1.0 / static_cast<double>(states.size()));
    Vec grad;
    const double loss = policy_nll_loss(net, states, actions, w, grad);
    net.unflatten(adam_step(adam, net.flatten(), grad));
    return loss;
}

std::vector<double> rwr_weights(const std::vector<double>& returns, double temperature) {
    check(!returns.empty(), "rwr_weights: empty");
    check(temperature > 0.0, "rwr_weights: temperature must be positive");
    double mx = returns[0];
    for (double r : returns) mx = std::max(mx, r);
    std::vector<double> w(returns.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < returns.size(); ++i) {
        w[i] = std::exp((returns[i] - mx) / temperature);
        sum += w[i];
    }
    for (double& x : w) x /= sum;
    return w;
}

double rwr_update(PolicyNet& net, const std::vector<Vec>& states,
                  const std::vector<Vec>& actions, const std::vector<double>& returns,
                  double temperature, AdamState& adam) {
    check(!states.empty(), "rwr_update: empty batch");
    std::vector<double> w = rwr_weights(returns, temperature);
    Vec grad;
    const double loss = policy_nll_loss(net, states, actions, w, grad);
    net.unflatten(adam_step(adam, net.flatten(), grad));
    return loss;
}

}  // namespace hybridctl
