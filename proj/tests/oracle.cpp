#include "oracle.hpp"

#include <stdexcept>

#include <unsupported/Eigen/MatrixFunctions>

namespace hybridctl::oracle {

Mat fd_jacobian(const VecFn& fn, const Vec& x, double step) {
    if (step <= 0.0) throw std::invalid_argument("fd_jacobian: step must be positive");
    const Vec f0 = fn(x);
    Mat J(f0.size(), x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        Vec xp = x, xm = x;
        xp(j) += step;
        xm(j) -= step;
        J.col(j) = (fn(xp) - fn(xm)) / (2.0 * step);
    }
    return J;
}

Mat fd_jacobian_forward(const VecFn& fn, const Vec& x, double step) {
    const Vec f0 = fn(x);
    Mat J(f0.size(), x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        Vec xp = x;
        xp(j) += step;
        J.col(j) = (fn(xp) - f0) / step;
    }
    return J;
}

Vec fd_gradient(const ScalarFn& fn, const Vec& x, double step) {
    Vec g(x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        Vec xp = x, xm = x;
        xp(j) += step;
        xm(j) -= step;
        g(j) = (fn(xp) - fn(xm)) / (2.0 * step);
    }
    return g;
}

double insertion_objective_delta(const DynNet& model, const RewardNet& reward,
                                 const PolicyNet& policy, const Vec& s0, int tau,
                                 const Vec& a_hat, double lambda_fd, double dt_ctrl,
                                 double dt_fine, double t_horizon) {
    const int steps = static_cast<int>(std::llround(t_horizon / dt_fine));
    const double t_switch = tau * dt_ctrl;
    if (t_switch < 0.0 || t_switch >= t_horizon) {
        throw std::invalid_argument("insertion_objective_delta: tau out of range");
    }

    auto simulate = [&](bool switched) {
        Vec s = s0;
        double J = 0.0;
        for (int i = 0; i < steps; ++i) {
            const double t = i * dt_fine;
            Vec mu, var;
            policy_mean_var(policy, s, mu, var);
            Vec a = mu;
            if (switched && t >= t_switch && t < t_switch + lambda_fd) a = a_hat;
            // The objective integrand is the state-only reward r(s(t))
            // (evaluated at the nominal policy action): the inserted action
            // influences J through the dynamics alone.
            J += reward_forward(reward, s, mu) * dt_fine;
            s = s + dyn_forward(model, s, a) * dt_fine;
        }
        return J;
    };

    return (simulate(true) - simulate(false)) / lambda_fd;
}

std::vector<Vec> brute_force_theorem2(const SampleBatch& batch) {
    if (batch.K > 8) throw std::invalid_argument("brute_force_theorem2: K must be <= 8");
    std::vector<Vec> out(batch.H);
    for (int tau = 0; tau < batch.H; ++tau) {
        std::vector<long double> w(batch.K, 0.0L);
        long double sum = 0.0L;
        for (int k = 0; k < batch.K; ++k) {
            if (!batch.valid[k]) continue;
            const long double p = expl(static_cast<long double>(batch.log_p[k]));
            w[k] = expl(static_cast<long double>(batch.ctg[k][tau]) /
                        static_cast<long double>(batch.temperature)) *
                   p;
            sum += w[k];
        }
        if (!(sum > 0.0L) || std::isinf(static_cast<double>(sum))) {
            throw std::runtime_error("brute_force_theorem2: weight overflow/underflow");
        }
        Vec a = Vec::Zero(batch.nominal[tau].size());
        for (int k = 0; k < batch.K; ++k) {
            if (w[k] == 0.0L) continue;
            a += static_cast<double>(w[k] / sum) * batch.actions[k][tau];
        }
        out[tau] = a;
    }
    return out;
}

std::vector<Vec> linear_adjoint_reference(const Mat& M,
                                          const std::function<Vec(double)>& source,
                                          double t_horizon, double dt) {
    const int steps = static_cast<int>(std::llround(t_horizon / dt));
    const Eigen::Index n = M.rows();
    std::vector<Vec> rho(steps + 1, Vec::Zero(n));

    // Composite Simpson on each [tau, tH] with a fine substep.
    const int sub_per_step = 10;
    for (int j = 0; j < steps; ++j) {
        const double tau = j * dt;
        const int nsub = 2 * ((steps - j) * sub_per_step / 2) + 2;  // even count
        const double h = (t_horizon - tau) / nsub;
        Vec acc = Vec::Zero(n);
        for (int i = 0; i <= nsub; ++i) {
            const double t = tau + i * h;
            Mat phi_t = (M.transpose() * (t - tau)).exp();
            const double coeff = (i == 0 || i == nsub) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
            acc += coeff * (phi_t * source(t));
        }
        rho[j] = acc * (h / 3.0);
    }
    return rho;
}

}  // namespace hybridctl::oracle
