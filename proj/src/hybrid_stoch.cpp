#include "hybridctl/hybrid_stoch.hpp"

#include <limits>
#include <stdexcept>

namespace hybridctl {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void rollout_one(const DynNet& model, const RewardNet& reward, const PolicyNet& policy,
                 const Vec& s0, double dt, std::uint64_t seed, bool zero_noise,
                 std::vector<Vec>& actions, std::vector<Vec>& states,
                 std::vector<double>& rewards, double& log_p, char& valid) {
    const int H = static_cast<int>(actions.size());
    const int m = policy.action_dim();
    Rng rng(seed);
    Vec s = s0;
    log_p = 0.0;
    valid = 1;
    for (int tau = 0; tau < H; ++tau) {
        Vec z = zero_noise ? Vec::Zero(m) : rng.normal_vec(m);
        Vec v = policy_sample_with_noise(policy, s, z);
        states[tau] = s;
        actions[tau] = v;
        log_p += policy_log_prob(policy, s, v);
        rewards[tau] = reward_forward(reward, s, v);
        s = s + dyn_forward(model, s, v) * dt;
        if (!s.allFinite() || !std::isfinite(rewards[tau])) {
            // Dead sample: keeps its slot, drops out of the weighting.
            valid = 0;
            for (int t = tau; t < H; ++t) {
                states[t] = states[tau];
                actions[t] = Vec::Zero(m);
                rewards[t] = 0.0;
            }
            return;
        }
    }
}

}  // namespace

SampleBatch sample_rollouts(const DynNet& model, const RewardNet& reward,
                            const PolicyNet& policy, const Vec& s0, int H, int K, double dt,
                            double temperature, std::uint64_t base_seed, bool parallel,
                            bool zero_noise) {
    if (H < 1 || K < 1) throw std::invalid_argument("sample_rollouts: H and K must be >= 1");
    SampleBatch batch;
    batch.K = K;
    batch.H = H;
    batch.dt = dt;
    batch.temperature = temperature;
    batch.nominal.assign(H, Vec::Zero(policy.action_dim()));
    batch.actions.assign(K, std::vector<Vec>(H));
    batch.states.assign(K, std::vector<Vec>(H));
    batch.rewards.assign(K, std::vector<double>(H, 0.0));
    batch.log_p.assign(K, 0.0);
    batch.valid.assign(K, 1);

#pragma omp parallel for schedule(static) if (parallel)
    for (int k = 0; k < K; ++k) {
        rollout_one(model, reward, policy, s0, dt, mix_seed(base_seed, k), zero_noise,
                    batch.actions[k], batch.states[k], batch.rewards[k], batch.log_p[k],
                    batch.valid[k]);
    }
    return batch;
}

void cost_to_go(SampleBatch& batch) {
    batch.ctg.assign(batch.K, std::vector<double>(batch.H, 0.0));
    for (int k = 0; k < batch.K; ++k) {
        double acc = 0.0;
        for (int tau = batch.H - 1; tau >= 0; --tau) {
            acc += batch.rewards[k][tau];
            batch.ctg[k][tau] = acc;
        }
    }
}

void importance_weights(SampleBatch& batch) {
    if (batch.temperature <= 0.0) {
        throw std::invalid_argument("importance_weights: temperature must be positive");
    }
    if (batch.ctg.empty()) throw std::invalid_argument("importance_weights: cost-to-go not filled");
    batch.weights = Mat::Zero(batch.H, batch.K);
    for (int tau = 0; tau < batch.H; ++tau) {
        double mx = kNegInf;
        for (int k = 0; k < batch.K; ++k) {
            if (!batch.valid[k]) continue;
            mx = std::max(mx, batch.ctg[k][tau] / batch.temperature + batch.log_p[k]);
        }
        if (mx == kNegInf) continue;  // no valid samples; weights stay zero
        double sum = 0.0;
        for (int k = 0; k < batch.K; ++k) {
            if (!batch.valid[k]) continue;
            const double w =
                std::exp(batch.ctg[k][tau] / batch.temperature + batch.log_p[k] - mx);
            batch.weights(tau, k) = w;
            sum += w;
        }
        for (int k = 0; k < batch.K; ++k) batch.weights(tau, k) /= sum;
    }
}

std::vector<Vec> update_action_sequence(const SampleBatch& batch) {
    if (batch.weights.size() == 0) {
        throw std::invalid_argument("update_action_sequence: weights not filled");
    }
    std::vector<Vec> out(batch.nominal);
    for (int tau = 0; tau < batch.H; ++tau) {
        Vec delta = Vec::Zero(out[tau].size());
        for (int k = 0; k < batch.K; ++k) {
            if (batch.weights(tau, k) == 0.0) continue;
            delta += batch.weights(tau, k) * (batch.actions[k][tau] - batch.nominal[tau]);
        }
        out[tau] += delta;
    }
    return out;
}

StochController::Result StochController::step(const DynNet& model, const RewardNet& reward,
                                              const PolicyNet& policy, const Vec& s,
                                              std::uint64_t seed) {
    if (nominal_.empty()) reset(policy.action_dim());

    SampleBatch batch = sample_rollouts(model, reward, policy, s, cfg_.H, cfg_.K, cfg_.dt,
                                        cfg_.temperature, seed, cfg_.parallel);
    batch.nominal = nominal_;
    cost_to_go(batch);
    importance_weights(batch);

    Result res;
    Vec mu, var;
    policy_mean_var(policy, s, mu, var);

    bool any_valid = false;
    for (char v : batch.valid) any_valid |= (v != 0);
    if (!any_valid) {
        res.action = mu;
        res.mean_correction = 0.0;
        res.fell_back = true;
        return res;
    }

    std::vector<Vec> updated = update_action_sequence(batch);
    res.action = updated[0];
    res.mean_correction = (updated[0] - mu).norm();
    res.fell_back = false;

    // Shift the plan and append the policy mean at the predicted terminal
    // state of the updated sequence.
    Vec sp = s;
    bool model_ok = true;
    for (int tau = 0; tau < cfg_.H && model_ok; ++tau) {
        sp = sp + dyn_forward(model, sp, updated[tau]) * cfg_.dt;
        model_ok = sp.allFinite();
    }
    for (int tau = 0; tau + 1 < cfg_.H; ++tau) nominal_[tau] = updated[tau + 1];
    if (model_ok) {
        Vec mu_t, var_t;
        policy_mean_var(policy, sp, mu_t, var_t);
        nominal_[cfg_.H - 1] = mu_t;
    } else {
        nominal_[cfg_.H - 1] = Vec::Zero(policy.action_dim());
    }
    return res;
}

}  // namespace hybridctl
