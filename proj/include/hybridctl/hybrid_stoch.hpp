#pragma once

#include <vector>

#include "hybridctl/policy.hpp"

namespace hybridctl {

// K policy-sampled model rollouts plus the per-step quantities the
// importance-weighted update needs. Weights are stored per planning step
// (row tau, column k).
struct SampleBatch {
    int K = 0;
    int H = 0;
    double temperature = 0.1;
    double dt = 0.0;
    std::vector<Vec> nominal;                  // H actions
    std::vector<std::vector<Vec>> actions;     // [k][tau]
    std::vector<std::vector<Vec>> states;      // [k][tau], visited states
    std::vector<std::vector<double>> rewards;  // [k][tau]
    std::vector<std::vector<double>> ctg;      // [k][tau] suffix sums
    std::vector<double> log_p;                 // [k], whole-sequence density
    std::vector<char> valid;                   // [k], 0 after a non-finite rollout
    Mat weights;                               // H x K
};

// K independent H-step rollouts v ~ pi(.|s) through the learned model. RNG is
// one deterministically derived stream per sample index, so the result does
// not depend on execution order or thread count. zero_noise forces z = 0
// (test hook).
SampleBatch sample_rollouts(const DynNet& model, const RewardNet& reward,
                            const PolicyNet& policy, const Vec& s0, int H, int K, double dt,
                            double temperature, std::uint64_t base_seed, bool parallel,
                            bool zero_noise = false);

// Suffix sums J(v_tau^k) = sum_{t=tau}^{H-1} j_t^k.
void cost_to_go(SampleBatch& batch);

// Per-tau weights exp(J/lambda) p(v) normalized over samples, computed in
// log space with max subtraction.
void importance_weights(SampleBatch& batch);

// a*_tau = a_tau + sum_k w_tau^k (v_tau^k - a_tau).
std::vector<Vec> update_action_sequence(const SampleBatch& batch);

struct StochConfig {
    int H = 5;
    int K = 20;
    double temperature = 0.1;
    double dt = 0.05;
    bool parallel = true;
};

// Receding-horizon wrapper: plans once per call, executes the head of the
// nominal sequence, shifts, and appends the policy mean at the predicted
// terminal state.
class StochController {
public:
    explicit StochController(StochConfig cfg) : cfg_(cfg) {}

    void reset(int action_dim) {
        nominal_.assign(cfg_.H, Vec::Zero(action_dim));
    }

    struct Result {
        Vec action;               // pre-clip
        double mean_correction;   // |a_0 - mu(s)|
        bool fell_back;           // all samples diverged
    };

    Result step(const DynNet& model, const RewardNet& reward, const PolicyNet& policy,
                const Vec& s, std::uint64_t seed);

    const std::vector<Vec>& nominal() const { return nominal_; }
    const StochConfig& config() const { return cfg_; }

private:
    StochConfig cfg_;
    std::vector<Vec> nominal_;
};

}  // namespace hybridctl
