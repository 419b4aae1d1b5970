#pragma once

#include <deque>
#include <string>

#include "hybridctl/env.hpp"
#include "hybridctl/hybrid_det.hpp"
#include "hybridctl/hybrid_stoch.hpp"

namespace hybridctl {

struct Transition {
    Vec s;
    Vec a;
    double r = 0.0;
    Vec s_next;
    Vec a_next;              // next action stored in the buffer, for the TD loss
    bool has_next_action = false;
    double ret = 0.0;        // discounted return-to-go, gamma = 0.95
    int episode = 0;
    int step = 0;
};

// FIFO replay buffer, uniform sampling with replacement.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {}

    void push(Transition t) {
        if (data_.size() == capacity_) data_.pop_front();
        data_.push_back(std::move(t));
    }

    std::vector<const Transition*> sample(std::size_t n, Rng& rng) const {
        if (data_.empty()) throw std::runtime_error("ReplayBuffer: sampling from empty buffer");
        std::vector<const Transition*> out(n);
        for (std::size_t i = 0; i < n; ++i) {
            out[i] = &data_[static_cast<std::size_t>(rng.next_u64() % data_.size())];
        }
        return out;
    }

    std::size_t size() const { return data_.size(); }
    const Transition& at(std::size_t i) const { return data_[i]; }

private:
    std::size_t capacity_;
    std::deque<Transition> data_;
};

enum class Algorithm {
    HybridDet,
    HybridStoch,
    PolicyOnly,
    ModelOnly,
    ImitationHybrid,
    ImitationBC,
};

Algorithm algorithm_from_name(const std::string& name);
std::string algorithm_name(Algorithm algo);

struct EpisodeLog {
    int episode = 0;
    double cum_reward = 0.0;
    double mean_mig = 0.0;         // deterministic variant
    double mean_correction = 0.0;  // stochastic variant, mean |a0 - mu|
    double model_loss = 0.0;
    double wall_ms = 0.0;          // never serialized into curve CSVs
    std::uint64_t seed = 0;
};

struct RunConfig {
    EnvSpec env = EnvSpec::pendulum();
    Algorithm algo = Algorithm::HybridStoch;
    int episodes = 30;
    std::vector<std::uint64_t> seeds = {0};

    int horizon = 5;              // H
    int samples = 20;             // K
    double temperature = 0.1;     // lambda
    double noise_decay = 0.999;   // per-step decay of the executed exploration noise
    double explore_noise = -1.0;  // initial exploration std; < 0 means half the action range

    int batch_size = 128;
    int model_updates_per_episode = 500;
    std::size_t buffer_capacity = 100000;
    double model_lr = 0.003;
    double reward_lr = 0.02;
    double policy_lr = 0.01;
    int model_hidden = 200;
    int policy_hidden = 128;

    double rwr_temperature = 40.0;
    int rwr_steps = 20;
    int rwr_batch = 128;
    int bc_epochs_per_round = 400;

    bool parallel_rollouts = true;
    std::string out_dir;
};

struct RunResult {
    std::vector<EpisodeLog> logs;
    std::size_t demo_count = 0;  // imitation runs: accumulated D_exp pairs
    DynNet model = DynNet::zeros(1, 1, 1, Nonlin::Sin);
    RewardNet reward = RewardNet::zeros(1, 1, 1);
    PolicyNet policy = PolicyNet::zeros(1, 1, 1);
};

// Experience-based hybrid learning: per episode a T-step environment rollout
// under the configured controller, then model regression on replay samples,
// then the policy updater.
RunResult run_experience_training(const RunConfig& cfg, std::uint64_t seed);

// Imitation learning with a scripted expert: per round one demonstration
// episode, model updates from D, behavior cloning from D_exp, and a hybrid
// (or policy-only) evaluation episode whose reward is logged.
RunResult run_imitation_training(const RunConfig& cfg, std::uint64_t seed);

// Closed-loop expert reward from a seeded reset (reference for imitation
// evaluations).
double expert_episode_reward(const EnvSpec& spec, std::uint64_t seed);

}  // namespace hybridctl
