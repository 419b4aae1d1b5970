#include "hybridctl/learner.hpp"

#include <cassert>
#include <chrono>

namespace hybridctl {

namespace {

constexpr double kGamma = 0.95;

// Seed-derivation tags; keeps every stream in a run a pure function of the
// run seed.
enum SeedTag : std::uint64_t {
    kTagModelInit = 1,
    kTagRewardInit = 2,
    kTagPolicyInit = 3,
    kTagEnvReset = 4,
    kTagControl = 5,
    kTagModelSample = 6,
    kTagPolicySample = 7,
    kTagEval = 8,
};

std::uint64_t sub_seed(std::uint64_t run_seed, SeedTag tag, std::uint64_t index = 0) {
    return mix_seed(mix_seed(run_seed, static_cast<std::uint64_t>(tag)), index);
}

double now_ms() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double, std::milli>(clock::now().time_since_epoch()).count();
}

// Fill return-to-go and next-action links for one episode worth of
// transitions, then push them.
void finish_episode(std::vector<Transition>& eps, ReplayBuffer& buffer) {
    double ret = 0.0;
    for (int i = static_cast<int>(eps.size()) - 1; i >= 0; --i) {
        ret = eps[i].r + kGamma * ret;
        eps[i].ret = ret;
        if (i + 1 < static_cast<int>(eps.size())) {
            eps[i].a_next = eps[i + 1].a;
            eps[i].has_next_action = true;
        }
    }
    for (auto& t : eps) buffer.push(std::move(t));
    eps.clear();
}

// Policy batch drawn from recent episodes and restricted to a shared slice of
// episode time, so the softmax over returns compares like with like: a
// transition near the end of an episode always out-ranks one from the start
// on raw return-to-go, regardless of action quality.
bool sample_policy_window(const ReplayBuffer& buffer, int batch, int episode_len, Rng& rng,
                          std::vector<Vec>& states, std::vector<Vec>& actions,
                          std::vector<double>& returns) {
    states.clear();
    actions.clear();
    returns.clear();
    const int window = std::max(1, episode_len / 8);
    const int max_start = std::max(1, episode_len - window - 1);
    const int start = static_cast<int>(rng.next_u64() % max_start);
    const std::size_t recent = static_cast<std::size_t>(10) * episode_len;
    const std::size_t lo = buffer.size() > recent ? buffer.size() - recent : 0;
    const std::size_t span = buffer.size() - lo;
    int guard = 0;
    while (static_cast<int>(states.size()) < batch && guard < 1000 * batch) {
        const Transition& t = buffer.at(lo + rng.next_u64() % span);
        ++guard;
        if (t.step < start || t.step >= start + window) continue;
        states.push_back(t.s);
        actions.push_back(t.a);
        returns.push_back(t.ret);
    }
    return !states.empty();
}

struct ModelTrainer {
    AdamState dyn_adam;
    AdamState reward_adam;
    RewardNet reward_target;
    long reward_updates = 0;
    bool frozen_bootstrap;
    // With frozen_bootstrap the TD update bootstraps against a periodically
    // frozen copy of the reward net. The imitation loop needs this: its
    // buffer mixes on-expert and evaluation data and the moving bootstrap
    // oscillates. The experience loop keeps the plain semi-gradient.
    static constexpr int kTargetRefresh = 200;

    ModelTrainer(const DynNet& dyn, const RewardNet& rew, double dyn_lr, double reward_lr,
                 bool frozen_bootstrap_)
        : dyn_adam(dyn.num_params(), dyn_lr),
          reward_adam(rew.num_params(), reward_lr),
          reward_target(rew),
          frozen_bootstrap(frozen_bootstrap_) {}

    // One round of minibatch regression on replay samples; returns the last
    // dynamics loss.
    double update(DynNet& dyn, RewardNet& rew, const ReplayBuffer& buffer, int steps,
                  int batch_size, double dt, Rng& rng) {
        double last_loss = 0.0;
        for (int u = 0; u < steps; ++u) {
            if (frozen_bootstrap && reward_updates % kTargetRefresh == 0) {
                reward_target = rew;
            }
            ++reward_updates;
            auto samples = buffer.sample(static_cast<std::size_t>(batch_size), rng);
            DynBatch db;
            RewardBatch rb;
            for (const Transition* t : samples) {
                db.s.push_back(t->s);
                db.a.push_back(t->a);
                db.target.push_back((t->s_next - t->s) / dt);
                rb.s.push_back(t->s);
                rb.a.push_back(t->a);
                if (frozen_bootstrap) {
                    double y = t->r;
                    if (t->has_next_action) {
                        y += 0.95 * reward_forward(reward_target, t->s_next, t->a_next);
                    }
                    rb.r.push_back(y);
                    rb.s_next.push_back(t->s_next);
                    rb.a_next.push_back(Vec::Zero(t->a.size()));
                    rb.has_next.push_back(false);
                } else {
                    rb.r.push_back(t->r);
                    rb.s_next.push_back(t->s_next);
                    rb.a_next.push_back(t->has_next_action ? t->a_next
                                                           : Vec::Zero(t->a.size()));
                    rb.has_next.push_back(t->has_next_action);
                }
            }
            Vec dyn_grad, rew_grad;
            last_loss = dynamics_loss(dyn, db, dyn_grad);
            dyn.unflatten(adam_step(dyn_adam, dyn.flatten(), dyn_grad));
            reward_loss(rew, rb, rew_grad);
            rew.unflatten(adam_step(reward_adam, rew.flatten(), rew_grad));
        }
        return last_loss;
    }
};

}  // namespace

Algorithm algorithm_from_name(const std::string& name) {
    if (name == "hybrid-det") return Algorithm::HybridDet;
    if (name == "hybrid-stoch") return Algorithm::HybridStoch;
    if (name == "policy-only") return Algorithm::PolicyOnly;
    if (name == "model-only") return Algorithm::ModelOnly;
    if (name == "imitation-hybrid") return Algorithm::ImitationHybrid;
    if (name == "imitation-bc") return Algorithm::ImitationBC;
    throw std::invalid_argument("unknown algorithm: " + name);
}

std::string algorithm_name(Algorithm algo) {
    switch (algo) {
        case Algorithm::HybridDet: return "hybrid-det";
        case Algorithm::HybridStoch: return "hybrid-stoch";
        case Algorithm::PolicyOnly: return "policy-only";
        case Algorithm::ModelOnly: return "model-only";
        case Algorithm::ImitationHybrid: return "imitation-hybrid";
        case Algorithm::ImitationBC: return "imitation-bc";
    }
    throw std::logic_error("bad algorithm enum");
}

double expert_episode_reward(const EnvSpec& spec, std::uint64_t seed) {
    Env env(spec, seed);
    double total = 0.0;
    for (int t = 0; t < spec.episode_len; ++t) {
        total += env.step(env.expert_action()).reward;
    }
    return total;
}

RunResult run_experience_training(const RunConfig& cfg, std::uint64_t seed) {
    const EnvSpec& spec = cfg.env;
    const int n = spec.state_dim;
    const int m = spec.action_dim;

    RunResult out;
    out.model = DynNet::init(n, m, cfg.model_hidden, Nonlin::Sin,
                             sub_seed(seed, kTagModelInit));
    out.reward = RewardNet::init(n, m, cfg.model_hidden, sub_seed(seed, kTagRewardInit));
    out.policy = PolicyNet::init(n, m, cfg.policy_hidden, sub_seed(seed, kTagPolicyInit));

    ReplayBuffer buffer(cfg.buffer_capacity);
    ModelTrainer trainer(out.model, out.reward, cfg.model_lr, cfg.reward_lr, false);
    RewardWeightedRegressionUpdater rwr(out.policy.num_params(), cfg.policy_lr,
                                        cfg.rwr_temperature, 1);

    Env env(spec, seed);
    StochConfig scfg{cfg.horizon, cfg.samples, cfg.temperature, spec.dt,
                     cfg.parallel_rollouts};
    StochController stoch(scfg);
    const double noise_base = cfg.explore_noise >= 0.0
                                  ? cfg.explore_noise
                                  : 0.5 * (spec.action_high(0) - spec.action_low(0));
    // Exploratory variance at init: the controller draws its candidate actions
    // from the policy, so an untrained near-deterministic policy would starve
    // it of proposals.
    out.policy.var_b2.array() += 0.25 * noise_base * noise_base;

    Rng model_rng(sub_seed(seed, kTagModelSample));
    Rng policy_rng(sub_seed(seed, kTagPolicySample));
    long total_steps = 0;

    for (int e = 0; e < cfg.episodes; ++e) {
        const double t0 = now_ms();
        Vec s = env.reset(sub_seed(seed, kTagEnvReset, e));
        stoch.reset(m);
        Rng ctrl_rng(sub_seed(seed, kTagControl, e));

        std::vector<Transition> eps;
        EpisodeLog log;
        log.episode = e;
        log.seed = seed;
        double mig_sum = 0.0, corr_sum = 0.0;

        for (int t = 0; t < spec.episode_len; ++t) {
            Vec a;
            switch (cfg.algo) {
                case Algorithm::HybridDet: {
                    const double eps_scale =
                        noise_base * std::pow(cfg.noise_decay,
                                              static_cast<double>(total_steps));
                    DetPlan plan = det_plan(out.model, out.reward, out.policy, s,
                                            cfg.horizon, spec.dt, eps_scale, ctrl_rng);
                    a = plan.action;
                    mig_sum += plan.mig;
                    break;
                }
                case Algorithm::HybridStoch:
                case Algorithm::ModelOnly: {
                    auto res = stoch.step(out.model, out.reward, out.policy, s,
                                          sub_seed(seed, kTagControl,
                                                   1000000ull * (e + 1) + t));
                    const double eps_scale =
                        noise_base * std::pow(cfg.noise_decay,
                                              static_cast<double>(total_steps));
                    a = res.action + eps_scale * ctrl_rng.normal_vec(m);
                    corr_sum += res.mean_correction;
                    break;
                }
                case Algorithm::PolicyOnly:
                    a = policy_sample(out.policy, s, ctrl_rng);
                    break;
                default:
                    throw std::invalid_argument(
                        "run_experience_training: imitation algorithms use "
                        "run_imitation_training");
            }

            Vec a_clipped = clip(a, spec.action_low, spec.action_high);
            auto step = env.step(a_clipped);
            Transition tr;
            tr.s = s;
            tr.a = a_clipped;
            tr.r = step.reward;
            tr.s_next = step.obs;
            tr.episode = e;
            tr.step = t;
            eps.push_back(std::move(tr));
            log.cum_reward += step.reward;
            s = step.obs;
            ++total_steps;
        }
        finish_episode(eps, buffer);

        if (cfg.algo != Algorithm::PolicyOnly &&
            buffer.size() >= static_cast<std::size_t>(cfg.batch_size)) {
            log.model_loss = trainer.update(out.model, out.reward, buffer,
                                            cfg.model_updates_per_episode, cfg.batch_size,
                                            spec.dt, model_rng);
        }
        if (cfg.algo != Algorithm::ModelOnly &&
            buffer.size() >= static_cast<std::size_t>(cfg.rwr_batch)) {
            std::vector<Vec> ss, as;
            std::vector<double> rets;
            for (int u = 0; u < cfg.rwr_steps; ++u) {
                if (!sample_policy_window(buffer, cfg.rwr_batch, spec.episode_len,
                                          policy_rng, ss, as, rets)) {
                    continue;
                }
                rwr.update(out.policy, ss, as, rets);
            }
        }

        log.mean_mig = mig_sum / spec.episode_len;
        log.mean_correction = corr_sum / spec.episode_len;
        log.wall_ms = now_ms() - t0;
        out.logs.push_back(log);
    }
    return out;
}

RunResult run_imitation_training(const RunConfig& cfg, std::uint64_t seed) {
    const EnvSpec& spec = cfg.env;
    const int n = spec.state_dim;
    const int m = spec.action_dim;
    if (spec.id != EnvId::Pendulum) {
        throw std::invalid_argument("imitation training requires the pendulum expert");
    }

    RunResult out;
    out.model = DynNet::init(n, m, cfg.model_hidden, Nonlin::Sin,
                             sub_seed(seed, kTagModelInit));
    out.reward = RewardNet::init(n, m, cfg.model_hidden, sub_seed(seed, kTagRewardInit));
    out.policy = PolicyNet::init(n, m, cfg.policy_hidden, sub_seed(seed, kTagPolicyInit));

    ReplayBuffer buffer(cfg.buffer_capacity);
    ModelTrainer trainer(out.model, out.reward, cfg.model_lr, cfg.reward_lr, true);
    AdamState bc_adam(out.policy.num_params(), cfg.policy_lr);
    std::vector<Vec> demo_states, demo_actions;

    Env env(spec, seed);
    StochConfig scfg{cfg.horizon, cfg.samples, cfg.temperature, spec.dt,
                     cfg.parallel_rollouts};
    StochController stoch(scfg);
    Rng model_rng(sub_seed(seed, kTagModelSample));

    for (int round = 0; round < cfg.episodes; ++round) {
        const double t0 = now_ms();
        EpisodeLog log;
        log.episode = round;
        log.seed = seed;

        // Demonstration episode: expert transitions enter both D and D_exp.
        Vec s = env.reset(sub_seed(seed, kTagEnvReset, round));
        std::vector<Transition> eps;
        for (int t = 0; t < spec.episode_len; ++t) {
            Vec a = env.expert_action();
            auto step = env.step(a);
            demo_states.push_back(s);
            demo_actions.push_back(a);
            Transition tr;
            tr.s = s;
            tr.a = a;
            tr.r = step.reward;
            tr.s_next = step.obs;
            tr.episode = round;
            tr.step = t;
            eps.push_back(std::move(tr));
            s = step.obs;
        }
        finish_episode(eps, buffer);

        // Models from D; policy only ever from D_exp.
        const Vec policy_before = out.policy.flatten();
        if (buffer.size() >= static_cast<std::size_t>(cfg.batch_size)) {
            log.model_loss = trainer.update(out.model, out.reward, buffer,
                                            cfg.model_updates_per_episode, cfg.batch_size,
                                            spec.dt, model_rng);
        }
        assert((out.policy.flatten() - policy_before).norm() == 0.0);
        (void)policy_before;
        for (int epoch = 0; epoch < cfg.bc_epochs_per_round; ++epoch) {
            bc_update(out.policy, demo_states, demo_actions, bc_adam);
        }

        // Evaluation episode: hybrid controller or the cloned policy mean.
        // The planner samples from a variance-widened copy of the cloned
        // policy: demonstrations are deterministic, so the fitted variance
        // collapses to the floor and would give the planner nothing to pick
        // from. The cloned policy itself is untouched.
        PolicyNet plan_policy = out.policy;
        {
            const double noise_base =
                cfg.explore_noise >= 0.0
                    ? cfg.explore_noise
                    : 0.5 * (spec.action_high(0) - spec.action_low(0));
            plan_policy.var_b2.array() += 0.25 * noise_base * noise_base;
        }
        s = env.reset(sub_seed(seed, kTagEval, round));
        stoch.reset(m);
        eps.clear();
        double corr_sum = 0.0;
        for (int t = 0; t < spec.episode_len; ++t) {
            Vec a;
            if (cfg.algo == Algorithm::ImitationHybrid) {
                auto res = stoch.step(out.model, out.reward, plan_policy, s,
                                      sub_seed(seed, kTagEval,
                                               1000000ull * (round + 1) + t));
                a = res.action;
                corr_sum += res.mean_correction;
            } else {
                Vec mu, var;
                policy_mean_var(out.policy, s, mu, var);
                a = mu;
            }
            Vec a_clipped = clip(a, spec.action_low, spec.action_high);
            auto step = env.step(a_clipped);
            Transition tr;
            tr.s = s;
            tr.a = a_clipped;
            tr.r = step.reward;
            tr.s_next = step.obs;
            tr.episode = round;
            tr.step = t;
            eps.push_back(std::move(tr));
            log.cum_reward += step.reward;
            s = step.obs;
        }
        finish_episode(eps, buffer);

        log.mean_correction = corr_sum / spec.episode_len;
        log.wall_ms = now_ms() - t0;
        out.logs.push_back(log);
    }
    out.demo_count = demo_states.size();
    return out;
}

}  // namespace hybridctl
