#pragma once

#include <stdexcept>
#include <string>

#include "hybridctl/math.hpp"

namespace hybridctl {

enum class EnvId { Pendulum, Cartpole };

struct EnvSpec {
    EnvId id;
    int state_dim;
    int action_dim;
    double dt;
    Vec action_low;
    Vec action_high;
    int episode_len;

    static EnvSpec pendulum();
    static EnvSpec cartpole();
    static EnvSpec from_name(const std::string& name);
};

// Pendulum: internal state (theta, theta_dot), theta = 0 upright, wrapped to
// (-pi, pi]. Observation (cos theta, sin theta, theta_dot).
// Cartpole: internal state (x, x_dot, theta, theta_dot), theta = 0 upright.
// Observation (x, x_dot, cos theta, sin theta, theta_dot).
class Env {
public:
    Env(EnvSpec spec, std::uint64_t seed);

    Vec reset(std::uint64_t seed);

    struct StepResult {
        Vec obs;
        double reward;
    };
    // Action is clipped to the spec bounds before integration; reward is
    // computed from the pre-step state and the clipped action.
    StepResult step(const Vec& action);

    Vec observe() const;
    const EnvSpec& spec() const { return spec_; }
    const Vec& internal_state() const { return phys_; }
    void set_internal_state(const Vec& phys);

    // Energy-shaping + PD swingup demonstration controller (pendulum only).
    Vec expert_action() const;

    // Total mechanical energy of the pendulum (test utility).
    double pendulum_energy() const;

private:
    EnvSpec spec_;
    Vec phys_;
    Rng rng_;
};

}  // namespace hybridctl
