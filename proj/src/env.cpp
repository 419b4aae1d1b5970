#include "hybridctl/env.hpp"

namespace hybridctl {

namespace {

// Pendulum: point rod of mass m, length l, pivot at one end, torque actuated.
constexpr double kPendG = 10.0;
constexpr double kPendM = 1.0;
constexpr double kPendL = 1.0;
constexpr double kPendTorque = 2.0;
constexpr double kPendDt = 0.05;

// Cartpole: classic cart + pole with continuous force input.
constexpr double kCartG = 9.8;
constexpr double kCartMassCart = 1.0;
constexpr double kCartMassPole = 0.1;
constexpr double kCartPoleHalfLen = 0.5;
constexpr double kCartForce = 10.0;
constexpr double kCartDt = 0.02;

constexpr double kResetPerturb = 0.05;

Vec scalar_vec(double v) {
    Vec x(1);
    x(0) = v;
    return x;
}

}  // namespace

EnvSpec EnvSpec::pendulum() {
    EnvSpec s;
    s.id = EnvId::Pendulum;
    s.state_dim = 3;
    s.action_dim = 1;
    s.dt = kPendDt;
    s.action_low = scalar_vec(-kPendTorque);
    s.action_high = scalar_vec(kPendTorque);
    s.episode_len = 200;
    return s;
}

EnvSpec EnvSpec::cartpole() {
    EnvSpec s;
    s.id = EnvId::Cartpole;
    s.state_dim = 5;
    s.action_dim = 1;
    s.dt = kCartDt;
    s.action_low = scalar_vec(-kCartForce);
    s.action_high = scalar_vec(kCartForce);
    s.episode_len = 200;
    return s;
}

EnvSpec EnvSpec::from_name(const std::string& name) {
    if (name == "pendulum") return pendulum();
    if (name == "cartpole") return cartpole();
    throw std::invalid_argument("unknown environment: " + name);
}

Env::Env(EnvSpec spec, std::uint64_t seed) : spec_(std::move(spec)), rng_(seed) {
    reset(seed);
}

Vec Env::reset(std::uint64_t seed) {
    rng_ = Rng(seed);
    double perturb = rng_.uniform(-kResetPerturb, kResetPerturb);
    if (spec_.id == EnvId::Pendulum) {
        phys_ = Vec(2);
        phys_ << wrap_angle(kPi + perturb), 0.0;
    } else {
        phys_ = Vec(4);
        phys_ << 0.0, 0.0, wrap_angle(kPi + perturb), 0.0;
    }
    return observe();
}

Vec Env::observe() const {
    if (spec_.id == EnvId::Pendulum) {
        Vec o(3);
        o << std::cos(phys_(0)), std::sin(phys_(0)), phys_(1);
        return o;
    }
    Vec o(5);
    o << phys_(0), phys_(1), std::cos(phys_(2)), std::sin(phys_(2)), phys_(3);
    return o;
}

void Env::set_internal_state(const Vec& phys) {
    if (phys.size() != phys_.size()) throw std::invalid_argument("bad internal state size");
    phys_ = phys;
    if (spec_.id == EnvId::Pendulum) {
        phys_(0) = wrap_angle(phys_(0));
    } else {
        phys_(2) = wrap_angle(phys_(2));
    }
}

Env::StepResult Env::step(const Vec& action) {
    if (action.size() != spec_.action_dim || !action.allFinite()) {
        throw std::invalid_argument("non-finite or mis-sized action");
    }
    const Vec a = clip(action, spec_.action_low, spec_.action_high);
    const double u = a(0);

    double reward;
    if (spec_.id == EnvId::Pendulum) {
        const double th = phys_(0);
        const double thdot = phys_(1);
        reward = -(th * th + 0.1 * thdot * thdot + 0.001 * u * u);

        // theta measured from upright: gravity torque pushes away from 0.
        const double thacc = 1.5 * kPendG / kPendL * std::sin(th) +
                             3.0 * u / (kPendM * kPendL * kPendL);
        const double thdot1 = thdot + spec_.dt * thacc;
        phys_(0) = wrap_angle(th + spec_.dt * thdot1);
        phys_(1) = thdot1;
    } else {
        const double x = phys_(0);
        const double xdot = phys_(1);
        const double th = phys_(2);
        const double thdot = phys_(3);
        reward = std::cos(th) - 0.01 * x * x;

        const double sinth = std::sin(th);
        const double costh = std::cos(th);
        const double total_mass = kCartMassCart + kCartMassPole;
        const double pml = kCartMassPole * kCartPoleHalfLen;
        const double temp = (u + pml * thdot * thdot * sinth) / total_mass;
        const double thacc = (kCartG * sinth - costh * temp) /
                             (kCartPoleHalfLen * (4.0 / 3.0 - kCartMassPole * costh * costh / total_mass));
        const double xacc = temp - pml * thacc * costh / total_mass;

        phys_(1) = xdot + spec_.dt * xacc;
        phys_(0) = x + spec_.dt * phys_(1);
        phys_(3) = thdot + spec_.dt * thacc;
        phys_(2) = wrap_angle(th + spec_.dt * phys_(3));
    }
    return {observe(), reward};
}

double Env::pendulum_energy() const {
    if (spec_.id != EnvId::Pendulum) throw std::logic_error("pendulum_energy on non-pendulum env");
    const double inertia = kPendM * kPendL * kPendL / 3.0;
    return 0.5 * inertia * phys_(1) * phys_(1) +
           kPendM * kPendG * (kPendL / 2.0) * std::cos(phys_(0));
}

Vec Env::expert_action() const {
    if (spec_.id != EnvId::Pendulum) {
        throw std::invalid_argument("expert_action only available for pendulum");
    }
    const double th = phys_(0);
    const double thdot = phys_(1);
    const double e_target = kPendM * kPendG * (kPendL / 2.0);
    double u;
    if (std::abs(th) < 0.6) {
        // PD capture near upright.
        u = -8.0 * th - 2.0 * thdot;
    } else {
        const double e = 0.5 * (kPendM * kPendL * kPendL / 3.0) * thdot * thdot +
                         e_target * std::cos(th);
        double sgn = thdot > 0.0 ? 1.0 : (thdot < 0.0 ? -1.0 : 0.0);
        if (sgn == 0.0) sgn = 1.0;  // kick out of the hanging rest
        u = 1.2 * (e_target - e) * sgn;
    }
    return clip(scalar_vec(u), spec_.action_low, spec_.action_high);
}

}  // namespace hybridctl
