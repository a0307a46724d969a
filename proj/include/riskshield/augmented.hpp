#pragma once

#include "riskshield/cmdp.hpp"
#include "riskshield/critic.hpp"

namespace riskshield {

/// Risk bookkeeping rule for the augmented transition. q_relative follows
/// x' = y - Q(s,a) + floor(s'); cost_relative follows x' = y - c(s,a) and is
/// only admissible on deterministic models.
enum class RiskRule { q_relative, cost_relative };

struct AugState {
    int state;
    double risk;
};

struct AugAction {
    int action;
    double risk;  // allocated risk y
};

/**
 * Risk-augmented view of a CMDP: base states paired with a scalar budget in
 * [-risk_bound, risk_bound], base actions paired with an allocated risk.
 * Rewards and costs pass through from the base model. Immutable; stepping is
 * pure given the rng, so instances are shareable across rollout workers.
 */
struct AugEnv {
    Cmdp cmdp;
    QTable q;
    RiskRule rule = RiskRule::q_relative;
    double risk_bound = 0.0;

    double gamma_c() const { return cmdp.gamma_c; }
};

/// Maximal attainable discounted cost: c_max / (1 - gamma_c), or
/// c_max * horizon_cap for episodic discount-1 models.
double risk_cap(const Cmdp& m);

/// Wraps a model and critic into the augmented view. Throws when the critic
/// shape does not cover the model or when cost_relative is requested on a
/// stochastic model.
AugEnv augment(const Cmdp& m, const QTable& q, RiskRule rule);

struct AugStepResult {
    AugState next;
    double reward;
    double cost;
    bool clamped;  // risk hit the [-risk_bound, risk_bound] boundary
};

/// Samples one augmented transition. The next risk follows the env's rule and
/// is clamped into [-risk_bound, risk_bound]; clamp events are reported so
/// saturation stays visible to callers.
AugStepResult aug_step(const AugEnv& env, const AugState& st, const AugAction& act, Rng& rng);

}  // namespace riskshield
