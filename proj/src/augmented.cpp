#include "riskshield/augmented.hpp"

#include <algorithm>
#include <stdexcept>

namespace riskshield {

double risk_cap(const Cmdp& m) {
    const double cmax = m.max_cost();
    if (m.gamma_c < 1.0) return cmax / (1.0 - m.gamma_c);
    return cmax * m.horizon_cap;
}

AugEnv augment(const Cmdp& m, const QTable& q, RiskRule rule) {
    if (static_cast<int>(q.values.size()) != m.num_states())
        throw std::invalid_argument("augment: critic does not cover the model's states");
    for (int s = 0; s < m.num_states(); ++s)
        if (static_cast<int>(q.values[s].size()) != m.num_actions(s))
            throw std::invalid_argument("augment: critic does not cover A(s) at state " +
                                        std::to_string(s));
    if (rule == RiskRule::cost_relative && !m.is_deterministic())
        throw std::invalid_argument("augment: cost_relative requires a deterministic model");
    AugEnv env;
    env.cmdp = m;
    env.q = q;
    env.rule = rule;
    env.risk_bound = risk_cap(m);
    return env;
}

AugStepResult aug_step(const AugEnv& env, const AugState& st, const AugAction& act, Rng& rng) {
    const Cmdp& m = env.cmdp;
    if (act.action < 0 || act.action >= m.num_actions(st.state))
        throw std::out_of_range("aug_step: action outside A(s)");
    const int s2 = m.sample_next(st.state, act.action, rng);
    double x2;
    if (env.rule == RiskRule::q_relative)
        x2 = act.risk - env.q.at(st.state, act.action) + env.q.floor(s2);
    else
        x2 = act.risk - m.cost[st.state][act.action];
    const double clamped_x2 = std::clamp(x2, -env.risk_bound, env.risk_bound);
    return {{s2, clamped_x2}, m.reward[st.state][act.action], m.cost[st.state][act.action],
            clamped_x2 != x2};
}

}  // namespace riskshield
