#pragma once

#include <vector>

#include "riskshield/augmented.hpp"
#include "riskshield/cmdp.hpp"
#include "riskshield/critic.hpp"
#include "riskshield/policyopt.hpp"

namespace riskshield::fixtures {

/// Single-state self-loop: one action with the given cost, discounted.
inline Cmdp loop(double cost = 1.0, double gamma_c = 0.9, double reward = 0.0) {
    Cmdp m;
    m.transition = {{{1.0}}};
    m.reward = {{reward}};
    m.cost = {{cost}};
    m.terminal = {false};
    m.gamma_r = gamma_c;
    m.gamma_c = gamma_c;
    m.budget = cost / (1.0 - gamma_c) / 2.0;
    m.initial_state = 0;
    m.horizon_cap = 400;
    return m;
}

/// Loop with a second, costlier action; gives noise actors something to hit.
inline Cmdp loop_two_actions(double gamma_c = 0.9) {
    Cmdp m;
    m.transition = {{{1.0}, {1.0}}};
    m.reward = {{1.0, 0.2}};
    m.cost = {{0.0, 1.0}};
    m.terminal = {false};
    m.gamma_r = gamma_c;
    m.gamma_c = gamma_c;
    m.budget = 1.0;
    m.initial_state = 0;
    m.horizon_cap = 400;
    return m;
}

/// Episodic branch: a unit-cost shortcut with reward 1 against a three-step
/// zero-cost path worth 0.6 in total. Oracle optimum at d=0.5 is 0.8.
inline Cmdp chain_shortcut() {
    Cmdp m;
    const int n = 5;  // 0 start, 1..3 long path, 4 terminal
    auto dirac = [n](int t) {
        std::vector<double> row(n, 0.0);
        row[t] = 1.0;
        return row;
    };
    m.transition.assign(n, {});
    m.reward.assign(n, {});
    m.cost.assign(n, {});
    m.terminal.assign(n, false);
    m.transition[0] = {dirac(4), dirac(1)};
    m.reward[0] = {1.0, 0.2};
    m.cost[0] = {1.0, 0.0};
    m.transition[1] = {dirac(2)};
    m.reward[1] = {0.2};
    m.cost[1] = {0.0};
    m.transition[2] = {dirac(3)};
    m.reward[2] = {0.2};
    m.cost[2] = {0.0};
    m.transition[3] = {dirac(4)};
    m.reward[3] = {0.0};
    m.cost[3] = {0.0};
    m.transition[4] = {dirac(4)};
    m.reward[4] = {0.0};
    m.cost[4] = {0.0};
    m.terminal[4] = true;
    m.gamma_r = 1.0;
    m.gamma_c = 1.0;
    m.budget = 0.5;
    m.initial_state = 0;
    m.horizon_cap = 6;
    return m;
}

/// Deterministic continuing two-phase cycle: a rewarded costly branch against
/// a modest free one, both returning to the hub.
inline Cmdp det_cycle(double gamma = 0.9) {
    Cmdp m;
    const int n = 3;
    auto dirac = [n](int t) {
        std::vector<double> row(n, 0.0);
        row[t] = 1.0;
        return row;
    };
    m.transition.assign(n, {});
    m.reward.assign(n, {});
    m.cost.assign(n, {});
    m.terminal.assign(n, false);
    m.transition[0] = {dirac(1), dirac(2)};
    m.reward[0] = {1.0, 0.3};
    m.cost[0] = {1.0, 0.0};
    m.transition[1] = {dirac(0)};
    m.reward[1] = {0.0};
    m.cost[1] = {0.0};
    m.transition[2] = {dirac(0)};
    m.reward[2] = {0.0};
    m.cost[2] = {0.0};
    m.gamma_r = gamma;
    m.gamma_c = gamma;
    m.budget = 2.0;
    m.initial_state = 0;
    m.horizon_cap = 400;
    return m;
}

/// One-shot three-way choice with a strictly concave cost-reward frontier:
/// (c, r) in {(0, 0.1), (0.5, 0.62), (1, 1)}, then terminal.
inline Cmdp diamond() {
    Cmdp m;
    const int n = 2;
    m.transition.assign(n, {});
    m.reward.assign(n, {});
    m.cost.assign(n, {});
    m.terminal.assign(n, false);
    m.transition[0] = {{0.0, 1.0}, {0.0, 1.0}, {0.0, 1.0}};
    m.reward[0] = {1.0, 0.62, 0.1};
    m.cost[0] = {1.0, 0.5, 0.0};
    m.transition[1] = {{0.0, 1.0}};
    m.reward[1] = {0.0};
    m.cost[1] = {0.0};
    m.terminal[1] = true;
    m.gamma_r = 1.0;
    m.gamma_c = 1.0;
    m.budget = 0.4;
    m.initial_state = 0;
    m.horizon_cap = 3;
    return m;
}

inline Cmdp m1() { return make_env({.name = "m1"}); }

inline AugEnv m1_exact_aug() {
    const Cmdp m = m1();
    return augment(m, cost_value_iteration(m, 1e-12), RiskRule::q_relative);
}

/// Hand-built flipping proposal on the first state of m1: both branches at
/// their exact minimal risks, equal mass.
inline LambdaAugPolicy m1_flipping_proposal() {
    return LambdaAugPolicy([](const AugState& st) {
        if (st.state == 0)
            return ProposedDistribution{{{0, 1.0, 0.5}, {1, 0.0, 0.5}}};
        return ProposedDistribution{{{0, 0.0, 1.0}}};
    });
}

/// Dirac proposal on the critic's backup action carrying the current risk.
inline LambdaAugPolicy backup_proposal(const AugEnv& env) {
    const QTable* q = &env.q;
    return LambdaAugPolicy([q](const AugState& st) {
        return ProposedDistribution{{{q->backup_action(st.state), st.risk, 1.0}}};
    });
}

}  // namespace riskshield::fixtures
