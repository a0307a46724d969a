#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "fixtures.hpp"
#include "riskshield/policyopt.hpp"
#include "riskshield/verify.hpp"

using namespace riskshield;

TEST_CASE("hybrid schedule: empty history means an immediate switch") {
    Rng rng = make_rng(1);
    const auto step = hybrid_schedule(0, 2, {}, rng);
    REQUIRE(step.has_value());
    CHECK(*step == 0);
}

TEST_CASE("hybrid schedule: off-cycle episodes never switch") {
    Rng rng = make_rng(2);
    CHECK(!hybrid_schedule(1, 2, {10, 20}, rng).has_value());
    CHECK(!hybrid_schedule(3, 2, {10, 20}, rng).has_value());
}

TEST_CASE("hybrid schedule draws uniformly up to the mean length") {
    Rng rng = make_rng(3);
    std::set<long> seen;
    for (int i = 0; i < 2000; ++i) {
        const auto step = hybrid_schedule(4, 2, {10, 20}, rng);
        REQUIRE(step.has_value());
        CHECK(*step >= 0);
        CHECK(*step <= 15);
        seen.insert(*step);
    }
    CHECK(seen.size() == 16);  // every value of [0,15] shows up in 2000 draws
}

TEST_CASE("oracle solves the branching example across budgets") {
    const Cmdp m = fixtures::m1();
    const OracleResult at_half = brute_force_oracle(m, 0.5);
    CHECK(at_half.best_reward == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(at_half.best_cost == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(at_half.alpha == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(at_half.pi1[0] != at_half.pi2[0]);

    CHECK(brute_force_oracle(m, 0.0).best_reward == doctest::Approx(0.0));
    CHECK(brute_force_oracle(m, 1.0).best_reward == doctest::Approx(1.0));
    CHECK(brute_force_oracle(m, 7.0).best_reward == doctest::Approx(1.0));
}

TEST_CASE("oracle enforces the enumeration budget") {
    const Cmdp m = make_env({.name = "random", .params = {{"states", 8}, {"actions", 4}},
                             .seed = 1});
    CHECK_THROWS_AS(brute_force_oracle(m, 1.0, 1000), std::runtime_error);
}

TEST_CASE("oracle reports infeasible budgets") {
    const Cmdp m = fixtures::loop(1.0, 0.9);  // every policy costs 10
    CHECK_THROWS_AS(brute_force_oracle(m, 0.5), std::domain_error);
}

TEST_CASE("oracle matches an exhaustive pairwise reference on random models") {
    for (std::uint64_t seed : {41, 42, 43, 44}) {
        const Cmdp m = make_env(
            {.name = "random",
             .params = {{"states", 4}, {"actions", 3}, {"gamma_r", 0.85}, {"gamma_c", 0.85}},
             .seed = seed});
        // evaluate all deterministic policies
        std::vector<double> rewards, costs;
        std::vector<int> assignment(m.num_states(), 0);
        while (true) {
            const auto [r, c] = exact_eval(m, MemorylessPolicy::deterministic(m, assignment));
            rewards.push_back(r);
            costs.push_back(c);
            int s = 0;
            while (s < m.num_states()) {
                if (++assignment[s] < m.num_actions(s)) break;
                assignment[s] = 0;
                s++;
            }
            if (s == m.num_states()) break;
        }
        // place the budget strictly between the extremes so it is feasible and binding
        const double c_lo = *std::min_element(costs.begin(), costs.end());
        const double c_hi = *std::max_element(costs.begin(), costs.end());
        const double d = c_lo + 0.37 * (c_hi - c_lo);
        double reference = -1e300;
        for (std::size_t i = 0; i < rewards.size(); ++i) {
            if (costs[i] <= d) reference = std::max(reference, rewards[i]);
            for (std::size_t j = 0; j < rewards.size(); ++j) {
                if (costs[i] <= d && d < costs[j]) {
                    const double alpha = (costs[j] - d) / (costs[j] - costs[i]);
                    reference =
                        std::max(reference, alpha * rewards[i] + (1 - alpha) * rewards[j]);
                }
            }
        }
        const OracleResult oracle = brute_force_oracle(m, d);
        CHECK(oracle.best_reward == doctest::Approx(reference).epsilon(1e-10));
        CHECK(oracle.best_cost <= d + 1e-9);
    }
}

TEST_CASE("tabular policy proposals index by risk bin and reject bad states") {
    TabularAugPolicy policy;
    policy.grid = {-1.0, 1.0, 4};
    policy.proposals = {{{{0, 0.1, 1.0}}, {{0, 0.2, 1.0}}, {{0, 0.3, 1.0}}, {{0, 0.4, 1.0}}}};
    CHECK(policy.propose({0, -0.9}).atoms[0].risk == 0.1);
    CHECK(policy.propose({0, 0.9}).atoms[0].risk == 0.4);
    CHECK(policy.propose({0, -5.0}).atoms[0].risk == 0.1);  // clamped bin
    CHECK_THROWS_AS(policy.propose({7, 0.0}), std::out_of_range);
}

TEST_CASE("train config validation catches an out-of-range budget") {
    const AugEnv env = fixtures::m1_exact_aug();
    TrainConfig cfg;
    cfg.x0 = env.risk_bound + 1.0;
    const auto report = validate_train_config(cfg, env);
    REQUIRE(!report.empty());
    CHECK(report[0].find("x0") != std::string::npos);
    cfg.x0 = 0.5;
    CHECK(validate_train_config(cfg, env).empty());
}

namespace {

TrainResult train_m1(double x0, long episodes, std::uint64_t seed) {
    const AugEnv env = fixtures::m1_exact_aug();
    TrainConfig cfg;
    cfg.episodes = episodes;
    cfg.x0 = x0;
    Rng rng = make_rng(seed);
    return shielded_q_train(env, cfg, rng);
}

}  // namespace

TEST_CASE("training at the half budget reaches the constrained optimum") {
    const AugEnv env = fixtures::m1_exact_aug();
    const TrainResult result = train_m1(0.5, 20000, 5);
    CHECK(result.shield_violations == 0);
    Rng rng = make_rng(6);
    const AugMcStats stats =
        mc_estimate_aug(env, result.policy, 0.5, 20000, env.cmdp.horizon_cap, rng);
    CHECK(stats.reward.mean >= 0.48);
    CHECK(stats.cost.mean <= 0.52);
    CHECK(stats.shield_violations == 0);
}

TEST_CASE("training with a zero budget is forced onto the free branch") {
    const AugEnv env = fixtures::m1_exact_aug();
    const TrainResult result = train_m1(0.0, 4000, 7);
    Rng rng = make_rng(8);
    const AugMcStats stats =
        mc_estimate_aug(env, result.policy, 0.0, 5000, env.cmdp.horizon_cap, rng);
    CHECK(stats.reward.mean <= 1e-3);
    CHECK(stats.cost.mean <= 1e-3);
}

TEST_CASE("training with a unit budget recovers the unconstrained optimum") {
    const AugEnv env = fixtures::m1_exact_aug();
    const TrainResult result = train_m1(1.0, 20000, 9);
    Rng rng = make_rng(10);
    const AugMcStats stats =
        mc_estimate_aug(env, result.policy, 1.0, 5000, env.cmdp.horizon_cap, rng);
    CHECK(stats.reward.mean >= 0.98);
}

TEST_CASE("training log rows are well-formed and mark hybrid episodes") {
    const TrainResult result = train_m1(0.5, 50, 11);
    REQUIRE(result.log.size() == 50);
    for (const auto& row : result.log) {
        if (row.episode % 2 == 1) CHECK(row.switch_step == -1);
        if (row.episode % 2 == 0) CHECK(row.switch_step >= 0);
        CHECK(row.steps <= 4);
        CHECK(row.mean_lambda >= 0.0);
        CHECK(row.mean_lambda <= 1.0);
    }
}

TEST_CASE("windowed episode cost respects the budget bound under a noisy critic") {
    const Cmdp m = fixtures::det_cycle(0.9);
    const QTable exact = cost_value_iteration(m, 1e-12);
    Rng perturb_rng = make_rng(12);
    const double delta = 0.1;
    const QTable noisy = perturb(exact, m, delta, perturb_rng);
    const AugEnv env = augment(m, noisy, RiskRule::q_relative);
    TrainConfig cfg;
    cfg.episodes = 3000;
    cfg.x0 = 1.0;
    Rng rng = make_rng(13);
    const TrainResult result = shielded_q_train(env, cfg, rng);
    CHECK(result.shield_violations == 0);

    const double bound = cfg.x0 / m.gamma_c + 2.0 * delta / (1.0 - m.gamma_c);
    const std::size_t window = 500;
    std::vector<double> tail;
    for (std::size_t i = result.log.size() - window; i < result.log.size(); ++i)
        tail.push_back(result.log[i].disc_cost);
    const McEstimate est = summarize(tail);
    CHECK(est.mean <= bound + 3.0 * est.std_error);
}

TEST_CASE("trained reward never beats the oracle at the slack-widened budget") {
    const AugEnv env = fixtures::m1_exact_aug();
    const TrainResult result = train_m1(0.5, 20000, 14);
    Rng rng = make_rng(15);
    const AugMcStats stats =
        mc_estimate_aug(env, result.policy, 0.5, 20000, env.cmdp.horizon_cap, rng);
    // exact critic: slack = 0, so the budget is x0 itself
    const OracleResult oracle = brute_force_oracle(env.cmdp, 0.5);
    CHECK(stats.reward.mean <= oracle.best_reward + stats.reward.ci95);
}

TEST_CASE("projected flipping policy matches the exact base evaluation") {
    const AugEnv env = fixtures::m1_exact_aug();
    const LambdaAugPolicy flipping = fixtures::m1_flipping_proposal();
    ProjectedPolicy projected = project(flipping, env, 0.5);
    Rng rng = make_rng(16);
    const McPair stats = mc_estimate(env.cmdp, projected, 20000, env.cmdp.horizon_cap, rng);
    CHECK(std::abs(stats.reward.mean - 0.5) <= stats.reward.ci95 * 1.5);
    CHECK(std::abs(stats.cost.mean - 0.5) <= stats.cost.ci95 * 1.5);
}

TEST_CASE("projecting the backup proposal executes the backup action everywhere") {
    const Cmdp m = fixtures::det_cycle(0.9);
    const QTable q = cost_value_iteration(m, 1e-12);
    const AugEnv env = augment(m, q, RiskRule::q_relative);
    const LambdaAugPolicy backup = fixtures::backup_proposal(env);
    ProjectedPolicy projected = project(backup, env, -2.0);  // deep below the floor
    Rng rng = make_rng(17);
    for (int ep = 0; ep < 20; ++ep) {
        projected.begin_episode();
        int state = m.initial_state;
        for (int t = 0; t < 30; ++t) {
            const int a = projected.act(state, rng);
            CHECK(a == q.backup_action(state));
            int next = 0;
            for (int u = 0; u < m.num_states(); ++u)
                if (m.transition[state][a][u] == 1.0) next = u;
            state = next;
        }
    }
}

TEST_CASE("projection on a single-step model is exactly the augmented run") {
    const Cmdp m = make_env({.name = "chain",
                             .params = {{"n", 1}},
                             .step_rewards = {0.3},
                             .step_costs = {0.4}});
    const QTable q = cost_value_iteration(m, 1e-12);
    const AugEnv env = augment(m, q, RiskRule::q_relative);
    const LambdaAugPolicy dirac(
        [](const AugState&) { return ProposedDistribution{{{0, 0.4, 1.0}}}; });
    Rng rng = make_rng(18);
    const AugTrajectory aug = rollout_aug(env, dirac, 0.5, m.horizon_cap, rng);
    ProjectedPolicy projected = project(dirac, env, 0.5);
    const Trajectory base = rollout(m, projected, m.horizon_cap, rng);
    REQUIRE(aug.steps.size() == 1);
    REQUIRE(base.steps.size() == 1);
    CHECK(aug.steps[0].reward == base.steps[0].reward);
    CHECK(aug.steps[0].cost == base.steps[0].cost);
    CHECK(aug.steps[0].a == base.steps[0].action);
}

TEST_CASE("projection surfaces a domain gap in the augmented policy") {
    const AugEnv env = fixtures::m1_exact_aug();
    const LambdaAugPolicy partial([](const AugState& st) {
        if (st.state != 0) throw std::out_of_range("no proposal for this state");
        return ProposedDistribution{{{0, 1.0, 1.0}}};
    });
    ProjectedPolicy projected = project(partial, env, 1.0);
    Rng rng = make_rng(19);
    CHECK_THROWS_AS(rollout(env.cmdp, projected, env.cmdp.horizon_cap, rng),
                    std::out_of_range);
}

TEST_CASE("training on a zero-cost model degenerates gracefully") {
    const Cmdp m = make_env({.name = "chain",
                             .params = {{"n", 3}},
                             .step_rewards = {0.1, 0.5, 0.2},
                             .step_costs = {0.0}});
    const AugEnv env = augment(m, cost_value_iteration(m, 1e-12), RiskRule::cost_relative);
    CHECK(env.risk_bound == 0.0);
    TrainConfig cfg;
    cfg.episodes = 50;
    cfg.x0 = 0.0;
    Rng rng = make_rng(20);
    const TrainResult result = shielded_q_train(env, cfg, rng);
    CHECK(result.shield_violations == 0);
    Rng mc_rng = make_rng(21);
    const AugMcStats stats = mc_estimate_aug(env, result.policy, 0.0, 100, m.horizon_cap, mc_rng);
    CHECK(stats.reward.mean == doctest::Approx(0.8));
    CHECK(stats.cost.mean == 0.0);
}

TEST_CASE("trained reward stays below the oracle at the slack-widened budget, noisy critic") {
    const Cmdp m = fixtures::det_cycle(0.9);
    const QTable exact = cost_value_iteration(m, 1e-12);
    Rng perturb_rng = make_rng(23);
    const double delta = 0.1;
    const QTable noisy = perturb(exact, m, delta, perturb_rng);
    const AugEnv env = augment(m, noisy, RiskRule::q_relative);
    TrainConfig cfg;
    cfg.episodes = 5000;
    cfg.x0 = 1.0;
    Rng train_rng = make_rng(24);
    const TrainResult trained = shielded_q_train(env, cfg, train_rng);
    Rng mc_rng = make_rng(25);
    const AugMcStats stats = mc_estimate_aug(env, trained.policy, cfg.x0, 20000,
                                             default_mc_horizon(m), mc_rng);
    const double slack = 2.0 * delta + 2.0 * delta * m.gamma_c / (1.0 - m.gamma_c);
    const OracleResult oracle = brute_force_oracle(m, cfg.x0 + slack);
    CHECK(stats.reward.mean <= oracle.best_reward + stats.reward.ci95);
}
