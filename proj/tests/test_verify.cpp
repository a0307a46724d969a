#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "riskshield/verify.hpp"

using namespace riskshield;

TEST_CASE("mc_estimate of a deterministic zero-cost branch has zero spread") {
    const Cmdp m = fixtures::m1();
    MemorylessSampler pi(MemorylessPolicy::deterministic(m, {1, 0, 0, 0}));
    Rng rng = make_rng(1);
    const McPair stats = mc_estimate(m, pi, 1000, m.horizon_cap, rng);
    CHECK(stats.cost.mean == 0.0);
    CHECK(stats.cost.std_error == 0.0);
    CHECK(stats.cost.ci95 == 0.0);
}

TEST_CASE("mc_estimate pins the flipping cost within one percent") {
    const Cmdp m = fixtures::m1();
    MemorylessPolicy flip = MemorylessPolicy::uniform(m);
    flip.probs[0] = {0.5, 0.5};
    MemorylessSampler pi(flip);
    Rng rng = make_rng(2);
    const McPair stats = mc_estimate(m, pi, 10000, m.horizon_cap, rng);
    CHECK(stats.cost.ci95 <= 0.01);
    CHECK(std::abs(stats.cost.mean - 0.5) <= 0.015);
    CHECK(stats.cost.n == 10000);
}

TEST_CASE("estimates require at least two samples") {
    CHECK_THROWS_AS(summarize({1.0}), std::invalid_argument);
    const Cmdp m = fixtures::m1();
    MemorylessSampler pi(MemorylessPolicy::uniform(m));
    Rng rng = make_rng(3);
    CHECK_THROWS_AS(mc_estimate(m, pi, 1, m.horizon_cap, rng), std::invalid_argument);
}

TEST_CASE("ci95 is tied to the standard error") {
    const McEstimate est = summarize({1.0, 2.0, 3.0, 4.0});
    CHECK(est.ci95 == doctest::Approx(1.96 * est.std_error));
    CHECK(est.n == 4);
}

TEST_CASE("safety check passes the exact-critic flipping policy at the tight bound") {
    const AugEnv env = fixtures::m1_exact_aug();
    const LambdaAugPolicy flipping = fixtures::m1_flipping_proposal();
    Rng rng = make_rng(4);
    const CheckReport report =
        check_safety(env, flipping, 0.5, 20000, env.cmdp.horizon_cap, rng);
    CHECK(report.bound == doctest::Approx(0.5));
    CHECK(report.pass);
    CHECK(report.params.at("delta_b") == 0.0);
    CHECK(report.params.at("budget_branch") == 1.0);
}

TEST_CASE("safety bound arithmetic includes the critic slack") {
    const Cmdp m = fixtures::det_cycle(0.9);
    QTable q = cost_value_iteration(m, 1e-12);
    q.provenance = Provenance::perturbed;
    q.perturb_delta = 0.05;
    const AugEnv env = augment(m, q, RiskRule::q_relative);
    const LambdaAugPolicy backup = fixtures::backup_proposal(env);
    Rng rng = make_rng(5);
    const CheckReport report = check_safety(env, backup, 0.9, 500, 60, rng);
    // 2 * 0.05 / (1 - 0.9) = 1.0 of slack on top of x0 / gamma_c
    CHECK(report.bound == doctest::Approx(0.9 / 0.9 + 1.0));
    CHECK(report.pass);
}

TEST_CASE("safety check flags an over-allocating unshielded policy") {
    const AugEnv env = fixtures::m1_exact_aug();
    // claims the costly branch with probability 1 while the budget is 0.25
    const LambdaAugPolicy greedy([](const AugState& st) {
        if (st.state == 0) return ProposedDistribution{{{0, 1.0, 1.0}}};
        return ProposedDistribution{{{0, 0.0, 1.0}}};
    });
    Rng rng = make_rng(6);
    const CheckReport report =
        check_safety(env, greedy, 0.25, 200, env.cmdp.horizon_cap, rng, false);
    CHECK(!report.pass);
    CHECK(report.note.find("precondition") != std::string::npos);
    CHECK(report.params.at("shield_violations") > 0.0);
}

TEST_CASE("safety check is deterministic given the seed") {
    const AugEnv env = fixtures::m1_exact_aug();
    const LambdaAugPolicy flipping = fixtures::m1_flipping_proposal();
    Rng r1 = make_rng(7), r2 = make_rng(7);
    const CheckReport a = check_safety(env, flipping, 0.5, 2000, env.cmdp.horizon_cap, r1);
    const CheckReport b = check_safety(env, flipping, 0.5, 2000, env.cmdp.horizon_cap, r2);
    CHECK(a.estimate.mean == b.estimate.mean);
    CHECK(a.pass == b.pass);
}

TEST_CASE("exact-critic safety passes on 100 of 100 seeded runs") {
    const Cmdp m = fixtures::det_cycle(0.9);
    const AugEnv env = augment(m, cost_value_iteration(m, 1e-12), RiskRule::q_relative);
    const LambdaAugPolicy flip([](const AugState& st) {
        if (st.state == 0) return ProposedDistribution{{{0, 10.0, 0.4}, {1, 0.0, 0.6}}};
        return ProposedDistribution{{{0, 0.0, 1.0}}};
    });
    int passed = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng = make_rng(seed, 900);
        if (check_safety(env, flip, 1.5, 2000, 66, rng).pass) passed++;
    }
    CHECK(passed == 100);
}

TEST_CASE("preservation holds for the flipping policy on the branching example") {
    const AugEnv env = fixtures::m1_exact_aug();
    const LambdaAugPolicy flipping = fixtures::m1_flipping_proposal();
    Rng rng = make_rng(8);
    const CheckReport report =
        check_preservation(env, flipping, 0.5, 20000, env.cmdp.horizon_cap, rng);
    CHECK(report.pass);
    CHECK(report.params.at("cost_diff") <= report.margin);
}

TEST_CASE("preservation is exact for the deterministic backup policy") {
    const AugEnv env = fixtures::m1_exact_aug();
    const LambdaAugPolicy backup = fixtures::backup_proposal(env);
    Rng rng = make_rng(9);
    const CheckReport report =
        check_preservation(env, backup, 0.5, 100, env.cmdp.horizon_cap, rng);
    CHECK(report.pass);
    CHECK(report.params.at("cost_diff") == 0.0);
    CHECK(report.params.at("reward_diff") == 0.0);
}

TEST_CASE("preservation holds on a stochastic model") {
    const Cmdp m = make_env(
        {.name = "random", .params = {{"states", 5}, {"actions", 2}, {"gamma_c", 0.85},
                                      {"gamma_r", 0.85}},
         .seed = 7});
    const AugEnv env = augment(m, cost_value_iteration(m, 1e-12), RiskRule::q_relative);
    const LambdaAugPolicy actor([](const AugState& st) {
        return ProposedDistribution{{{0, 2.0, 0.5}, {1, 1.0, 0.5}}};
        (void)st;
    });
    Rng rng = make_rng(10);
    const CheckReport report = check_preservation(env, actor, 1.0, 30000, 80, rng);
    CHECK(report.pass);
}

TEST_CASE("noise check with zero mixing is the trivial bound") {
    const AugEnv env = fixtures::m1_exact_aug();
    const LambdaAugPolicy flipping = fixtures::m1_flipping_proposal();
    const LambdaAugPolicy noise([](const AugState& st) {
        if (st.state == 0) return ProposedDistribution{{{0, 1.0, 1.0}}};
        return ProposedDistribution{{{0, 0.0, 1.0}}};
    });
    Rng rng = make_rng(11);
    const CheckReport report =
        check_noise(env, flipping, noise, 0.0, 0.5, 5000, env.cmdp.horizon_cap, rng);
    CHECK(report.params.at("slack") == 0.0);
    CHECK(report.pass);
}

TEST_CASE("noise slack arithmetic matches the closed form") {
    const Cmdp m = fixtures::loop_two_actions(0.9);
    const AugEnv env = augment(m, cost_value_iteration(m, 1e-12), RiskRule::q_relative);
    const LambdaAugPolicy backup = fixtures::backup_proposal(env);
    const LambdaAugPolicy noise([](const AugState& st) {
        return ProposedDistribution{{{1, st.risk, 1.0}}};  // costly loop action
    });
    Rng rng = make_rng(12);
    const CheckReport report = check_noise(env, backup, noise, 0.1, 1.0, 2000, 60, rng);
    CHECK(report.params.at("slack") == doctest::Approx(0.1 / (0.1 * (1.0 - 0.9 * 0.9))));
    CHECK(report.pass);
}

TEST_CASE("worst-case noise stays within the bound across the xi grid") {
    const Cmdp m = fixtures::loop_two_actions(0.9);
    const AugEnv env = augment(m, cost_value_iteration(m, 1e-12), RiskRule::q_relative);
    const LambdaAugPolicy backup = fixtures::backup_proposal(env);
    const LambdaAugPolicy noise([](const AugState& st) {
        return ProposedDistribution{{{1, st.risk, 1.0}}};
    });
    for (double xi : {0.01, 0.1, 0.5, 0.9}) {
        Rng rng = make_rng(13);
        const CheckReport report = check_noise(env, backup, noise, xi, 1.0, 3000, 60, rng);
        CHECK(report.pass);
    }
}

TEST_CASE("optimality check on the branching example with an exact critic") {
    const AugEnv env = fixtures::m1_exact_aug();
    TrainConfig cfg;
    cfg.episodes = 20000;
    cfg.x0 = 0.5;
    Rng train_rng = make_rng(14);
    const TrainResult trained = shielded_q_train(env, cfg, train_rng);
    Rng rng = make_rng(15);
    const CheckReport report = check_optimality(env, trained.policy, 0.5, 0.5, 0.02, 20000,
                                                env.cmdp.horizon_cap, rng);
    CHECK(report.pass);
    CHECK(report.params.at("r_star") == doctest::Approx(0.5));
    CHECK(report.params.at("reward_mean") >= 0.48);
}

TEST_CASE("optimality check rejects stochastic models") {
    const Cmdp m = make_env({.name = "random", .seed = 2});
    const AugEnv env = augment(m, cost_value_iteration(m, 1e-12), RiskRule::q_relative);
    const LambdaAugPolicy backup = fixtures::backup_proposal(env);
    Rng rng = make_rng(16);
    CHECK_THROWS_AS(check_optimality(env, backup, 1.0, 1.0, 0.02, 100, 50, rng),
                    std::domain_error);
}

TEST_CASE("with a zero budget the trained policy matches the free path optimum") {
    const Cmdp m = fixtures::chain_shortcut();
    const AugEnv env = augment(m, cost_value_iteration(m, 1e-12), RiskRule::q_relative);
    TrainConfig cfg;
    cfg.episodes = 8000;
    cfg.x0 = 0.0;
    Rng train_rng = make_rng(17);
    const TrainResult trained = shielded_q_train(env, cfg, train_rng);
    Rng rng = make_rng(18);
    const CheckReport report = check_optimality(env, trained.policy, 0.0, 0.0, 0.02, 5000,
                                                m.horizon_cap, rng);
    CHECK(report.params.at("r_star") == doctest::Approx(0.6));  // the long path
    CHECK(report.pass);
}

TEST_CASE("summary table renders one line per check") {
    CheckReport a;
    a.check = "safety_budget_bound";
    a.pass = true;
    CheckReport b;
    b.check = "noise_mixing_bound";
    b.pass = false;
    const std::string text = render_summary({a, b});
    CHECK(text.find("safety_budget_bound") != std::string::npos);
    CHECK(text.find("PASS") != std::string::npos);
    CHECK(text.find("FAIL") != std::string::npos);
}

TEST_CASE("safety check switches to the low-budget branch below the floor") {
    const Cmdp m = fixtures::loop(1.0, 0.9);  // Q* = 10, floor = 9
    const AugEnv env = augment(m, cost_value_iteration(m, 1e-12), RiskRule::q_relative);
    const LambdaAugPolicy backup = fixtures::backup_proposal(env);
    Rng rng = make_rng(19);
    const CheckReport report = check_safety(env, backup, 5.0, 100, 200, rng);
    CHECK(report.params.at("budget_branch") == 0.0);
    CHECK(report.bound == doctest::Approx(10.0));  // floor / gamma_c, zero slack
    CHECK(report.pass);
}
