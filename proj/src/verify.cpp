#include "riskshield/verify.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "riskshield/critic.hpp"

namespace riskshield {

McEstimate summarize(const std::vector<double>& samples) {
    const long n = static_cast<long>(samples.size());
    if (n < 2) throw std::invalid_argument("summarize: need at least 2 samples");
    double mean = 0.0;
    for (double v : samples) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : samples) ss += (v - mean) * (v - mean);
    const double var = ss / static_cast<double>(n - 1);
    const double se = std::sqrt(var / static_cast<double>(n));
    return {mean, se, n, 1.96 * se};
}

McPair mc_estimate(const Cmdp& m, BasePolicy& policy, long n, int horizon, Rng& rng) {
    std::vector<double> costs, rewards;
    costs.reserve(n);
    rewards.reserve(n);
    for (long i = 0; i < n; ++i) {
        const Trajectory traj = rollout(m, policy, horizon, rng);
        const auto [r, c] = discounted_sums(traj, m.gamma_r, m.gamma_c);
        rewards.push_back(r);
        costs.push_back(c);
    }
    return {summarize(costs), summarize(rewards)};
}

AugMcStats mc_estimate_aug(const AugEnv& env, const AugProposalPolicy& policy, double x0,
                           long n, int horizon, Rng& rng, bool apply_shield) {
    std::vector<double> costs, rewards;
    costs.reserve(n);
    rewards.reserve(n);
    AugMcStats stats;
    double lambda_sum = 0.0;
    long decision_count = 0;
    for (long i = 0; i < n; ++i) {
        const AugEpisodeStats ep = run_aug_episode(env, policy, x0, horizon, rng, apply_shield);
        rewards.push_back(ep.disc_reward);
        costs.push_back(ep.disc_cost);
        stats.shield_violations += ep.shield_violations;
        stats.clamp_events += ep.clamp_events;
        lambda_sum += ep.lambda_sum;
        decision_count += ep.steps;
    }
    stats.cost = summarize(costs);
    stats.reward = summarize(rewards);
    stats.mean_lambda = decision_count > 0 ? lambda_sum / decision_count : 0.0;
    return stats;
}

AugMcStats mc_estimate_aug_noisy(const AugEnv& env, const AugProposalPolicy& policy,
                                 const AugProposalPolicy& noise, double xi, double x0, long n,
                                 int horizon, Rng& rng) {
    std::vector<double> costs, rewards;
    costs.reserve(n);
    rewards.reserve(n);
    AugMcStats stats;
    for (long i = 0; i < n; ++i) {
        const AugEpisodeStats ep = run_aug_episode_noisy(env, policy, noise, xi, x0, horizon, rng);
        rewards.push_back(ep.disc_reward);
        costs.push_back(ep.disc_cost);
        stats.clamp_events += ep.clamp_events;
    }
    stats.cost = summarize(costs);
    stats.reward = summarize(rewards);
    return stats;
}

double geometric_factor(double gamma, int horizon_cap) {
    if (gamma < 1.0) return 1.0 / (1.0 - gamma);
    return static_cast<double>(horizon_cap);
}

double critic_error_bound(const AugEnv& env) {
    switch (env.q.provenance) {
        case Provenance::exact:
            return 0.0;
        case Provenance::perturbed:
            return env.q.perturb_delta;
        case Provenance::learned: {
            const QTable oracle = cost_value_iteration(env.cmdp, 1e-12);
            double dist = 0.0;
            for (int s = 0; s < env.cmdp.num_states(); ++s)
                for (int a = 0; a < env.cmdp.num_actions(s); ++a)
                    dist = std::max(dist, std::abs(env.q.at(s, a) - oracle.at(s, a)));
            return dist;
        }
    }
    return 0.0;
}

CheckReport check_safety(const AugEnv& env, const AugProposalPolicy& policy, double x0, long n,
                         int horizon, Rng& rng, bool apply_shield) {
    const AugMcStats stats = mc_estimate_aug(env, policy, x0, n, horizon, rng, apply_shield);
    const double gc = env.gamma_c();
    const double delta = critic_error_bound(env);
    const double geom = geometric_factor(gc, env.cmdp.horizon_cap);
    const double floor0 = env.q.floor(env.cmdp.initial_state);

    CheckReport report;
    report.check = "safety_budget_bound";
    report.estimate = stats.cost;
    report.margin = stats.cost.ci95;
    const bool budget_branch = x0 >= floor0;
    if (budget_branch) {
        report.bound = x0 / gc + 2.0 * delta * geom;
        report.note = "budget branch: x0 >= floor(s0)";
    } else {
        report.bound = floor0 / gc + 3.0 * delta * geom;
        report.note = "low-budget branch: x0 < floor(s0)";
    }
    report.params["gamma_c"] = gc;
    report.params["delta_b"] = delta;
    report.params["x0"] = x0;
    report.params["n"] = static_cast<double>(n);
    report.params["floor_s0"] = floor0;
    report.params["budget_branch"] = budget_branch ? 1.0 : 0.0;
    // alternate printed form of the same bound, logged for comparison
    report.params["alt_bound"] = x0 + 2.0 * delta * geom;
    report.params["alt_condition_held"] = x0 >= floor0 / gc ? 1.0 : 0.0;
    report.params["shield_violations"] = static_cast<double>(stats.shield_violations);
    report.params["clamp_events"] = static_cast<double>(stats.clamp_events);

    if (stats.shield_violations > 0) {
        report.pass = false;
        report.note = "precondition failed: sampled distribution violated is_shielded " +
                      std::to_string(stats.shield_violations) + " times";
        return report;
    }
    report.pass = stats.cost.mean <= report.bound + report.margin;
    return report;
}

CheckReport check_preservation(const AugEnv& env, const AugProposalPolicy& policy, double x0,
                               long n, int horizon, Rng& rng) {
    const AugMcStats aug = mc_estimate_aug(env, policy, x0, n, horizon, rng);
    ProjectedPolicy projected = project(policy, env, x0);
    const McPair base = mc_estimate(env.cmdp, projected, n, horizon, rng);

    CheckReport report;
    report.check = "projection_preservation";
    report.estimate = base.cost;
    report.bound = aug.cost.mean;
    report.margin = aug.cost.ci95 + base.cost.ci95;
    const double cost_diff = std::abs(base.cost.mean - aug.cost.mean);
    const double reward_diff = std::abs(base.reward.mean - aug.reward.mean);
    const double reward_margin = aug.reward.ci95 + base.reward.ci95;
    report.pass = cost_diff <= report.margin && reward_diff <= reward_margin;
    report.params["x0"] = x0;
    report.params["n"] = static_cast<double>(n);
    report.params["aug_cost"] = aug.cost.mean;
    report.params["proj_cost"] = base.cost.mean;
    report.params["cost_diff"] = cost_diff;
    report.params["aug_reward"] = aug.reward.mean;
    report.params["proj_reward"] = base.reward.mean;
    report.params["reward_diff"] = reward_diff;
    report.params["reward_margin"] = reward_margin;
    return report;
}

CheckReport check_noise(const AugEnv& env, const AugProposalPolicy& policy,
                        const AugProposalPolicy& noise, double xi, double x0, long n,
                        int horizon, Rng& rng) {
    if (xi < 0.0 || xi > 1.0) throw std::invalid_argument("check_noise: xi outside [0,1]");
    const AugMcStats base = mc_estimate_aug(env, policy, x0, n, horizon, rng);
    const AugMcStats mixed = mc_estimate_aug_noisy(env, policy, noise, xi, x0, n, horizon, rng);
    const double gc = env.gamma_c();
    const double cmax = env.cmdp.max_cost();
    const double slack = xi == 0.0 ? 0.0
                                   : xi * cmax * geometric_factor(gc, env.cmdp.horizon_cap) /
                                         (1.0 - (1.0 - xi) * gc);

    CheckReport report;
    report.check = "noise_mixing_bound";
    report.estimate = mixed.cost;
    report.bound = base.cost.mean + slack;
    report.margin = base.cost.ci95 + mixed.cost.ci95;
    report.pass = mixed.cost.mean <= report.bound + report.margin;
    report.params["xi"] = xi;
    report.params["gamma_c"] = gc;
    report.params["c_max"] = cmax;
    report.params["slack"] = slack;
    report.params["x0"] = x0;
    report.params["n"] = static_cast<double>(n);
    report.params["base_cost"] = base.cost.mean;
    return report;
}

CheckReport check_optimality(const AugEnv& env, const AugProposalPolicy& trained, double d,
                             double x0, double tol, long n, int horizon, Rng& rng) {
    if (!env.cmdp.is_deterministic())
        throw std::domain_error("check_optimality: requires a deterministic model");
    const OracleResult oracle = brute_force_oracle(env.cmdp, d);
    const AugMcStats stats = mc_estimate_aug(env, trained, x0, n, horizon, rng);
    const double gc = env.gamma_c();
    const double delta = critic_error_bound(env);
    const double geom = geometric_factor(gc, env.cmdp.horizon_cap);
    const double cost_bound = d + 2.0 * delta + 2.0 * delta * gc * geom;

    CheckReport report;
    report.check = "constrained_optimality";
    report.estimate = stats.cost;
    report.bound = cost_bound;
    report.margin = stats.cost.ci95;
    const bool reward_ok = stats.reward.mean >= oracle.best_reward - tol;
    const bool cost_ok = stats.cost.mean <= cost_bound + stats.cost.ci95;
    report.pass = reward_ok && cost_ok;
    report.params["d"] = d;
    report.params["x0"] = x0;
    report.params["tol"] = tol;
    report.params["delta_b"] = delta;
    report.params["r_star"] = oracle.best_reward;
    report.params["reward_mean"] = stats.reward.mean;
    report.params["reward_ci95"] = stats.reward.ci95;
    report.params["reward_ok"] = reward_ok ? 1.0 : 0.0;
    // risk-budget form of the same bound, logged for comparison
    report.params["alt_x0_bound"] = gc * d + 2.0 * delta * gc * geom;
    if (!reward_ok) report.note = "reward below oracle optimum minus tol";
    return report;
}

std::string render_summary(const std::vector<CheckReport>& reports) {
    std::ostringstream os;
    os << std::left << std::setw(28) << "check" << std::right << std::setw(14) << "mean"
       << std::setw(14) << "bound" << std::setw(12) << "ci95" << std::setw(8) << "pass"
       << "\n";
    for (const auto& r : reports) {
        os << std::left << std::setw(28) << r.check << std::right << std::fixed
           << std::setprecision(6) << std::setw(14) << r.estimate.mean << std::setw(14)
           << r.bound << std::setw(12) << r.estimate.ci95 << std::setw(8)
           << (r.pass ? "PASS" : "FAIL") << "\n";
        os.unsetf(std::ios::fixed);
    }
    return os.str();
}

}  // namespace riskshield
