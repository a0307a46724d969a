#pragma once

#include <map>
#include <string>
#include <vector>

#include "riskshield/policyopt.hpp"

namespace riskshield {

/// Sample mean with a normal-approximation 95% interval.
struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    long n = 0;
    double ci95 = 0.0;  // 1.96 * std_error
};

/// Requires at least two samples.
McEstimate summarize(const std::vector<double>& samples);

struct McPair {
    McEstimate cost;
    McEstimate reward;
};

/// Monte Carlo discounted cost and reward of a base-model policy.
McPair mc_estimate(const Cmdp& m, BasePolicy& policy, long n, int horizon, Rng& rng);

struct AugMcStats {
    McEstimate cost;
    McEstimate reward;
    long shield_violations = 0;
    long clamp_events = 0;
    double mean_lambda = 0.0;
};

/// Monte Carlo estimates for a shielded actor on the augmented model.
AugMcStats mc_estimate_aug(const AugEnv& env, const AugProposalPolicy& policy, double x0,
                           long n, int horizon, Rng& rng, bool apply_shield = true);

/// Same, for the xi-mixture of the shielded actor with a raw noise actor.
AugMcStats mc_estimate_aug_noisy(const AugEnv& env, const AugProposalPolicy& policy,
                                 const AugProposalPolicy& noise, double xi, double x0, long n,
                                 int horizon, Rng& rng);

/// Pass/fail record for one bound check. Deterministic given the seed.
struct CheckReport {
    std::string check;
    double bound = 0.0;
    McEstimate estimate;
    double margin = 0.0;
    bool pass = false;
    std::map<std::string, double> params;
    std::string note;
};

/// 1 / (1 - gamma), with the episodic analog horizon_cap at gamma = 1.
double geometric_factor(double gamma, int horizon_cap);

/// Known sup-norm critic error: 0 for exact tables, the recorded delta for
/// perturbed ones, and the measured distance to the value-iteration solution
/// for learned ones.
double critic_error_bound(const AugEnv& env);

/// Budget bound on the expected discounted cost of a shielded policy started
/// at (s0, x0). The distribution sampled at every visited state must satisfy
/// is_shielded; violations fail the check outright. Passing apply_shield =
/// false runs the raw proposals instead, for policies that claim to be
/// shielded already.
CheckReport check_safety(const AugEnv& env, const AugProposalPolicy& policy, double x0, long n,
                         int horizon, Rng& rng, bool apply_shield = true);

/// De-augmentation preserves cost and reward: the projected policy's MC
/// estimates match the augmented ones within summed 95% intervals.
CheckReport check_preservation(const AugEnv& env, const AugProposalPolicy& policy, double x0,
                               long n, int horizon, Rng& rng);

/// Cost of the xi-mixture with an arbitrary noise actor stays within the
/// mixing slack of the unnoised cost.
CheckReport check_noise(const AugEnv& env, const AugProposalPolicy& policy,
                        const AugProposalPolicy& noise, double xi, double x0, long n,
                        int horizon, Rng& rng);

/// On a deterministic model: the trained actor's reward reaches the
/// enumeration oracle's optimum at budget d within tol, while its cost stays
/// within the critic-error slack of d.
CheckReport check_optimality(const AugEnv& env, const AugProposalPolicy& trained, double d,
                             double x0, double tol, long n, int horizon, Rng& rng);

/// Fixed-width human-readable table, one line per check.
std::string render_summary(const std::vector<CheckReport>& reports);

}  // namespace riskshield
