#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "riskshield/augmented.hpp"
#include "riskshield/shield.hpp"

namespace riskshield {

/// Distribution-level actor interface on the augmented space: given (s, x),
/// propose a finite mixture of risk-valued actions. The shield is applied by
/// the execution machinery, not by the actor.
class AugProposalPolicy {
  public:
    virtual ~AugProposalPolicy() = default;
    virtual ProposedDistribution propose(const AugState& st) const = 0;
};

class LambdaAugPolicy : public AugProposalPolicy {
  public:
    explicit LambdaAugPolicy(std::function<ProposedDistribution(const AugState&)> fn)
        : fn_(std::move(fn)) {}
    ProposedDistribution propose(const AugState& st) const override { return fn_(st); }

  private:
    std::function<ProposedDistribution(const AugState&)> fn_;
};

/// Uniform binning of the risk interval [lo, hi]; out-of-range risks map to
/// the boundary bins.
struct RiskGrid {
    double lo = 0.0;
    double hi = 1.0;
    int bins = 1;

    int bin_of(double x) const;
    double center(int bin) const;
};

/**
 * Learned actor: per (state, risk bin), a proposal of at most two
 * risk-valued atoms. Proposals must be valid distributions; the trainer
 * emits single-atom proposals, hand-built policies may use two.
 */
class TabularAugPolicy : public AugProposalPolicy {
  public:
    RiskGrid grid;
    std::vector<std::vector<AtomVec>> proposals;  // [s][bin] -> atoms

    ProposedDistribution propose(const AugState& st) const override;
};

struct TrainConfig {
    long episodes = 50000;
    double alpha0 = 0.5;
    double alpha_decay = 2e-4;  // alpha = alpha0 / (1 + decay * visits)
    double explore_xi = 0.1;    // probability of proposing a random candidate
    long hybrid_delay = 2;      // every k-th episode becomes a hybrid episode
    long policy_delay = 2;      // episodes between greedy-snapshot refreshes
    double x0 = 0.0;            // initial risk budget
    int risk_bins = 32;
    int risk_levels = 5;  // candidate risk levels per action
};

/// Violated-constraint list; empty iff the config is admissible for the env.
std::vector<std::string> validate_train_config(const TrainConfig& cfg, const AugEnv& env);

struct EpisodeLogRow {
    long episode;
    long steps;
    double disc_reward;
    double disc_cost;
    long clamp_events;
    double mean_lambda;
    long switch_step;  // -1 when the episode never switches to the backup actor
};

struct TrainResult {
    TabularAugPolicy policy;
    std::vector<EpisodeLogRow> log;
    long shield_violations = 0;  // sampled distributions failing is_shielded
    long clamp_events = 0;
};

/**
 * Shielded tabular Q-learning on the augmented reward. Every environment
 * interaction samples from shield(proposal, (s, x), env.q), so exploration
 * stays budget-safe; hybrid episodes switch to the backup action (carrying
 * the current risk) after a randomized step to vary coverage. The returned
 * policy is greedy w.r.t. the learned reward table, evaluated through the
 * shield at each risk bin's center.
 */
TrainResult shielded_q_train(const AugEnv& env, const TrainConfig& cfg, Rng& rng);

/// Switch step for one episode: on scheduled episodes, uniform in
/// [0, mean(recent episode lengths)] (mean of an empty list is 0); otherwise
/// nullopt, meaning the backup actor is never engaged.
std::optional<long> hybrid_schedule(long ep_number, long hybrid_delay,
                                    const std::vector<long>& recent_lengths, Rng& rng);

/// One augmented-space episode under a shielded actor.
struct AugTrajectory {
    struct Step {
        int s;
        double x;
        int a;
        double y;
        double reward;
        double cost;
        int s2;
        double x2;
    };
    std::vector<Step> steps;
    bool terminated = false;
    long clamp_events = 0;
    long shield_violations = 0;
    double lambda_sum = 0.0;
};

/// Samples one episode from the shielded actor (or the raw proposals when
/// apply_shield is false, for adversarial checks). Each sampled distribution
/// is re-checked with is_shielded and violations are counted.
AugTrajectory rollout_aug(const AugEnv& env, const AugProposalPolicy& policy, double x0,
                          int horizon, Rng& rng, bool apply_shield = true);

/// Per-episode aggregates without step records, for high-volume Monte Carlo.
struct AugEpisodeStats {
    double disc_reward = 0.0;
    double disc_cost = 0.0;
    long steps = 0;
    long clamp_events = 0;
    long shield_violations = 0;
    double lambda_sum = 0.0;
};

AugEpisodeStats run_aug_episode(const AugEnv& env, const AugProposalPolicy& policy, double x0,
                                int horizon, Rng& rng, bool apply_shield = true);

AugEpisodeStats run_aug_episode_noisy(const AugEnv& env, const AugProposalPolicy& policy,
                                      const AugProposalPolicy& noise, double xi, double x0,
                                      int horizon, Rng& rng);

/// Like rollout_aug, but each step samples from the xi-mixture of the
/// shielded actor with a raw noise actor.
AugTrajectory rollout_aug_noisy(const AugEnv& env, const AugProposalPolicy& policy,
                                const AugProposalPolicy& noise, double xi, double x0,
                                int horizon, Rng& rng);

/**
 * De-augmentation: a base-model policy that tracks the risk scalar
 * internally. Each step samples (a, y) from the shielded actor at (s, m),
 * executes a, and on observing the next state updates m by the env's risk
 * rule, mirroring the augmented dynamics exactly. The referenced actor and
 * env must outlive the projected policy.
 */
class ProjectedPolicy : public BasePolicy {
  public:
    ProjectedPolicy(const AugProposalPolicy& policy, const AugEnv& env, double x0);
    void begin_episode() override;
    int act(int state, Rng& rng) override;
    double current_risk() const { return risk_; }

  private:
    const AugProposalPolicy* policy_;
    const AugEnv* env_;
    double x0_;
    double risk_ = 0.0;
    bool has_prev_ = false;
    int prev_state_ = 0;
    int prev_action_ = 0;
    double prev_alloc_ = 0.0;
};

ProjectedPolicy project(const AugProposalPolicy& policy, const AugEnv& env, double x0);

/// Exact solution of the budgeted problem over initial-state mixtures of two
/// deterministic memoryless policies.
struct OracleResult {
    double best_reward;
    double best_cost;
    std::vector<int> pi1;  // actions per state
    std::vector<int> pi2;
    double alpha;  // weight on pi1
    long policies_enumerated;
    double det_reward_min;  // over all deterministic policies
    double det_reward_max;
};

/// Enumerates every deterministic memoryless policy, evaluates each exactly,
/// and maximizes reward over pairwise initial-state mixtures subject to the
/// mixed cost staying within d. Throws when the enumeration exceeds
/// `enumeration_cap` or when no mixture satisfies the budget.
OracleResult brute_force_oracle(const Cmdp& m, double d, long enumeration_cap = 1000000);

}  // namespace riskshield
