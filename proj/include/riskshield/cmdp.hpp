#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "riskshield/rng.hpp"

namespace riskshield {

/**
 * Finite constrained MDP with dense integer state/action indices.
 *
 * Actions are indexed locally per state: action a of state s is valid iff
 * 0 <= a < num_actions(s). Rewards and costs are state-action based; costs
 * must be non-negative. Two discount factors are carried, one for rewards and
 * one for costs. A discount factor of 1 is only admissible for episodic
 * models, i.e. models where every trajectory provably reaches a terminal
 * state within `horizon_cap` steps (see validate()).
 *
 * Terminal states have a single zero-reward zero-cost self-loop action.
 * Instances are immutable after construction by convention and safe to share
 * across rollout workers.
 */
struct Cmdp {
    std::vector<std::vector<std::vector<double>>> transition;  // [s][a] -> prob over states
    std::vector<std::vector<double>> reward;                   // [s][a]
    std::vector<std::vector<double>> cost;                     // [s][a]
    double gamma_r = 1.0;
    double gamma_c = 1.0;
    double budget = 0.0;  // cost threshold d
    int initial_state = 0;
    std::vector<bool> terminal;
    int horizon_cap = 1000;
    std::vector<std::string> state_names;  // metadata only

    int num_states() const { return static_cast<int>(transition.size()); }
    int num_actions(int s) const { return static_cast<int>(transition[s].size()); }

    double max_cost() const;
    bool is_deterministic() const;

    /// True when every trajectory from the initial state reaches a terminal
    /// state within horizon_cap steps, for any policy and any outcome.
    bool is_episodic() const;

    int sample_next(int s, int a, Rng& rng) const;
};

/// Per-state probability vector over that state's actions.
struct MemorylessPolicy {
    std::vector<std::vector<double>> probs;  // [s][a]

    static MemorylessPolicy deterministic(const Cmdp& m, const std::vector<int>& actions);
    static MemorylessPolicy uniform(const Cmdp& m);
};

struct Trajectory {
    struct Step {
        int state;
        int action;
        double reward;
        double cost;
    };
    std::vector<Step> steps;
    bool terminated = false;
};

/// Policy interface used by rollouts. Implementations may be stateful across
/// one episode (memoryful policies); begin_episode() resets that state.
class BasePolicy {
  public:
    virtual ~BasePolicy() = default;
    virtual void begin_episode() {}
    virtual int act(int state, Rng& rng) = 0;
};

/// Samples a MemorylessPolicy row each step.
class MemorylessSampler : public BasePolicy {
  public:
    explicit MemorylessSampler(MemorylessPolicy policy) : policy_(std::move(policy)) {}
    int act(int state, Rng& rng) override { return sample_index(rng, policy_.probs[state]); }

  private:
    MemorylessPolicy policy_;
};

/// Initial-state mixture of two policies: each episode commits to the first
/// policy with probability alpha and to the second otherwise.
class MixtureSampler : public BasePolicy {
  public:
    MixtureSampler(MemorylessPolicy pi1, MemorylessPolicy pi2, double alpha)
        : pi1_(std::move(pi1)), pi2_(std::move(pi2)), alpha_(alpha) {}
    void begin_episode() override { chosen_ = -1; }
    int act(int state, Rng& rng) override {
        if (chosen_ < 0) chosen_ = uniform01(rng) < alpha_ ? 0 : 1;
        const auto& p = chosen_ == 0 ? pi1_ : pi2_;
        return sample_index(rng, p.probs[state]);
    }

  private:
    MemorylessPolicy pi1_, pi2_;
    double alpha_;
    int chosen_ = -1;
};

/// Returns the list of violated invariants; empty iff the model is well-formed.
std::vector<std::string> validate(const Cmdp& m);

/// Environment request: a built-in name plus numeric parameters. For "chain",
/// per-step rewards/costs may be given explicitly (broadcast if length 1).
struct EnvSpec {
    std::string name;  // one of: m1, chain, random
    std::map<std::string, double> params;
    std::vector<double> step_rewards;
    std::vector<double> step_costs;
    std::uint64_t seed = 0;
};

/// Builds a built-in environment. Pure: identical specs yield identical models.
/// Throws std::invalid_argument on unknown names or invalid parameters.
Cmdp make_env(const EnvSpec& spec);

/// (expected discounted reward, expected discounted cost) from the initial
/// state, computed exactly: linear solve of the induced-chain systems for
/// discount < 1, finite-horizon backward induction for the episodic
/// discount-1 case. Throws std::domain_error for a non-episodic model with a
/// discount factor of 1.
std::pair<double, double> exact_eval(const Cmdp& m, const MemorylessPolicy& policy);

/// Samples one episode, stopping at a terminal state or after `horizon`
/// steps. Requires horizon <= horizon_cap.
Trajectory rollout(const Cmdp& m, BasePolicy& policy, int horizon, Rng& rng);

/// (sum_t gamma_r^t r_t, sum_t gamma_c^t c_t) along the trajectory.
std::pair<double, double> discounted_sums(const Trajectory& traj, double gamma_r, double gamma_c);

/// Monte Carlo truncation horizon: for discount < 1 the tail beyond it
/// contributes less than 1e-6 * c_max / (1 - gamma); episodic models use
/// horizon_cap. Always capped at horizon_cap.
int default_mc_horizon(const Cmdp& m);

}  // namespace riskshield
