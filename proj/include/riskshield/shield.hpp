#pragma once

#include <boost/container/small_vector.hpp>

#include "riskshield/augmented.hpp"
#include "riskshield/critic.hpp"

namespace riskshield {

/// One (action, allocated risk) pair with its probability mass.
struct RiskAtom {
    int action;
    double risk;
    double prob;

    bool operator==(const RiskAtom&) const = default;
};

/// Atom storage; inline up to four atoms so per-step shielding stays off the
/// heap in rollout loops.
using AtomVec = boost::container::small_vector<RiskAtom, 4>;

/// Finite mixture of risk-valued actions proposed by an actor at one
/// augmented state. Probabilities sum to 1.
struct ProposedDistribution {
    AtomVec atoms;
};

enum class ShieldCase { pass_through, fallback, mixed };

/// Shield output: the proposal with risks clamped up to the critic, possibly
/// blended with a backup atom on the safest estimated action. `lambda` is the
/// backup mixing weight actually used and `case_taken` records which branch
/// fired.
struct ShieldedDistribution {
    AtomVec atoms;
    double lambda = 0.0;
    ShieldCase case_taken = ShieldCase::pass_through;
};

/// Regularizer in the mixing-weight denominator.
inline constexpr double kShieldEta = 1e-8;

/// Output of shield() satisfies the budget conditions within this slack.
inline constexpr double kShieldTol = 2.0 * kShieldEta;

/**
 * Distribution-level shield. With floor(s) = gamma_c * min_a Q(s,a):
 *
 *  1. clamp each allocated risk to y~_a = max(y_a, Q(s,a)) and let
 *     t = gamma_c * E[y~]; if t <= x the clamped proposal passes through;
 *  2. if x < floor(s), fall back to the single atom (pi_b(s), x / gamma_c);
 *  3. otherwise mix: (1 - lambda) * clamped proposal + lambda * backup atom
 *     (pi_b(s), Q(s, pi_b(s))), with
 *     lambda = clip((t - x) / (t - gamma_c * Q(s, pi_b(s)) + eta), 0, 1),
 *     which restores the budget equality up to eta.
 *
 * A proposal atom that coincides with the backup atom is merged with it.
 * Throws on an empty proposal.
 */
ShieldedDistribution shield(const ProposedDistribution& proposal, const AugState& st,
                            const QTable& q);

/// Budget-compliance predicate. True iff either x >= floor(s), every atom
/// allocates at least Q(s,a) - tol, and x + tol >= gamma_c * E[risk]; or
/// x < floor(s) and the distribution is a single atom on the backup action
/// with gamma_c * z <= x + tol.
bool is_shielded(const AtomVec& atoms, const AugState& st, const QTable& q,
                 double tol);

/// Atomwise (1 - xi) / xi mixture; identical (action, risk) atoms merge.
/// Throws when xi lies outside [0, 1].
AtomVec mix_with_noise(const AtomVec& dist, const AtomVec& noise, double xi);

/// Index of one atom drawn by probability mass.
int sample_atom(const AtomVec& atoms, Rng& rng);

}  // namespace riskshield
