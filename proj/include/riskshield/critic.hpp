#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "riskshield/cmdp.hpp"

namespace riskshield {

enum class Provenance { exact, learned, perturbed };

/**
 * State-action cost table approximating the minimal expected discounted cost
 * achievable after committing to (s, a). Values at terminal states are zero.
 * Immutable once built.
 */
struct QTable {
    std::vector<std::vector<double>> values;  // [s][a]
    double gamma_c = 1.0;
    Provenance provenance = Provenance::exact;
    double perturb_delta = 0.0;  // known sup-norm noise level when perturbed

    double at(int s, int a) const { return values[s][a]; }

    /// Safest estimated action: argmin over the row, lowest index on ties.
    int backup_action(int s) const;
    double min_value(int s) const;

    /// Per-state floor: gamma_c * min_a values(s, a).
    double floor(int s) const { return gamma_c * min_value(s); }
};

struct BackupDecision {
    int action;
    double floor;
};

/// (argmin action, gamma_c * min value) at state s.
BackupDecision backup_policy(const QTable& q, int s);

/// Minimal-cost table by value iteration: sup-norm Bellman residual below
/// `tol` on return. Discount-1 models must be episodic (backward induction).
QTable cost_value_iteration(const Cmdp& m, double tol);

/// Sup-norm distance between the table and one Bellman application of it.
double bellman_cost_residual(const Cmdp& m, const QTable& q);

/// Adds i.i.d. uniform noise in [-delta, delta], clipped at zero, to every
/// non-terminal entry. The sup-norm distance to the input never exceeds delta.
QTable perturb(const QTable& q, const Cmdp& m, double delta, Rng& rng);

/// Pessimism blend used in the learning target:
/// beta * min(q1, q2) + (1 - beta) / 2 * (q1 + q2).
double twin_blend(double q1, double q2, double beta);

struct CostLearnConfig {
    long episodes = 20000;
    double alpha0 = 0.5;        // initial step size
    double alpha_decay = 1e-3;  // alpha = alpha0 / (1 + decay * visits(s,a))
    double epsilon = 0.2;       // exploration rate
    double beta = 0.75;         // twin blend weight
};

struct CostLearnResult {
    QTable table;                  // first twin, provenance = learned
    double sup_distance_to_exact;  // against the value-iteration oracle
};

/// Tabular twin-critic cost learning. Both tables regress toward the blended
/// target c + gamma_c * blend(Q1(s', a_b), Q2(s', a_b)) with a_b the argmin of
/// the first table; a coin flip picks which twin absorbs each update so the
/// two stay distinct. Throws on step sizes outside (0, 1].
CostLearnResult q_learning_cost(const Cmdp& m, const CostLearnConfig& cfg, Rng& rng);

/// Flat (s, a, value) CSV with a header row.
void save_qtable_csv(const QTable& q, std::ostream& out);
QTable load_qtable_csv(std::istream& in, double gamma_c, Provenance provenance);

}  // namespace riskshield
