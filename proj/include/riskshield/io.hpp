#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "riskshield/policyopt.hpp"
#include "riskshield/verify.hpp"

namespace riskshield {

/// Shortest round-trip decimal form; stable for byte-identical reruns.
std::string fmt_double(double v);

/// Base trajectories as JSON lines, one step per line: {"s","a","r","c"}.
void write_trajectory_jsonl(const Trajectory& traj, std::ostream& out);

/// Augmented trajectories as JSON lines:
/// {"s","x","a","y","r","c","s2","x2"}.
void write_aug_trajectory_jsonl(const AugTrajectory& traj, std::ostream& out);

/// One shield decision as a JSON line: state, risk, case, lambda and atoms.
void write_shield_decision_jsonl(const AugState& st, const ShieldedDistribution& dist,
                                 std::ostream& out);

/// CheckReports as JSON lines with fields check, bound, mean, ci95, pass,
/// params and note.
void write_checks_jsonl(const std::vector<CheckReport>& reports, std::ostream& out);

/// Training log CSV: episode, steps, disc_reward, disc_cost, clamp_events,
/// mean_lambda, switch_step, schema.
void write_train_log_csv(const std::vector<EpisodeLogRow>& log, std::ostream& out);

/// Flat policy table CSV: state, bin, atom, action, risk, prob, schema.
void write_policy_csv(const TabularAugPolicy& policy, std::ostream& out);
TabularAugPolicy load_policy_csv(std::istream& in, const RiskGrid& grid);

}  // namespace riskshield
