#include "riskshield/policyopt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace riskshield {

int RiskGrid::bin_of(double x) const {
    if (bins <= 1 || hi <= lo) return 0;  // degenerate grid (zero-cost models)
    const double w = (hi - lo) / bins;
    const int b = static_cast<int>(std::floor((x - lo) / w));
    return std::clamp(b, 0, bins - 1);
}

double RiskGrid::center(int bin) const {
    const double w = (hi - lo) / bins;
    return lo + (bin + 0.5) * w;
}

ProposedDistribution TabularAugPolicy::propose(const AugState& st) const {
    if (st.state < 0 || st.state >= static_cast<int>(proposals.size()) ||
        !std::isfinite(st.risk))
        throw std::out_of_range("TabularAugPolicy: state outside the policy's domain");
    return {proposals[st.state][grid.bin_of(st.risk)]};
}

std::vector<std::string> validate_train_config(const TrainConfig& cfg, const AugEnv& env) {
    std::vector<std::string> report;
    if (cfg.episodes < 1) report.push_back("episodes must be >= 1");
    if (!(cfg.alpha0 > 0.0 && cfg.alpha0 <= 1.0)) report.push_back("alpha0 outside (0,1]");
    if (cfg.alpha_decay < 0.0) report.push_back("alpha_decay must be non-negative");
    if (cfg.explore_xi < 0.0 || cfg.explore_xi > 1.0)
        report.push_back("explore_xi outside [0,1]");
    if (cfg.hybrid_delay < 1) report.push_back("hybrid_delay must be >= 1");
    if (cfg.policy_delay < 1) report.push_back("policy_delay must be >= 1");
    if (cfg.risk_bins < 1) report.push_back("risk_bins must be >= 1");
    if (cfg.risk_levels < 1) report.push_back("risk_levels must be >= 1");
    if (std::abs(cfg.x0) > env.risk_bound)
        report.push_back("x0 outside the admissible risk range [-" +
                         std::to_string(env.risk_bound) + ", " +
                         std::to_string(env.risk_bound) + "]");
    return report;
}

std::optional<long> hybrid_schedule(long ep_number, long hybrid_delay,
                                    const std::vector<long>& recent_lengths, Rng& rng) {
    if (hybrid_delay < 1) throw std::invalid_argument("hybrid_schedule: delay must be >= 1");
    if (ep_number % hybrid_delay != 0) return std::nullopt;
    double mean = 0.0;
    if (!recent_lengths.empty()) {
        double sum = 0.0;
        for (long v : recent_lengths) sum += static_cast<double>(v);
        mean = sum / static_cast<double>(recent_lengths.size());
    }
    return uniform_int(rng, 0, static_cast<long>(std::floor(mean)));
}

namespace {

struct Candidate {
    int action;
    double risk;
};

// Candidate ladders, reward table and shielded value lookups shared by the
// trainer and the policy extraction.
class RewardLearner {
  public:
    RewardLearner(const AugEnv& env, const TrainConfig& cfg) : env_(env), cfg_(cfg) {
        const Cmdp& m = env.cmdp;
        grid_ = {-env.risk_bound, env.risk_bound, cfg.risk_bins};
        const int n = m.num_states();
        cands_.resize(n);
        backup_cand_.assign(n, 0);
        for (int s = 0; s < n; ++s) {
            for (int a = 0; a < m.num_actions(s); ++a) {
                const double lo = std::min(env.q.at(s, a), env.risk_bound);
                const double hi = env.risk_bound;
                const int levels = lo >= hi ? 1 : cfg.risk_levels;
                for (int j = 0; j < levels; ++j) {
                    const double y =
                        levels == 1 ? lo : lo + (hi - lo) * j / (levels - 1);
                    cands_[s].push_back({a, y});
                }
            }
            const int ab = env.q.backup_action(s);
            for (std::size_t k = 0; k < cands_[s].size(); ++k) {
                if (cands_[s][k].action == ab) {
                    backup_cand_[s] = static_cast<int>(k);
                    break;
                }
            }
        }
        values_.resize(n);
        visits_.resize(n);
        snapshot_.resize(n);
        for (int s = 0; s < n; ++s) {
            values_[s].assign(cfg.risk_bins, std::vector<double>(cands_[s].size(), 0.0));
            visits_[s].assign(cfg.risk_bins, std::vector<double>(cands_[s].size(), 0.0));
            snapshot_[s].assign(cfg.risk_bins, 0);
        }
    }

    const RiskGrid& grid() const { return grid_; }
    const std::vector<Candidate>& candidates(int s) const { return cands_[s]; }

    Candidate snapshot_candidate(int s, double x) const {
        return cands_[s][snapshot_[s][grid_.bin_of(x)]];
    }

    Candidate random_candidate(int s, Rng& rng) const {
        return cands_[s][uniform_int(rng, 0, static_cast<long>(cands_[s].size()) - 1)];
    }

    int candidate_index(int s, int action, double risk) const {
        const auto& list = cands_[s];
        for (std::size_t k = 0; k < list.size(); ++k)
            if (list[k].action == action && list[k].risk == risk) return static_cast<int>(k);
        return -1;
    }

    // Value of proposing candidate k at (s, x): the lambda-weighted mix of
    // the candidate's own entry and the backup entry, mirroring the shield.
    double proposal_value(int s, double x, int k) const {
        const int b = grid_.bin_of(x);
        const double gc = env_.q.gamma_c;
        const Candidate& cand = cands_[s][k];
        const double clamped = std::max(cand.risk, env_.q.at(s, cand.action));
        const double t = gc * clamped;
        if (t <= x) return values_[s][b][k];
        const BackupDecision backup = backup_policy(env_.q, s);
        const double backup_value = values_[s][b][backup_cand_[s]];
        if (x < backup.floor) return backup_value;
        const double lambda = std::clamp(
            (t - x) / (t - gc * env_.q.at(s, backup.action) + kShieldEta), 0.0, 1.0);
        return (1.0 - lambda) * values_[s][b][k] + lambda * backup_value;
    }

    double state_value(const AugState& st) const {
        if (env_.cmdp.terminal[st.state]) return 0.0;
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < cands_[st.state].size(); ++k)
            best = std::max(best, proposal_value(st.state, st.risk, static_cast<int>(k)));
        return best;
    }

    void update(int s, double x, int cand, double target) {
        const int b = grid_.bin_of(x);
        const double alpha = cfg_.alpha0 / (1.0 + cfg_.alpha_decay * visits_[s][b][cand]);
        visits_[s][b][cand] += 1.0;
        values_[s][b][cand] += alpha * (target - values_[s][b][cand]);
    }

    void refresh_snapshot() {
        for (int s = 0; s < env_.cmdp.num_states(); ++s) {
            if (env_.cmdp.terminal[s]) continue;
            for (int b = 0; b < cfg_.risk_bins; ++b) {
                const double x = grid_.center(b);
                int best = 0;
                double best_value = proposal_value(s, x, 0);
                for (std::size_t k = 1; k < cands_[s].size(); ++k) {
                    const double v = proposal_value(s, x, static_cast<int>(k));
                    if (v > best_value) {
                        best_value = v;
                        best = static_cast<int>(k);
                    }
                }
                snapshot_[s][b] = best;
            }
        }
    }

    TabularAugPolicy extract() const {
        TabularAugPolicy policy;
        policy.grid = grid_;
        const int n = env_.cmdp.num_states();
        policy.proposals.resize(n);
        for (int s = 0; s < n; ++s) {
            policy.proposals[s].resize(cfg_.risk_bins);
            for (int b = 0; b < cfg_.risk_bins; ++b) {
                const Candidate& c =
                    env_.cmdp.terminal[s] ? Candidate{0, 0.0} : cands_[s][snapshot_[s][b]];
                policy.proposals[s][b] = {RiskAtom{c.action, c.risk, 1.0}};
            }
        }
        return policy;
    }

  private:
    const AugEnv& env_;
    TrainConfig cfg_;
    RiskGrid grid_;
    std::vector<std::vector<Candidate>> cands_;
    std::vector<int> backup_cand_;
    std::vector<std::vector<std::vector<double>>> values_;  // [s][bin][cand]
    std::vector<std::vector<std::vector<double>>> visits_;
    std::vector<std::vector<int>> snapshot_;
};

}  // namespace

TrainResult shielded_q_train(const AugEnv& env, const TrainConfig& cfg, Rng& rng) {
    {
        const auto report = validate_train_config(cfg, env);
        if (!report.empty())
            throw std::invalid_argument("shielded_q_train: " + report.front());
    }
    const Cmdp& m = env.cmdp;
    RewardLearner learner(env, cfg);
    learner.refresh_snapshot();

    TrainResult result;
    result.log.reserve(cfg.episodes);
    std::vector<long> lengths;
    lengths.reserve(cfg.episodes);
    const int horizon = default_mc_horizon(m);

    for (long ep = 0; ep < cfg.episodes; ++ep) {
        if (ep > 0 && ep % cfg.policy_delay == 0) learner.refresh_snapshot();
        const auto switch_step = hybrid_schedule(ep, cfg.hybrid_delay, lengths, rng);

        int s = m.initial_state;
        double x = cfg.x0;
        double disc_r = 0.0, disc_c = 0.0, wr = 1.0, wc = 1.0;
        double lambda_sum = 0.0;
        long decisions = 0, clamps = 0, steps = 0;
        while (steps < horizon && !m.terminal[s]) {
            const AugState st{s, x};
            ProposedDistribution prop;
            const bool backup_phase = switch_step.has_value() && steps > *switch_step;
            if (backup_phase) {
                prop.atoms = {{env.q.backup_action(s), x, 1.0}};
            } else if (uniform01(rng) < cfg.explore_xi) {
                const Candidate c = learner.random_candidate(s, rng);
                prop.atoms = {{c.action, c.risk, 1.0}};
            } else {
                const Candidate c = learner.snapshot_candidate(s, x);
                prop.atoms = {{c.action, c.risk, 1.0}};
            }
            const ShieldedDistribution sd = shield(prop, st, env.q);
            if (!is_shielded(sd.atoms, st, env.q, kShieldTol)) result.shield_violations++;
            lambda_sum += sd.lambda;
            decisions++;
            const RiskAtom& atom = sd.atoms[sample_atom(sd.atoms, rng)];
            const AugStepResult step = aug_step(env, st, {atom.action, atom.risk}, rng);
            clamps += step.clamped ? 1 : 0;

            const int cand = learner.candidate_index(s, atom.action, atom.risk);
            if (cand >= 0) {
                const double target = step.reward + m.gamma_r * learner.state_value(step.next);
                learner.update(s, x, cand, target);
            }
            disc_r += wr * step.reward;
            disc_c += wc * step.cost;
            wr *= m.gamma_r;
            wc *= m.gamma_c;
            s = step.next.state;
            x = step.next.risk;
            steps++;
        }
        lengths.push_back(steps);
        result.clamp_events += clamps;
        result.log.push_back({ep, steps, disc_r, disc_c, clamps,
                              decisions > 0 ? lambda_sum / decisions : 0.0,
                              switch_step.value_or(-1)});
    }
    learner.refresh_snapshot();
    result.policy = learner.extract();
    return result;
}

AugTrajectory rollout_aug(const AugEnv& env, const AugProposalPolicy& policy, double x0,
                          int horizon, Rng& rng, bool apply_shield) {
    const Cmdp& m = env.cmdp;
    AugTrajectory traj;
    int s = m.initial_state;
    double x = x0;
    for (int t = 0; t < horizon; ++t) {
        if (m.terminal[s]) {
            traj.terminated = true;
            return traj;
        }
        const AugState st{s, x};
        const ProposedDistribution prop = policy.propose(st);
        AtomVec atoms;
        if (apply_shield) {
            ShieldedDistribution sd = shield(prop, st, env.q);
            traj.lambda_sum += sd.lambda;
            atoms = std::move(sd.atoms);
        } else {
            atoms = prop.atoms;
        }
        if (!is_shielded(atoms, st, env.q, kShieldTol)) traj.shield_violations++;
        const RiskAtom& atom = atoms[sample_atom(atoms, rng)];
        const AugStepResult step = aug_step(env, st, {atom.action, atom.risk}, rng);
        traj.clamp_events += step.clamped ? 1 : 0;
        traj.steps.push_back({s, x, atom.action, atom.risk, step.reward, step.cost,
                              step.next.state, step.next.risk});
        s = step.next.state;
        x = step.next.risk;
    }
    traj.terminated = m.terminal[s];
    return traj;
}

AugTrajectory rollout_aug_noisy(const AugEnv& env, const AugProposalPolicy& policy,
                                const AugProposalPolicy& noise, double xi, double x0,
                                int horizon, Rng& rng) {
    const Cmdp& m = env.cmdp;
    AugTrajectory traj;
    int s = m.initial_state;
    double x = x0;
    for (int t = 0; t < horizon; ++t) {
        if (m.terminal[s]) {
            traj.terminated = true;
            return traj;
        }
        const AugState st{s, x};
        ShieldedDistribution sd = shield(policy.propose(st), st, env.q);
        traj.lambda_sum += sd.lambda;
        const AtomVec atoms = mix_with_noise(sd.atoms, noise.propose(st).atoms, xi);
        const RiskAtom& atom = atoms[sample_atom(atoms, rng)];
        const AugStepResult step = aug_step(env, st, {atom.action, atom.risk}, rng);
        traj.clamp_events += step.clamped ? 1 : 0;
        traj.steps.push_back({s, x, atom.action, atom.risk, step.reward, step.cost,
                              step.next.state, step.next.risk});
        s = step.next.state;
        x = step.next.risk;
    }
    traj.terminated = m.terminal[s];
    return traj;
}

AugEpisodeStats run_aug_episode(const AugEnv& env, const AugProposalPolicy& policy, double x0,
                                int horizon, Rng& rng, bool apply_shield) {
    const Cmdp& m = env.cmdp;
    AugEpisodeStats stats;
    int s = m.initial_state;
    double x = x0;
    double wr = 1.0, wc = 1.0;
    for (int t = 0; t < horizon && !m.terminal[s]; ++t) {
        const AugState st{s, x};
        ProposedDistribution prop = policy.propose(st);
        const RiskAtom* atom;
        ShieldedDistribution sd;
        if (apply_shield) {
            sd = shield(prop, st, env.q);
            stats.lambda_sum += sd.lambda;
            if (!is_shielded(sd.atoms, st, env.q, kShieldTol)) stats.shield_violations++;
            atom = &sd.atoms[sample_atom(sd.atoms, rng)];
        } else {
            if (!is_shielded(prop.atoms, st, env.q, kShieldTol)) stats.shield_violations++;
            atom = &prop.atoms[sample_atom(prop.atoms, rng)];
        }
        const AugStepResult step = aug_step(env, st, {atom->action, atom->risk}, rng);
        stats.clamp_events += step.clamped ? 1 : 0;
        stats.disc_reward += wr * step.reward;
        stats.disc_cost += wc * step.cost;
        wr *= m.gamma_r;
        wc *= m.gamma_c;
        s = step.next.state;
        x = step.next.risk;
        stats.steps++;
    }
    return stats;
}

AugEpisodeStats run_aug_episode_noisy(const AugEnv& env, const AugProposalPolicy& policy,
                                      const AugProposalPolicy& noise, double xi, double x0,
                                      int horizon, Rng& rng) {
    const Cmdp& m = env.cmdp;
    AugEpisodeStats stats;
    int s = m.initial_state;
    double x = x0;
    double wr = 1.0, wc = 1.0;
    for (int t = 0; t < horizon && !m.terminal[s]; ++t) {
        const AugState st{s, x};
        const ShieldedDistribution sd = shield(policy.propose(st), st, env.q);
        stats.lambda_sum += sd.lambda;
        const AtomVec atoms = mix_with_noise(sd.atoms, noise.propose(st).atoms, xi);
        const RiskAtom& atom = atoms[sample_atom(atoms, rng)];
        const AugStepResult step = aug_step(env, st, {atom.action, atom.risk}, rng);
        stats.clamp_events += step.clamped ? 1 : 0;
        stats.disc_reward += wr * step.reward;
        stats.disc_cost += wc * step.cost;
        wr *= m.gamma_r;
        wc *= m.gamma_c;
        s = step.next.state;
        x = step.next.risk;
        stats.steps++;
    }
    return stats;
}

ProjectedPolicy::ProjectedPolicy(const AugProposalPolicy& policy, const AugEnv& env, double x0)
    : policy_(&policy), env_(&env), x0_(x0), risk_(x0) {}

void ProjectedPolicy::begin_episode() {
    risk_ = x0_;
    has_prev_ = false;
}

int ProjectedPolicy::act(int state, Rng& rng) {
    if (has_prev_) {
        double next;
        if (env_->rule == RiskRule::q_relative)
            next = prev_alloc_ - env_->q.at(prev_state_, prev_action_) + env_->q.floor(state);
        else
            next = prev_alloc_ - env_->cmdp.cost[prev_state_][prev_action_];
        risk_ = std::clamp(next, -env_->risk_bound, env_->risk_bound);
    }
    const AugState st{state, risk_};
    const ShieldedDistribution sd = shield(policy_->propose(st), st, env_->q);
    const RiskAtom& atom = sd.atoms[sample_atom(sd.atoms, rng)];
    prev_state_ = state;
    prev_action_ = atom.action;
    prev_alloc_ = atom.risk;
    has_prev_ = true;
    return atom.action;
}

ProjectedPolicy project(const AugProposalPolicy& policy, const AugEnv& env, double x0) {
    return ProjectedPolicy(policy, env, x0);
}

OracleResult brute_force_oracle(const Cmdp& m, double d, long enumeration_cap) {
    const int n = m.num_states();
    long count = 1;
    for (int s = 0; s < n; ++s) {
        const long na = m.num_actions(s);
        if (count > enumeration_cap / na)
            throw std::runtime_error("brute_force_oracle: enumeration budget exceeded");
        count *= na;
    }

    std::vector<double> rewards, costs;
    rewards.reserve(count);
    costs.reserve(count);
    std::vector<int> assignment(n, 0);
    std::vector<std::vector<int>> assignments;
    assignments.reserve(count);
    while (true) {
        const auto [r, c] = exact_eval(m, MemorylessPolicy::deterministic(m, assignment));
        rewards.push_back(r);
        costs.push_back(c);
        assignments.push_back(assignment);
        int s = 0;
        while (s < n) {
            if (++assignment[s] < m.num_actions(s)) break;
            assignment[s] = 0;
            s++;
        }
        if (s == n) break;
    }

    OracleResult result;
    result.policies_enumerated = count;
    result.det_reward_min = *std::min_element(rewards.begin(), rewards.end());
    result.det_reward_max = *std::max_element(rewards.begin(), rewards.end());

    // feasibility
    double min_cost = costs[0];
    for (double c : costs) min_cost = std::min(min_cost, c);
    if (min_cost > d + 1e-12)
        throw std::domain_error("brute_force_oracle: no policy satisfies the budget");

    // best single feasible policy
    long best_single = -1;
    for (long i = 0; i < count; ++i)
        if (costs[i] <= d + 1e-12 && (best_single < 0 || rewards[i] > rewards[best_single]))
            best_single = i;

    // Upper concave hull of (cost, reward); the constrained mixture optimum
    // lies on the hull segment spanning d.
    std::vector<long> order(count);
    for (long i = 0; i < count; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](long a, long b) {
        if (costs[a] != costs[b]) return costs[a] < costs[b];
        return rewards[a] > rewards[b];
    });
    std::vector<long> hull;
    for (long idx : order) {
        if (!hull.empty() && costs[idx] == costs[hull.back()]) continue;  // keep max reward
        while (hull.size() >= 2) {
            const long p1 = hull[hull.size() - 2], p2 = hull[hull.size() - 1];
            const double cross = (costs[p2] - costs[p1]) * (rewards[idx] - rewards[p1]) -
                                 (rewards[p2] - rewards[p1]) * (costs[idx] - costs[p1]);
            if (cross > 0.0)
                hull.pop_back();  // p2 below the chord p1-idx
            else
                break;
        }
        if (!hull.empty() && rewards[idx] <= rewards[hull.back()]) continue;  // hull descends
        hull.push_back(idx);
    }

    result.best_reward = rewards[best_single];
    result.best_cost = costs[best_single];
    result.pi1 = assignments[best_single];
    result.pi2 = assignments[best_single];
    result.alpha = 1.0;
    for (std::size_t k = 0; k + 1 < hull.size(); ++k) {
        const long u = hull[k], v = hull[k + 1];
        if (!(costs[u] <= d && d < costs[v])) continue;
        const double alpha = (costs[v] - d) / (costs[v] - costs[u]);
        const double mix_reward = alpha * rewards[u] + (1.0 - alpha) * rewards[v];
        if (mix_reward > result.best_reward) {
            result.best_reward = mix_reward;
            result.best_cost = alpha * costs[u] + (1.0 - alpha) * costs[v];
            result.pi1 = assignments[u];
            result.pi2 = assignments[v];
            result.alpha = alpha;
        }
    }
    return result;
}

}  // namespace riskshield
