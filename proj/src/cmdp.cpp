#include "riskshield/cmdp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace riskshield {

namespace {

constexpr double kRowSumTol = 1e-12;

// Longest path to absorption over the support graph, considering every
// action. Returns -1 when some reachable non-terminal state lies on a cycle
// (absorption not guaranteed), otherwise the maximal number of steps any
// trajectory from `start` can take before entering a terminal state.
long absorption_depth(const Cmdp& m, int start) {
    const int n = m.num_states();
    std::vector<int> color(n, 0);  // 0 white, 1 on stack, 2 done
    std::vector<long> depth(n, 0);
    bool cyclic = false;

    // iterative DFS with post-order longest-path accumulation
    struct Frame {
        int s;
        int a;
        int t;
    };
    std::vector<Frame> stack;
    stack.push_back({start, 0, 0});
    color[start] = 1;
    while (!stack.empty()) {
        Frame& f = stack.back();
        const int s = f.s;
        if (m.terminal[s]) {
            depth[s] = 0;
            color[s] = 2;
            stack.pop_back();
            continue;
        }
        bool descended = false;
        while (f.a < m.num_actions(s)) {
            const auto& row = m.transition[s][f.a];
            while (f.t < static_cast<int>(row.size())) {
                const int t = f.t++;
                if (row[t] <= 0.0) continue;
                if (color[t] == 1) {
                    cyclic = true;
                    continue;
                }
                if (color[t] == 0) {
                    color[t] = 1;
                    stack.push_back({t, 0, 0});
                    descended = true;
                    break;
                }
            }
            if (descended) break;
            f.a++;
            f.t = 0;
        }
        if (descended) continue;
        // all successors resolved
        long best = 0;
        for (int a = 0; a < m.num_actions(s); ++a) {
            const auto& row = m.transition[s][a];
            for (int t = 0; t < static_cast<int>(row.size()); ++t) {
                if (row[t] <= 0.0) continue;
                best = std::max(best, 1 + (color[t] == 2 ? depth[t] : 0));
            }
        }
        depth[s] = best;
        color[s] = 2;
        stack.pop_back();
    }
    if (cyclic) return -1;
    return depth[start];
}

bool shapes_consistent(const Cmdp& m, std::string* why) {
    const std::size_t n = m.transition.size();
    if (m.reward.size() != n || m.cost.size() != n || m.terminal.size() != n) {
        if (why) *why = "state-indexed fields have inconsistent sizes";
        return false;
    }
    for (std::size_t s = 0; s < n; ++s) {
        const std::size_t na = m.transition[s].size();
        if (na == 0) {
            if (why) *why = "state " + std::to_string(s) + " has no actions";
            return false;
        }
        if (m.reward[s].size() != na || m.cost[s].size() != na) {
            if (why) *why = "reward/cost row size mismatch at state " + std::to_string(s);
            return false;
        }
        for (std::size_t a = 0; a < na; ++a) {
            if (m.transition[s][a].size() != n) {
                if (why)
                    *why = "transition row (" + std::to_string(s) + "," + std::to_string(a) +
                           ") has wrong length";
                return false;
            }
        }
    }
    return true;
}

// Single-component exact policy evaluation for one (values, gamma) pair.
double eval_component(const Cmdp& m, const MemorylessPolicy& policy,
                      const std::vector<std::vector<double>>& payoff, double gamma) {
    const int n = m.num_states();
    if (gamma < 1.0) {
        Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n);
        Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
        for (int s = 0; s < n; ++s) {
            for (int a = 0; a < m.num_actions(s); ++a) {
                const double pa = policy.probs[s][a];
                if (pa == 0.0) continue;
                b(s) += pa * payoff[s][a];
                for (int t = 0; t < n; ++t) A(s, t) -= gamma * pa * m.transition[s][a][t];
            }
        }
        Eigen::VectorXd v = A.partialPivLu().solve(b);
        return v(m.initial_state);
    }
    // gamma == 1: finite-horizon backward induction, exact for episodic models
    std::vector<double> v(n, 0.0), next(n, 0.0);
    for (int step = 0; step < m.horizon_cap; ++step) {
        for (int s = 0; s < n; ++s) {
            if (m.terminal[s]) {
                next[s] = 0.0;
                continue;
            }
            double acc = 0.0;
            for (int a = 0; a < m.num_actions(s); ++a) {
                const double pa = policy.probs[s][a];
                if (pa == 0.0) continue;
                double future = 0.0;
                for (int t = 0; t < n; ++t) future += m.transition[s][a][t] * v[t];
                acc += pa * (payoff[s][a] + future);
            }
            next[s] = acc;
        }
        std::swap(v, next);
    }
    return v[m.initial_state];
}

}  // namespace

double Cmdp::max_cost() const {
    double c = 0.0;
    for (const auto& row : cost)
        for (double v : row) c = std::max(c, v);
    return c;
}

bool Cmdp::is_deterministic() const {
    for (const auto& state_rows : transition)
        for (const auto& row : state_rows)
            for (double p : row)
                if (p != 0.0 && p != 1.0) return false;
    return true;
}

bool Cmdp::is_episodic() const {
    const long d = absorption_depth(*this, initial_state);
    return d >= 0 && d <= horizon_cap;
}

int Cmdp::sample_next(int s, int a, Rng& rng) const {
    return sample_index(rng, transition[s][a]);
}

MemorylessPolicy MemorylessPolicy::deterministic(const Cmdp& m, const std::vector<int>& actions) {
    MemorylessPolicy p;
    p.probs.resize(m.num_states());
    for (int s = 0; s < m.num_states(); ++s) {
        p.probs[s].assign(m.num_actions(s), 0.0);
        p.probs[s][actions[s]] = 1.0;
    }
    return p;
}

MemorylessPolicy MemorylessPolicy::uniform(const Cmdp& m) {
    MemorylessPolicy p;
    p.probs.resize(m.num_states());
    for (int s = 0; s < m.num_states(); ++s)
        p.probs[s].assign(m.num_actions(s), 1.0 / m.num_actions(s));
    return p;
}

std::vector<std::string> validate(const Cmdp& m) {
    std::vector<std::string> report;
    std::string why;
    if (!shapes_consistent(m, &why)) {
        report.push_back(why);
        return report;  // further checks would index out of bounds
    }
    const int n = m.num_states();
    if (n == 0) {
        report.push_back("model has no states");
        return report;
    }
    if (m.initial_state < 0 || m.initial_state >= n)
        report.push_back("initial state out of range");
    if (!(m.gamma_r > 0.0 && m.gamma_r <= 1.0)) report.push_back("gamma_r outside (0,1]");
    if (!(m.gamma_c > 0.0 && m.gamma_c <= 1.0)) report.push_back("gamma_c outside (0,1]");
    if (m.budget < 0.0) report.push_back("budget d is negative");
    if (m.horizon_cap < 1) report.push_back("horizon_cap must be positive");

    for (int s = 0; s < n; ++s) {
        for (int a = 0; a < m.num_actions(s); ++a) {
            double sum = 0.0;
            for (double p : m.transition[s][a]) {
                if (p < 0.0) {
                    report.push_back("negative transition probability at (" + std::to_string(s) +
                                     "," + std::to_string(a) + ")");
                    break;
                }
                sum += p;
            }
            if (std::abs(sum - 1.0) > kRowSumTol) {
                std::ostringstream os;
                os << "transition row (" << s << "," << a << ") sums to " << sum;
                report.push_back(os.str());
            }
            if (m.cost[s][a] < 0.0)
                report.push_back("negative cost at (" + std::to_string(s) + "," +
                                 std::to_string(a) + ")");
        }
        if (m.terminal[s]) {
            if (m.num_actions(s) != 1) {
                report.push_back("terminal state " + std::to_string(s) +
                                 " must have a single action");
            } else if (m.transition[s][0][s] != 1.0) {
                report.push_back("terminal state " + std::to_string(s) + " must self-loop");
            }
            if (m.num_actions(s) >= 1 && (m.reward[s][0] != 0.0 || m.cost[s][0] != 0.0))
                report.push_back("terminal state " + std::to_string(s) +
                                 " must have zero reward and cost");
        }
    }

    if (m.gamma_r == 1.0 || m.gamma_c == 1.0) {
        if (m.initial_state >= 0 && m.initial_state < n) {
            const long d = absorption_depth(m, m.initial_state);
            if (d < 0)
                report.push_back(
                    "discount factor 1 requires an episodic model, but a cycle through "
                    "non-terminal states is reachable");
            else if (d > m.horizon_cap)
                report.push_back("discount factor 1 requires termination within horizon_cap, "
                                 "but the longest trajectory has " +
                                 std::to_string(d) + " steps");
        }
    }
    return report;
}

namespace {

Cmdp make_m1() {
    // Four-state branching example: s0 --a0(r=1,c=1)--> s1 --a2--> s4,
    //                               s0 --a1(r=0,c=0)--> s2 --a3--> s4.
    Cmdp m;
    const int n = 4;  // s0, s1, s2, s4 (terminal)
    m.state_names = {"s0", "s1", "s2", "s4"};
    m.transition.assign(n, {});
    m.reward.assign(n, {});
    m.cost.assign(n, {});
    m.terminal.assign(n, false);
    auto dirac = [n](int t) {
        std::vector<double> row(n, 0.0);
        row[t] = 1.0;
        return row;
    };
    m.transition[0] = {dirac(1), dirac(2)};
    m.reward[0] = {1.0, 0.0};
    m.cost[0] = {1.0, 0.0};
    m.transition[1] = {dirac(3)};
    m.reward[1] = {0.0};
    m.cost[1] = {0.0};
    m.transition[2] = {dirac(3)};
    m.reward[2] = {0.0};
    m.cost[2] = {0.0};
    m.transition[3] = {dirac(3)};
    m.reward[3] = {0.0};
    m.cost[3] = {0.0};
    m.terminal[3] = true;
    m.gamma_r = 1.0;
    m.gamma_c = 1.0;
    m.budget = 0.5;
    m.initial_state = 0;
    m.horizon_cap = 4;
    return m;
}

double param_or(const EnvSpec& spec, const std::string& key, double fallback) {
    auto it = spec.params.find(key);
    return it == spec.params.end() ? fallback : it->second;
}

Cmdp make_chain(const EnvSpec& spec) {
    const long n = std::lround(param_or(spec, "n", 4));
    if (n < 1) throw std::invalid_argument("chain: n must be >= 1");
    auto broadcast = [n](const std::vector<double>& v, const char* what) {
        if (v.empty()) return std::vector<double>(n, 0.0);
        if (v.size() == 1) return std::vector<double>(n, v[0]);
        if (static_cast<long>(v.size()) != n)
            throw std::invalid_argument(std::string("chain: ") + what +
                                        " must have length 1 or n");
        return v;
    };
    const auto rewards = broadcast(spec.step_rewards, "step_rewards");
    const auto costs = broadcast(spec.step_costs, "step_costs");
    for (double c : costs)
        if (c < 0.0) throw std::invalid_argument("chain: costs must be non-negative");

    Cmdp m;
    const int ns = static_cast<int>(n) + 1;
    m.transition.assign(ns, {});
    m.reward.assign(ns, {});
    m.cost.assign(ns, {});
    m.terminal.assign(ns, false);
    for (int s = 0; s < ns; ++s) {
        std::vector<double> row(ns, 0.0);
        if (s < n) {
            row[s + 1] = 1.0;
            m.transition[s] = {row};
            m.reward[s] = {rewards[s]};
            m.cost[s] = {costs[s]};
        } else {
            row[s] = 1.0;
            m.transition[s] = {row};
            m.reward[s] = {0.0};
            m.cost[s] = {0.0};
            m.terminal[s] = true;
        }
    }
    m.gamma_r = param_or(spec, "gamma_r", 1.0);
    m.gamma_c = param_or(spec, "gamma_c", 1.0);
    m.budget = param_or(spec, "budget", 0.0);
    m.initial_state = 0;
    m.horizon_cap = static_cast<int>(n) + 1;
    return m;
}

Cmdp make_random(const EnvSpec& spec) {
    const long ns = std::lround(param_or(spec, "states", 6));
    const long na = std::lround(param_or(spec, "actions", 3));
    const double sparsity = param_or(spec, "sparsity", 0.5);
    if (ns < 1) throw std::invalid_argument("random: states must be >= 1");
    if (na < 1) throw std::invalid_argument("random: actions must be >= 1");
    if (sparsity < 0.0 || sparsity >= 1.0)
        throw std::invalid_argument("random: sparsity must lie in [0,1)");

    Rng rng = make_rng(spec.seed, 0xE0F);
    Cmdp m;
    m.transition.assign(ns, {});
    m.reward.assign(ns, {});
    m.cost.assign(ns, {});
    m.terminal.assign(ns, false);
    const int support = std::clamp<int>(
        static_cast<int>(std::lround((1.0 - sparsity) * static_cast<double>(ns))), 1,
        static_cast<int>(ns));
    std::vector<int> targets(ns);
    for (int s = 0; s < ns; ++s) {
        for (int a = 0; a < na; ++a) {
            std::iota(targets.begin(), targets.end(), 0);
            // partial Fisher-Yates for a distinct support set
            for (int k = 0; k < support; ++k) {
                const long j = uniform_int(rng, k, static_cast<long>(ns) - 1);
                std::swap(targets[k], targets[j]);
            }
            std::vector<double> row(ns, 0.0);
            double total = 0.0;
            for (int k = 0; k < support; ++k) {
                const double w = 0.1 + uniform01(rng);
                row[targets[k]] = w;
                total += w;
            }
            for (double& p : row) p /= total;
            // repair the row sum exactly on the largest entry
            double sum = 0.0;
            for (double p : row) sum += p;
            auto it = std::max_element(row.begin(), row.end());
            *it += 1.0 - sum;
            m.transition[s].push_back(std::move(row));
            m.reward[s].push_back(uniform01(rng));
            const double u = uniform01(rng);
            m.cost[s].push_back(u < 0.3 ? 0.0 : uniform01(rng));
        }
    }
    m.gamma_r = param_or(spec, "gamma_r", 0.9);
    m.gamma_c = param_or(spec, "gamma_c", 0.9);
    m.budget = param_or(spec, "budget", 1.0);
    m.initial_state = 0;
    m.horizon_cap = static_cast<int>(std::lround(param_or(spec, "horizon_cap", 1000)));
    return m;
}

}  // namespace

Cmdp make_env(const EnvSpec& spec) {
    if (spec.name == "m1") return make_m1();
    if (spec.name == "chain") return make_chain(spec);
    if (spec.name == "random") return make_random(spec);
    throw std::invalid_argument("unknown environment: " + spec.name);
}

std::pair<double, double> exact_eval(const Cmdp& m, const MemorylessPolicy& policy) {
    if ((m.gamma_r == 1.0 || m.gamma_c == 1.0) && !m.is_episodic())
        throw std::domain_error("exact_eval: discount 1 on a non-episodic model diverges");
    const double r = eval_component(m, policy, m.reward, m.gamma_r);
    const double c = eval_component(m, policy, m.cost, m.gamma_c);
    return {r, c};
}

Trajectory rollout(const Cmdp& m, BasePolicy& policy, int horizon, Rng& rng) {
    if (horizon > m.horizon_cap)
        throw std::invalid_argument("rollout: horizon exceeds horizon_cap");
    Trajectory traj;
    policy.begin_episode();
    int s = m.initial_state;
    for (int t = 0; t < horizon; ++t) {
        if (m.terminal[s]) {
            traj.terminated = true;
            return traj;
        }
        const int a = policy.act(s, rng);
        if (a < 0 || a >= m.num_actions(s))
            throw std::out_of_range("rollout: policy chose an action outside A(s)");
        traj.steps.push_back({s, a, m.reward[s][a], m.cost[s][a]});
        s = m.sample_next(s, a, rng);
    }
    traj.terminated = m.terminal[s];
    return traj;
}

std::pair<double, double> discounted_sums(const Trajectory& traj, double gamma_r,
                                          double gamma_c) {
    double r = 0.0, c = 0.0, wr = 1.0, wc = 1.0;
    for (const auto& step : traj.steps) {
        r += wr * step.reward;
        c += wc * step.cost;
        wr *= gamma_r;
        wc *= gamma_c;
    }
    return {r, c};
}

int default_mc_horizon(const Cmdp& m) {
    const double gamma = std::max(m.gamma_r, m.gamma_c);
    if (gamma >= 1.0) return m.horizon_cap;  // discount-1 models are episodic
    const int h = static_cast<int>(std::ceil(std::log(1e-6 * (1.0 - gamma)) / std::log(gamma)));
    return std::clamp(h, 1, m.horizon_cap);
}

}  // namespace riskshield
