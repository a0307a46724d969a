#include "riskshield/critic.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace riskshield {

int QTable::backup_action(int s) const {
    const auto& row = values[s];
    int best = 0;
    for (int a = 1; a < static_cast<int>(row.size()); ++a)
        if (row[a] < row[best]) best = a;
    return best;
}

double QTable::min_value(int s) const { return values[s][backup_action(s)]; }

BackupDecision backup_policy(const QTable& q, int s) {
    const int a = q.backup_action(s);
    return {a, q.gamma_c * q.values[s][a]};
}

namespace {

// One Bellman application of the minimal-cost operator; returns sup change.
double bellman_sweep(const Cmdp& m, const std::vector<std::vector<double>>& q,
                     std::vector<std::vector<double>>& out) {
    const int n = m.num_states();
    std::vector<double> mins(n);
    for (int s = 0; s < n; ++s) mins[s] = *std::min_element(q[s].begin(), q[s].end());
    double residual = 0.0;
    for (int s = 0; s < n; ++s) {
        for (int a = 0; a < m.num_actions(s); ++a) {
            double future = 0.0;
            const auto& row = m.transition[s][a];
            for (int t = 0; t < n; ++t)
                if (row[t] != 0.0) future += row[t] * mins[t];
            const double v = m.cost[s][a] + m.gamma_c * future;
            residual = std::max(residual, std::abs(v - q[s][a]));
            out[s][a] = v;
        }
    }
    return residual;
}

std::vector<std::vector<double>> zero_like(const Cmdp& m) {
    std::vector<std::vector<double>> q(m.num_states());
    for (int s = 0; s < m.num_states(); ++s) q[s].assign(m.num_actions(s), 0.0);
    return q;
}

}  // namespace

QTable cost_value_iteration(const Cmdp& m, double tol) {
    if (m.gamma_c >= 1.0 && !m.is_episodic())
        throw std::domain_error("cost_value_iteration: discount 1 requires an episodic model");
    QTable q;
    q.gamma_c = m.gamma_c;
    q.provenance = Provenance::exact;
    q.values = zero_like(m);
    auto next = zero_like(m);

    if (m.gamma_c >= 1.0) {
        for (int step = 0; step < m.horizon_cap; ++step) {
            bellman_sweep(m, q.values, next);
            std::swap(q.values, next);
        }
        return q;
    }
    const long max_iters = 10'000'000;
    for (long it = 0; it < max_iters; ++it) {
        const double residual = bellman_sweep(m, q.values, next);
        std::swap(q.values, next);
        if (residual < tol) return q;
    }
    throw std::runtime_error("cost_value_iteration: failed to converge");
}

double bellman_cost_residual(const Cmdp& m, const QTable& q) {
    auto out = zero_like(m);
    return bellman_sweep(m, q.values, out);
}

QTable perturb(const QTable& q, const Cmdp& m, double delta, Rng& rng) {
    if (delta < 0.0) throw std::invalid_argument("perturb: delta must be non-negative");
    QTable out = q;
    out.provenance = Provenance::perturbed;
    out.perturb_delta = delta;
    if (delta == 0.0) return out;
    for (int s = 0; s < m.num_states(); ++s) {
        if (m.terminal[s]) continue;  // terminal rows stay exactly zero
        for (double& v : out.values[s]) v = std::max(0.0, v + uniform_range(rng, -delta, delta));
    }
    return out;
}

double twin_blend(double q1, double q2, double beta) {
    return beta * std::min(q1, q2) + 0.5 * (1.0 - beta) * (q1 + q2);
}

CostLearnResult q_learning_cost(const Cmdp& m, const CostLearnConfig& cfg, Rng& rng) {
    if (!(cfg.alpha0 > 0.0 && cfg.alpha0 <= 1.0))
        throw std::invalid_argument("q_learning_cost: alpha0 outside (0,1]");
    if (cfg.alpha_decay < 0.0)
        throw std::invalid_argument("q_learning_cost: alpha_decay must be non-negative");
    if (m.gamma_c >= 1.0 && !m.is_episodic())
        throw std::domain_error("q_learning_cost: discount 1 requires an episodic model");

    auto q1 = zero_like(m);
    auto q2 = zero_like(m);
    auto visits = zero_like(m);
    const int horizon = default_mc_horizon(m);

    for (long ep = 0; ep < cfg.episodes; ++ep) {
        int s = m.initial_state;
        for (int t = 0; t < horizon && !m.terminal[s]; ++t) {
            int a;
            if (uniform01(rng) < cfg.epsilon) {
                a = static_cast<int>(uniform_int(rng, 0, m.num_actions(s) - 1));
            } else {
                a = 0;
                for (int k = 1; k < m.num_actions(s); ++k)
                    if (q1[s][k] < q1[s][a]) a = k;
            }
            const int s2 = m.sample_next(s, a, rng);
            double future = 0.0;
            if (!m.terminal[s2]) {
                int ab = 0;
                for (int k = 1; k < m.num_actions(s2); ++k)
                    if (q1[s2][k] < q1[s2][ab]) ab = k;
                future = twin_blend(q1[s2][ab], q2[s2][ab], cfg.beta);
            }
            const double target = m.cost[s][a] + m.gamma_c * future;
            const double alpha = cfg.alpha0 / (1.0 + cfg.alpha_decay * visits[s][a]);
            visits[s][a] += 1.0;
            auto& table = uniform01(rng) < 0.5 ? q1 : q2;
            table[s][a] += alpha * (target - table[s][a]);
            s = s2;
        }
    }

    CostLearnResult result;
    result.table.values = std::move(q1);
    result.table.gamma_c = m.gamma_c;
    result.table.provenance = Provenance::learned;

    const QTable oracle = cost_value_iteration(m, 1e-12);
    double dist = 0.0;
    for (int s = 0; s < m.num_states(); ++s)
        for (int a = 0; a < m.num_actions(s); ++a)
            dist = std::max(dist, std::abs(result.table.values[s][a] - oracle.values[s][a]));
    result.sup_distance_to_exact = dist;
    return result;
}

void save_qtable_csv(const QTable& q, std::ostream& out) {
    out << "s,a,value\n";
    std::ostringstream os;
    os.precision(17);
    for (std::size_t s = 0; s < q.values.size(); ++s)
        for (std::size_t a = 0; a < q.values[s].size(); ++a) {
            os.str("");
            os << q.values[s][a];
            out << s << ',' << a << ',' << os.str() << '\n';
        }
}

QTable load_qtable_csv(std::istream& in, double gamma_c, Provenance provenance) {
    QTable q;
    q.gamma_c = gamma_c;
    q.provenance = provenance;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("qtable csv: empty stream");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string field;
        std::getline(ls, field, ',');
        const std::size_t s = std::stoul(field);
        std::getline(ls, field, ',');
        const std::size_t a = std::stoul(field);
        std::getline(ls, field, ',');
        const double v = std::stod(field);
        if (q.values.size() <= s) q.values.resize(s + 1);
        if (q.values[s].size() <= a) q.values[s].resize(a + 1, 0.0);
        q.values[s][a] = v;
    }
    return q;
}

}  // namespace riskshield
