#include "riskshield/shield.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace riskshield {

ShieldedDistribution shield(const ProposedDistribution& proposal, const AugState& st,
                            const QTable& q) {
    if (proposal.atoms.empty()) throw std::invalid_argument("shield: empty proposal");
    const int s = st.state;
    const double x = st.risk;
    const double gc = q.gamma_c;

    ShieldedDistribution out;
    out.atoms.reserve(proposal.atoms.size() + 1);
    double expected_risk = 0.0;
    for (const RiskAtom& atom : proposal.atoms) {
        const double clamped = std::max(atom.risk, q.at(s, atom.action));
        out.atoms.push_back({atom.action, clamped, atom.prob});
        expected_risk += atom.prob * clamped;
    }
    const double t = gc * expected_risk;
    if (t <= x) {
        out.lambda = 0.0;
        out.case_taken = ShieldCase::pass_through;
        return out;
    }

    const BackupDecision backup = backup_policy(q, s);
    if (x < backup.floor) {
        out.atoms.clear();
        out.atoms.push_back({backup.action, x / gc, 1.0});
        out.lambda = 1.0;
        out.case_taken = ShieldCase::fallback;
        return out;
    }

    const double backup_risk = q.at(s, backup.action);
    const double lambda =
        std::clamp((t - x) / (t - gc * backup_risk + kShieldEta), 0.0, 1.0);
    for (RiskAtom& atom : out.atoms) atom.prob *= 1.0 - lambda;
    bool merged = false;
    for (RiskAtom& atom : out.atoms) {
        if (atom.action == backup.action && atom.risk == backup_risk) {
            atom.prob += lambda;
            merged = true;
            break;
        }
    }
    if (!merged) out.atoms.push_back({backup.action, backup_risk, lambda});
    out.lambda = lambda;
    out.case_taken = ShieldCase::mixed;
    return out;
}

bool is_shielded(const AtomVec& atoms, const AugState& st, const QTable& q,
                 double tol) {
    if (atoms.empty()) return false;
    const int s = st.state;
    const double x = st.risk;
    const BackupDecision backup = backup_policy(q, s);

    if (x >= backup.floor) {
        double expected_risk = 0.0;
        for (const RiskAtom& atom : atoms) {
            if (atom.risk < q.at(s, atom.action) - tol) return false;
            expected_risk += atom.prob * atom.risk;
        }
        return x + tol >= q.gamma_c * expected_risk;
    }
    return atoms.size() == 1 && atoms[0].action == backup.action &&
           q.gamma_c * atoms[0].risk <= x + tol;
}

AtomVec mix_with_noise(const AtomVec& dist, const AtomVec& noise, double xi) {
    if (xi < 0.0 || xi > 1.0) throw std::invalid_argument("mix_with_noise: xi outside [0,1]");
    AtomVec out;
    out.reserve(dist.size() + noise.size());
    for (const RiskAtom& atom : dist)
        if (xi < 1.0) out.push_back({atom.action, atom.risk, (1.0 - xi) * atom.prob});
    for (const RiskAtom& atom : noise) {
        if (xi == 0.0) break;
        const double p = xi * atom.prob;
        bool merged = false;
        for (RiskAtom& existing : out) {
            if (existing.action == atom.action && existing.risk == atom.risk) {
                existing.prob += p;
                merged = true;
                break;
            }
        }
        if (!merged) out.push_back({atom.action, atom.risk, p});
    }
    return out;
}

int sample_atom(const AtomVec& atoms, Rng& rng) {
    const double u = uniform01(rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        acc += atoms[i].prob;
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(atoms.size()) - 1;
}

}  // namespace riskshield
