#include "riskshield/io.hpp"

#include <json.hpp>

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace riskshield {

using nlohmann::json;

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_trajectory_jsonl(const Trajectory& traj, std::ostream& out) {
    for (const auto& step : traj.steps) {
        json j{{"s", step.state}, {"a", step.action}, {"r", step.reward}, {"c", step.cost}};
        out << j.dump() << '\n';
    }
}

void write_aug_trajectory_jsonl(const AugTrajectory& traj, std::ostream& out) {
    for (const auto& step : traj.steps) {
        json j{{"s", step.s},      {"x", step.x},    {"a", step.a},   {"y", step.y},
               {"r", step.reward}, {"c", step.cost}, {"s2", step.s2}, {"x2", step.x2}};
        out << j.dump() << '\n';
    }
}

namespace {

const char* case_name(ShieldCase c) {
    switch (c) {
        case ShieldCase::pass_through: return "pass_through";
        case ShieldCase::fallback: return "fallback";
        case ShieldCase::mixed: return "mixed";
    }
    return "?";
}

}  // namespace

void write_shield_decision_jsonl(const AugState& st, const ShieldedDistribution& dist,
                                 std::ostream& out) {
    json atoms = json::array();
    for (const auto& atom : dist.atoms)
        atoms.push_back({{"a", atom.action}, {"y", atom.risk}, {"p", atom.prob}});
    json j{{"state", st.state},
           {"x", st.risk},
           {"case", case_name(dist.case_taken)},
           {"lambda", dist.lambda},
           {"atoms", atoms}};
    out << j.dump() << '\n';
}

void write_checks_jsonl(const std::vector<CheckReport>& reports, std::ostream& out) {
    for (const auto& r : reports) {
        json params = json::object();
        for (const auto& [k, v] : r.params) params[k] = v;
        json j{{"check", r.check}, {"bound", r.bound},   {"mean", r.estimate.mean},
               {"ci95", r.estimate.ci95}, {"pass", r.pass}, {"params", params},
               {"note", r.note}};
        out << j.dump() << '\n';
    }
}

void write_train_log_csv(const std::vector<EpisodeLogRow>& log, std::ostream& out) {
    out << "episode,steps,disc_reward,disc_cost,clamp_events,mean_lambda,switch_step,schema\n";
    for (const auto& row : log) {
        out << row.episode << ',' << row.steps << ',' << fmt_double(row.disc_reward) << ','
            << fmt_double(row.disc_cost) << ',' << row.clamp_events << ','
            << fmt_double(row.mean_lambda) << ',' << row.switch_step << ",1\n";
    }
}

void write_policy_csv(const TabularAugPolicy& policy, std::ostream& out) {
    out << "state,bin,atom,action,risk,prob,schema\n";
    for (std::size_t s = 0; s < policy.proposals.size(); ++s)
        for (std::size_t b = 0; b < policy.proposals[s].size(); ++b)
            for (std::size_t k = 0; k < policy.proposals[s][b].size(); ++k) {
                const RiskAtom& atom = policy.proposals[s][b][k];
                out << s << ',' << b << ',' << k << ',' << atom.action << ','
                    << fmt_double(atom.risk) << ',' << fmt_double(atom.prob) << ",1\n";
            }
}

TabularAugPolicy load_policy_csv(std::istream& in, const RiskGrid& grid) {
    TabularAugPolicy policy;
    policy.grid = grid;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("policy csv: empty stream");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string field;
        auto next_field = [&]() {
            if (!std::getline(ls, field, ',')) throw std::runtime_error("policy csv: short row");
            return field;
        };
        const std::size_t s = std::stoul(next_field());
        const std::size_t b = std::stoul(next_field());
        next_field();  // atom index; rows arrive in order
        const int action = std::stoi(next_field());
        const double risk = std::stod(next_field());
        const double prob = std::stod(next_field());
        if (policy.proposals.size() <= s) policy.proposals.resize(s + 1);
        if (policy.proposals[s].size() <= b) policy.proposals[s].resize(grid.bins);
        if (policy.proposals[s][b].size() >= 2)
            throw std::runtime_error("policy csv: proposals are flipping (at most 2 atoms)");
        policy.proposals[s][b].push_back({action, risk, prob});
    }
    return policy;
}

}  // namespace riskshield
