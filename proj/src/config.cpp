#include "riskshield/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace riskshield {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

ConfigMap ConfigMap::parse(std::istream& in) {
    ConfigMap cfg;
    std::string line, section;
    long lineno = 0;
    while (std::getline(in, line)) {
        lineno++;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw std::runtime_error("config line " + std::to_string(lineno) +
                                         ": unterminated section header");
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(lineno) +
                                     ": expected key = value");
        cfg.set(section, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    return cfg;
}

ConfigMap ConfigMap::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    return parse(in);
}

void ConfigMap::set(const std::string& section, const std::string& key,
                    const std::string& value) {
    kv_[section + "." + key] = value;
}

bool ConfigMap::has(const std::string& section, const std::string& key) const {
    return kv_.count(section + "." + key) > 0;
}

std::string ConfigMap::get_string(const std::string& section, const std::string& key,
                                  const std::string& fallback) const {
    const auto it = kv_.find(section + "." + key);
    return it == kv_.end() ? fallback : it->second;
}

double ConfigMap::get_double(const std::string& section, const std::string& key,
                             double fallback) const {
    const auto it = kv_.find(section + "." + key);
    if (it == kv_.end()) return fallback;
    try {
        return std::stod(it->second);
    } catch (const std::exception&) {
        throw std::runtime_error("config key " + section + "." + key +
                                 ": not a number: " + it->second);
    }
}

long ConfigMap::get_long(const std::string& section, const std::string& key,
                         long fallback) const {
    const auto it = kv_.find(section + "." + key);
    if (it == kv_.end()) return fallback;
    try {
        return std::stol(it->second);
    } catch (const std::exception&) {
        throw std::runtime_error("config key " + section + "." + key +
                                 ": not an integer: " + it->second);
    }
}

std::vector<double> ConfigMap::get_list(const std::string& section, const std::string& key,
                                        const std::vector<double>& fallback) const {
    const auto it = kv_.find(section + "." + key);
    if (it == kv_.end()) return fallback;
    std::vector<double> out;
    std::istringstream ss(it->second);
    std::string field;
    while (std::getline(ss, field, ',')) {
        const std::string t = trim(field);
        if (t.empty()) continue;
        try {
            out.push_back(std::stod(t));
        } catch (const std::exception&) {
            throw std::runtime_error("config key " + section + "." + key +
                                     ": not a number list: " + it->second);
        }
    }
    return out;
}

RunConfig RunConfig::from_config(const ConfigMap& cfg) {
    RunConfig rc;
    rc.env.name = cfg.get_string("env", "name", "m1");
    for (const char* key : {"n", "states", "actions", "sparsity", "gamma_r", "gamma_c",
                            "budget", "horizon_cap"})
        if (cfg.has("env", key)) rc.env.params[key] = cfg.get_double("env", key, 0.0);
    rc.env.seed = static_cast<std::uint64_t>(cfg.get_long("env", "seed", 0));
    rc.env.step_rewards = cfg.get_list("env", "step_rewards", {});
    rc.env.step_costs = cfg.get_list("env", "step_costs", {});

    const std::string mode = cfg.get_string("critic", "mode", "exact");
    if (mode == "exact")
        rc.critic = CriticMode::exact;
    else if (mode == "learned")
        rc.critic = CriticMode::learned;
    else if (mode == "perturbed")
        rc.critic = CriticMode::perturbed;
    else
        throw std::runtime_error("critic.mode must be exact, learned or perturbed");
    rc.delta_b = cfg.get_double("critic", "delta_b", 0.0);
    rc.critic_learn.episodes = cfg.get_long("critic", "episodes", 20000);
    rc.critic_learn.alpha0 = cfg.get_double("critic", "alpha0", 0.5);
    rc.critic_learn.alpha_decay = cfg.get_double("critic", "alpha_decay", 1e-3);
    rc.critic_learn.epsilon = cfg.get_double("critic", "epsilon", 0.2);
    rc.critic_learn.beta = cfg.get_double("critic", "beta", 0.75);

    const std::string rule = cfg.get_string("train", "rule", "q_relative");
    if (rule == "q_relative")
        rc.rule = RiskRule::q_relative;
    else if (rule == "cost_relative")
        rc.rule = RiskRule::cost_relative;
    else
        throw std::runtime_error("train.rule must be q_relative or cost_relative");
    if (cfg.has("env", "budget")) rc.budget = cfg.get_double("env", "budget", 0.0);
    if (cfg.has("train", "x0")) rc.x0 = cfg.get_double("train", "x0", 0.0);
    if (cfg.has("train", "margin")) rc.margin = cfg.get_double("train", "margin", 0.0);
    rc.train.episodes = cfg.get_long("train", "episodes", 50000);
    rc.train.alpha0 = cfg.get_double("train", "alpha0", 0.5);
    rc.train.alpha_decay = cfg.get_double("train", "alpha_decay", 2e-4);
    rc.train.explore_xi = cfg.get_double("train", "xi", 0.1);
    rc.train.hybrid_delay = cfg.get_long("train", "hybrid_delay", 2);
    rc.train.policy_delay = cfg.get_long("train", "policy_delay", 2);
    rc.train.risk_bins = static_cast<int>(cfg.get_long("train", "risk_bins", 32));
    rc.train.risk_levels = static_cast<int>(cfg.get_long("train", "risk_levels", 5));

    rc.verify_samples = cfg.get_long("verify", "samples", 100000);
    rc.verify_tol = cfg.get_double("verify", "tol", 0.02);
    rc.verify_xi = cfg.get_double("verify", "xi", 0.1);

    rc.seed = static_cast<std::uint64_t>(cfg.get_long("run", "seed", 0));
    rc.out_dir = cfg.get_string("run", "out", "out");
    rc.jobs = static_cast<int>(cfg.get_long("run", "jobs", 1));
    rc.sweep_delta_b = cfg.get_list("run", "delta_b_list", {0.0});
    rc.sweep_x0 = cfg.get_list("run", "x0_list", {});
    rc.sweep_xi = cfg.get_list("run", "xi_list", {});
    rc.sweep_seeds = cfg.get_list("run", "seeds", {});
    return rc;
}

}  // namespace riskshield
