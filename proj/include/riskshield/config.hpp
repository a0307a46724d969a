#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "riskshield/cmdp.hpp"
#include "riskshield/critic.hpp"
#include "riskshield/policyopt.hpp"

namespace riskshield {

/**
 * Line-oriented `key = value` configuration with `[section]` headers.
 * Blank lines and lines starting with '#' are ignored. Values are kept as
 * strings; typed getters parse on access. All keys are optional.
 */
class ConfigMap {
  public:
    static ConfigMap parse(std::istream& in);
    static ConfigMap parse_file(const std::string& path);

    bool has(const std::string& section, const std::string& key) const;
    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& fallback) const;
    double get_double(const std::string& section, const std::string& key,
                      double fallback) const;
    long get_long(const std::string& section, const std::string& key, long fallback) const;
    std::vector<double> get_list(const std::string& section, const std::string& key,
                                 const std::vector<double>& fallback) const;

    void set(const std::string& section, const std::string& key, const std::string& value);

  private:
    std::map<std::string, std::string> kv_;  // "section.key" -> value
};

enum class CriticMode { exact, learned, perturbed };

/// Full description of one run, assembled from a config file plus flag
/// overrides. Defaults are documented in the README.
struct RunConfig {
    EnvSpec env;
    CriticMode critic = CriticMode::exact;
    double delta_b = 0.0;          // perturbed-critic noise level
    CostLearnConfig critic_learn;  // learned-critic settings
    RiskRule rule = RiskRule::q_relative;
    std::optional<double> budget;  // overrides the env's d when set
    std::optional<double> x0;      // initial risk; defaults to d - margin
    std::optional<double> margin;  // default 0; for perturbed critics the
                                   // critic-error slack 2*delta + delta*gc/(1-gc)
    TrainConfig train;
    long verify_samples = 100000;
    double verify_tol = 0.02;
    double verify_xi = 0.1;
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    int jobs = 1;
    std::vector<double> sweep_delta_b{0.0};
    std::vector<double> sweep_x0;  // empty: use the single resolved x0
    std::vector<double> sweep_xi;  // empty: use verify_xi
    std::vector<double> sweep_seeds;

    static RunConfig from_config(const ConfigMap& cfg);
};

}  // namespace riskshield
