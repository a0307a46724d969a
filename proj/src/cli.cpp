#include "riskshield/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "riskshield/config.hpp"
#include "riskshield/io.hpp"
#include "riskshield/verify.hpp"

namespace riskshield {

namespace {

// rng stream ids per purpose, so reruns are reproducible step by step
enum Stream : std::uint64_t {
    kStreamCriticPerturb = 1,
    kStreamCriticLearn = 2,
    kStreamTrain = 3,
    kStreamVerifySafety = 4,
    kStreamVerifyPreservation = 5,
    kStreamVerifyNoise = 6,
    kStreamVerifyOptimality = 7,
    kStreamSweepBase = 100,
};

struct Built {
    Cmdp cmdp;
    QTable q;
    AugEnv env;
    double d = 0.0;
    double x0 = 0.0;
};

QTable build_critic(const Cmdp& m, const RunConfig& rc, std::uint64_t seed, double delta_b) {
    const QTable exact = cost_value_iteration(m, 1e-12);
    switch (rc.critic) {
        case CriticMode::exact:
            return exact;
        case CriticMode::perturbed: {
            Rng rng = make_rng(seed, kStreamCriticPerturb);
            return perturb(exact, m, delta_b, rng);
        }
        case CriticMode::learned: {
            Rng rng = make_rng(seed, kStreamCriticLearn);
            return q_learning_cost(m, rc.critic_learn, rng).table;
        }
    }
    return exact;
}

Built build(const RunConfig& rc, std::uint64_t seed, double delta_b,
            std::optional<double> x0_override) {
    Built b;
    b.cmdp = make_env(rc.env);
    if (rc.budget) b.cmdp.budget = *rc.budget;
    const auto report = validate(b.cmdp);
    if (!report.empty()) throw std::invalid_argument("invalid environment: " + report.front());
    b.q = build_critic(b.cmdp, rc, seed, delta_b);
    b.env = augment(b.cmdp, b.q, rc.rule);
    b.d = b.cmdp.budget;
    double margin = 0.0;
    if (rc.margin) {
        margin = *rc.margin;
    } else if (rc.critic == CriticMode::perturbed) {
        // start below the budget by the critic-error slack
        const double gc = b.cmdp.gamma_c;
        margin = 2.0 * delta_b + delta_b * gc * geometric_factor(gc, b.cmdp.horizon_cap);
    }
    b.x0 = x0_override ? *x0_override : (rc.x0 ? *rc.x0 : b.d - margin);
    return b;
}

TrainConfig train_config(const RunConfig& rc, const Built& b) {
    TrainConfig tc = rc.train;
    tc.x0 = b.x0;
    return tc;
}

std::ofstream open_out(const std::string& dir, const std::string& name) {
    std::filesystem::create_directories(dir);
    std::ofstream out(dir + "/" + name);
    if (!out) throw std::runtime_error("cannot write " + dir + "/" + name);
    return out;
}

std::string join_actions(const std::vector<int>& actions) {
    std::ostringstream os;
    for (std::size_t i = 0; i < actions.size(); ++i) {
        if (i) os << ';';
        os << actions[i];
    }
    return os.str();
}

/// Worst-case noise actor: the costliest action, carrying the current risk.
LambdaAugPolicy max_cost_noise(const Cmdp& m) {
    std::vector<int> worst(m.num_states(), 0);
    for (int s = 0; s < m.num_states(); ++s)
        for (int a = 1; a < m.num_actions(s); ++a)
            if (m.cost[s][a] > m.cost[s][worst[s]]) worst[s] = a;
    return LambdaAugPolicy([worst](const AugState& st) {
        return ProposedDistribution{{{worst[st.state], st.risk, 1.0}}};
    });
}

int cmd_solve(const RunConfig& rc) {
    const Built b = build(rc, rc.seed, rc.delta_b, std::nullopt);
    const OracleResult oracle = brute_force_oracle(b.cmdp, b.d);
    auto out = open_out(rc.out_dir, "oracle.csv");
    out << "d,r_star,cost,alpha,pi1,pi2,policies,schema\n";
    out << fmt_double(b.d) << ',' << fmt_double(oracle.best_reward) << ','
        << fmt_double(oracle.best_cost) << ',' << fmt_double(oracle.alpha) << ','
        << join_actions(oracle.pi1) << ',' << join_actions(oracle.pi2) << ','
        << oracle.policies_enumerated << ",1\n";
    std::cout << "oracle: R*=" << fmt_double(oracle.best_reward)
              << " at C=" << fmt_double(oracle.best_cost) << " (alpha="
              << fmt_double(oracle.alpha) << ", " << oracle.policies_enumerated
              << " policies)\n";
    return 0;
}

int cmd_train(const RunConfig& rc) {
    const Built b = build(rc, rc.seed, rc.delta_b, std::nullopt);
    Rng rng = make_rng(rc.seed, kStreamTrain);
    const TrainResult result = shielded_q_train(b.env, train_config(rc, b), rng);
    {
        auto out = open_out(rc.out_dir, "policy.csv");
        write_policy_csv(result.policy, out);
    }
    {
        auto out = open_out(rc.out_dir, "qtable.csv");
        save_qtable_csv(b.q, out);
    }
    {
        auto out = open_out(rc.out_dir, "train_log.csv");
        write_train_log_csv(result.log, out);
    }
    double tail_cost = 0.0, tail_reward = 0.0;
    const std::size_t window = std::min<std::size_t>(result.log.size(), 100);
    for (std::size_t i = result.log.size() - window; i < result.log.size(); ++i) {
        tail_cost += result.log[i].disc_cost;
        tail_reward += result.log[i].disc_reward;
    }
    std::cout << "trained " << result.log.size() << " episodes; last-" << window
              << " mean reward=" << fmt_double(tail_reward / window)
              << " cost=" << fmt_double(tail_cost / window)
              << " shield_violations=" << result.shield_violations << '\n';
    return 0;
}

int cmd_verify(const RunConfig& rc) {
    const Built b = build(rc, rc.seed, rc.delta_b, std::nullopt);
    Rng train_rng = make_rng(rc.seed, kStreamTrain);
    const TrainResult trained = shielded_q_train(b.env, train_config(rc, b), train_rng);
    const int horizon = default_mc_horizon(b.cmdp);
    const long n = rc.verify_samples;

    std::vector<CheckReport> reports;
    {
        Rng rng = make_rng(rc.seed, kStreamVerifySafety);
        reports.push_back(check_safety(b.env, trained.policy, b.x0, n, horizon, rng));
    }
    {
        Rng rng = make_rng(rc.seed, kStreamVerifyPreservation);
        reports.push_back(check_preservation(b.env, trained.policy, b.x0, n, horizon, rng));
    }
    {
        Rng rng = make_rng(rc.seed, kStreamVerifyNoise);
        const LambdaAugPolicy noise = max_cost_noise(b.cmdp);
        reports.push_back(
            check_noise(b.env, trained.policy, noise, rc.verify_xi, b.x0, n, horizon, rng));
    }
    if (b.cmdp.is_deterministic()) {
        Rng rng = make_rng(rc.seed, kStreamVerifyOptimality);
        reports.push_back(check_optimality(b.env, trained.policy, b.d, b.x0, rc.verify_tol, n,
                                           horizon, rng));
    }
    {
        auto out = open_out(rc.out_dir, "checks.jsonl");
        write_checks_jsonl(reports, out);
    }
    std::cout << render_summary(reports);
    for (const auto& r : reports)
        if (!r.pass) return 1;
    return 0;
}

int cmd_sweep(const RunConfig& rc) {
    std::vector<std::optional<double>> x0s;
    if (rc.sweep_x0.empty())
        x0s.push_back(std::nullopt);
    else
        for (double x0 : rc.sweep_x0) x0s.push_back(x0);
    std::vector<double> seeds = rc.sweep_seeds;
    if (seeds.empty()) seeds = {static_cast<double>(rc.seed)};
    std::vector<double> xis = rc.sweep_xi;
    if (xis.empty()) xis = {rc.verify_xi};

    struct Cell {
        double delta_b;
        std::optional<double> x0;
        double xi;
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    for (double delta : rc.sweep_delta_b)
        for (const auto& x0 : x0s)
            for (double xi : xis)
                for (double seed : seeds)
                    cells.push_back({delta, x0, xi, static_cast<std::uint64_t>(seed)});

    std::vector<std::string> rows(cells.size());
    std::mutex fail_mutex;
    std::string failure;
    auto work = [&](std::size_t begin, std::size_t step) {
        for (std::size_t i = begin; i < cells.size(); i += step) {
            try {
                const Cell& cell = cells[i];
                RunConfig cell_rc = rc;
                if (cell.delta_b > 0.0) cell_rc.critic = CriticMode::perturbed;
                const Built b = build(cell_rc, cell.seed, cell.delta_b, cell.x0);
                Rng train_rng = make_rng(cell.seed, kStreamSweepBase + 8 * i);
                const TrainResult trained =
                    shielded_q_train(b.env, train_config(cell_rc, b), train_rng);
                Rng eval_rng = make_rng(cell.seed, kStreamSweepBase + 8 * i + 1);
                const int horizon = default_mc_horizon(b.cmdp);
                CheckReport safety = check_safety(b.env, trained.policy, b.x0,
                                                  rc.verify_samples, horizon, eval_rng);
                Rng noise_rng = make_rng(cell.seed, kStreamSweepBase + 8 * i + 2);
                const LambdaAugPolicy noise = max_cost_noise(b.cmdp);
                CheckReport noisy = check_noise(b.env, trained.policy, noise, cell.xi, b.x0,
                                                rc.verify_samples, horizon, noise_rng);
                const auto& params = safety.params;
                std::ostringstream os;
                os << fmt_double(cell.delta_b) << ',' << fmt_double(b.x0) << ','
                   << fmt_double(cell.xi) << ',' << cell.seed << ',' << rc.train.episodes
                   << ',' << fmt_double(params.at("shield_violations")) << ','
                   << fmt_double(safety.estimate.mean) << ','
                   << fmt_double(safety.estimate.ci95) << ',' << fmt_double(safety.bound)
                   << ',' << (safety.pass ? 1 : 0) << ','
                   << fmt_double(noisy.estimate.mean) << ',' << fmt_double(noisy.bound) << ','
                   << (noisy.pass ? 1 : 0) << ",1";
                rows[i] = os.str();
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(fail_mutex);
                if (failure.empty()) failure = e.what();
            }
        }
    };
    const int jobs = std::max(1, std::min<int>(rc.jobs, static_cast<int>(cells.size())));
    if (jobs == 1) {
        work(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < jobs; ++t) pool.emplace_back(work, t, jobs);
        for (auto& th : pool) th.join();
    }
    if (!failure.empty()) throw std::runtime_error(failure);

    auto out = open_out(rc.out_dir, "sweep.csv");
    out << "delta_b,x0,xi,seed,episodes,shield_violations,cost_mean,cost_ci95,cost_bound,pass,"
           "noise_cost_mean,noise_cost_bound,noise_pass,schema\n";
    for (const auto& row : rows) out << row << '\n';
    std::cout << "sweep: " << rows.size() << " cells -> " << rc.out_dir << "/sweep.csv\n";
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"risk-budget shielding laboratory for constrained MDPs"};
    app.require_subcommand(1);

    std::string config_path;
    std::string env_name, critic_mode, rule;
    double gamma_c = NAN, gamma_r = NAN, budget = NAN, x0 = NAN, margin = NAN, delta_b = NAN;
    double tol = NAN, xi = NAN;
    long episodes = -1, samples = -1, seed = -1, jobs = -1;
    std::string out_dir;
    std::string delta_b_list, x0_list, seeds_list, xi_list;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "config file (key = value with [section]s)");
        cmd->add_option("--env", env_name, "environment name: m1, chain, random");
        cmd->add_option("--critic", critic_mode, "critic mode: exact, learned, perturbed");
        cmd->add_option("--rule", rule, "risk rule: q_relative, cost_relative");
        cmd->add_option("--gamma-c", gamma_c, "cost discount factor");
        cmd->add_option("--gamma-r", gamma_r, "reward discount factor");
        cmd->add_option("--budget", budget, "cost budget d");
        cmd->add_option("--x0", x0, "initial risk budget");
        cmd->add_option("--margin", margin, "risk margin: x0 = d - margin");
        cmd->add_option("--delta-b", delta_b, "perturbed-critic noise level");
        cmd->add_option("--episodes", episodes, "training episodes");
        cmd->add_option("--samples", samples, "Monte Carlo samples for checks");
        cmd->add_option("--tol", tol, "optimality tolerance");
        cmd->add_option("--xi", xi, "noise mixing weight for the noise check");
        cmd->add_option("--seed", seed, "master seed");
        cmd->add_option("--jobs", jobs, "parallel sweep cells");
        cmd->add_option("--out", out_dir, "output directory");
        cmd->add_option("--delta-b-list", delta_b_list, "sweep: comma list of delta_b");
        cmd->add_option("--x0-list", x0_list, "sweep: comma list of x0");
        cmd->add_option("--xi-list", xi_list, "sweep: comma list of noise weights");
        cmd->add_option("--seeds", seeds_list, "sweep: comma list of seeds");
    };
    CLI::App* solve = app.add_subcommand("solve", "exact constrained optimum by enumeration");
    CLI::App* train = app.add_subcommand("train", "shielded tabular policy optimization");
    CLI::App* verify = app.add_subcommand("verify", "train, then run the bound checks");
    CLI::App* sweep = app.add_subcommand("sweep", "grid of runs over delta_b, x0 and seeds");
    for (CLI::App* cmd : {solve, train, verify, sweep}) add_common(cmd);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {  // --help
            std::cout << app.help();
            return 0;
        }
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }

    try {
        ConfigMap cfg;
        if (!config_path.empty()) cfg = ConfigMap::parse_file(config_path);
        // flags override config keys
        if (!env_name.empty()) cfg.set("env", "name", env_name);
        if (!critic_mode.empty()) cfg.set("critic", "mode", critic_mode);
        if (!rule.empty()) cfg.set("train", "rule", rule);
        auto set_if = [&cfg](bool cond, const char* section, const char* key,
                             const std::string& value) {
            if (cond) cfg.set(section, key, value);
        };
        set_if(!std::isnan(gamma_c), "env", "gamma_c", fmt_double(gamma_c));
        set_if(!std::isnan(gamma_r), "env", "gamma_r", fmt_double(gamma_r));
        set_if(!std::isnan(budget), "env", "budget", fmt_double(budget));
        set_if(!std::isnan(x0), "train", "x0", fmt_double(x0));
        set_if(!std::isnan(margin), "train", "margin", fmt_double(margin));
        set_if(!std::isnan(delta_b), "critic", "delta_b", fmt_double(delta_b));
        set_if(!std::isnan(tol), "verify", "tol", fmt_double(tol));
        set_if(!std::isnan(xi), "verify", "xi", fmt_double(xi));
        set_if(episodes >= 0, "train", "episodes", std::to_string(episodes));
        set_if(samples >= 0, "verify", "samples", std::to_string(samples));
        set_if(seed >= 0, "run", "seed", std::to_string(seed));
        set_if(jobs >= 0, "run", "jobs", std::to_string(jobs));
        if (!out_dir.empty()) cfg.set("run", "out", out_dir);
        if (!delta_b_list.empty()) cfg.set("run", "delta_b_list", delta_b_list);
        if (!x0_list.empty()) cfg.set("run", "x0_list", x0_list);
        if (!xi_list.empty()) cfg.set("run", "xi_list", xi_list);
        if (!seeds_list.empty()) cfg.set("run", "seeds", seeds_list);

        const RunConfig rc = RunConfig::from_config(cfg);
        if (solve->parsed()) return cmd_solve(rc);
        if (train->parsed()) return cmd_train(rc);
        if (verify->parsed()) return cmd_verify(rc);
        if (sweep->parsed()) return cmd_sweep(rc);
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}

}  // namespace riskshield
