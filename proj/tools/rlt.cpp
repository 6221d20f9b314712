// rlt: command-line driver for single solves, strategy batches, sparsity
// studies and archive metrics.
//
// Exit codes: 0 success (feasible for solve), 2 domain-negative outcome
// (infeasible solve, no usable seeds, empty report), 1 error.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "robust_lt/archive.hpp"
#include "robust_lt/config.hpp"
#include "robust_lt/errors.hpp"
#include "robust_lt/metrics.hpp"
#include "robust_lt/search.hpp"

namespace fs = std::filesystem;
using namespace robust_lt;

namespace {

constexpr int kOk = 0;
constexpr int kError = 1;
constexpr int kNegative = 2;

struct BudgetOverrides {
    std::optional<int> seeds;
    std::optional<std::uint64_t> master_seed;
    std::optional<int> workers;
    std::optional<int> hops;
    std::optional<double> wall_time;
    std::optional<std::string> archive;

    void apply(RunConfig& c) const {
        if (seeds) c.search.n_seeds = *seeds;
        if (master_seed) c.search.master_seed = *master_seed;
        if (workers) c.search.workers = *workers;
        if (hops) c.search.mbh.hops = *hops;
        if (wall_time) c.search.solver.max_wall_time = *wall_time;
        if (archive) c.archive = *archive;
        if (c.search.workers < 1 || c.search.mbh.hops < 0) {
            throw Error(ErrorKind::Config, "workers must be >= 1 and hops >= 0");
        }
        c.search.solver.validate();
    }
};

std::vector<SolveRecord> read_if_present(const fs::path& path) {
    if (!fs::exists(path)) return {};
    ArchiveContents contents = read_archive(path);
    for (const std::string& w : contents.warnings) std::cerr << "warning: " << w << '\n';
    return std::move(contents.records);
}

void print_record(const SolveRecord& r) {
    std::cout << "id          " << r.id << '\n'
              << "strategy    " << r.strategy << "  scenario " << r.scenario.id() << '\n'
              << "status      " << to_string(r.status) << '\n'
              << "objective   " << std::setprecision(10) << r.objective << "  (final mass, MU, negated)\n"
              << "delta-v     " << r.delta_v << " DU/TU\n"
              << "iterations  " << r.iterations << "  wall " << std::setprecision(4) << r.wall_time << " s\n";
    for (std::size_t l = 0; l < r.defects.size(); ++l) {
        std::cout << "leg " << l << " defects  pos " << std::setprecision(3) << r.defects[l].position
                  << " DU, vel " << r.defects[l].velocity << " DU/TU, mass " << r.defects[l].mass << " MU\n";
    }
    if (!r.message.empty()) std::cout << "message     " << r.message << '\n';
}

MteScenario select_scenario(const RunConfig& c, int index) {
    if (index == 0) return MteScenario{};
    if (index < 0 || index > static_cast<int>(c.scenarios.size())) {
        throw Error(ErrorKind::Config, "scenario index " + std::to_string(index) + " is out of range (0 = nominal, 1.." +
                                           std::to_string(c.scenarios.size()) + " = configured)");
    }
    return c.scenarios[index - 1];
}

int cmd_solve(const std::string& config_path, int scenario_index, long seed, const BudgetOverrides& overrides) {
    RunConfig c = load_config(config_path);
    overrides.apply(c);
    const MteScenario scenario = select_scenario(c, scenario_index);
    const RobustTranscription problem = c.problem(scenario);
    ArchiveWriter writer(c.archive);

    std::mt19937_64 rng = seed_stream(c.search.master_seed, static_cast<std::uint64_t>(seed));
    const Eigen::VectorXd x0 = sample_initial_guess(SamplingBounds::for_problem(problem), rng);
    SolverConfig solver = c.search.solver;
    solver.max_wall_time *= 1 + scenario.depth();
    SolveRecord record = solve(problem, x0, solver);
    std::ostringstream id;
    id << "solve:" << strategy_tag(scenario.depth()) << ':' << scenario.id() << ":m" << c.search.master_seed
       << ":s" << seed;
    record.id = id.str();
    record.strategy = strategy_tag(scenario.depth());
    record.provenance = "sampled";
    record.seed_index = seed;
    writer.append(record);
    print_record(record);
    if (record.status == SolveStatus::Error) return kError;
    return record.feasible() ? kOk : kNegative;
}

void print_strategy(const std::vector<SolveRecord>& all, const std::string& tag) {
    const ArchiveReport summary = summarize(all);
    for (const StrategyReport& r : summary.reports) {
        if (r.strategy == tag) print_report(std::cout, r);
    }
    for (const std::string& w : summary.warnings) std::cerr << "note: " << w << '\n';
}

int cmd_search(const std::string& config_path, const std::vector<int>& strategy, int scenario_index,
               bool all_mappings, const BudgetOverrides& overrides) {
    RunConfig c = load_config(config_path);
    overrides.apply(c);
    const bool conditional = strategy.size() == 2;
    const int k = strategy[0];
    const int k_prime = conditional ? strategy[1] : -1;
    if (k < 0 || (conditional && (k_prime < 0 || k <= k_prime))) {
        throw Error(ErrorKind::Config, "strategy needs k >= 0, and k > k' >= 0 when conditional");
    }

    std::vector<MteScenario> targets =
        scenario_index >= 0 ? std::vector<MteScenario>{select_scenario(c, scenario_index)} : c.scenarios_at_depth(k);
    for (const MteScenario& s : targets) {
        if (s.depth() != k) throw Error(ErrorKind::Config, "scenario " + s.id() + " does not have depth " + std::to_string(k));
    }
    if (targets.empty()) throw Error(ErrorKind::Config, "no configured scenarios of depth " + std::to_string(k));

    std::vector<SolveRecord> existing = read_if_present(c.archive);
    std::vector<SolveRecord> sources;
    if (conditional) {
        for (const SolveRecord& r : existing) {
            int rk = 0, rkp = 0;
            bool rc = false;
            if (parse_strategy_tag(r.strategy, rk, rkp, rc) && rk == k_prime) sources.push_back(r);
        }
    }

    ArchiveWriter writer(c.archive);
    const RecordSink sink = [&writer](const SolveRecord& r) { writer.append(r); };
    std::vector<SolveRecord> produced;
    int missing = 0;
    for (const MteScenario& scenario : targets) {
        const RobustTranscription problem = c.problem(scenario);
        std::vector<SolveRecord> batch;
        if (!conditional) {
            batch = run_non_conditional(problem, c.search, sink);
        } else {
            try {
                batch = run_conditional(problem, sources, k_prime,
                                        all_mappings ? MappingPolicy::AllMappings : MappingPolicy::ReferenceOnly,
                                        c.search, sink);
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::NoSeeds) throw;
                std::cerr << scenario.id() << ": " << e.what() << '\n';
                ++missing;
                continue;
            }
        }
        produced.insert(produced.end(), batch.begin(), batch.end());
    }
    if (missing == static_cast<int>(targets.size())) return kNegative;

    const std::string tag = conditional ? strategy_tag(k, k_prime) : strategy_tag(k);
    std::vector<SolveRecord> all = std::move(existing);
    all.insert(all.end(), produced.begin(), produced.end());
    std::cout << produced.size() << " records appended to " << c.archive.string() << '\n';
    print_strategy(all, tag);
    return kOk;
}

int cmd_sparsity(const std::vector<int>& segments, const std::vector<int>& starts, const std::string& mode,
                 const std::string& csv_path, const std::string& pattern_dir) {
    std::vector<std::pair<std::string, Segmentation>> modes;
    if (mode == "adaptive" || mode == "both") modes.emplace_back("adaptive", Segmentation::Adaptive);
    if (mode == "uniform" || mode == "both") modes.emplace_back("uniform", Segmentation::Uniform);

    std::ofstream file;
    if (!csv_path.empty()) {
        file.open(csv_path);
        if (!file) throw Error(ErrorKind::Config, "cannot write " + csv_path);
    }
    std::ostream& out = csv_path.empty() ? std::cout : file;
    out << "mode,N,K,dense_count\n";
    for (const int n : segments) {
        MteScenario scenario;
        scenario.start_indices = starts;
        scenario.delta_tau = 1.0;  // counts do not depend on the outage duration
        require_valid(scenario, n);
        for (const auto& [name, m] : modes) {
            const SparsityPattern pattern = build_sparsity(n, scenario, m);
            out << name << ',' << n << ',' << scenario.depth() << ',' << pattern.dense_entry_count() << '\n';
            if (!pattern_dir.empty()) {
                fs::create_directories(pattern_dir);
                const fs::path p = fs::path(pattern_dir) /
                                   ("pattern_" + name + "_N" + std::to_string(n) + "_K" +
                                    std::to_string(scenario.depth()) + ".txt");
                std::ofstream pf(p);
                pf << "# rows " << pattern.rows << " cols " << pattern.cols << "\n# row col\n";
                for (const auto& [r, col] : pattern.entries) pf << r << ' ' << col << '\n';
            }
        }
    }
    return kOk;
}

int cmd_metrics(const std::string& archive_path, const std::vector<std::string>& strategies,
                std::optional<double> outage, bool per_scenario, const std::string& csv_path,
                const std::string& delta_v_path) {
    const ArchiveContents contents = read_archive(archive_path);
    for (const std::string& w : contents.warnings) std::cerr << "warning: " << w << '\n';
    if (contents.total_lines > 0 && contents.corrupt_lines == contents.total_lines) {
        std::cerr << "error: every archive line is corrupt\n";
        return kError;
    }

    auto keep = [&](const std::string& tag, double delta_tau) {
        if (!strategies.empty() && std::find(strategies.begin(), strategies.end(), tag) == strategies.end()) {
            return false;
        }
        return !outage || delta_tau == *outage;
    };
    std::vector<SolveRecord> selected;
    for (const SolveRecord& r : contents.records) {
        if (keep(r.strategy, r.scenario.delta_tau)) selected.push_back(r);
    }
    if (selected.empty()) throw Error(ErrorKind::EmptyReport, "no archived records match the filters");

    // Lineage is resolved over the whole archive, then the rows are filtered.
    const ArchiveReport summary = summarize(contents.records, per_scenario ? Grouping::PerScenario : Grouping::Aggregated);
    for (const std::string& w : summary.warnings) std::cerr << "note: " << w << '\n';
    std::vector<StrategyReport> rows;
    for (const StrategyReport& r : summary.reports) {
        if (keep(r.strategy, r.delta_tau)) rows.push_back(r);
    }

    if (csv_path.empty()) {
        write_metrics_csv(std::cout, rows);
    } else {
        std::ofstream f(csv_path);
        if (!f) throw Error(ErrorKind::Config, "cannot write " + csv_path);
        write_metrics_csv(f, rows);
        for (const StrategyReport& r : rows) print_report(std::cout, r);
    }
    if (!delta_v_path.empty()) {
        std::ofstream f(delta_v_path);
        if (!f) throw Error(ErrorKind::Config, "cannot write " + delta_v_path);
        write_delta_v_csv(f, selected);
    }
    return kOk;
}

int exit_code_for(const Error& e) {
    switch (e.kind()) {
        case ErrorKind::NoSeeds:
        case ErrorKind::EmptyReport:
            return kNegative;
        default:
            return kError;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Robust low-thrust trajectory search under missed-thrust events"};
    app.require_subcommand(1);

    BudgetOverrides overrides;
    auto add_budget = [&overrides](CLI::App* sub) {
        sub->add_option("--seeds", overrides.seeds, "Seeds per scenario (conditional: cap on solves)");
        sub->add_option("--master-seed", overrides.master_seed, "Master seed for the RNG streams");
        sub->add_option("--workers", overrides.workers, "Worker threads");
        sub->add_option("--hops", overrides.hops, "Basin-hopping perturbations per feasible seed, before (1+k) scaling");
        sub->add_option("--wall-time", overrides.wall_time, "Per-solve wall-time cap in seconds, before (1+k) scaling");
        sub->add_option("--archive", overrides.archive, "Archive path overriding the config");
    };

    std::string config_path;
    int scenario_index = 0;
    long seed = 0;
    CLI::App* solve_cmd = app.add_subcommand("solve", "Run one local solve from a uniform seed");
    solve_cmd->add_option("config", config_path, "Run configuration (JSON)")->required();
    solve_cmd->add_option("--scenario", scenario_index, "0 = nominal, i = i-th configured scenario");
    solve_cmd->add_option("--seed", seed, "Seed index within the master stream")->check(CLI::NonNegativeNumber);
    add_budget(solve_cmd);

    std::string mode;
    std::vector<int> strategy;
    bool all_mappings = false;
    int search_scenario = -1;
    CLI::App* search_cmd = app.add_subcommand("search", "Run a strategy batch: 'nc k' or 'c k k_prime'");
    search_cmd->add_option("config", config_path, "Run configuration (JSON)")->required();
    search_cmd->add_option("mode", mode, "nc or c")->required()->check(CLI::IsMember({"nc", "c"}));
    search_cmd->add_option("depths", strategy, "k, or k k_prime")->required()->expected(1, 2);
    search_cmd->add_option("--scenario", search_scenario, "Restrict to one configured scenario (1-based)");
    search_cmd->add_flag("--all-mappings", all_mappings, "Seed from every mapping instead of the reference map");
    add_budget(search_cmd);

    std::vector<int> segments{20};
    std::vector<int> starts;
    std::string sparsity_mode = "both";
    std::string csv_path, pattern_dir;
    CLI::App* sparsity_cmd = app.add_subcommand("sparsity", "Structural Jacobian sparsity and dense-entry counts");
    sparsity_cmd->add_option("--segments", segments, "Reference segment counts")->delimiter(',');
    sparsity_cmd->add_option("--starts", starts, "Realization start indices (1-based)")->delimiter(',');
    sparsity_cmd->add_option("--mode", sparsity_mode, "adaptive, uniform or both")
        ->check(CLI::IsMember({"adaptive", "uniform", "both"}));
    sparsity_cmd->add_option("--csv", csv_path, "CSV output path (stdout by default)");
    sparsity_cmd->add_option("--pattern-dir", pattern_dir, "Directory for pattern files");

    std::string archive_path, delta_v_path;
    std::vector<std::string> filter_strategies;
    std::optional<double> filter_outage;
    bool per_scenario = false;
    CLI::App* metrics_cmd = app.add_subcommand("metrics", "Performance metrics from an archive");
    metrics_cmd->add_option("archive", archive_path, "Archive file")->required();
    metrics_cmd->add_option("--strategy", filter_strategies, "Keep these strategy tags, e.g. 'S(1|0)'");
    metrics_cmd->add_option("--outage-tu", filter_outage, "Keep this outage duration (TU)");
    metrics_cmd->add_flag("--per-scenario", per_scenario, "One row per scenario instead of per outage duration");
    metrics_cmd->add_option("--csv", csv_path, "Metrics CSV path (stdout by default)");
    metrics_cmd->add_option("--delta-v-csv", delta_v_path, "Long-format delta-v CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kError;
    }

    try {
        if (*solve_cmd) return cmd_solve(config_path, scenario_index, seed, overrides);
        if (*search_cmd) {
            if ((mode == "nc") != (strategy.size() == 1)) {
                std::cerr << "error: 'nc' takes one depth and 'c' takes two\n";
                return kError;
            }
            return cmd_search(config_path, strategy, search_scenario, all_mappings, overrides);
        }
        if (*sparsity_cmd) return cmd_sparsity(segments, starts, sparsity_mode, csv_path, pattern_dir);
        if (*metrics_cmd) {
            return cmd_metrics(archive_path, filter_strategies, filter_outage, per_scenario, csv_path, delta_v_path);
        }
    } catch (const Error& e) {
        std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kError;
    }
    return kError;
}
