#include "robust_lt/search.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "robust_lt/errors.hpp"

namespace robust_lt {

SamplingBounds SamplingBounds::for_problem(const RobustTranscription& problem) {
    return {problem.lower_bounds(), problem.upper_bounds()};
}

Eigen::VectorXd SamplingBounds::clamp(const Eigen::VectorXd& x) const {
    if (x.size() != lower.size()) {
        throw Error(ErrorKind::InvalidInput, "vector does not match the sampling bounds");
    }
    return x.cwiseMax(lower).cwiseMin(upper);
}

Eigen::VectorXd sample_initial_guess(const SamplingBounds& bounds, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Eigen::VectorXd x(bounds.lower.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        x[i] = bounds.lower[i] + unit(rng) * (bounds.upper[i] - bounds.lower[i]);
    }
    return x;
}

void MappingSpec::validate() const {
    if (source_depth < 0 || target_depth <= source_depth) {
        throw Error(ErrorKind::InvalidInput, "mapping needs target depth > source depth >= 0");
    }
    if (static_cast<int>(assignment.size()) != target_depth) {
        throw Error(ErrorKind::InvalidInput, "mapping assignment must cover every target realization");
    }
    for (const MappingChoice& c : assignment) {
        if (!c.from_reference && (c.source_realization < 0 || c.source_realization >= source_depth)) {
            throw Error(ErrorKind::InvalidInput, "mapping refers to a missing source realization");
        }
    }
}

std::string MappingSpec::label() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        if (i > 0) os << ',';
        if (assignment[i].from_reference) {
            os << "ref";
        } else {
            os << 'r' << assignment[i].source_realization;
        }
    }
    return os.str();
}

long count_realization_mappings(int k_prime, int k) {
    if (k_prime < 0 || k <= k_prime) {
        throw Error(ErrorKind::InvalidInput, "mapping count needs k > k' >= 0");
    }
    if (k_prime == 0) return 1;
    long count = 1;
    for (int i = 0; i < k; ++i) count *= k_prime;
    return count + 1;
}

std::vector<MappingSpec> enumerate_mappings(int k_prime, int k) {
    if (k_prime < 0 || k <= k_prime) {
        throw Error(ErrorKind::InvalidInput, "mapping enumeration needs k > k' >= 0");
    }
    // Walk every assignment over {reference, source 0..k'-1} and keep the ones
    // where all realizations fall in one class.
    const int choices = k_prime + 1;
    std::vector<int> digit(k, 0);
    std::vector<MappingSpec> out;
    while (true) {
        const auto refs = std::count(digit.begin(), digit.end(), 0);
        if (refs == 0 || refs == k) {
            MappingSpec spec{k_prime, k, {}};
            for (const int d : digit) {
                spec.assignment.push_back(d == 0 ? MappingChoice::reference() : MappingChoice::realization(d - 1));
            }
            out.push_back(std::move(spec));
        }
        int pos = 0;
        while (pos < k && ++digit[pos] == choices) digit[pos++] = 0;
        if (pos == k) break;
    }
    return out;
}

MappingSpec reference_mapping(int k_prime, int k) {
    MappingSpec spec{k_prime, k, std::vector<MappingChoice>(k, MappingChoice::reference())};
    spec.validate();
    return spec;
}

Eigen::VectorXd map_solution_unclamped(const SolveRecord& source, const RobustTranscription& target,
                                       const MappingSpec& spec) {
    if (!source.feasible()) {
        throw Error(ErrorKind::RejectedSeed, "source record " + source.id + " is not feasible");
    }
    spec.validate();
    if (spec.source_depth != source.scenario.depth() || spec.target_depth != target.scenario().depth()) {
        throw Error(ErrorKind::Mapping, "mapping depths do not match the source and target scenarios");
    }
    const DecisionLayout& to = target.layout();
    const DecisionLayout from(make_layouts(to.leg(0), source.scenario));
    if (static_cast<int>(source.x.size()) != from.size()) {
        throw Error(ErrorKind::Mapping, "source record does not fit the target reference layout");
    }
    const Eigen::VectorXd xs = Eigen::Map<const Eigen::VectorXd>(source.x.data(), source.x.size());
    Eigen::VectorXd x = Eigen::VectorXd::Zero(to.size());

    const LegValues reference = read_leg(from, xs, 0);
    write_leg(to, 0, reference, x);
    const int n_ref = to.leg(0).n_segments;

    for (int r = 0; r < spec.target_depth; ++r) {
        const int leg = r + 1;
        const int n_target = to.leg(leg).n_segments;
        LegValues v;
        v.controls.assign(n_target, ControlSegment{});
        const MappingChoice& choice = spec.assignment[r];
        if (choice.from_reference) {
            const int n_omega = target.scenario().start_indices[r];
            // Segments n_omega+1..N of the reference, in order.
            for (int p = 0; p < n_target; ++p) {
                v.controls[p] = reference.controls[n_ref - n_target + p];
            }
            v.t_i = 0.0;
            v.t_s = reference.t_s * static_cast<double>(n_ref - n_omega) / n_ref;
            v.t_f = reference.t_f;
            v.m_f = reference.m_f;
        } else {
            const LegValues src = read_leg(from, xs, choice.source_realization + 1);
            const int n_src = static_cast<int>(src.controls.size());
            // Align at the terminal end; missing early segments stay at zero throttle.
            for (int p = 0; p < std::min(n_src, n_target); ++p) {
                v.controls[n_target - 1 - p] = src.controls[n_src - 1 - p];
            }
            v.t_s = src.t_s;
            v.t_i = src.t_i;
            v.t_f = src.t_f;
            v.m_f = src.m_f;
        }
        write_leg(to, leg, v, x);
    }
    return x;
}

Eigen::VectorXd map_solution(const SolveRecord& source, const RobustTranscription& target,
                             const MappingSpec& spec) {
    return SamplingBounds::for_problem(target).clamp(map_solution_unclamped(source, target, spec));
}

std::string strategy_tag(int k) { return "S(" + std::to_string(k) + ")"; }

std::string strategy_tag(int k, int k_prime) {
    return "S(" + std::to_string(k) + "|" + std::to_string(k_prime) + ")";
}

bool parse_strategy_tag(const std::string& tag, int& k, int& k_prime, bool& conditional) {
    if (tag.size() < 4 || tag.rfind("S(", 0) != 0 || tag.back() != ')') return false;
    const std::string body = tag.substr(2, tag.size() - 3);
    const auto bar = body.find('|');
    auto parse = [](const std::string& s, int& out) {
        if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; })) {
            return false;
        }
        out = std::stoi(s);
        return true;
    };
    if (bar == std::string::npos) {
        conditional = false;
        k_prime = -1;
        return parse(body, k);
    }
    conditional = true;
    return parse(body.substr(0, bar), k) && parse(body.substr(bar + 1), k_prime) && k > k_prime;
}

std::mt19937_64 seed_stream(std::uint64_t master_seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return std::mt19937_64(seq);
}

MbhOutcome basin_hop(const RobustTranscription& problem, const SolveRecord& start, int hops,
                     double hop_fraction, const SolverConfig& solver, std::mt19937_64& rng) {
    MbhOutcome out;
    out.record = start;
    if (!start.feasible()) return out;
    out.incumbent_objectives.push_back(start.objective);
    const SamplingBounds bounds = SamplingBounds::for_problem(problem);
    const Eigen::VectorXd range = bounds.upper - bounds.lower;
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (int h = 0; h < hops; ++h) {
        Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(out.record.x.data(), out.record.x.size());
        for (Eigen::Index i = 0; i < x.size(); ++i) x[i] += hop_fraction * range[i] * unit(rng);
        SolveRecord trial = solve(problem, bounds.clamp(x), solver);
        ++out.record.hops;
        out.record.wall_time += trial.wall_time;
        out.record.iterations += trial.iterations;
        if (trial.feasible() && trial.objective < out.record.objective) {
            trial.hops = out.record.hops;
            trial.accepted_hops = out.record.accepted_hops + 1;
            trial.wall_time = out.record.wall_time;
            trial.iterations = out.record.iterations;
            trial.id = out.record.id;
            trial.strategy = out.record.strategy;
            trial.provenance = out.record.provenance;
            trial.seed_index = out.record.seed_index;
            out.record = std::move(trial);
            out.incumbent_objectives.push_back(out.record.objective);
        }
    }
    return out;
}

namespace {

/// Runs job(i) for i in [0, count) on a pool and hands results to the sink in
/// index order, so the sink sees the same sequence for any worker count.
std::vector<SolveRecord> run_pool(int count, int workers,
                                  const std::function<SolveRecord(int)>& job, const RecordSink& sink) {
    std::vector<SolveRecord> results(count);
    std::vector<bool> done(count, false);
    std::mutex mutex;
    int next_to_emit = 0;
    std::atomic<int> next_job{0};
    auto worker = [&] {
        while (true) {
            const int i = next_job.fetch_add(1);
            if (i >= count) return;
            SolveRecord record = job(i);
            std::lock_guard lock(mutex);
            results[i] = std::move(record);
            done[i] = true;
            while (next_to_emit < count && done[next_to_emit]) {
                if (sink) sink(results[next_to_emit]);
                ++next_to_emit;
            }
        }
    };
    const int n = std::max(1, std::min(workers, count));
    if (n == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }
    return results;
}

SolverConfig scaled_budget(SolverConfig solver, int k) {
    solver.max_wall_time *= 1 + k;
    solver.validate();
    return solver;
}

}  // namespace

std::vector<SolveRecord> run_non_conditional(const RobustTranscription& problem,
                                             const SearchConfig& config, const RecordSink& sink) {
    if (config.n_seeds < 1) throw Error(ErrorKind::InvalidInput, "search needs at least one seed");
    if (config.mbh.hops < 0 || !(config.mbh.hop_fraction > 0.0)) {
        throw Error(ErrorKind::InvalidInput, "hop budget must be >= 0 and hop fraction > 0");
    }
    const int k = problem.scenario().depth();
    const SolverConfig solver = scaled_budget(config.solver, k);
    const SamplingBounds bounds = SamplingBounds::for_problem(problem);
    const std::string tag = strategy_tag(k);
    const int hops = config.mbh.hops * (1 + k);

    auto job = [&](int i) {
        std::mt19937_64 rng = seed_stream(config.master_seed, static_cast<std::uint64_t>(i));
        const Eigen::VectorXd x0 = sample_initial_guess(bounds, rng);
        SolveRecord record = solve(problem, x0, solver);
        std::ostringstream id;
        id << tag << ':' << problem.scenario().id() << ":m" << config.master_seed << ":s" << i;
        record.id = id.str();
        record.strategy = tag;
        record.provenance = "sampled";
        record.seed_index = i;
        if (record.feasible() && hops > 0) {
            record = basin_hop(problem, record, hops, config.mbh.hop_fraction, solver, rng).record;
        }
        return record;
    };
    return run_pool(config.n_seeds, config.workers, job, sink);
}

std::vector<SolveRecord> run_conditional(const RobustTranscription& target,
                                         const std::vector<SolveRecord>& sources, int k_prime,
                                         MappingPolicy policy, const SearchConfig& config,
                                         const RecordSink& sink) {
    const int k = target.scenario().depth();
    if (k_prime < 0 || k <= k_prime) {
        throw Error(ErrorKind::InvalidInput, "conditional search needs k > k' >= 0");
    }
    const std::vector<MappingSpec> specs =
        policy == MappingPolicy::ReferenceOnly ? std::vector<MappingSpec>{reference_mapping(k_prime, k)}
                                               : enumerate_mappings(k_prime, k);

    std::vector<std::pair<const SolveRecord*, const MappingSpec*>> seeds;
    for (const SolveRecord& s : sources) {
        if (!s.feasible() || s.scenario.depth() != k_prime) continue;
        if (k_prime > 0 && s.scenario.delta_tau != target.scenario().delta_tau) continue;
        const DecisionLayout from(make_layouts(target.layout().leg(0), s.scenario));
        if (static_cast<int>(s.x.size()) != from.size()) continue;
        for (const MappingSpec& spec : specs) seeds.emplace_back(&s, &spec);
    }
    if (config.n_seeds > 0 && static_cast<int>(seeds.size()) > config.n_seeds) seeds.resize(config.n_seeds);
    if (seeds.empty()) {
        throw Error(ErrorKind::NoSeeds, "no feasible depth-" + std::to_string(k_prime) +
                                            " records usable for " + strategy_tag(k, k_prime));
    }
    const SolverConfig solver = scaled_budget(config.solver, k);
    const std::string tag = strategy_tag(k, k_prime);

    auto job = [&](int i) {
        const auto& [source, spec] = seeds[i];
        SolveRecord record;
        try {
            record = solve(target, map_solution(*source, target, *spec), solver);
        } catch (const Error& e) {
            record.scenario = target.scenario();
            record.status = SolveStatus::Error;
            record.objective = std::numeric_limits<double>::quiet_NaN();
            record.delta_v = std::numeric_limits<double>::quiet_NaN();
            record.message = e.what();
        }
        std::ostringstream id;
        id << tag << ':' << target.scenario().id() << ":from:" << source->id << ":map:" << spec->label();
        record.id = id.str();
        record.strategy = tag;
        record.provenance = source->id;
        record.seed_index = i;
        return record;
    };
    return run_pool(static_cast<int>(seeds.size()), config.workers, job, sink);
}

}  // namespace robust_lt
