#include "robust_lt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include "robust_lt/errors.hpp"
#include "robust_lt/search.hpp"

namespace robust_lt {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Type-7 quantile of sorted data.
double quantile(const std::vector<double>& sorted, double p) {
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double median(std::vector<double> values) {
    if (values.empty()) return kNaN;
    std::sort(values.begin(), values.end());
    return quantile(values, 0.5);
}

struct Tag {
    int k = 0;
    int k_prime = -1;
    bool conditional = false;
};

Tag parse_tag(const std::string& tag) {
    Tag t;
    if (!parse_strategy_tag(tag, t.k, t.k_prime, t.conditional)) {
        throw Error(ErrorKind::Lineage, "malformed strategy tag '" + tag + "'");
    }
    return t;
}

using GroupKey = std::tuple<std::string, double, std::string>;

std::string cell(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

}  // namespace

DeltaVSummary DeltaVSummary::of(std::vector<double> values) {
    DeltaVSummary s;
    s.count = static_cast<int>(values.size());
    if (values.empty()) {
        s.min = s.q1 = s.median = s.q3 = s.mean = s.max = kNaN;
        return s;
    }
    std::sort(values.begin(), values.end());
    s.min = values.front();
    s.max = values.back();
    s.q1 = quantile(values, 0.25);
    s.median = quantile(values, 0.5);
    s.q3 = quantile(values, 0.75);
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    return s;
}

bool StrategyReport::conditional() const {
    int k = 0, kp = 0;
    bool cond = false;
    return parse_strategy_tag(strategy, k, kp, cond) && cond;
}

StrategyReport report(const std::vector<SolveRecord>& slice, const std::string& strategy) {
    StrategyReport r;
    r.strategy = strategy;
    std::vector<double> feasible_times, delta_vs;
    std::set<double> outages;
    for (const SolveRecord& rec : slice) {
        if (rec.strategy != strategy) continue;
        ++r.n_attempts;
        r.total_time += rec.wall_time;
        outages.insert(rec.scenario.delta_tau);
        if (rec.feasible()) {
            ++r.n_feasible;
            feasible_times.push_back(rec.wall_time);
            delta_vs.push_back(rec.delta_v);
        }
    }
    if (r.n_attempts == 0) {
        throw Error(ErrorKind::EmptyReport, "no records tagged " + strategy + " in the slice");
    }
    r.delta_tau = outages.size() == 1 ? *outages.begin() : kNaN;
    r.feasibility_ratio = 100.0 * static_cast<double>(r.n_feasible) / static_cast<double>(r.n_attempts);
    r.time_per_solution = r.n_feasible > 0 ? r.total_time / static_cast<double>(r.n_feasible)
                                           : std::numeric_limits<double>::infinity();
    r.mean_feasible_time =
        feasible_times.empty()
            ? kNaN
            : std::accumulate(feasible_times.begin(), feasible_times.end(), 0.0) /
                  static_cast<double>(feasible_times.size());
    r.median_feasible_time = median(feasible_times);
    r.delta_v = DeltaVSummary::of(std::move(delta_vs));
    return r;
}

StrategyReport cumulative(const StrategyReport& target, const StrategyReport& source) {
    const Tag t = parse_tag(target.strategy);
    const Tag s = parse_tag(source.strategy);
    if (!t.conditional) {
        throw Error(ErrorKind::Lineage, "cumulative metrics need a conditional target, got " + target.strategy);
    }
    if (s.k != t.k_prime) {
        throw Error(ErrorKind::Lineage, target.strategy + " cannot draw from " + source.strategy);
    }
    if (s.conditional && !source.cumulative_feasibility_ratio) {
        throw Error(ErrorKind::Lineage, "source " + source.strategy + " has unresolved lineage");
    }
    const double source_ratio = source.cumulative_feasibility_ratio.value_or(source.feasibility_ratio);
    const double source_time = source.cumulative_time.value_or(source.time_per_solution);
    StrategyReport out = target;
    out.cumulative_feasibility_ratio = source_ratio / 100.0 * target.feasibility_ratio;
    out.cumulative_time = source_time + target.time_per_solution;
    return out;
}

ArchiveReport summarize(const std::vector<SolveRecord>& records, Grouping grouping) {
    auto key_of = [grouping](const SolveRecord& r) {
        return GroupKey{r.strategy, r.scenario.delta_tau,
                        grouping == Grouping::PerScenario ? r.scenario.id() : std::string()};
    };

    std::map<GroupKey, std::vector<SolveRecord>> groups;
    std::unordered_map<std::string, const SolveRecord*> by_id;
    for (const SolveRecord& r : records) {
        groups[key_of(r)].push_back(r);
        by_id.emplace(r.id, &r);
    }

    std::map<GroupKey, StrategyReport> reports;
    for (const auto& [key, slice] : groups) {
        StrategyReport rep = report(slice, std::get<0>(key));
        rep.scenario = std::get<2>(key);
        reports.emplace(key, std::move(rep));
    }

    ArchiveReport out;
    std::map<GroupKey, bool> resolved;  // memo: true when cumulative fields are set
    std::set<GroupKey> visiting;

    std::function<bool(const GroupKey&)> resolve = [&](const GroupKey& key) -> bool {
        StrategyReport& rep = reports.at(key);
        if (!rep.conditional()) return true;
        if (auto it = resolved.find(key); it != resolved.end()) return it->second;
        if (!visiting.insert(key).second) return false;

        auto fail = [&](const std::string& why) {
            out.warnings.push_back(rep.strategy + " (outage " + cell(rep.delta_tau) + " TU" +
                                   (rep.scenario.empty() ? "" : ", " + rep.scenario) + "): " + why);
            resolved[key] = false;
            return false;
        };

        std::set<GroupKey> sources;
        for (const SolveRecord& r : groups.at(key)) {
            const auto it = by_id.find(r.provenance);
            if (it == by_id.end()) return fail("source " + r.provenance + " is not in the archive");
            if (!it->second->feasible()) return fail("source " + r.provenance + " is not feasible");
            sources.insert(key_of(*it->second));
        }
        if (sources.size() != 1) return fail("sources span several strategy groups");
        const GroupKey& source_key = *sources.begin();
        if (!resolve(source_key)) return fail("source group lineage is unresolved");
        try {
            rep = cumulative(rep, reports.at(source_key));
        } catch (const Error& e) {
            return fail(e.what());
        }
        resolved[key] = true;
        return true;
    };

    for (const auto& [key, rep] : reports) resolve(key);
    for (auto& [key, rep] : reports) out.reports.push_back(std::move(rep));
    return out;
}

void write_metrics_csv(std::ostream& out, const std::vector<StrategyReport>& reports) {
    out << "strategy,delta_tau_tu,scenario,n_attempts,n_feasible,ratio,time_per_solution,cum_ratio,"
           "cum_time,mean_time,median_time,dv_min,dv_q1,dv_median,dv_q3,dv_mean,dv_max\n";
    for (const StrategyReport& r : reports) {
        out << r.strategy << ',' << cell(r.delta_tau) << ',' << r.scenario << ',' << r.n_attempts << ','
            << r.n_feasible << ',' << cell(r.feasibility_ratio) << ',' << cell(r.time_per_solution) << ','
            << (r.cumulative_feasibility_ratio ? cell(*r.cumulative_feasibility_ratio) : "") << ','
            << (r.cumulative_time ? cell(*r.cumulative_time) : "") << ',' << cell(r.mean_feasible_time)
            << ',' << cell(r.median_feasible_time) << ',' << cell(r.delta_v.min) << ','
            << cell(r.delta_v.q1) << ',' << cell(r.delta_v.median) << ',' << cell(r.delta_v.q3) << ','
            << cell(r.delta_v.mean) << ',' << cell(r.delta_v.max) << '\n';
    }
}

void write_delta_v_csv(std::ostream& out, const std::vector<SolveRecord>& records) {
    out << "strategy,delta_tau_tu,delta_v_du_per_tu\n";
    for (const SolveRecord& r : records) {
        if (!r.feasible()) continue;
        out << r.strategy << ',' << cell(r.scenario.delta_tau) << ',' << cell(r.delta_v) << '\n';
    }
}

void print_report(std::ostream& out, const StrategyReport& r) {
    out << r.strategy << "  outage " << r.delta_tau << " TU";
    if (!r.scenario.empty()) out << "  scenario " << r.scenario;
    out << "\n  attempts " << r.n_attempts << ", feasible " << r.n_feasible << " (" << std::fixed
        << std::setprecision(2) << r.feasibility_ratio << "%)\n"
        << std::defaultfloat << std::setprecision(6) << "  time/solution " << r.time_per_solution
        << " s, total " << r.total_time << " s\n";
    if (r.n_feasible > 0) {
        out << "  feasible solve time mean " << r.mean_feasible_time << " s, median "
            << r.median_feasible_time << " s\n"
            << "  delta-v DU/TU min " << r.delta_v.min << ", q1 " << r.delta_v.q1 << ", median "
            << r.delta_v.median << ", q3 " << r.delta_v.q3 << ", mean " << r.delta_v.mean << ", max "
            << r.delta_v.max << '\n';
    }
    if (r.cumulative_feasibility_ratio) {
        out << "  cumulative ratio " << *r.cumulative_feasibility_ratio << "%, cumulative time/solution "
            << *r.cumulative_time << " s\n";
    }
}

}  // namespace robust_lt
