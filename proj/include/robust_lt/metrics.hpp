#pragma once

// Performance metrics over archived solve records: feasibility ratio, time
// per solution and delta-v spread, plus cumulative variants that follow a
// conditional strategy back through its source records.

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "robust_lt/solver.hpp"

namespace robust_lt {

/// Five-number summary plus mean. Quartiles use linear interpolation between
/// order statistics (R type 7). All NaN when there are no samples.
struct DeltaVSummary {
    int count = 0;
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double mean = 0.0;
    double max = 0.0;

    static DeltaVSummary of(std::vector<double> values);
};

struct StrategyReport {
    std::string strategy;
    double delta_tau = 0.0;  // TU; NaN when the slice mixes outage durations
    std::string scenario;    // scenario id when reported per scenario, else empty
    long n_attempts = 0;
    long n_feasible = 0;
    double feasibility_ratio = 0.0;  // percent
    double total_time = 0.0;         // s, wall time of every attempt
    /// total_time / n_feasible; infinite when nothing is feasible.
    double time_per_solution = 0.0;
    double mean_feasible_time = 0.0;    // s, over feasible records only
    double median_feasible_time = 0.0;
    DeltaVSummary delta_v;              // DU/TU, feasible records only
    std::optional<double> cumulative_feasibility_ratio;  // percent
    std::optional<double> cumulative_time;               // s per solution

    bool conditional() const;
};

/// Report over the records of `slice` tagged `strategy`. Throws EmptyReport
/// when none match.
StrategyReport report(const std::vector<SolveRecord>& slice, const std::string& strategy);

/// Fold a source report into a conditional target: ratios multiply and times
/// per solution add. A source that carries its own cumulative values
/// contributes those, so chains compose. Throws Lineage when the target is
/// not conditional or the source depth differs from the target's k'.
StrategyReport cumulative(const StrategyReport& target, const StrategyReport& source);

enum class Grouping { Aggregated, PerScenario };

struct ArchiveReport {
    std::vector<StrategyReport> reports;  // sorted by strategy, then outage, then scenario
    std::vector<std::string> warnings;    // lineage that could not be resolved
};

/// One report per (strategy, outage duration), or per scenario, with
/// cumulative fields filled for conditional groups whose records all trace
/// back to feasible archived sources lying in a single group.
ArchiveReport summarize(const std::vector<SolveRecord>& records,
                        Grouping grouping = Grouping::Aggregated);

/// CSV with the header
/// strategy,delta_tau_tu,scenario,n_attempts,n_feasible,ratio,time_per_solution,
/// cum_ratio,cum_time,mean_time,median_time,dv_min,dv_q1,dv_median,dv_q3,dv_mean,dv_max.
/// Cumulative cells are empty where undefined.
void write_metrics_csv(std::ostream& out, const std::vector<StrategyReport>& reports);

/// Long format for box plots: strategy,delta_tau_tu,delta_v_du_per_tu, one
/// row per feasible record.
void write_delta_v_csv(std::ostream& out, const std::vector<SolveRecord>& records);

/// Human-readable multi-line summary.
void print_report(std::ostream& out, const StrategyReport& report);

}  // namespace robust_lt
