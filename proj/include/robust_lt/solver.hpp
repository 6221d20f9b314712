#pragma once

// Augmented-Lagrangian local solver for bound-constrained equality programs,
// plus the feasibility report used on transcription solutions.

#include <optional>
#include <string>
#include <vector>

#include "robust_lt/nlp.hpp"
#include "robust_lt/transcription.hpp"

namespace robust_lt {

enum class SolveStatus { FeasibleOptimal, Feasible, Infeasible, Error };

const char* to_string(SolveStatus status);
std::optional<SolveStatus> parse_solve_status(const std::string& text);
inline bool is_feasible(SolveStatus s) {
    return s == SolveStatus::FeasibleOptimal || s == SolveStatus::Feasible;
}

struct SolverConfig {
    int max_iterations = 500;        // derivative evaluations
    double max_wall_time = 600.0;    // seconds; callers scale by (1 + k)
    double optimality_tolerance = 1e-6;
    double initial_penalty = 1.0;
    double penalty_growth = 10.0;
    double max_penalty = 1e12;
    double multiplier_update_ratio = 0.25;  // required violation reduction to update multipliers
    int max_inner_iterations = 30;
    int stall_iterations = 20;            // window without defect reduction
    int feasible_stall_iterations = 50;   // window without incumbent improvement
    double stall_reduction = 1e-12;       // relative defect-norm reduction over the window
    double feasible_stall_reduction = 1e-8;  // relative objective reduction over the window
    /// Fraction of each constraint tolerance the solver aims for. Reported
    /// status still uses the full tolerances.
    double feasibility_target = 1e-2;

    /// Throws InvalidInput when any field is out of range.
    void validate() const;
};

struct SolverResult {
    SolveStatus status = SolveStatus::Error;
    Eigen::VectorXd x;
    double objective = 0.0;
    Eigen::VectorXd constraints;
    int iterations = 0;
    int evaluations = 0;
    double kkt_residual = 0.0;
    std::string message;
    /// Augmented Lagrangian value at every accepted iterate, one list per
    /// subproblem (fixed multipliers and penalty).
    std::vector<std::vector<double>> merit_trace;
    /// Objective of the best feasible iterate after each iteration (NaN until one exists).
    std::vector<double> incumbent_trace;
};

/// Minimize f subject to c = 0 and the box bounds. x0 is projected onto the
/// box first. Returns the best feasible iterate (lowest objective) when one
/// was seen, otherwise the iterate with the smallest scaled violation.
/// Deterministic for fixed inputs as long as the wall-time cap is not hit.
SolverResult minimize(const NlpProblem& problem, const Eigen::VectorXd& x0,
                      const SolverConfig& config);

struct DefectNorms {
    double position = 0.0;
    double velocity = 0.0;
    double mass = 0.0;

    bool operator==(const DefectNorms&) const = default;
};

/// Outcome of one local solve of a transcribed problem, plus the search
/// metadata the archive needs to reconstruct lineage.
struct SolveRecord {
    std::string id;          // unique within an archive
    MteScenario scenario;
    std::string strategy;    // e.g. "S(1)" or "S(1|0)"
    std::string provenance;  // "sampled" or the id of the source record
    long seed_index = 0;
    SolveStatus status = SolveStatus::Error;
    std::vector<double> x;
    double objective = 0.0;            // -m_f of the reference leg
    std::vector<DefectNorms> defects;  // per leg
    double delta_v = 0.0;              // DU/TU
    double wall_time = 0.0;            // s, all local solves behind this record
    int iterations = 0;
    int hops = 0;           // basin-hopping perturbations tried
    int accepted_hops = 0;  // of which improved the incumbent
    std::string message;

    bool feasible() const { return is_feasible(status); }
};

/// Run the local solver on a transcription and package the outcome. Never
/// throws on evaluation failures; those become status error.
SolveRecord solve(const RobustTranscription& problem, const Eigen::VectorXd& x0,
                  const SolverConfig& config);

struct LegFeasibility {
    bool pass = false;
    double position = 0.0;  // norms of the defect blocks, nondimensional
    double velocity = 0.0;
    double mass = 0.0;
    std::vector<int> flagged;  // components (0..6) outside tolerance
};

struct FeasibilityReport {
    bool feasible = false;
    std::vector<LegFeasibility> legs;
    std::string error;  // set when the defects could not be evaluated
};

FeasibilityReport check_feasibility(const RobustTranscription& problem, const Eigen::VectorXd& x);

/// Same report from an already evaluated flattened defect vector.
FeasibilityReport feasibility_from_defects(const RobustTranscription& problem,
                                           const Eigen::VectorXd& defects);

}  // namespace robust_lt
