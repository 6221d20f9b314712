#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace robust_lt {

/// Missed-thrust scenario for problem P_k: realization k starts at the
/// beginning of reference segment start_indices[k] (1-based) and coasts for
/// delta_tau TU before it may thrust again.
struct MteScenario {
    std::vector<int> start_indices;
    double delta_tau = 0.0;

    int depth() const { return static_cast<int>(start_indices.size()); }
    /// Stable textual id, e.g. "k1:n10:dt0.115".
    std::string id() const;

    bool operator==(const MteScenario&) const = default;
};

struct ScenarioViolation {
    enum class Kind { IndexRange, Ordering, Duration };
    Kind kind;
    std::string message;
};

/// Total classification of a scenario against an N-segment reference; an
/// empty result means the scenario is valid. Never throws.
std::vector<ScenarioViolation> validate(const MteScenario& scenario, int n_ref_segments);

/// Throws InvalidScenario listing every violation.
void require_valid(const MteScenario& scenario, int n_ref_segments);

struct WeibullParams {
    double shape = 1.0;
    double scale = 1.0;  // TU
};

struct CoverageStats {
    double p_zero = 0.0;          // P(no MTE over the horizon)
    double p_one = 0.0;           // P(exactly one)
    double p_two_or_more = 0.0;
    double duration_coverage = 0.0;  // fraction of sampled durations <= cap
    int n_samples = 0;
};

/// Monte-Carlo coverage of the single-MTE restriction: MTE counts over the
/// horizon are Poisson(rate * horizon), outage durations Weibull(shape, scale).
CoverageStats sample_mte_coverage(const WeibullParams& duration, double rate, double horizon,
                                  double duration_cap, int n_samples, std::mt19937_64& rng);

}  // namespace robust_lt
