#pragma once

// Initial-guess strategies: non-conditional S(k) draws uniform seeds and
// refines feasible ones by monotonic basin hopping, conditional S(k|k')
// maps solved depth-k' records into the depth-k decision space.

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "robust_lt/solver.hpp"
#include "robust_lt/transcription.hpp"

namespace robust_lt {

/// Componentwise box the seeds are drawn from. Equal to the transcription's
/// decision bounds, so realization shooting times are already truncated.
struct SamplingBounds {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;

    static SamplingBounds for_problem(const RobustTranscription& problem);
    Eigen::VectorXd clamp(const Eigen::VectorXd& x) const;
};

/// Every component i.i.d. uniform within its bounds.
Eigen::VectorXd sample_initial_guess(const SamplingBounds& bounds, std::mt19937_64& rng);

/// Where a target realization takes its initial guess from.
struct MappingChoice {
    bool from_reference = true;
    int source_realization = -1;  // 0-based, used when !from_reference

    static MappingChoice reference() { return {true, -1}; }
    static MappingChoice realization(int j) { return {false, j}; }
    bool operator==(const MappingChoice&) const = default;
};

struct MappingSpec {
    int source_depth = 0;
    int target_depth = 0;
    std::vector<MappingChoice> assignment;  // one per target realization

    /// Throws InvalidInput unless k > k' >= 0 and the assignment fits.
    void validate() const;
    std::string label() const;  // "ref" or e.g. "r0,r1,r0"
    bool operator==(const MappingSpec&) const = default;
};

/// k'^k + 1 for k' >= 1 and 1 for k' = 0. Throws InvalidInput when k <= k'.
long count_realization_mappings(int k_prime, int k);

/// All mappings where every target realization is in the same choice class:
/// either all from the reference, or all from source realizations.
std::vector<MappingSpec> enumerate_mappings(int k_prime, int k);

/// The default policy's single map: every realization from the reference.
MappingSpec reference_mapping(int k_prime, int k);

/// Build a depth-k initial guess from a feasible depth-k' record. The target
/// reference leg is the source reference verbatim. A realization mapped from
/// the reference takes the reference controls after its start segment, with
/// T_i = 0, T_s shortened in proportion to the segment count, and T_f, m_f
/// copied. A realization mapped from a source realization copies that leg,
/// aligning segments at the terminal end and padding early ones with zero
/// throttle. The result is clamped into the target bounds.
Eigen::VectorXd map_solution(const SolveRecord& source, const RobustTranscription& target,
                             const MappingSpec& spec);

/// Same as map_solution but without the final clamp, for structural checks.
Eigen::VectorXd map_solution_unclamped(const SolveRecord& source,
                                       const RobustTranscription& target,
                                       const MappingSpec& spec);

struct MbhConfig {
    int hops = 4;               // per feasible seed, scaled by (1 + k)
    double hop_fraction = 0.05;  // half-width of the hop as a fraction of each bound range
};

struct SearchConfig {
    int n_seeds = 10;
    std::uint64_t master_seed = 0;
    int workers = 1;
    SolverConfig solver;  // max_wall_time is per solve, scaled by (1 + k)
    MbhConfig mbh;
};

/// Called once per finished record, in seed order, from one thread at a time.
using RecordSink = std::function<void(const SolveRecord&)>;

std::string strategy_tag(int k);
std::string strategy_tag(int k, int k_prime);

/// Parse "S(k)" or "S(k|k')". Returns false on malformed tags.
bool parse_strategy_tag(const std::string& tag, int& k, int& k_prime, bool& conditional);

/// Independent stream for one seed index; identical regardless of scheduling.
std::mt19937_64 seed_stream(std::uint64_t master_seed, std::uint64_t index);

struct MbhOutcome {
    SolveRecord record;                       // final incumbent, counters accumulated
    std::vector<double> incumbent_objectives;  // first feasible, then each accepted hop
};

/// Monotonic basin hopping from a feasible record: perturb the incumbent,
/// re-solve, and accept only strict objective improvements.
MbhOutcome basin_hop(const RobustTranscription& problem, const SolveRecord& start, int hops,
                     double hop_fraction, const SolverConfig& solver, std::mt19937_64& rng);

/// S(k) over n_seeds uniform seeds. Every seed yields one record, its final
/// incumbent, tagged S(k). Failures are recorded and the batch continues.
std::vector<SolveRecord> run_non_conditional(const RobustTranscription& problem,
                                             const SearchConfig& config,
                                             const RecordSink& sink = {});

enum class MappingPolicy { ReferenceOnly, AllMappings };

/// S(k|k') seeded from the feasible depth-k' records among `sources` that are
/// compatible with the target (same reference size and, for k' >= 1, the
/// same outage duration). n_seeds caps the number of solves when positive.
/// Throws NoSeeds when nothing usable is found.
std::vector<SolveRecord> run_conditional(const RobustTranscription& target,
                                         const std::vector<SolveRecord>& sources, int k_prime,
                                         MappingPolicy policy, const SearchConfig& config,
                                         const RecordSink& sink = {});

}  // namespace robust_lt
