// Acceptance run: one PASS/FAIL line per criterion, exit status nonzero when
// any criterion fails. Tolerances and budgets are pinned below.
//
// Usage: acceptance [--quick] [--out DIR]
//   --quick shrinks the search budgets for a smoke run; the verdict lines then
//   say so and the search criteria are not meaningful.

#include <algorithm>
#include <cfloat>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "robust_lt/archive.hpp"
#include "robust_lt/config.hpp"
#include "robust_lt/errors.hpp"
#include "robust_lt/metrics.hpp"
#include "robust_lt/propagation.hpp"
#include "robust_lt/search.hpp"

using namespace robust_lt;
namespace fs = std::filesystem;

namespace {

// Criterion 3
constexpr int kJacobianSamples = 10;
constexpr double kJacobianRelTol = 1e-5;
constexpr double kJacobianAbsFloor = 1e-8;
constexpr double kJacobianIntegrationTol = 1e-14;
// Samples whose trajectories graze a primary are redrawn: inside this radius
// (about 4.4 lunar radii) neither the FD oracle nor the variational equations
// converge, and the arcs pass through the Moon itself.
constexpr double kJacobianMinPrimaryDistance = 0.02;
constexpr int kJacobianSubsteps = 40;
constexpr double kJacobianStep = 1e-4;      // relative FD step of the coarser estimate
constexpr double kJacobianResolved = 1e-5;  // agreement needed between the two estimates
constexpr double kJacobianMaxUnresolved = 0.01;  // fraction of entries the oracle may leave out
// Criterion 4
constexpr double kJacobiDriftTol = 1e-9;
constexpr double kStmGroupTol = 1e-8;
constexpr double kMassClosedFormTol = 1e-10;
// Criterion 6
constexpr int kSeedsNominal = 200;
constexpr int kMinFeasibleNominal = 5;
// Criterion 7: per configured depth-1 scenario, so 2 x 50 = 100 per strategy
constexpr int kSeedsPerRobustScenario = 50;
constexpr int kMinSeedsPerStrategy = 100;
// Criterion 9
constexpr double kMassContinuityTol = 1e-12;
constexpr double kReconstructionTol = 1e-9;
// Hop budget per feasible seed before the (1 + k) scaling.
constexpr int kHops = 1;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void verdict(int id, bool pass, const std::string& detail) {
    if (!pass) ++failures;
    std::cout << "criterion " << std::setw(2) << id << ": " << (pass ? "PASS" : "FAIL") << "  " << detail
              << std::endl;
}

std::string fmt(double v, int precision = 4) {
    std::ostringstream os;
    os << std::setprecision(precision) << v;
    return os.str();
}

// 1. Mapping counts.
void mapping_counts() {
    const auto t0 = Clock::now();
    const std::vector<std::tuple<int, int, long>> cases{{1, 2, 2}, {2, 3, 9}, {3, 4, 82}};
    bool ok = true;
    std::ostringstream detail;
    for (const auto& [kp, k, expected] : cases) {
        const long enumerated = static_cast<long>(enumerate_mappings(kp, k).size());
        long formula = 1;
        for (int i = 0; i < k; ++i) formula *= kp;
        formula += 1;
        ok &= enumerated == expected && formula == expected && count_realization_mappings(kp, k) == expected;
        detail << "(" << kp << "," << k << ")->" << enumerated << " ";
    }
    const double t = seconds_since(t0);
    ok &= t < 1.0;
    detail << "in " << fmt(t) << " s";
    verdict(1, ok, detail.str());
}

// 2. Decision and constraint counts.
void dimension_bookkeeping() {
    const auto t0 = Clock::now();
    bool ok = true;
    int checked = 0;
    int reference_50 = -1;
    for (const int n : {6, 20, 50, 100}) {
        std::vector<MteScenario> scenarios{{{}, 0.0}, {{n / 2}, 0.1}, {{2, n / 2, n - 1}, 0.1}};
        for (const MteScenario& s : scenarios) {
            for (const Segmentation mode : {Segmentation::Adaptive, Segmentation::Uniform}) {
                const DecisionLayout layout(make_layouts(n, s, mode));
                int expected = 3 * n + 4;
                for (const int n_omega : s.start_indices) {
                    expected += 3 * (mode == Segmentation::Adaptive ? n - n_omega : n) + 4;
                }
                ok &= layout.size() == expected;
                ok &= layout.constraint_count() == 7 + 7 * s.depth();
                ok &= layout.leg(0).size() == 3 * n + 4;
                if (n == 50) reference_50 = layout.leg(0).size();
                ++checked;
            }
        }
    }
    ok &= reference_50 == 154;
    const double t = seconds_since(t0);
    ok &= t < 1.0;
    verdict(2, ok, std::to_string(checked) + " layouts, N=50 reference length " + std::to_string(reference_50) +
                       ", " + fmt(t) + " s");
}

// Closest approach to either primary over every leg of x, sampled on a fine
// grid inside each segment.
double closest_approach(const RobustTranscription& problem, const Eigen::VectorXd& x) {
    const DynamicsParams& p = problem.params();
    const Vec3 earth(-p.mu, 0.0, 0.0);
    const Vec3 moon(1.0 - p.mu, 0.0, 0.0);
    double closest = DBL_MAX;
    auto fly = [&](SpacecraftState s, double dt, const std::optional<ControlSegment>& c) {
        for (int i = 0; i < kJacobianSubsteps; ++i) {
            s = propagate(Arc{0.0, dt / kJacobianSubsteps, s, c}, p, false, 1e-10).final;
            closest = std::min({closest, (s.r - earth).norm(), (s.r - moon).norm()});
        }
        return s;
    };
    const DecisionLayout& layout = problem.layout();
    double epoch = 0.0;
    for (int leg = 0; leg < layout.leg_count(); ++leg) {
        const LegValues v = read_leg(layout, x, leg);
        const int n = layout.leg(leg).n_segments;
        const int half = layout.leg(leg).matchpoint();
        const double h = v.t_s / n;
        SpacecraftState f = problem.boundary().departure;
        if (leg > 0) {
            const RealizationStart start = problem.realization_start(x, leg - 1);
            f = fly(start.at_outage, problem.scenario().delta_tau, std::nullopt);
            epoch = start.epoch + problem.scenario().delta_tau;
        }
        f = fly(f, v.t_i, std::nullopt);
        for (int q = 1; q <= half; ++q) f = fly(f, h, v.controls[q - 1]);
        const Vec6 target = problem.boundary().target->state_at(epoch + v.t_i + v.t_s + v.t_f);
        SpacecraftState b;
        b.r = target.head<3>();
        b.v = target.tail<3>();
        b.m = v.m_f;
        b = fly(b, -v.t_f, std::nullopt);
        for (int q = n; q > half; --q) b = fly(b, -h, v.controls[q - 1]);
    }
    return closest;
}

// 3. Analytic Jacobian against central differences on the desk problem.
//
// The oracle is Richardson-extrapolated central differences at two step sizes.
// An entry is compared only where the two estimates agree, since some entries
// (the final-coast columns, which differentiate the target-table residual
// through the backward flow) sit below what double-precision differencing can
// resolve. Unresolved entries are counted, reported with their columns and
// capped at a small fraction of the whole.
void jacobian_check(const RunConfig& desk) {
    const auto t0 = Clock::now();
    const std::vector<MteScenario> depths{{{}, 0.0}, {{10}, 0.5}, {{8, 14}, 0.5}};
    double worst = 0.0;
    int outside = 0;
    int redrawn = 0;
    int compared = 0;
    std::set<std::string> unresolved;
    int n_unresolved = 0;
    std::mt19937_64 rng(20240601);
    for (int i = 0; i < kJacobianSamples; ++i) {
        const MteScenario& s = depths[i % depths.size()];
        const RobustTranscription problem(desk.dynamics, desk.boundary, desk.reference, s, desk.tolerances,
                                          kJacobianIntegrationTol);
        Eigen::VectorXd x = fixtures::random_decision(problem, rng);
        while (closest_approach(problem, x) < kJacobianMinPrimaryDistance) {
            ++redrawn;
            x = fixtures::random_decision(problem, rng);
        }
        const TranscriptionDerivatives d = problem.evaluate_jacobian(x);
        const Eigen::MatrixXd analytic(d.jacobian);
        const Eigen::MatrixXd coarse = fixtures::fd_jacobian_richardson(problem, x, kJacobianStep);
        const Eigen::MatrixXd fine = fixtures::fd_jacobian_richardson(problem, x, kJacobianStep / 2);
        outside += fixtures::compare_jacobians(d.jacobian, fine, kJacobianAbsFloor).fd_outside_pattern;
        const DecisionLayout& layout = problem.layout();
        for (int r = 0; r < fine.rows(); ++r) {
            for (int c = 0; c < fine.cols(); ++c) {
                const double scale = std::max(std::abs(fine(r, c)), std::abs(analytic(r, c)));
                const double diff = std::abs(analytic(r, c) - fine(r, c));
                if (diff <= kJacobianAbsFloor) {
                    ++compared;
                    continue;
                }
                if (std::abs(coarse(r, c) - fine(r, c)) > kJacobianResolved * scale) {
                    ++n_unresolved;
                    bool final_coast = false;
                    for (int leg = 0; leg < layout.leg_count(); ++leg) final_coast |= c == layout.final_coast(leg);
                    unresolved.insert(final_coast ? "t_f" : "other");
                    continue;
                }
                ++compared;
                worst = std::max(worst, diff / scale);
            }
        }
    }
    std::string kinds;
    for (const std::string& k : unresolved) kinds += (kinds.empty() ? "" : "/") + k;
    const double t = seconds_since(t0);
    const bool enough = n_unresolved <= kJacobianMaxUnresolved * (compared + n_unresolved);
    verdict(3, worst < kJacobianRelTol && enough && outside == 0 && t < 300.0,
            "max relative error " + fmt(worst, 3) + " over " + std::to_string(compared) + " resolved entries in " +
                std::to_string(kJacobianSamples) + " samples (" + std::to_string(n_unresolved) +
                " unresolved by FD" + (kinds.empty() ? "" : ", columns " + kinds) + "; " + std::to_string(redrawn) +
                " grazing draws redrawn), FD entries outside pattern " + std::to_string(outside) + ", " + fmt(t) +
                " s");
}

// 4. Integrator fidelity.
void integrator_fidelity(const RunConfig& desk) {
    const auto t0 = Clock::now();
    const DynamicsParams& p = desk.dynamics;
    const Vec6 s6 = desk.boundary.target->state_at(0.0);
    SpacecraftState s;
    s.r = s6.head<3>();
    s.v = s6.tail<3>();
    s.m = 1.0;

    const ArcResult ten = propagate(Arc{0.0, 10.0, s, std::nullopt}, p, false, 1e-12);
    const double drift = std::abs(jacobi_constant(ten.final, p) - jacobi_constant(s, p));

    const ArcResult a = propagate(Arc{0.0, 1.3, s, std::nullopt}, p, true, 1e-12);
    const ArcResult b = propagate(Arc{1.3, 2.9, a.final, std::nullopt}, p, true, 1e-12);
    const ArcResult c = propagate(Arc{0.0, 2.9, s, std::nullopt}, p, true, 1e-12);
    const double group = (b.stm * a.stm - c.stm).cwiseAbs().maxCoeff();

    double mass = 0.0;
    for (const double throttle : {0.25, 0.6, 1.0}) {
        const double dt = 1.7;
        const ArcResult r = propagate(Arc{0.0, dt, s, ControlSegment{throttle, 0.4, 0.1}}, p, false, 1e-12);
        mass = std::max(mass, std::abs(r.final.m - (s.m - throttle * p.t_max / p.isp_g * dt)));
    }
    const double t = seconds_since(t0);
    verdict(4, drift < kJacobiDriftTol && group < kStmGroupTol && mass < kMassClosedFormTol && t < 60.0,
            "Jacobi drift " + fmt(drift, 3) + ", STM group residual " + fmt(group, 3) + ", mass error " +
                fmt(mass, 3) + ", " + fmt(t) + " s");
}

// 5. Sparsity study at N = 100 with twelve realizations.
void sparsity_study() {
    const auto t0 = Clock::now();
    MteScenario s;
    for (int k = 0; k < 12; ++k) s.start_indices.push_back(8 + 8 * k);
    s.delta_tau = 0.1;
    const std::size_t adaptive = build_sparsity(100, s, Segmentation::Adaptive).dense_entry_count();
    const std::size_t uniform = build_sparsity(100, s, Segmentation::Uniform).dense_entry_count();
    const std::size_t oracle_adaptive = fixtures::brute_force_dense_count(100, s, Segmentation::Adaptive);
    const std::size_t oracle_uniform = fixtures::brute_force_dense_count(100, s, Segmentation::Uniform);
    const double t = seconds_since(t0);
    verdict(5, adaptive < uniform && adaptive == oracle_adaptive && uniform == oracle_uniform && t < 10.0,
            "adaptive " + std::to_string(adaptive) + " (oracle " + std::to_string(oracle_adaptive) +
                "), uniform " + std::to_string(uniform) + " (oracle " + std::to_string(oracle_uniform) + "), " +
                fmt(t) + " s");
}

struct Tally {
    long attempts = 0;
    long feasible = 0;
    double wall = 0.0;
    std::vector<double> delta_v;

    void add(const std::vector<SolveRecord>& records) {
        for (const SolveRecord& r : records) {
            ++attempts;
            wall += r.wall_time;
            if (r.feasible()) {
                ++feasible;
                delta_v.push_back(r.delta_v);
            }
        }
    }
    double ratio() const { return attempts ? 100.0 * feasible / attempts : 0.0; }
    double mean_dv() const {
        return delta_v.empty() ? std::nan("")
                               : std::accumulate(delta_v.begin(), delta_v.end(), 0.0) / delta_v.size();
    }
};

// Independent check of one realization: rebuild its forward and backward
// halves with the public propagator, coasting through the outage window, and
// compare the matchpoint defect with the transcription's.
struct StructureCheck {
    bool ok = true;
    double worst_mass = 0.0;
    double worst_defect = 0.0;
    std::string problem;
};

void check_structure(const RunConfig& desk, const SolveRecord& record, StructureCheck& out) {
    const RobustTranscription problem = desk.problem(record.scenario);
    const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(record.x.data(), record.x.size());
    const DecisionLayout& layout = problem.layout();
    const DynamicsParams& p = desk.dynamics;
    const double tol = desk.integration_tolerance;
    const LegValues ref = read_leg(layout, x, 0);
    const int n_ref = layout.leg(0).n_segments;
    const TranscriptionValue value = problem.evaluate_defects(x);

    for (int r = 0; r < record.scenario.depth(); ++r) {
        const int n_omega = record.scenario.start_indices[r];
        const int leg = r + 1;
        if (layout.leg(leg).n_segments != n_ref - n_omega) {
            out.ok = false;
            out.problem = record.id + ": realization segment count";
        }

        // Reference flow up to the outage start.
        SpacecraftState s = propagate(Arc{0.0, ref.t_i, problem.boundary().departure, std::nullopt}, p, false, tol).final;
        double epoch = ref.t_i;
        for (int q = 1; q < n_omega; ++q) {
            s = propagate(Arc{epoch, epoch + ref.t_s / n_ref, s, ref.controls[q - 1]}, p, false, tol).final;
            epoch += ref.t_s / n_ref;
        }
        // Outage window: no control at all.
        const SpacecraftState after =
            propagate(Arc{epoch, epoch + record.scenario.delta_tau, s, std::nullopt}, p, false, tol).final;
        const RealizationStart start = problem.realization_start(x, r);
        const double mass_gap = std::max(std::abs(start.after_outage.m - s.m), std::abs(start.at_outage.m - s.m));
        out.worst_mass = std::max(out.worst_mass, mass_gap);
        if (mass_gap > kMassContinuityTol || after.m != s.m) {
            out.ok = false;
            out.problem = record.id + ": mass continuity";
        }

        // Realization leg rebuilt from the coasted state.
        const LegValues v = read_leg(layout, x, leg);
        const int n = layout.leg(leg).n_segments;
        const int half = layout.leg(leg).matchpoint();
        const double h = v.t_s / n;
        SpacecraftState f = propagate(Arc{0.0, v.t_i, after, std::nullopt}, p, false, tol).final;
        for (int q = 1; q <= half; ++q) f = propagate(Arc{0.0, h, f, v.controls[q - 1]}, p, false, tol).final;
        const double arrival = epoch + record.scenario.delta_tau + v.t_i + v.t_s + v.t_f;
        SpacecraftState b;
        const Vec6 target = problem.boundary().target->state_at(arrival);
        b.r = target.head<3>();
        b.v = target.tail<3>();
        b.m = v.m_f;
        b = propagate(Arc{0.0, -v.t_f, b, std::nullopt}, p, false, tol).final;
        for (int q = n; q > half; --q) b = propagate(Arc{0.0, -h, b, v.controls[q - 1]}, p, false, tol).final;
        const Vec7 rebuilt = f.to_vector() - b.to_vector();
        const double gap = (rebuilt - value.defects[leg]).cwiseAbs().maxCoeff();
        out.worst_defect = std::max(out.worst_defect, gap);
        if (gap > kReconstructionTol) {
            out.ok = false;
            out.problem = record.id + ": realization does not coast through the outage";
        }
    }
}

std::vector<SolveRecord> read_back(const fs::path& path) {
    const ArchiveContents c = read_archive(path);
    if (c.corrupt_lines != 0) throw Error(ErrorKind::Archive, "corrupt lines in " + path.string());
    return c.records;
}

// 10. Cumulative metrics on a hand-audited fixture archive.
void cumulative_metrics(const fs::path& out_dir) {
    auto make = [](const std::string& id, const std::string& tag, bool feasible, double wall, double dt,
                   std::vector<int> starts, const std::string& provenance) {
        SolveRecord r;
        r.id = id;
        r.strategy = tag;
        r.provenance = provenance;
        r.status = feasible ? SolveStatus::Feasible : SolveStatus::Infeasible;
        r.wall_time = wall;
        r.delta_v = feasible ? 0.1 : 0.0;
        r.scenario = MteScenario{std::move(starts), dt};
        return r;
    };
    // S(0): 8 attempts, 2 feasible, 4 s each -> 25 %, 16 s per solution.
    // S(2|0): 4 attempts from the two sources, 3 feasible, 2 s each -> 75 %, 8/3 s.
    // S(3|2): 5 attempts from the S(2|0) solutions, 1 feasible, 1 s each -> 20 %, 5 s.
    std::vector<SolveRecord> records;
    for (int i = 0; i < 8; ++i) records.push_back(make("a" + std::to_string(i), "S(0)", i < 2, 4.0, 0.0, {}, "sampled"));
    for (int i = 0; i < 4; ++i) {
        records.push_back(make("b" + std::to_string(i), "S(2|0)", i != 3, 2.0, 0.5, {5, 10}, "a" + std::to_string(i % 2)));
    }
    for (int i = 0; i < 5; ++i) {
        records.push_back(make("c" + std::to_string(i), "S(3|2)", i == 0, 1.0, 0.5, {5, 10, 15}, "b" + std::to_string(i % 3)));
    }
    const fs::path path = out_dir / "fixture_archive.jsonl";
    fs::remove(path);
    {
        ArchiveWriter w(path);
        for (const SolveRecord& r : records) w.append(r);
    }
    const ArchiveReport rep = summarize(read_back(path));
    bool ok = rep.warnings.empty() && rep.reports.size() == 3;
    std::ostringstream detail;
    if (ok) {
        const StrategyReport& s0 = rep.reports[0];
        const StrategyReport& s20 = rep.reports[1];
        const StrategyReport& s32 = rep.reports[2];
        const double direct_ratio = 25.0 / 100.0 * 75.0 / 100.0 * 20.0;
        const double direct_time = 16.0 + 8.0 / 3.0 + 5.0;
        ok &= s0.feasibility_ratio == 25.0 && s0.time_per_solution == 16.0 && !s0.cumulative_feasibility_ratio;
        ok &= s20.feasibility_ratio == 75.0 && s20.cumulative_feasibility_ratio &&
              *s20.cumulative_feasibility_ratio == 25.0 / 100.0 * 75.0 &&
              *s20.cumulative_time == 16.0 + s20.time_per_solution;
        ok &= s32.feasibility_ratio == 20.0 && s32.cumulative_feasibility_ratio &&
              std::abs(*s32.cumulative_feasibility_ratio - direct_ratio) <= 4 * DBL_EPSILON * direct_ratio &&
              std::abs(*s32.cumulative_time - direct_time) <= 4 * DBL_EPSILON * direct_time;
        // Two-level product and sum rules on the spec's numbers.
        StrategyReport src, tgt;
        src.strategy = "S(0)";
        src.feasibility_ratio = 10.0;
        src.time_per_solution = 2.0;
        tgt.strategy = "S(1|0)";
        tgt.feasibility_ratio = 50.0;
        tgt.time_per_solution = 3.0;
        const StrategyReport two = cumulative(tgt, src);
        ok &= *two.cumulative_feasibility_ratio == 5.0 && *two.cumulative_time == 5.0;
        detail << "S(3|2) cumulative " << fmt(*s32.cumulative_feasibility_ratio, 17) << "% vs direct "
               << fmt(direct_ratio, 17) << "%, time " << fmt(*s32.cumulative_time, 17) << " vs "
               << fmt(direct_time, 17);
    } else {
        detail << "fixture summary malformed";
    }
    verdict(10, ok, detail.str());
}

}  // namespace

int main(int argc, char** argv) {
    bool quick = false;
    fs::path out_dir = "acceptance_out";
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--quick") {
            quick = true;
        } else if (arg == "--out" && i + 1 < argc) {
            out_dir = argv[++i];
        } else {
            std::cerr << "usage: acceptance [--quick] [--out DIR]\n";
            return 1;
        }
    }
    fs::create_directories(out_dir);
    const auto start = Clock::now();

    try {
        const RunConfig desk = load_config(std::string(RLT_CONFIG_DIR) + "/desk.json");

        mapping_counts();
        dimension_bookkeeping();
        jacobian_check(desk);
        integrator_fidelity(desk);
        sparsity_study();

        // Searches on the shipped desk problem, archived like a CLI run.
        SearchConfig search = desk.search;
        search.workers = 1;
        search.mbh.hops = kHops;
        const int seeds_nominal = quick ? 12 : kSeedsNominal;
        const int seeds_robust = quick ? 4 : kSeedsPerRobustScenario;

        const fs::path archive_path = out_dir / "desk_archive.jsonl";
        fs::remove(archive_path);
        ArchiveWriter writer(archive_path);
        const RecordSink sink = [&writer](const SolveRecord& r) { writer.append(r); };

        auto t0 = Clock::now();
        search.n_seeds = seeds_nominal;
        const std::vector<SolveRecord> nominal = run_non_conditional(desk.problem(MteScenario{}), search, sink);
        Tally s0;
        s0.add(nominal);
        const double t_nominal = seconds_since(t0);
        verdict(6, s0.feasible >= kMinFeasibleNominal,
                "S(0) " + std::to_string(s0.feasible) + "/" + std::to_string(s0.attempts) + " feasible (" +
                    fmt(s0.ratio()) + "%), mean delta-v " + fmt(s0.mean_dv()) + " DU/TU, " + fmt(t_nominal) +
                    " s on one core" + (quick ? " [quick]" : ""));

        Tally s1, s10;
        std::vector<SolveRecord> robust;
        t0 = Clock::now();
        for (const MteScenario& scenario : desk.scenarios_at_depth(1)) {
            const RobustTranscription problem = desk.problem(scenario);
            search.n_seeds = seeds_robust;
            const auto plain = run_non_conditional(problem, search, sink);
            s1.add(plain);
            std::vector<SolveRecord> conditional;
            try {
                conditional = run_conditional(problem, nominal, 0, MappingPolicy::ReferenceOnly, search, sink);
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::NoSeeds) throw;
            }
            s10.add(conditional);
            robust.insert(robust.end(), plain.begin(), plain.end());
            robust.insert(robust.end(), conditional.begin(), conditional.end());
        }
        const double t_robust = seconds_since(t0);
        const long min_seeds = quick ? 1 : kMinSeedsPerStrategy;
        verdict(7, s1.attempts >= min_seeds && s10.attempts >= min_seeds && s10.ratio() >= s1.ratio(),
                "S(1|0) " + std::to_string(s10.feasible) + "/" + std::to_string(s10.attempts) + " (" +
                    fmt(s10.ratio()) + "%) vs S(1) " + std::to_string(s1.feasible) + "/" +
                    std::to_string(s1.attempts) + " (" + fmt(s1.ratio()) + "%), " + fmt(t_robust) + " s" +
                    (quick ? " [quick]" : ""));

        Tally k1;
        k1.add(robust);
        verdict(8, k1.feasible > 0 && s0.feasible > 0 && k1.mean_dv() >= s0.mean_dv(),
                "mean delta-v k=1 " + fmt(k1.mean_dv(), 6) + " (" + std::to_string(k1.feasible) +
                    " solutions) vs k=0 " + fmt(s0.mean_dv(), 6) + " (" + std::to_string(s0.feasible) +
                    " solutions) DU/TU");

        StructureCheck structure;
        int checked = 0;
        for (const SolveRecord& r : robust) {
            if (!r.feasible()) continue;
            check_structure(desk, r, structure);
            ++checked;
        }
        verdict(9, structure.ok && checked > 0,
                std::to_string(checked) + " feasible k=1 records, worst mass gap " + fmt(structure.worst_mass, 3) +
                    ", worst defect reconstruction gap " + fmt(structure.worst_defect, 3) +
                    (structure.problem.empty() ? "" : ", " + structure.problem));

        cumulative_metrics(out_dir);

        // 11. Rerun a batch with the same master seed into a second archive.
        {
            SearchConfig rerun = search;
            rerun.n_seeds = quick ? 3 : 10;
            const fs::path a = out_dir / "rerun_a.jsonl";
            const fs::path b = out_dir / "rerun_b.jsonl";
            std::string digests[2];
            int i = 0;
            for (const fs::path& path : {a, b}) {
                fs::remove(path);
                {
                    ArchiveWriter w(path);
                    const RecordSink s = [&w](const SolveRecord& r) { w.append(r); };
                    const auto first = run_non_conditional(desk.problem(MteScenario{}), rerun, s);
                    const MteScenario robust_scenario = desk.scenarios_at_depth(1).front();
                    try {
                        run_conditional(desk.problem(robust_scenario), first, 0, MappingPolicy::ReferenceOnly, rerun, s);
                    } catch (const Error& e) {
                        if (e.kind() != ErrorKind::NoSeeds) throw;
                    }
                }
                digests[i++] = archive_digest(read_back(path));
            }
            const std::size_t lines = read_back(a).size();
            verdict(11, digests[0] == digests[1] && lines > 0,
                    std::to_string(lines) + " records per run, digest " + digests[0].substr(0, 16) +
                        (digests[0] == digests[1] ? " == " : " != ") + digests[1].substr(0, 16));
        }

        std::ofstream metrics(out_dir / "desk_metrics.csv");
        write_metrics_csv(metrics, summarize(read_back(archive_path)).reports);
        std::ofstream dv(out_dir / "desk_delta_v.csv");
        write_delta_v_csv(dv, read_back(archive_path));
    } catch (const std::exception& e) {
        std::cout << "acceptance aborted: " << e.what() << std::endl;
        return 1;
    }

    std::cout << "total " << fmt(seconds_since(start)) << " s, " << failures << " failing criteria" << std::endl;
    return failures == 0 ? 0 : 1;
}
