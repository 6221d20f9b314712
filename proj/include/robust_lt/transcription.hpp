#pragma once

// Forward-backward multiple-shooting transcription of the restricted
// missed-thrust problem: one reference leg plus one realization leg per MTE
// start index, each leg laid out as (T_s, T_i, T_f, u_1..u_N, m_f).

#include <memory>
#include <utility>
#include <vector>

#include "robust_lt/dynamics.hpp"
#include "robust_lt/nlp.hpp"
#include "robust_lt/orbit.hpp"
#include "robust_lt/scenario.hpp"

namespace robust_lt {

struct LegLayout {
    int n_segments = 0;
    double t_s_max = 0.0;  // TU
    double t_i_max = 0.0;  // TU
    double t_f_max = 0.0;  // TU
    double m_f_max = 0.0;  // MU

    /// 3 N + 4 decision components.
    int size() const { return 3 * n_segments + 4; }
    /// Segment index (1-based) of the last segment on the forward side of the matchpoint.
    int matchpoint() const { return (n_segments + 1) / 2; }
};

enum class Segmentation { Adaptive, Uniform };

/// Reference layout followed by one layout per realization. Adaptive
/// segmentation gives realization k N - n_k segments and a shooting-time cap
/// truncated by (N - n_k) / N; uniform keeps N segments and the full cap.
std::vector<LegLayout> make_layouts(const LegLayout& reference, const MteScenario& scenario,
                                    Segmentation mode = Segmentation::Adaptive);

/// Layout with unit time/mass caps; used where only counts matter.
std::vector<LegLayout> make_layouts(int n_ref_segments, const MteScenario& scenario,
                                    Segmentation mode = Segmentation::Adaptive);

/// Column bookkeeping for the flattened decision vector.
class DecisionLayout {
public:
    explicit DecisionLayout(std::vector<LegLayout> legs);

    int leg_count() const { return static_cast<int>(legs_.size()); }
    const LegLayout& leg(int i) const { return legs_[i]; }
    const std::vector<LegLayout>& legs() const { return legs_; }
    int offset(int i) const { return offsets_[i]; }
    int size() const { return size_; }
    int constraint_count() const { return 7 * leg_count(); }

    int shooting_time(int leg) const { return offsets_[leg]; }
    int initial_coast(int leg) const { return offsets_[leg] + 1; }
    int final_coast(int leg) const { return offsets_[leg] + 2; }
    /// segment is 0-based; component 0 throttle, 1 alpha, 2 beta.
    int control(int leg, int segment, int component) const {
        return offsets_[leg] + 3 + 3 * segment + component;
    }
    int final_mass(int leg) const { return offsets_[leg] + 3 + 3 * legs_[leg].n_segments; }

private:
    std::vector<LegLayout> legs_;
    std::vector<int> offsets_;
    int size_ = 0;
};

/// Typed view of one leg's decision components.
struct LegValues {
    double t_s = 0.0;
    double t_i = 0.0;
    double t_f = 0.0;
    std::vector<ControlSegment> controls;
    double m_f = 0.0;
};

LegValues read_leg(const DecisionLayout& layout, const Eigen::VectorXd& x, int leg);
void write_leg(const DecisionLayout& layout, int leg, const LegValues& values, Eigen::VectorXd& x);

/// Box bounds realizing the control-variable bound table: times in [0, max],
/// throttle in [0, 1], alpha in [-pi, pi], beta in [-pi/2, pi/2], m_f in [0, max].
std::pair<Eigen::VectorXd, Eigen::VectorXd> decision_bounds(const DecisionLayout& layout);

struct BoundaryConditions {
    SpacecraftState departure;                    // fixed; departure.m is m0
    std::shared_ptr<const PeriodicOrbit> target;  // arrival orbit, phase 0 at epoch 0

    double m0() const { return departure.m; }
};

/// Matchpoint tolerances in nondimensional units, applied as closed tests on
/// every position, velocity and mass defect component.
struct FeasibilityTolerances {
    double position = 0.0;
    double velocity = 0.0;
    double mass = 0.0;

    /// Convert from km, km/s and kg.
    static FeasibilityTolerances from_physical(double km, double km_per_s, double kg,
                                               const DynamicsParams& params);
};

struct SparsityPattern {
    int rows = 0;
    int cols = 0;
    std::vector<std::pair<int, int>> entries;  // (row, col), row-major sorted

    std::size_t dense_entry_count() const { return entries.size(); }
};

/// Structural nonzeros of d(defects)/dx for the given legs.
SparsityPattern structural_pattern(const DecisionLayout& layout, const MteScenario& scenario);

/// Structural pattern for an N-segment reference under the given segmentation.
SparsityPattern build_sparsity(int n_ref_segments, const MteScenario& scenario,
                               Segmentation mode);

struct TranscriptionValue {
    double objective = 0.0;
    std::vector<Vec7> defects;  // forward minus backward matchpoint state, per leg

    Eigen::VectorXd flat() const;
};

struct TranscriptionDerivatives {
    TranscriptionValue value;
    Eigen::VectorXd gradient;
    SparseMatrix jacobian;  // 7 + 7K rows, structural pattern entries only
};

/// State of realization k where its reference flow is interrupted.
struct RealizationStart {
    double epoch = 0.0;               // tau_1
    SpacecraftState at_outage;        // reference state at tau_1
    SpacecraftState after_outage;     // after the ballistic coast of delta_tau
};

class RobustTranscription final : public NlpProblem {
public:
    RobustTranscription(DynamicsParams params, BoundaryConditions boundary, LegLayout reference,
                        MteScenario scenario, FeasibilityTolerances tolerances,
                        double integration_tol = 1e-12);

    const DynamicsParams& params() const { return params_; }
    const BoundaryConditions& boundary() const { return boundary_; }
    const MteScenario& scenario() const { return scenario_; }
    const DecisionLayout& layout() const { return layout_; }
    const FeasibilityTolerances& tolerances() const { return tolerances_; }
    double integration_tolerance() const { return tol_; }
    const SparsityPattern& pattern() const { return pattern_; }

    TranscriptionValue evaluate_defects(const Eigen::VectorXd& x) const;
    TranscriptionDerivatives evaluate_jacobian(const Eigen::VectorXd& x) const;
    RealizationStart realization_start(const Eigen::VectorXd& x, int realization) const;

    /// Delta-v of the reference leg from the rocket equation.
    double delta_v(const Eigen::VectorXd& x) const;

    int variable_count() const override { return layout_.size(); }
    int constraint_count() const override { return layout_.constraint_count(); }
    const Eigen::VectorXd& lower_bounds() const override { return lower_; }
    const Eigen::VectorXd& upper_bounds() const override { return upper_; }
    NlpValue evaluate(const Eigen::VectorXd& x) const override;
    NlpDerivatives evaluate_with_derivatives(const Eigen::VectorXd& x) const override;
    bool within_tolerance(const Eigen::VectorXd& constraints) const override;
    Eigen::VectorXd constraint_scales() const override;

    /// Per-row tolerance bound matching the flattened defect vector.
    Eigen::VectorXd component_tolerances() const;

private:
    template <bool WithSensitivities>
    TranscriptionDerivatives run(const Eigen::VectorXd& x) const;

    DynamicsParams params_;
    BoundaryConditions boundary_;
    MteScenario scenario_;
    DecisionLayout layout_;
    FeasibilityTolerances tolerances_;
    double tol_;
    Eigen::VectorXd lower_, upper_;
    SparsityPattern pattern_;
};

}  // namespace robust_lt
