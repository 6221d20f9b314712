#include "robust_lt/transcription.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>

#include "robust_lt/errors.hpp"
#include "robust_lt/propagation.hpp"

namespace robust_lt {

std::vector<LegLayout> make_layouts(const LegLayout& reference, const MteScenario& scenario,
                                    Segmentation mode) {
    if (reference.n_segments < 1) {
        throw Error(ErrorKind::InvalidScenario, "reference needs at least one segment");
    }
    require_valid(scenario, reference.n_segments);
    std::vector<LegLayout> legs{reference};
    const int n_ref = reference.n_segments;
    for (const int n_omega : scenario.start_indices) {
        LegLayout leg = reference;
        if (mode == Segmentation::Adaptive) {
            leg.n_segments = n_ref - n_omega;
            leg.t_s_max = reference.t_s_max * static_cast<double>(n_ref - n_omega) / n_ref;
        }
        legs.push_back(leg);
    }
    return legs;
}

std::vector<LegLayout> make_layouts(int n_ref_segments, const MteScenario& scenario,
                                    Segmentation mode) {
    return make_layouts(LegLayout{n_ref_segments, 1.0, 1.0, 1.0, 1.0}, scenario, mode);
}

DecisionLayout::DecisionLayout(std::vector<LegLayout> legs) : legs_(std::move(legs)) {
    offsets_.reserve(legs_.size());
    for (const LegLayout& leg : legs_) {
        offsets_.push_back(size_);
        size_ += leg.size();
    }
}

LegValues read_leg(const DecisionLayout& layout, const Eigen::VectorXd& x, int leg) {
    LegValues v;
    v.t_s = x[layout.shooting_time(leg)];
    v.t_i = x[layout.initial_coast(leg)];
    v.t_f = x[layout.final_coast(leg)];
    const int n = layout.leg(leg).n_segments;
    v.controls.resize(n);
    for (int p = 0; p < n; ++p) {
        v.controls[p] = {x[layout.control(leg, p, 0)], x[layout.control(leg, p, 1)],
                         x[layout.control(leg, p, 2)]};
    }
    v.m_f = x[layout.final_mass(leg)];
    return v;
}

void write_leg(const DecisionLayout& layout, int leg, const LegValues& values,
               Eigen::VectorXd& x) {
    const int n = layout.leg(leg).n_segments;
    if (static_cast<int>(values.controls.size()) != n) {
        throw Error(ErrorKind::InvalidInput, "leg values do not match the layout segment count");
    }
    x[layout.shooting_time(leg)] = values.t_s;
    x[layout.initial_coast(leg)] = values.t_i;
    x[layout.final_coast(leg)] = values.t_f;
    for (int p = 0; p < n; ++p) {
        x[layout.control(leg, p, 0)] = values.controls[p].throttle;
        x[layout.control(leg, p, 1)] = values.controls[p].alpha;
        x[layout.control(leg, p, 2)] = values.controls[p].beta;
    }
    x[layout.final_mass(leg)] = values.m_f;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> decision_bounds(const DecisionLayout& layout) {
    Eigen::VectorXd lower = Eigen::VectorXd::Zero(layout.size());
    Eigen::VectorXd upper = Eigen::VectorXd::Zero(layout.size());
    for (int l = 0; l < layout.leg_count(); ++l) {
        const LegLayout& leg = layout.leg(l);
        upper[layout.shooting_time(l)] = leg.t_s_max;
        upper[layout.initial_coast(l)] = leg.t_i_max;
        upper[layout.final_coast(l)] = leg.t_f_max;
        for (int p = 0; p < leg.n_segments; ++p) {
            upper[layout.control(l, p, 0)] = 1.0;
            lower[layout.control(l, p, 1)] = -std::numbers::pi;
            upper[layout.control(l, p, 1)] = std::numbers::pi;
            lower[layout.control(l, p, 2)] = -0.5 * std::numbers::pi;
            upper[layout.control(l, p, 2)] = 0.5 * std::numbers::pi;
        }
        upper[layout.final_mass(l)] = leg.m_f_max;
    }
    return {lower, upper};
}

FeasibilityTolerances FeasibilityTolerances::from_physical(double km, double km_per_s, double kg,
                                                           const DynamicsParams& params) {
    return {km / params.length_unit, km_per_s / params.velocity_unit(), kg / params.mass_unit};
}

SparsityPattern structural_pattern(const DecisionLayout& layout, const MteScenario& scenario) {
    SparsityPattern pattern;
    pattern.rows = layout.constraint_count();
    pattern.cols = layout.size();

    for (int l = 0; l < layout.leg_count(); ++l) {
        const int n = layout.leg(l).n_segments;
        const bool backward_burns = n - layout.leg(l).matchpoint() > 0;
        const int n_omega = l == 0 ? 0 : scenario.start_indices[l - 1];

        std::vector<int> motion_cols;  // position and velocity rows
        std::vector<int> mass_cols;
        if (l > 0) {
            // Coupling to the reference through the inherited state and epoch.
            motion_cols.push_back(layout.initial_coast(0));
            if (n_omega > 1) {
                motion_cols.push_back(layout.shooting_time(0));
                mass_cols.push_back(layout.shooting_time(0));
            }
            for (int p = 0; p < n_omega - 1; ++p) {
                for (int c = 0; c < 3; ++c) motion_cols.push_back(layout.control(0, p, c));
                mass_cols.push_back(layout.control(0, p, 0));
            }
        }
        motion_cols.push_back(layout.shooting_time(l));
        motion_cols.push_back(layout.initial_coast(l));
        motion_cols.push_back(layout.final_coast(l));
        mass_cols.push_back(layout.shooting_time(l));
        for (int p = 0; p < n; ++p) {
            for (int c = 0; c < 3; ++c) motion_cols.push_back(layout.control(l, p, c));
            mass_cols.push_back(layout.control(l, p, 0));
        }
        if (backward_burns) motion_cols.push_back(layout.final_mass(l));
        mass_cols.push_back(layout.final_mass(l));

        std::sort(motion_cols.begin(), motion_cols.end());
        std::sort(mass_cols.begin(), mass_cols.end());
        for (int r = 0; r < 6; ++r) {
            for (const int c : motion_cols) pattern.entries.emplace_back(7 * l + r, c);
        }
        for (const int c : mass_cols) pattern.entries.emplace_back(7 * l + 6, c);
    }
    return pattern;
}

SparsityPattern build_sparsity(int n_ref_segments, const MteScenario& scenario,
                               Segmentation mode) {
    const DecisionLayout layout(make_layouts(n_ref_segments, scenario, mode));
    return structural_pattern(layout, scenario);
}

Eigen::VectorXd TranscriptionValue::flat() const {
    Eigen::VectorXd c(7 * defects.size());
    for (std::size_t l = 0; l < defects.size(); ++l) c.segment<7>(7 * l) = defects[l];
    return c;
}

namespace {

using SensitivityBlock = Eigen::Matrix<double, 7, Eigen::Dynamic>;

struct LegContext {
    int leg;
    int segment;  // 1-based, 0 for coasts
};

[[noreturn]] void rethrow_tagged(const Error& e, const LegContext& where) {
    const ErrorKind kind =
        e.kind() == ErrorKind::PropellantDepleted ? ErrorKind::PropellantDepleted
                                                  : ErrorKind::Evaluation;
    std::string message = (where.leg == 0 ? std::string("reference leg")
                                          : "realization leg " + std::to_string(where.leg - 1));
    if (where.segment > 0) message += ", segment " + std::to_string(where.segment);
    else message += ", coast arc";
    throw PropagationError(kind, message + ": " + e.what(), where.segment);
}

// Propagated state together with its derivative with respect to every
// decision variable.
template <bool WithSensitivities>
struct Tracker {
    Vec7 x;
    SensitivityBlock d;

    // Advance by `duration` (signed) under `control`. `duration_col` is the
    // decision variable driving the duration, with d(duration)/d(var) =
    // `duration_rate`; `control_col` is the first of the three control columns.
    void advance(double duration, const std::optional<ControlSegment>& control,
                 int duration_col, double duration_rate, int control_col,
                 const DynamicsParams& params, double tol, const LegContext& where) {
        ArcResult arc;
        try {
            arc = propagate(Arc{0.0, duration, SpacecraftState::from_vector(x), control}, params,
                            WithSensitivities, tol);
        } catch (const Error& e) {
            rethrow_tagged(e, where);
        }
        x = arc.final.to_vector();
        if constexpr (WithSensitivities) {
            d = (arc.stm * d).eval();
            if (control_col >= 0) d.middleCols<3>(control_col) += arc.csm;
            if (duration_col >= 0) {
                d.col(duration_col) += duration_rate * eval_vector_field(x, control, params);
            }
        }
    }
};

struct EpochTerm {
    int col;
    double rate;
};

}  // namespace

RobustTranscription::RobustTranscription(DynamicsParams params, BoundaryConditions boundary,
                                         LegLayout reference, MteScenario scenario,
                                         FeasibilityTolerances tolerances, double integration_tol)
    : params_(params),
      boundary_(std::move(boundary)),
      scenario_(std::move(scenario)),
      layout_(make_layouts(reference, scenario_)),
      tolerances_(tolerances),
      tol_(integration_tol) {
    params_.validate();
    if (!boundary_.target) throw Error(ErrorKind::InvalidInput, "missing target orbit");
    if (!(boundary_.m0() > 0.0)) throw Error(ErrorKind::InvalidInput, "m0 must be positive");
    std::tie(lower_, upper_) = decision_bounds(layout_);
    pattern_ = structural_pattern(layout_, scenario_);
}

template <bool WithSensitivities>
TranscriptionDerivatives RobustTranscription::run(const Eigen::VectorXd& x) const {
    if (x.size() != layout_.size()) {
        throw Error(ErrorKind::InvalidInput, "decision vector length does not match the layout");
    }
    if (!x.allFinite()) throw Error(ErrorKind::InvalidInput, "non-finite decision vector");

    const int n_cols = layout_.size();
    const int n_ref = layout_.leg(0).n_segments;
    const LegValues ref = read_leg(layout_, x, 0);

    auto start_tracker = [&](const Vec7& state) {
        Tracker<WithSensitivities> t;
        t.x = state;
        if constexpr (WithSensitivities) t.d = SensitivityBlock::Zero(7, n_cols);
        return t;
    };

    // Reference forward flow from the departure state, kept at every segment
    // boundary that a matchpoint or a realization start needs.
    int needed = layout_.leg(0).matchpoint();
    for (const int n_omega : scenario_.start_indices) needed = std::max(needed, n_omega - 1);
    std::vector<Tracker<WithSensitivities>> boundaries;
    boundaries.reserve(needed + 1);
    {
        auto t = start_tracker(boundary_.departure.to_vector());
        t.advance(ref.t_i, std::nullopt, layout_.initial_coast(0), 1.0, -1, params_, tol_, {0, 0});
        boundaries.push_back(t);
        const double h = ref.t_s / n_ref;
        for (int p = 1; p <= needed; ++p) {
            t.advance(h, ref.controls[p - 1], layout_.shooting_time(0), 1.0 / n_ref,
                      layout_.control(0, p - 1, 0), params_, tol_, {0, p});
            boundaries.push_back(t);
        }
    }

    TranscriptionDerivatives out;
    out.value.objective = -ref.m_f;
    out.value.defects.resize(layout_.leg_count());
    std::vector<SensitivityBlock> rows(layout_.leg_count());

    for (int l = 0; l < layout_.leg_count(); ++l) {
        const LegLayout& leg = layout_.leg(l);
        const LegValues v = l == 0 ? ref : read_leg(layout_, x, l);
        const int n = leg.n_segments;
        const int half = leg.matchpoint();
        const double h = v.t_s / n;

        // Forward half.
        Tracker<WithSensitivities> fwd;
        double epoch0 = 0.0;
        std::vector<EpochTerm> epoch_terms;
        if (l == 0) {
            fwd = boundaries[half];
        } else {
            const int n_omega = scenario_.start_indices[l - 1];
            fwd = boundaries[n_omega - 1];
            fwd.advance(scenario_.delta_tau, std::nullopt, -1, 0.0, -1, params_, tol_, {l, 0});
            fwd.advance(v.t_i, std::nullopt, layout_.initial_coast(l), 1.0, -1, params_, tol_,
                        {l, 0});
            for (int p = 1; p <= half; ++p) {
                fwd.advance(h, v.controls[p - 1], layout_.shooting_time(l), 1.0 / n,
                            layout_.control(l, p - 1, 0), params_, tol_, {l, p});
            }
            epoch0 = ref.t_i + (n_omega - 1) * ref.t_s / n_ref + scenario_.delta_tau;
            epoch_terms.push_back({layout_.initial_coast(0), 1.0});
            epoch_terms.push_back({layout_.shooting_time(0), static_cast<double>(n_omega - 1) / n_ref});
        }
        epoch_terms.push_back({layout_.initial_coast(l), 1.0});
        epoch_terms.push_back({layout_.shooting_time(l), 1.0});
        epoch_terms.push_back({layout_.final_coast(l), 1.0});
        const double arrival = epoch0 + v.t_i + v.t_s + v.t_f;

        // Backward half from the insertion point selected by the arrival epoch.
        Vec7 anchor;
        anchor << boundary_.target->state_at(arrival), v.m_f;
        auto bwd = start_tracker(anchor);
        if constexpr (WithSensitivities) {
            const Vec6 rate = boundary_.target->derivative_at(arrival);
            for (const EpochTerm& term : epoch_terms) {
                bwd.d.col(term.col).template head<6>() += term.rate * rate;
            }
            bwd.d(6, layout_.final_mass(l)) = 1.0;
        }
        bwd.advance(-v.t_f, std::nullopt, layout_.final_coast(l), -1.0, -1, params_, tol_, {l, 0});
        for (int p = n; p > half; --p) {
            bwd.advance(-h, v.controls[p - 1], layout_.shooting_time(l), -1.0 / n,
                        layout_.control(l, p - 1, 0), params_, tol_, {l, p});
        }

        out.value.defects[l] = fwd.x - bwd.x;
        if constexpr (WithSensitivities) rows[l] = fwd.d - bwd.d;
    }

    if constexpr (WithSensitivities) {
        out.gradient = Eigen::VectorXd::Zero(n_cols);
        out.gradient[layout_.final_mass(0)] = -1.0;
        std::vector<Eigen::Triplet<double>> triplets;
        triplets.reserve(pattern_.entries.size());
        for (const auto& [r, c] : pattern_.entries) {
            triplets.emplace_back(r, c, rows[r / 7](r % 7, c));
        }
        out.jacobian.resize(layout_.constraint_count(), n_cols);
        out.jacobian.setFromTriplets(triplets.begin(), triplets.end());
    }
    return out;
}

TranscriptionValue RobustTranscription::evaluate_defects(const Eigen::VectorXd& x) const {
    return run<false>(x).value;
}

TranscriptionDerivatives RobustTranscription::evaluate_jacobian(const Eigen::VectorXd& x) const {
    return run<true>(x);
}

RealizationStart RobustTranscription::realization_start(const Eigen::VectorXd& x,
                                                        int realization) const {
    if (realization < 0 || realization >= scenario_.depth()) {
        throw Error(ErrorKind::InvalidInput, "realization index out of range");
    }
    const LegValues ref = read_leg(layout_, x, 0);
    const int n_ref = layout_.leg(0).n_segments;
    const int n_omega = scenario_.start_indices[realization];

    Tracker<false> t;
    t.x = boundary_.departure.to_vector();
    t.advance(ref.t_i, std::nullopt, -1, 0.0, -1, params_, tol_, {0, 0});
    for (int p = 1; p < n_omega; ++p) {
        t.advance(ref.t_s / n_ref, ref.controls[p - 1], -1, 0.0, -1, params_, tol_, {0, p});
    }
    RealizationStart start;
    start.epoch = ref.t_i + (n_omega - 1) * ref.t_s / n_ref;
    start.at_outage = SpacecraftState::from_vector(t.x);
    t.advance(scenario_.delta_tau, std::nullopt, -1, 0.0, -1, params_, tol_, {realization + 1, 0});
    start.after_outage = SpacecraftState::from_vector(t.x);
    return start;
}

double RobustTranscription::delta_v(const Eigen::VectorXd& x) const {
    const double m_f = x[layout_.final_mass(0)];
    if (!(m_f > 0.0)) return std::numeric_limits<double>::infinity();
    return params_.isp_g * std::log(boundary_.m0() / m_f);
}

NlpValue RobustTranscription::evaluate(const Eigen::VectorXd& x) const {
    const TranscriptionValue v = evaluate_defects(x);
    return {v.objective, v.flat()};
}

NlpDerivatives RobustTranscription::evaluate_with_derivatives(const Eigen::VectorXd& x) const {
    TranscriptionDerivatives d = evaluate_jacobian(x);
    return {{d.value.objective, d.value.flat()}, std::move(d.gradient), std::move(d.jacobian)};
}

bool RobustTranscription::within_tolerance(const Eigen::VectorXd& c) const {
    const Eigen::VectorXd bound = component_tolerances();
    return c.size() == bound.size() && (c.cwiseAbs().array() <= bound.array()).all();
}

Eigen::VectorXd RobustTranscription::component_tolerances() const {
    Eigen::VectorXd bound(layout_.constraint_count());
    for (int l = 0; l < layout_.leg_count(); ++l) {
        bound.segment<3>(7 * l).setConstant(tolerances_.position);
        bound.segment<3>(7 * l + 3).setConstant(tolerances_.velocity);
        bound[7 * l + 6] = tolerances_.mass;
    }
    return bound;
}

Eigen::VectorXd RobustTranscription::constraint_scales() const {
    return component_tolerances().cwiseInverse();
}

}  // namespace robust_lt
