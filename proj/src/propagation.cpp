#include "robust_lt/propagation.hpp"

#include <array>
#include <cmath>
#include <string>

#include <boost/numeric/odeint.hpp>

#include "robust_lt/errors.hpp"

namespace robust_lt {

namespace {

namespace odeint = boost::numeric::odeint;

constexpr int kMaxSteps = 500000;
constexpr int kStateSize = 7;
constexpr int kAugmentedSize = 7 + 49 + 21;

template <std::size_t N>
using OdeState = std::array<double, N>;

struct BallisticOrControlled {
    const DynamicsParams& params;
    const std::optional<ControlSegment>& control;

    void operator()(const OdeState<kStateSize>& z, OdeState<kStateSize>& dz, double) const {
        const Eigen::Map<const Vec7> x(z.data());
        Eigen::Map<Vec7>(dz.data()) = eval_vector_field(Vec7(x), control, params);
    }
};

struct Variational {
    const DynamicsParams& params;
    const std::optional<ControlSegment>& control;

    void operator()(const OdeState<kAugmentedSize>& z, OdeState<kAugmentedSize>& dz,
                    double) const {
        const Vec7 x = Eigen::Map<const Vec7>(z.data());
        const Eigen::Map<const Mat77> phi(z.data() + 7);
        const Eigen::Map<const Mat73> psi(z.data() + 56);

        const FieldJacobian jac = eval_field_jacobian(x, control, params);
        Eigen::Map<Vec7>(dz.data()) = eval_vector_field(x, control, params);
        Eigen::Map<Mat77>(dz.data() + 7).noalias() = jac.state * phi;
        Eigen::Map<Mat73>(dz.data() + 56).noalias() = jac.state * psi + jac.control;
    }
};

template <std::size_t N, typename System>
StepStats integrate(const System& system, OdeState<N>& z, double t0, double tf, double tol) {
    using Stepper = odeint::runge_kutta_fehlberg78<OdeState<N>>;
    auto stepper = odeint::make_controlled<Stepper>(tol, tol);

    StepStats stats;
    const double span = tf - t0;
    if (span == 0.0) return stats;
    const double direction = span > 0.0 ? 1.0 : -1.0;

    double t = t0;
    double dt = direction * std::min(std::abs(span), 1e-2);
    while (direction * (tf - t) > 0.0) {
        if (direction * (t + dt - tf) > 0.0) dt = tf - t;
        // Land exactly on tf when the remaining interval is below round-off.
        if (std::abs(tf - t) <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t))) {
            break;
        }
        const odeint::controlled_step_result result = stepper.try_step(system, z, t, dt);
        if (result == odeint::success) {
            ++stats.accepted;
            if (!std::isfinite(z[6]) || z[6] <= 0.0) {
                throw PropagationError(ErrorKind::PropellantDepleted,
                                       "mass reached zero during propagation");
            }
        } else {
            ++stats.rejected;
        }
        if (std::abs(dt) < 1e-13 * std::max(1.0, std::abs(t))) {
            throw PropagationError(ErrorKind::Singularity,
                                   "step size underflow at t = " + std::to_string(t));
        }
        if (stats.accepted + stats.rejected > kMaxSteps) {
            throw PropagationError(ErrorKind::Singularity, "step budget exhausted");
        }
    }
    return stats;
}

void check_tolerance(double tol) {
    if (!(tol >= 1e-14 && tol <= 1e-6)) {
        throw Error(ErrorKind::InvalidInput, "integration tolerance must lie in [1e-14, 1e-6]");
    }
}

}  // namespace

ArcResult propagate(const Arc& arc, const DynamicsParams& params, bool with_sensitivities,
                    double tol) {
    check_tolerance(tol);
    const Vec7 x0 = arc.initial.to_vector();
    if (!x0.allFinite() || !std::isfinite(arc.t0) || !std::isfinite(arc.tf)) {
        throw PropagationError(ErrorKind::InvalidInput, "non-finite arc input");
    }
    if (x0[6] <= 0.0) {
        throw PropagationError(ErrorKind::SingularMass, "spacecraft mass must be positive");
    }

    ArcResult result;
    try {
        if (with_sensitivities) {
            OdeState<kAugmentedSize> z{};
            Eigen::Map<Vec7>(z.data()) = x0;
            Eigen::Map<Mat77>(z.data() + 7).setIdentity();
            Eigen::Map<Mat73>(z.data() + 56).setZero();
            result.stats = integrate(Variational{params, arc.control}, z, arc.t0, arc.tf, tol);
            result.final = SpacecraftState::from_vector(Eigen::Map<const Vec7>(z.data()));
            result.stm = Eigen::Map<const Mat77>(z.data() + 7);
            result.csm = Eigen::Map<const Mat73>(z.data() + 56);
        } else {
            OdeState<kStateSize> z{};
            Eigen::Map<Vec7>(z.data()) = x0;
            result.stats = integrate(BallisticOrControlled{params, arc.control}, z, arc.t0,
                                     arc.tf, tol);
            result.final = SpacecraftState::from_vector(Eigen::Map<const Vec7>(z.data()));
        }
    } catch (const PropagationError&) {
        throw;
    } catch (const Error& e) {
        // A non-positive mass seen inside a stage means the arc ran dry.
        const ErrorKind kind =
            e.kind() == ErrorKind::SingularMass ? ErrorKind::PropellantDepleted : e.kind();
        throw PropagationError(kind, e.what());
    }
    if (!result.final.to_vector().allFinite()) {
        throw PropagationError(ErrorKind::Singularity, "propagation produced non-finite state");
    }
    return result;
}

std::vector<ArcResult> propagate_chain(const SpacecraftState& initial,
                                       std::span<const ControlSegment> segments, double t_start,
                                       double seg_duration, const DynamicsParams& params,
                                       bool with_sensitivities, double tol) {
    if (segments.empty()) {
        throw Error(ErrorKind::InvalidInput, "propagate_chain needs at least one segment");
    }
    if (seg_duration == 0.0) {
        throw Error(ErrorKind::InvalidInput, "segment duration must be non-zero");
    }
    std::vector<ArcResult> results;
    results.reserve(segments.size());
    SpacecraftState state = initial;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const double t0 = t_start + static_cast<double>(i) * seg_duration;
        Arc arc{t0, t0 + seg_duration, state, segments[i]};
        try {
            results.push_back(propagate(arc, params, with_sensitivities, tol));
        } catch (const PropagationError& e) {
            throw PropagationError(e.kind(),
                                   "segment " + std::to_string(i) + ": " + e.what(),
                                   static_cast<int>(i));
        }
        state = results.back().final;
    }
    return results;
}

}  // namespace robust_lt
