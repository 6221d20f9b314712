#pragma once

#include <optional>
#include <span>
#include <vector>

#include "robust_lt/dynamics.hpp"

namespace robust_lt {

inline constexpr double kDefaultIntegrationTolerance = 1e-12;

/// One constant-control (or ballistic) arc. tf < t0 integrates backward.
struct Arc {
    double t0 = 0.0;
    double tf = 0.0;
    SpacecraftState initial;
    std::optional<ControlSegment> control;
};

struct StepStats {
    int accepted = 0;
    int rejected = 0;
};

struct ArcResult {
    SpacecraftState final;
    Mat77 stm = Mat77::Identity();   // d(final)/d(initial)
    Mat73 csm = Mat73::Zero();       // d(final)/d(throttle, alpha, beta)
    StepStats stats;
};

/// Adaptive embedded Runge-Kutta (Fehlberg 7(8)) propagation of one arc, with
/// the variational equations dPhi/dt = A Phi, dPsi/dt = A Psi + B integrated
/// alongside when requested. tol is used as both absolute and relative bound.
ArcResult propagate(const Arc& arc, const DynamicsParams& params, bool with_sensitivities,
                    double tol = kDefaultIntegrationTolerance);

/// Propagate consecutive equal-duration arcs starting at t_start, threading
/// the final state of each into the next. Failures are rethrown as
/// PropagationError tagged with the failing segment index.
std::vector<ArcResult> propagate_chain(const SpacecraftState& initial,
                                       std::span<const ControlSegment> segments, double t_start,
                                       double seg_duration, const DynamicsParams& params,
                                       bool with_sensitivities,
                                       double tol = kDefaultIntegrationTolerance);

}  // namespace robust_lt
