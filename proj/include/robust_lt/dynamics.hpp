#pragma once

// Controlled circular restricted three-body dynamics with mass flow, in the
// rotating barycentric frame and nondimensional units (DU, TU, MU).

#include <optional>

#include <Eigen/Dense>

namespace robust_lt {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Vec7 = Eigen::Matrix<double, 7, 1>;
using Mat33 = Eigen::Matrix3d;
using Mat77 = Eigen::Matrix<double, 7, 7>;
using Mat73 = Eigen::Matrix<double, 7, 3>;

/// Standard gravity in km/s^2, used for specific-impulse conversions.
inline constexpr double kStandardGravityKmS2 = 9.80665e-3;

struct DynamicsParams {
    double mu = 0.01215;
    double t_max = 0.05;             // nondimensional force, MU*DU/TU^2
    double isp_g = 20.0;             // exhaust velocity, DU/TU
    double length_unit = 384400.0;   // km per DU
    double time_unit = 375190.0;     // s per TU
    double mass_unit = 1000.0;       // kg per MU

    /// Throws InvalidInput when any invariant fails.
    void validate() const;

    double velocity_unit() const { return length_unit / time_unit; }  // km/s per DU/TU
    double days_to_tu(double days) const { return days * 86400.0 / time_unit; }
    double tu_to_days(double tu) const { return tu * time_unit / 86400.0; }

    /// Build from physical thruster data: thrust in newtons, Isp in seconds.
    static DynamicsParams from_physical(double mu, double length_unit_km, double time_unit_s,
                                        double mass_unit_kg, double thrust_newton, double isp_s);
};

struct SpacecraftState {
    Vec3 r = Vec3::Zero();
    Vec3 v = Vec3::Zero();
    double m = 1.0;

    Vec7 to_vector() const;
    static SpacecraftState from_vector(const Vec7& x);
};

/// Constant thrust over one finite-burn segment, in spherical components
/// relative to the rotating frame.
struct ControlSegment {
    double throttle = 0.0;
    double alpha = 0.0;  // in-plane angle from +x towards +y
    double beta = 0.0;   // out-of-plane angle towards +z

    Vec3 direction() const;
    /// Thrust vector u = throttle * t_max * direction().
    Vec3 thrust(double t_max) const { return throttle * t_max * direction(); }
};

/// Time derivative (v, a, mdot) of the packed state (r, v, m).
Vec7 eval_vector_field(const Vec7& x, const std::optional<ControlSegment>& control,
                       const DynamicsParams& params);

inline Vec7 eval_vector_field(const SpacecraftState& state,
                              const std::optional<ControlSegment>& control,
                              const DynamicsParams& params) {
    return eval_vector_field(state.to_vector(), control, params);
}

/// Analytic partials of the vector field: A = d(xdot)/dx and
/// B = d(xdot)/d(throttle, alpha, beta).
struct FieldJacobian {
    Mat77 state;
    Mat73 control;
};

FieldJacobian eval_field_jacobian(const Vec7& x, const std::optional<ControlSegment>& control,
                                  const DynamicsParams& params);

inline FieldJacobian eval_field_jacobian(const SpacecraftState& state,
                                         const std::optional<ControlSegment>& control,
                                         const DynamicsParams& params) {
    return eval_field_jacobian(state.to_vector(), control, params);
}

/// Effective potential U = (x^2 + y^2)/2 + (1 - mu)/r1 + mu/r2.
double effective_potential(const Vec3& r, double mu);

/// Jacobi integral C = 2U - |v|^2.
double jacobi_constant(const SpacecraftState& state, const DynamicsParams& params);

}  // namespace robust_lt
