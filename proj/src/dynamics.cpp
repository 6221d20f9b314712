#include "robust_lt/dynamics.hpp"

#include <cmath>
#include <sstream>

#include "robust_lt/errors.hpp"

namespace robust_lt {

namespace {

constexpr double kSingularRadius = 1e-12;

struct PrimaryGeometry {
    Vec3 d1, d2;  // offsets from the larger and smaller primary
    double r1, r2;
};

PrimaryGeometry primary_geometry(const Vec3& r, double mu) {
    PrimaryGeometry g;
    g.d1 = r - Vec3(-mu, 0.0, 0.0);
    g.d2 = r - Vec3(1.0 - mu, 0.0, 0.0);
    g.r1 = g.d1.norm();
    g.r2 = g.d2.norm();
    if (g.r1 < kSingularRadius || g.r2 < kSingularRadius) {
        throw Error(ErrorKind::Singularity, "state coincides with a primary");
    }
    return g;
}

void check_state(const Vec7& x) {
    if (!x.allFinite()) {
        throw Error(ErrorKind::InvalidInput, "non-finite state component");
    }
    if (x[6] <= 0.0) {
        throw Error(ErrorKind::SingularMass, "spacecraft mass must be positive");
    }
}

Vec3 potential_gradient(const PrimaryGeometry& g, const Vec3& r, double mu) {
    const double k1 = (1.0 - mu) / (g.r1 * g.r1 * g.r1);
    const double k2 = mu / (g.r2 * g.r2 * g.r2);
    return Vec3(r.x(), r.y(), 0.0) - k1 * g.d1 - k2 * g.d2;
}

Mat33 potential_hessian(const PrimaryGeometry& g, double mu) {
    const double r1_3 = g.r1 * g.r1 * g.r1;
    const double r2_3 = g.r2 * g.r2 * g.r2;
    const double r1_5 = r1_3 * g.r1 * g.r1;
    const double r2_5 = r2_3 * g.r2 * g.r2;
    Mat33 h = Mat33::Zero();
    h(0, 0) = 1.0;
    h(1, 1) = 1.0;
    h -= (1.0 - mu) * (Mat33::Identity() / r1_3 - 3.0 * g.d1 * g.d1.transpose() / r1_5);
    h -= mu * (Mat33::Identity() / r2_3 - 3.0 * g.d2 * g.d2.transpose() / r2_5);
    return h;
}

}  // namespace

void DynamicsParams::validate() const {
    std::ostringstream problems;
    if (!(mu > 0.0 && mu < 0.5)) problems << " mu must lie in (0, 1/2);";
    if (!(t_max > 0.0)) problems << " t_max must be positive;";
    if (!(isp_g > 0.0)) problems << " isp_g must be positive;";
    if (!(length_unit > 0.0 && time_unit > 0.0 && mass_unit > 0.0)) {
        problems << " unit scales must be positive;";
    }
    if (!problems.str().empty()) {
        throw Error(ErrorKind::InvalidInput, "invalid dynamics parameters:" + problems.str());
    }
}

DynamicsParams DynamicsParams::from_physical(double mu, double length_unit_km, double time_unit_s,
                                             double mass_unit_kg, double thrust_newton,
                                             double isp_s) {
    DynamicsParams p;
    p.mu = mu;
    p.length_unit = length_unit_km;
    p.time_unit = time_unit_s;
    p.mass_unit = mass_unit_kg;
    // N = kg m/s^2 = 1e-3 kg km/s^2
    const double force_unit_kn = mass_unit_kg * length_unit_km / (time_unit_s * time_unit_s);
    p.t_max = thrust_newton * 1e-3 / force_unit_kn;
    p.isp_g = isp_s * kStandardGravityKmS2 / p.velocity_unit();
    p.validate();
    return p;
}

Vec7 SpacecraftState::to_vector() const {
    Vec7 x;
    x << r, v, m;
    return x;
}

SpacecraftState SpacecraftState::from_vector(const Vec7& x) {
    SpacecraftState s;
    s.r = x.head<3>();
    s.v = x.segment<3>(3);
    s.m = x[6];
    return s;
}

Vec3 ControlSegment::direction() const {
    const double cb = std::cos(beta);
    return Vec3(cb * std::cos(alpha), cb * std::sin(alpha), std::sin(beta));
}

Vec7 eval_vector_field(const Vec7& x, const std::optional<ControlSegment>& control,
                       const DynamicsParams& params) {
    check_state(x);
    const Vec3 r = x.head<3>();
    const Vec3 v = x.segment<3>(3);
    const double m = x[6];
    const PrimaryGeometry g = primary_geometry(r, params.mu);

    Vec3 a = potential_gradient(g, r, params.mu) + Vec3(2.0 * v.y(), -2.0 * v.x(), 0.0);
    double mdot = 0.0;
    if (control && control->throttle != 0.0) {
        if (!std::isfinite(control->throttle) || !std::isfinite(control->alpha) ||
            !std::isfinite(control->beta)) {
            throw Error(ErrorKind::InvalidInput, "non-finite control component");
        }
        a += control->thrust(params.t_max) / m;
        mdot = -std::abs(control->throttle) * params.t_max / params.isp_g;
    }

    Vec7 dx;
    dx << v, a, mdot;
    return dx;
}

FieldJacobian eval_field_jacobian(const Vec7& x, const std::optional<ControlSegment>& control,
                                  const DynamicsParams& params) {
    check_state(x);
    const Vec3 r = x.head<3>();
    const double m = x[6];
    const PrimaryGeometry g = primary_geometry(r, params.mu);

    FieldJacobian jac;
    jac.state.setZero();
    jac.control.setZero();
    jac.state.block<3, 3>(0, 3) = Mat33::Identity();
    jac.state.block<3, 3>(3, 0) = potential_hessian(g, params.mu);
    jac.state(3, 4) = 2.0;
    jac.state(4, 3) = -2.0;

    if (control) {
        const ControlSegment& c = *control;
        const double ca = std::cos(c.alpha), sa = std::sin(c.alpha);
        const double cb = std::cos(c.beta), sb = std::sin(c.beta);
        const Vec3 dir(cb * ca, cb * sa, sb);
        const Vec3 u = c.throttle * params.t_max * dir;

        jac.state.block<3, 1>(3, 6) = -u / (m * m);

        const double scale = params.t_max / m;
        jac.control.block<3, 1>(3, 0) = scale * dir;
        jac.control.block<3, 1>(3, 1) = scale * c.throttle * Vec3(-cb * sa, cb * ca, 0.0);
        jac.control.block<3, 1>(3, 2) = scale * c.throttle * Vec3(-sb * ca, -sb * sa, cb);
        // |u| = |throttle| t_max; the right derivative is used at throttle = 0
        const double sign = c.throttle < 0.0 ? -1.0 : 1.0;
        jac.control(6, 0) = -sign * params.t_max / params.isp_g;
    }
    return jac;
}

double effective_potential(const Vec3& r, double mu) {
    const PrimaryGeometry g = primary_geometry(r, mu);
    return 0.5 * (r.x() * r.x() + r.y() * r.y()) + (1.0 - mu) / g.r1 + mu / g.r2;
}

double jacobi_constant(const SpacecraftState& state, const DynamicsParams& params) {
    if (!state.to_vector().allFinite()) {
        throw Error(ErrorKind::InvalidInput, "non-finite state component");
    }
    return 2.0 * effective_potential(state.r, params.mu) - state.v.squaredNorm();
}

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidInput: return "invalid-input";
        case ErrorKind::SingularMass: return "singular-mass";
        case ErrorKind::Singularity: return "singularity";
        case ErrorKind::PropellantDepleted: return "propellant-depleted";
        case ErrorKind::InvalidScenario: return "invalid-scenario";
        case ErrorKind::Evaluation: return "evaluation";
        case ErrorKind::Mapping: return "mapping";
        case ErrorKind::RejectedSeed: return "rejected-seed";
        case ErrorKind::NoSeeds: return "no-seeds";
        case ErrorKind::EmptyReport: return "empty-report";
        case ErrorKind::Lineage: return "lineage";
        case ErrorKind::Config: return "config";
        case ErrorKind::Archive: return "archive";
    }
    return "unknown";
}

}  // namespace robust_lt
