#include <cmath>

#include <gtest/gtest.h>

#include "robust_lt/dynamics.hpp"
#include "robust_lt/errors.hpp"
#include "robust_lt/orbit.hpp"

using namespace robust_lt;

namespace {

Vec7 sample_state() {
    Vec7 x;
    x << 0.7, 0.15, 0.05, -0.1, 0.3, 0.02, 0.85;
    return x;
}

}  // namespace

TEST(Dynamics, BallisticAccelerationAtRestIsPotentialGradientPlusNothing) {
    const DynamicsParams p;
    Vec7 x = sample_state();
    x.segment<3>(3).setZero();
    const Vec7 f = eval_vector_field(x, std::nullopt, p);
    const double h = 1e-6;
    for (int i = 0; i < 3; ++i) {
        Vec3 rp = x.head<3>(), rm = x.head<3>();
        rp[i] += h;
        rm[i] -= h;
        const double grad = (effective_potential(rp, p.mu) - effective_potential(rm, p.mu)) / (2 * h);
        EXPECT_NEAR(f[3 + i], grad, 1e-8);
    }
    EXPECT_EQ(f[6], 0.0);
}

TEST(Dynamics, CoriolisTermsMatchRotatingFrame) {
    const DynamicsParams p;
    Vec7 a = sample_state(), b = sample_state();
    b[3] += 0.1;  // vx
    const Vec7 fa = eval_vector_field(a, std::nullopt, p);
    const Vec7 fb = eval_vector_field(b, std::nullopt, p);
    EXPECT_NEAR(fb[4] - fa[4], -0.2, 1e-14);
    EXPECT_NEAR(fb[3] - fa[3], 0.0, 1e-14);
}

TEST(Dynamics, ThrustAddsAccelerationOverMassAndDrainsMass) {
    const DynamicsParams p;
    const Vec7 x = sample_state();
    const ControlSegment u{0.6, 0.4, -0.3};
    const Vec7 f0 = eval_vector_field(x, std::nullopt, p);
    const Vec7 f1 = eval_vector_field(x, u, p);
    const Vec3 expected = u.thrust(p.t_max) / x[6];
    EXPECT_NEAR((f1.segment<3>(3) - f0.segment<3>(3) - expected).norm(), 0.0, 1e-15);
    EXPECT_NEAR(f1[6], -0.6 * p.t_max / p.isp_g, 1e-16);
    EXPECT_NEAR(u.direction().norm(), 1.0, 1e-15);
}

TEST(Dynamics, FieldJacobianMatchesCentralDifferences) {
    const DynamicsParams p;
    const Vec7 x = sample_state();
    const ControlSegment u{0.7, 1.1, 0.2};
    const FieldJacobian jac = eval_field_jacobian(x, u, p);
    const double h = 1e-6;
    for (int j = 0; j < 7; ++j) {
        Vec7 xp = x, xm = x;
        xp[j] += h;
        xm[j] -= h;
        const Vec7 fd = (eval_vector_field(xp, u, p) - eval_vector_field(xm, u, p)) / (2 * h);
        EXPECT_LT((jac.state.col(j) - fd).norm(), 1e-7) << "state column " << j;
    }
    for (int j = 0; j < 3; ++j) {
        ControlSegment up = u, um = u;
        double* pp = j == 0 ? &up.throttle : j == 1 ? &up.alpha : &up.beta;
        double* pm = j == 0 ? &um.throttle : j == 1 ? &um.alpha : &um.beta;
        *pp += h;
        *pm -= h;
        const Vec7 fd = (eval_vector_field(x, up, p) - eval_vector_field(x, um, p)) / (2 * h);
        EXPECT_LT((jac.control.col(j) - fd).norm(), 1e-8) << "control column " << j;
    }
}

TEST(Dynamics, L1IsAnEquilibrium) {
    const DynamicsParams p;
    const double x_l1 = find_l1(p.mu);
    EXPECT_GT(x_l1, -p.mu);
    EXPECT_LT(x_l1, 1.0 - p.mu);
    Vec7 x = Vec7::Zero();
    x[0] = x_l1;
    x[6] = 1.0;
    EXPECT_LT(eval_vector_field(x, std::nullopt, p).norm(), 1e-12);
}

TEST(Dynamics, JacobiConstantDefinition) {
    const DynamicsParams p;
    const SpacecraftState s = SpacecraftState::from_vector(sample_state());
    EXPECT_NEAR(jacobi_constant(s, p), 2 * effective_potential(s.r, p.mu) - s.v.squaredNorm(), 1e-15);
}

TEST(Dynamics, DomainErrors) {
    const DynamicsParams p;
    Vec7 x = sample_state();
    x[6] = 0.0;
    try {
        eval_vector_field(x, std::nullopt, p);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::SingularMass);
    }
    x = Vec7::Zero();
    x[0] = 1.0 - p.mu;
    x[6] = 1.0;
    try {
        eval_vector_field(x, std::nullopt, p);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Singularity);
    }
    x = sample_state();
    x[2] = std::nan("");
    EXPECT_THROW(eval_vector_field(x, std::nullopt, p), Error);
}

TEST(Dynamics, PhysicalConversionRoundTrip) {
    const DynamicsParams p = DynamicsParams::from_physical(0.01215, 384400.0, 375190.0, 1000.0,
                                                          0.5, 3000.0);
    const double accel_km_s2 = p.t_max * p.length_unit / (p.time_unit * p.time_unit);
    EXPECT_NEAR(accel_km_s2 * p.mass_unit * 1000.0, 0.5, 1e-12);
    EXPECT_NEAR(p.isp_g * p.velocity_unit(), 3000.0 * kStandardGravityKmS2, 1e-12);
    EXPECT_NEAR(p.tu_to_days(p.days_to_tu(3.5)), 3.5, 1e-14);
    DynamicsParams bad;
    bad.mu = 0.7;
    EXPECT_THROW(bad.validate(), Error);
}
