#pragma once

#include <memory>
#include <random>

#include <Eigen/Dense>

#include "robust_lt/orbit.hpp"
#include "robust_lt/transcription.hpp"

namespace robust_lt::fixtures {

inline std::shared_ptr<const PeriodicOrbit> shipped_orbit() {
    static const auto orbit = std::make_shared<const PeriodicOrbit>(
        PeriodicOrbit::load(std::string(RLT_DATA_DIR) + "/l1_lyapunov.txt"));
    return orbit;
}

inline DynamicsParams test_params() { return DynamicsParams{}; }

inline BoundaryConditions test_boundary() {
    BoundaryConditions bc;
    bc.departure.r = Vec3(0.80, 0.02, 0.0);
    bc.departure.v = Vec3(0.01, 0.15, 0.0);
    bc.departure.m = 1.0;
    bc.target = shipped_orbit();
    return bc;
}

inline LegLayout test_reference(int n_segments) {
    return LegLayout{n_segments, 2.0, 0.5, 0.5, 1.0};
}

/// Decision vector drawn uniformly inside the bounds, with masses kept in a
/// physically sensible band so propagation stays well posed.
inline Eigen::VectorXd random_decision(const RobustTranscription& problem, std::mt19937_64& rng) {
    const auto& lo = problem.lower_bounds();
    const auto& hi = problem.upper_bounds();
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Eigen::VectorXd x(lo.size());
    for (int i = 0; i < x.size(); ++i) x[i] = lo[i] + unit(rng) * (hi[i] - lo[i]);
    for (int l = 0; l < problem.layout().leg_count(); ++l) {
        x[problem.layout().final_mass(l)] = 0.9 + 0.08 * unit(rng);
    }
    return x;
}

}  // namespace robust_lt::fixtures

#include "robust_lt/config.hpp"

namespace robust_lt::fixtures {

/// The shipped desk problem, loaded through the normal config path.
inline const RunConfig& desk_config() {
    static const RunConfig config = load_config(std::string(RLT_CONFIG_DIR) + "/desk.json");
    return config;
}

/// A feasible-looking record built by hand, for mapping and archive tests.
inline SolveRecord synthetic_record(const RobustTranscription& problem, const Eigen::VectorXd& x,
                                    const std::string& id) {
    SolveRecord r;
    r.id = id;
    r.scenario = problem.scenario();
    r.strategy = "S(" + std::to_string(problem.scenario().depth()) + ")";
    r.provenance = "sampled";
    r.status = SolveStatus::Feasible;
    r.x.assign(x.data(), x.data() + x.size());
    r.objective = -x[problem.layout().final_mass(0)];
    r.defects.assign(problem.layout().leg_count(), DefectNorms{});
    return r;
}

}  // namespace robust_lt::fixtures
