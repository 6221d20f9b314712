#pragma once

#include <filesystem>
#include <memory>
#include <vector>

#include "robust_lt/dynamics.hpp"

namespace robust_lt {

/// A closed periodic orbit sampled over one period and interpolated by
/// periodic cubic splines, one per position/velocity component. The epoch of
/// the first sample maps to phase zero.
class PeriodicOrbit {
public:
    /// times strictly increasing; first and last state must agree to 1e-9.
    PeriodicOrbit(std::vector<double> times, const std::vector<Vec6>& states);
    ~PeriodicOrbit();
    PeriodicOrbit(PeriodicOrbit&&) noexcept;
    PeriodicOrbit& operator=(PeriodicOrbit&&) noexcept;
    PeriodicOrbit(const PeriodicOrbit&) = delete;
    PeriodicOrbit& operator=(const PeriodicOrbit&) = delete;

    /// Text table: '#' comments, then rows "t x y z vx vy vz" (TU, DU, DU/TU).
    static PeriodicOrbit load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    double period() const;
    std::size_t sample_count() const { return times_.size(); }
    const std::vector<double>& times() const { return times_; }
    Vec6 sample(std::size_t i) const;

    /// Interpolated state at epoch t, wrapped into one period.
    Vec6 state_at(double t) const;
    /// d(state_at)/dt at epoch t.
    Vec6 derivative_at(double t) const;

private:
    struct Splines;
    double wrap(double t) const;

    std::vector<double> times_;
    std::vector<std::vector<double>> columns_;  // 6 columns, one per component
    std::unique_ptr<Splines> splines_;
};

/// x coordinate of the collinear point between the primaries.
double find_l1(double mu);

struct PlanarLyapunov {
    double x0 = 0.0;      // crossing of the x-axis on the Earth side
    double vy0 = 0.0;     // velocity at that crossing
    double period = 0.0;  // TU
};

/// Differentially corrected planar Lyapunov orbit around L1 whose x-axis
/// crossing lies `amplitude` DU Earthward of L1. Uses amplitude continuation
/// from the linear solution.
PlanarLyapunov correct_l1_lyapunov(const DynamicsParams& params, double amplitude);

/// Propagate a corrected orbit over one period and sample it uniformly.
PeriodicOrbit sample_lyapunov(const DynamicsParams& params, const PlanarLyapunov& orbit,
                              int n_samples);

}  // namespace robust_lt
