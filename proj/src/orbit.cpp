#include "robust_lt/orbit.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <boost/math/tools/roots.hpp>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_interp.h>

#include "robust_lt/errors.hpp"
#include "robust_lt/propagation.hpp"

namespace robust_lt {

namespace {

constexpr double kClosureTolerance = 1e-9;

struct GslInterpDeleter {
    void operator()(gsl_interp* p) const { gsl_interp_free(p); }
};

void silence_gsl() {
    static const bool once = [] {
        gsl_set_error_handler_off();
        return true;
    }();
    (void)once;
}

Vec6 mirror(const Vec6& s) {
    // Planar Lyapunov orbits are symmetric under (t, y, vx) -> (-t, -y, -vx).
    Vec6 m = s;
    m[1] = -s[1];
    m[2] = -s[2];
    m[3] = -s[3];
    m[5] = -s[5];
    return m;
}

}  // namespace

struct PeriodicOrbit::Splines {
    std::vector<std::unique_ptr<gsl_interp, GslInterpDeleter>> components;
};

PeriodicOrbit::PeriodicOrbit(std::vector<double> times, const std::vector<Vec6>& states)
    : times_(std::move(times)), columns_(6), splines_(std::make_unique<Splines>()) {
    silence_gsl();
    if (times_.size() != states.size() || times_.size() < 4) {
        throw Error(ErrorKind::InvalidInput, "orbit table needs at least 4 matching samples");
    }
    for (std::size_t i = 1; i < times_.size(); ++i) {
        if (!(times_[i] > times_[i - 1])) {
            throw Error(ErrorKind::InvalidInput, "orbit samples must be strictly time-ordered");
        }
    }
    const double closure = (states.front() - states.back()).cwiseAbs().maxCoeff();
    if (!(closure <= kClosureTolerance)) {
        std::ostringstream os;
        os << "orbit table is not closed: first and last samples differ by " << closure;
        throw Error(ErrorKind::InvalidInput, os.str());
    }
    for (int c = 0; c < 6; ++c) {
        auto& col = columns_[c];
        col.reserve(states.size());
        for (const Vec6& s : states) col.push_back(s[c]);
        // The periodic spline requires exact equality at the seam.
        col.back() = col.front();
        std::unique_ptr<gsl_interp, GslInterpDeleter> interp(
            gsl_interp_alloc(gsl_interp_cspline_periodic, col.size()));
        if (!interp || gsl_interp_init(interp.get(), times_.data(), col.data(), col.size()) !=
                           GSL_SUCCESS) {
            throw Error(ErrorKind::InvalidInput, "failed to build orbit spline");
        }
        splines_->components.push_back(std::move(interp));
    }
}

PeriodicOrbit::~PeriodicOrbit() = default;
PeriodicOrbit::PeriodicOrbit(PeriodicOrbit&&) noexcept = default;
PeriodicOrbit& PeriodicOrbit::operator=(PeriodicOrbit&&) noexcept = default;

PeriodicOrbit PeriodicOrbit::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::InvalidInput, "cannot open orbit table " + path.string());
    }
    std::vector<double> times;
    std::vector<Vec6> states;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream row(line);
        double t;
        Vec6 s;
        if (!(row >> t >> s[0] >> s[1] >> s[2] >> s[3] >> s[4] >> s[5])) {
            throw Error(ErrorKind::InvalidInput, "malformed orbit table row " +
                                                     std::to_string(line_no) + " in " +
                                                     path.string());
        }
        times.push_back(t);
        states.push_back(s);
    }
    return PeriodicOrbit(std::move(times), states);
}

void PeriodicOrbit::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::InvalidInput, "cannot write " + path.string());
    out << "# t[TU] x[DU] y[DU] z[DU] vx[DU/TU] vy[DU/TU] vz[DU/TU]\n";
    out << std::setprecision(17);
    for (std::size_t i = 0; i < times_.size(); ++i) {
        out << times_[i];
        for (int c = 0; c < 6; ++c) out << ' ' << columns_[c][i];
        out << '\n';
    }
}

double PeriodicOrbit::period() const { return times_.back() - times_.front(); }

Vec6 PeriodicOrbit::sample(std::size_t i) const {
    Vec6 s;
    for (int c = 0; c < 6; ++c) s[c] = columns_[c][i];
    return s;
}

double PeriodicOrbit::wrap(double t) const {
    const double p = period();
    double phase = std::fmod(t - times_.front(), p);
    if (phase < 0.0) phase += p;
    return std::clamp(times_.front() + phase, times_.front(), times_.back());
}

Vec6 PeriodicOrbit::state_at(double t) const {
    if (!std::isfinite(t)) throw Error(ErrorKind::InvalidInput, "non-finite orbit epoch");
    const double tw = wrap(t);
    Vec6 s;
    for (int c = 0; c < 6; ++c) {
        s[c] = gsl_interp_eval(splines_->components[c].get(), times_.data(),
                               columns_[c].data(), tw, nullptr);
    }
    return s;
}

Vec6 PeriodicOrbit::derivative_at(double t) const {
    if (!std::isfinite(t)) throw Error(ErrorKind::InvalidInput, "non-finite orbit epoch");
    const double tw = wrap(t);
    Vec6 d;
    for (int c = 0; c < 6; ++c) {
        d[c] = gsl_interp_eval_deriv(splines_->components[c].get(), times_.data(),
                                     columns_[c].data(), tw, nullptr);
    }
    return d;
}

double find_l1(double mu) {
    const auto dudx = [mu](double x) {
        const double d1 = x + mu;
        const double d2 = x - 1.0 + mu;
        return x - (1.0 - mu) / (d1 * d1) + mu / (d2 * d2);
    };
    boost::uintmax_t iterations = 200;
    const auto [lo, hi] = boost::math::tools::toms748_solve(
        dudx, -mu + 1e-6, 1.0 - mu - 1e-6, boost::math::tools::eps_tolerance<double>(60),
        iterations);
    return 0.5 * (lo + hi);
}

namespace {

struct Crossing {
    SpacecraftState state;
    Mat77 stm;
    double time;
};

// First return to y = 0 after leaving the x-axis.
Crossing half_period_crossing(const DynamicsParams& params, double x0, double vy0) {
    SpacecraftState s;
    s.r = Vec3(x0, 0.0, 0.0);
    s.v = Vec3(0.0, vy0, 0.0);
    s.m = 1.0;

    const double dt = 0.02;
    double t = 0.0;
    SpacecraftState prev = s;
    for (int i = 0; i < 2000; ++i) {
        const ArcResult step = propagate(Arc{t, t + dt, prev, std::nullopt}, params, false);
        if (t > 0.1 && std::signbit(step.final.r.y()) != std::signbit(prev.r.y())) {
            // Newton on the crossing time, from the last state before the sign change.
            double tau = 0.0;
            for (int k = 0; k < 20; ++k) {
                const ArcResult at = propagate(Arc{t, t + tau, prev, std::nullopt}, params, false);
                const double y = at.final.r.y();
                const double vy = at.final.v.y();
                tau -= y / vy;
                if (std::abs(y) < 1e-15) break;
            }
            const ArcResult full = propagate(Arc{0.0, t + tau, s, std::nullopt}, params, true);
            return {full.final, full.stm, t + tau};
        }
        prev = step.final;
        t += dt;
    }
    throw Error(ErrorKind::InvalidInput, "Lyapunov guess never returned to the x-axis");
}

}  // namespace

PlanarLyapunov correct_l1_lyapunov(const DynamicsParams& params, double amplitude) {
    const double mu = params.mu;
    const double xl = find_l1(mu);
    const double c2 = (1.0 - mu) / std::pow(std::abs(xl + mu), 3) +
                      mu / std::pow(std::abs(xl - 1.0 + mu), 3);
    const double omega2 = 0.5 * (2.0 - c2 + std::sqrt(9.0 * c2 * c2 - 8.0 * c2));
    const double omega = std::sqrt(omega2);
    const double kappa = (omega2 + 1.0 + 2.0 * c2) / (2.0 * omega);

    double a = std::min(amplitude, 1e-3);
    double vy = kappa * omega * a;
    double previous_vy = vy, previous_a = a;
    PlanarLyapunov result;
    while (true) {
        const double x0 = xl - a;
        for (int it = 0; it < 50; ++it) {
            const Crossing c = half_period_crossing(params, x0, vy);
            const Vec7 f = eval_vector_field(c.state, std::nullopt, params);
            const double vx_f = c.state.v.x();
            if (std::abs(vx_f) < 1e-13) {
                result = {x0, vy, 2.0 * c.time};
                break;
            }
            // Hold x0, vary vy0, stay on the y = 0 crossing.
            const double denom = c.stm(3, 4) - f[3] * c.stm(1, 4) / f[1];
            vy -= vx_f / denom;
            if (it == 49) throw Error(ErrorKind::InvalidInput, "Lyapunov correction diverged");
        }
        if (a >= amplitude) break;
        const double next_a = std::min(amplitude, a + 2e-3);
        const double slope = a > previous_a ? (vy - previous_vy) / (a - previous_a)
                                            : kappa * omega;
        previous_a = a;
        previous_vy = vy;
        vy += slope * (next_a - a);
        a = next_a;
    }
    return result;
}

PeriodicOrbit sample_lyapunov(const DynamicsParams& params, const PlanarLyapunov& orbit,
                              int n_samples) {
    if (n_samples < 5 || n_samples % 2 == 0) {
        throw Error(ErrorKind::InvalidInput, "sample count must be odd and at least 5");
    }
    const int half = n_samples / 2;
    const double dt = orbit.period / (n_samples - 1);

    SpacecraftState s;
    s.r = Vec3(orbit.x0, 0.0, 0.0);
    s.v = Vec3(0.0, orbit.vy0, 0.0);
    std::vector<double> times(n_samples);
    std::vector<Vec6> states(n_samples);
    for (int i = 0; i <= half; ++i) {
        if (i > 0) {
            s = propagate(Arc{(i - 1) * dt, i * dt, s, std::nullopt}, params, false).final;
        }
        times[i] = i * dt;
        states[i] << s.r, s.v;
    }
    for (int i = half + 1; i < n_samples; ++i) {
        times[i] = i * dt;
        states[i] = mirror(states[n_samples - 1 - i]);
    }
    times.back() = orbit.period;
    return PeriodicOrbit(std::move(times), states);
}

}  // namespace robust_lt
