#include "robust_lt/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "robust_lt/errors.hpp"

namespace robust_lt {

const char* to_string(SolveStatus status) {
    switch (status) {
        case SolveStatus::FeasibleOptimal: return "feasible-optimal";
        case SolveStatus::Feasible: return "feasible";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::Error: return "error";
    }
    return "error";
}

std::optional<SolveStatus> parse_solve_status(const std::string& text) {
    for (const SolveStatus s : {SolveStatus::FeasibleOptimal, SolveStatus::Feasible,
                                SolveStatus::Infeasible, SolveStatus::Error}) {
        if (text == to_string(s)) return s;
    }
    return std::nullopt;
}

void SolverConfig::validate() const {
    const bool ok = max_iterations > 0 && max_wall_time > 0.0 && optimality_tolerance > 0.0 &&
                    initial_penalty > 0.0 && penalty_growth > 1.0 &&
                    max_penalty >= initial_penalty && multiplier_update_ratio > 0.0 &&
                    multiplier_update_ratio < 1.0 && max_inner_iterations > 0 &&
                    stall_iterations > 0 && feasible_stall_iterations > 0 &&
                    stall_reduction >= 0.0 && feasible_stall_reduction >= 0.0 && feasibility_target > 0.0 && feasibility_target <= 1.0;
    if (!ok) throw Error(ErrorKind::InvalidInput, "invalid solver configuration");
}

namespace {

using Clock = std::chrono::steady_clock;

struct Point {
    Eigen::VectorXd x;
    double f = 0.0;
    Eigen::VectorXd c;    // raw constraints
    Eigen::VectorXd s;    // scaled constraints
    Eigen::VectorXd grad_f;
    Eigen::MatrixXd js;   // scaled Jacobian, dense
};

double merit(double f, const Eigen::VectorXd& s, const Eigen::VectorXd& lambda, double rho) {
    return f + lambda.dot(s) + 0.5 * rho * s.squaredNorm();
}

class AugmentedLagrangian {
public:
    AugmentedLagrangian(const NlpProblem& problem, const SolverConfig& config)
        : problem_(problem),
          config_(config),
          lower_(problem.lower_bounds()),
          upper_(problem.upper_bounds()),
          scales_(problem.constraint_scales()),
          start_(Clock::now()) {}

    SolverResult run(const Eigen::VectorXd& x0);

private:
    Point evaluate_full(const Eigen::VectorXd& x) {
        const NlpDerivatives d = problem_.evaluate_with_derivatives(x);
        ++result_.iterations;
        ++result_.evaluations;
        Point p;
        p.x = x;
        p.f = d.value.objective;
        p.c = d.value.constraints;
        p.s = scales_.cwiseProduct(p.c);
        p.grad_f = d.gradient;
        p.js = scales_.asDiagonal() * Eigen::MatrixXd(d.jacobian);
        if (!std::isfinite(p.f) || !p.c.allFinite() || !p.js.allFinite()) {
            throw Error(ErrorKind::Evaluation, "non-finite problem values");
        }
        return p;
    }

    /// Free-variable mask: a variable at a bound is held when the gradient
    /// pushes it outward.
    std::vector<bool> free_mask(const Eigen::VectorXd& x, const Eigen::VectorXd& g) const {
        std::vector<bool> free(x.size(), true);
        for (int i = 0; i < x.size(); ++i) {
            const double slack = 1e-12 * std::max(1.0, upper_[i] - lower_[i]);
            if ((x[i] <= lower_[i] + slack && g[i] > 0.0) ||
                (x[i] >= upper_[i] - slack && g[i] < 0.0)) {
                free[i] = false;
            }
        }
        return free;
    }

    double projected_gradient_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& g) const {
        const Eigen::VectorXd moved = (x - g).cwiseMax(lower_).cwiseMin(upper_);
        return (moved - x).lpNorm<Eigen::Infinity>();
    }

    /// First-order residual with least-squares multipliers fitted on the
    /// variables strictly inside their bounds.
    double kkt_residual(const Point& p) const {
        std::vector<int> idx;
        for (int i = 0; i < p.x.size(); ++i) {
            const double slack = 1e-12 * std::max(1.0, upper_[i] - lower_[i]);
            if (p.x[i] > lower_[i] + slack && p.x[i] < upper_[i] - slack) idx.push_back(i);
        }
        Eigen::MatrixXd a(idx.size(), p.js.rows());
        Eigen::VectorXd b(idx.size());
        for (std::size_t k = 0; k < idx.size(); ++k) {
            a.row(k) = p.js.col(idx[k]).transpose();
            b[k] = -p.grad_f[idx[k]];
        }
        Eigen::VectorXd lambda = Eigen::VectorXd::Zero(p.js.rows());
        if (!idx.empty()) lambda = a.colPivHouseholderQr().solve(b);
        const Eigen::VectorXd g = p.grad_f + p.js.transpose() * lambda;
        return projected_gradient_norm(p.x, g);
    }

    bool out_of_budget() const {
        const double elapsed = std::chrono::duration<double>(Clock::now() - start_).count();
        return result_.iterations >= config_.max_iterations || elapsed > config_.max_wall_time;
    }

    /// Internal target: every component within feasibility_target times its
    /// tolerance, so the optimizer cannot trade tolerance slack for objective.
    bool on_target(const Eigen::VectorXd& c) const {
        return problem_.within_tolerance(c / config_.feasibility_target);
    }

    void consider(const Point& p) {
        if (on_target(p.c)) {
            if (!best_feasible_ || p.f < best_feasible_->f) best_feasible_ = p;
        } else if (problem_.within_tolerance(p.c) && (!loose_feasible_ || p.f < loose_feasible_->f)) {
            loose_feasible_ = p;
        }
        const double violation = p.s.lpNorm<Eigen::Infinity>();
        if (!best_feasible_ && (!least_violation_ || violation < least_violation_->s.lpNorm<Eigen::Infinity>())) {
            least_violation_ = p;
        }
        result_.incumbent_trace.push_back(best_feasible_ ? best_feasible_->f
                                                         : std::numeric_limits<double>::quiet_NaN());
    }

    struct ReducedModel {
        std::vector<int> idx;
        Eigen::MatrixXd jf;  // scaled Jacobian columns of idx
        Eigen::MatrixXd w;   // M^-1 jf^T
        Eigen::LDLT<Eigen::MatrixXd> mfact;
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> schur;
    };

    /// Factor the model Hessian rho J^T J + M, M = B + damping I, restricted
    /// to idx. The inverse is applied through the Woodbury identity; forming
    /// the normal matrix directly loses the tolerance-scaled rows.
    ReducedModel reduce(const Point& p, std::vector<int> idx, double rho) const {
        ReducedModel r;
        r.idx = std::move(idx);
        const int nf = static_cast<int>(r.idx.size());
        r.jf.resize(p.js.rows(), nf);
        Eigen::MatrixXd mf(nf, nf);
        for (int a = 0; a < nf; ++a) {
            r.jf.col(a) = p.js.col(r.idx[a]);
            for (int b = 0; b < nf; ++b) mf(a, b) = curvature_(r.idx[a], r.idx[b]);
        }
        mf.diagonal().array() += damping_;
        r.mfact.compute(mf);
        r.w = r.mfact.solve(r.jf.transpose());
        Eigen::MatrixXd s = r.jf * r.w;
        s.diagonal().array() += 1.0 / rho;
        r.schur.compute(s);
        return r;
    }

    /// Model minimizer over r.idx with the remaining variables displaced by
    /// `fixed`. The gradient is kept split as grad f + J^T y so the large
    /// penalty part is never formed and then cancelled.
    Eigen::VectorXd reduced_step(const Point& p, const ReducedModel& r, const Eigen::VectorXd& y,
                                 double rho, const Eigen::VectorXd& fixed) const {
        const Eigen::VectorXd bfixed = curvature_ * fixed;
        const Eigen::VectorXd y_eff = y + rho * (p.js * fixed);
        const int nf = static_cast<int>(r.idx.size());
        Eigen::VectorXd gradf(nf);
        for (int k = 0; k < nf; ++k) gradf[k] = p.grad_f[r.idx[k]] + bfixed[r.idx[k]];
        const Eigen::VectorXd mg = r.mfact.solve(gradf);
        const Eigen::VectorXd df = -mg + r.w * r.schur.solve(r.jf * mg) - r.w * r.schur.solve(y_eff / rho);
        Eigen::VectorXd full = fixed;
        for (int k = 0; k < nf; ++k) full[r.idx[k]] = df[k];
        return full;
    }

    /// Step that stays inside the box. The model minimizer is followed from
    /// the current point until it meets a bound; the blocking variables are
    /// then fixed there and the model is re-minimized over the rest. Each
    /// pass cannot raise the (convex) model, so the result stays a descent
    /// step whenever the first direction is one.
    Eigen::VectorXd bounded_step(const Point& p, std::vector<int> idx, const Eigen::VectorXd& y,
                                 double rho, ReducedModel& model) const {
        Eigen::VectorXd fixed = Eigen::VectorXd::Zero(p.x.size());
        Eigen::VectorXd current = fixed;
        while (!idx.empty()) {
            model = reduce(p, idx, rho);
            const Eigen::VectorXd target = reduced_step(p, model, y, rho, fixed);
            if (!target.allFinite()) return target;
            double alpha = 1.0;
            int blocking = -1;
            for (const int i : idx) {
                const double move = target[i] - current[i];
                double room = std::numeric_limits<double>::infinity();
                if (p.x[i] + target[i] > upper_[i]) room = (upper_[i] - p.x[i] - current[i]) / move;
                if (p.x[i] + target[i] < lower_[i]) room = (lower_[i] - p.x[i] - current[i]) / move;
                if (room < alpha) {
                    alpha = std::max(room, 0.0);
                    blocking = i;
                }
            }
            if (blocking < 0) return target;
            current += alpha * (target - current);
            std::vector<int> keep;
            for (const int i : idx) {
                const double at = p.x[i] + current[i];
                const double slack = 1e-12 * (1.0 + std::abs(at));
                const bool blocked = i == blocking ||
                                     (target[i] > current[i] && at >= upper_[i] - slack) ||
                                     (target[i] < current[i] && at <= lower_[i] + slack);
                if (blocked) {
                    current[i] = std::clamp(at, lower_[i], upper_[i]) - p.x[i];
                } else {
                    keep.push_back(i);
                }
            }
            idx = std::move(keep);
            // Non-free entries of `fixed` are the displacements the next
            // reduced model is built around.
            fixed = current;
            for (const int i : idx) fixed[i] = 0.0;
        }
        model = reduce(p, idx, rho);
        return current;
    }

    /// Damped BFGS update of the second-order terms the Gauss-Newton model
    /// leaves out, from the structured secant pair.
    void update_curvature(const Point& from, const Point& to, const Eigen::VectorXd& y_weights) {
        const Eigen::VectorXd step = to.x - from.x;
        Eigen::VectorXd y = (to.grad_f - from.grad_f) + (to.js - from.js).transpose() * y_weights;
        const Eigen::VectorXd bs = curvature_ * step;
        const double sbs = step.dot(bs);
        if (!(sbs > 0.0)) return;
        double sy = step.dot(y);
        if (sy < 0.2 * sbs) {
            const double theta = 0.8 * sbs / (sbs - sy);
            y = theta * y + (1.0 - theta) * bs;
            sy = step.dot(y);
        }
        if (!(sy > 0.0) || !y.allFinite()) return;
        curvature_ += y * y.transpose() / sy - bs * bs.transpose() / sbs;
    }

    /// Progress measure for the stagnation test.
    double progress() const {
        if (best_feasible_) return best_feasible_->f;
        return least_violation_ ? least_violation_->s.norm() : std::numeric_limits<double>::infinity();
    }

    const NlpProblem& problem_;
    const SolverConfig& config_;
    const Eigen::VectorXd& lower_;
    const Eigen::VectorXd& upper_;
    Eigen::VectorXd scales_;
    Clock::time_point start_;
    SolverResult result_;
    std::optional<Point> best_feasible_;
    std::optional<Point> loose_feasible_;  // within tolerance but off target
    std::optional<Point> least_violation_;
    Eigen::MatrixXd curvature_;
    double damping_ = 1e-3;  // Levenberg term on the unit-scaled variables
    double growth_ = 2.0;
};

SolverResult AugmentedLagrangian::run(const Eigen::VectorXd& x0) {
    const int n = problem_.variable_count();
    const int m = problem_.constraint_count();
    if (x0.size() != n || scales_.size() != m || (scales_.array() <= 0.0).any()) {
        throw Error(ErrorKind::InvalidInput, "solver inputs do not match the problem dimensions");
    }

    Point p;
    try {
        p = evaluate_full(x0.cwiseMax(lower_).cwiseMin(upper_));
    } catch (const Error& e) {
        result_.status = SolveStatus::Error;
        result_.x = x0.cwiseMax(lower_).cwiseMin(upper_);
        result_.message = std::string("evaluation failed at the initial guess: ") + e.what();
        return result_;
    }
    consider(p);

    curvature_ = 1e-6 * Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(m);
    double rho = config_.initial_penalty;
    // Scaled constraints are feasible near unit size, so unit violation is the
    // first target for a multiplier update.
    double reference_violation = std::max(p.s.norm(), 1.0);
    std::string stop_reason;
    int idle_subproblems = 0;

    // Stagnation window over the progress measure.
    std::vector<double> history{progress()};
    auto stalled = [&] {
        const int w = best_feasible_ ? config_.feasible_stall_iterations : config_.stall_iterations;
        if (static_cast<int>(history.size()) <= w) return false;
        const double then = history[history.size() - 1 - w];
        const double now = history.back();
        const double needed = best_feasible_ ? config_.feasible_stall_reduction : config_.stall_reduction;
        return !(then - now > needed * std::max(1.0, std::abs(then)));
    };

    while (stop_reason.empty()) {
        if (on_target(p.c) && kkt_residual(p) <= config_.optimality_tolerance) {
            stop_reason = "first-order optimality reached";
            break;
        }

        // Inner subproblem: minimize the merit at fixed (lambda, rho).
        std::vector<double> trace;
        double phi = merit(p.f, p.s, lambda, rho);
        trace.push_back(phi);
        for (int inner = 0; inner < config_.max_inner_iterations; ++inner) {
            const Eigen::VectorXd y = lambda + rho * p.s;
            const Eigen::VectorXd g = p.grad_f + p.js.transpose() * y;
            if (projected_gradient_norm(p.x, g) <= 0.1 * config_.optimality_tolerance) break;

            const std::vector<bool> free = free_mask(p.x, g);
            std::vector<int> idx;
            for (int i = 0; i < n; ++i) {
                if (free[i]) idx.push_back(i);
            }
            if (idx.empty()) break;
            bool accepted = false;
            Point trial;
            double trial_phi = phi;
            for (int attempt = 0; attempt < 40 && !accepted && damping_ < 1e30; ++attempt) {
                ReducedModel model;
                Eigen::VectorXd step = bounded_step(p, idx, y, rho, model);
                if (!step.allFinite()) {
                    damping_ *= growth_;
                    growth_ *= 2.0;
                    continue;
                }
                const Eigen::VectorXd jstep = p.js * step;
                const double predicted =
                    -(g.dot(step) + 0.5 * rho * jstep.squaredNorm() + 0.5 * step.dot(curvature_ * step));
                if (step.lpNorm<Eigen::Infinity>() <= 1e-15 * std::max(1.0, p.x.lpNorm<Eigen::Infinity>())) {
                    break;
                }
                Eigen::VectorXd xt = (p.x + step).cwiseMax(lower_).cwiseMin(upper_);
                const int nf = static_cast<int>(model.idx.size());
                const std::vector<int>& free_idx = model.idx;

                double actual = -std::numeric_limits<double>::infinity();
                NlpValue value;
                bool evaluated = false;
                try {
                    value = problem_.evaluate(xt);
                    ++result_.evaluations;
                    evaluated = std::isfinite(value.objective) && value.constraints.allFinite();
                } catch (const Error&) {
                    evaluated = false;
                }
                if (evaluated) {
                    trial_phi = merit(value.objective, scales_.cwiseProduct(value.constraints), lambda, rho);
                    actual = phi - trial_phi;
                }
                if (evaluated && predicted > 0.0 && actual < 1e-4 * predicted) {
                    // Second-order correction: remove the constraint curvature the
                    // linear model missed, then retest the corrected point.
                    const Eigen::VectorXd missed = scales_.cwiseProduct(value.constraints) - p.s - jstep;
                    const Eigen::VectorXd dc = -model.w * model.schur.solve(missed);
                    Eigen::VectorXd xc = xt;
                    for (int k = 0; k < nf; ++k) xc[free_idx[k]] += dc[k];
                    xc = xc.cwiseMax(lower_).cwiseMin(upper_);
                    try {
                        const NlpValue corrected = problem_.evaluate(xc);
                        ++result_.evaluations;
                        if (std::isfinite(corrected.objective) && corrected.constraints.allFinite()) {
                            const double phi_c = merit(corrected.objective,
                                                       scales_.cwiseProduct(corrected.constraints), lambda, rho);
                            if (phi - phi_c >= 1e-4 * predicted) {
                                xt = xc;
                                actual = phi - phi_c;
                            }
                        }
                    } catch (const Error&) {
                    }
                }
                if (predicted > 0.0 && actual >= 1e-4 * predicted) {
                    const double gain = actual / predicted;
                    damping_ *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * gain - 1.0, 3));
                    damping_ = std::max(damping_, 1e-12);
                    growth_ = 2.0;
                    try {
                        trial = evaluate_full(xt);
                        accepted = true;
                    } catch (const Error&) {
                        damping_ *= growth_;
                        growth_ *= 2.0;
                    }
                } else {
                    damping_ *= growth_;
                    growth_ *= 2.0;
                }
            }
            if (!accepted) break;

            const double previous_phi = phi;
            // Weighting the constraint curvature by the multipliers alone keeps
            // large early violations from inflating the estimate.
            update_curvature(p, trial, lambda);
            p = std::move(trial);
            phi = merit(p.f, p.s, lambda, rho);
            trace.push_back(phi);
            consider(p);
            history.push_back(progress());

            if (out_of_budget()) {
                stop_reason = result_.iterations >= config_.max_iterations ? "iteration budget exhausted"
                                                                           : "wall-time cap reached";
                break;
            }
            if (previous_phi - phi <= 1e-10 * std::max(1.0, std::abs(phi))) break;
        }
        const bool idle = trace.size() == 1;
        result_.merit_trace.push_back(std::move(trace));
        if (!stop_reason.empty()) break;
        idle_subproblems = idle ? idle_subproblems + 1 : 0;
        if (idle) {
            damping_ = 1e-3;
            growth_ = 2.0;
        }
        if (idle_subproblems >= 3) {
            stop_reason = "no acceptable step";
            break;
        }

        // Outer update of the multipliers or the penalty.
        const double violation = p.s.norm();
        if (on_target(p.c)) {
            // The multipliers now carry the constraints; relaxing the penalty
            // lets the next subproblem take longer steps along them.
            lambda += rho * p.s;
            reference_violation = std::max(violation, 1e-300);
            rho = std::max(rho / config_.penalty_growth, config_.initial_penalty);
        } else if (violation <= config_.multiplier_update_ratio * reference_violation) {
            lambda += rho * p.s;
            reference_violation = std::max(violation, 1e-300);
        } else if (rho < config_.max_penalty) {
            rho = std::min(rho * config_.penalty_growth, config_.max_penalty);
        } else {
            stop_reason = "penalty limit reached";
        }
        if (out_of_budget()) stop_reason = "iteration budget exhausted";
        if (stalled()) stop_reason = best_feasible_ ? "no further objective progress" : "defect reduction stagnated";
    }

    const Point& chosen = best_feasible_    ? *best_feasible_
                          : loose_feasible_ ? *loose_feasible_
                          : least_violation_ ? *least_violation_
                                             : p;
    result_.x = chosen.x;
    result_.objective = chosen.f;
    result_.constraints = chosen.c;
    result_.kkt_residual = kkt_residual(chosen);
    if (problem_.within_tolerance(chosen.c)) {
        result_.status = best_feasible_ && result_.kkt_residual <= config_.optimality_tolerance
                             ? SolveStatus::FeasibleOptimal
                             : SolveStatus::Feasible;
    } else {
        result_.status = SolveStatus::Infeasible;
    }
    result_.message = stop_reason;
    return result_;
}

}  // namespace

SolverResult minimize(const NlpProblem& problem, const Eigen::VectorXd& x0,
                      const SolverConfig& config) {
    config.validate();
    AugmentedLagrangian solver(problem, config);
    return solver.run(x0);
}

SolveRecord solve(const RobustTranscription& problem, const Eigen::VectorXd& x0,
                  const SolverConfig& config) {
    const auto start = Clock::now();
    SolveRecord record;
    record.scenario = problem.scenario();
    SolverResult result;
    try {
        result = minimize(problem, x0, config);
    } catch (const std::exception& e) {
        result.status = SolveStatus::Error;
        result.x = x0;
        result.message = e.what();
    }
    record.status = result.status;
    record.x.assign(result.x.data(), result.x.data() + result.x.size());
    record.iterations = result.iterations;
    record.message = result.message;
    if (result.status != SolveStatus::Error) {
        record.objective = result.objective;
        record.delta_v = problem.delta_v(result.x);
        const FeasibilityReport report = feasibility_from_defects(problem, result.constraints);
        for (const LegFeasibility& leg : report.legs) {
            record.defects.push_back({leg.position, leg.velocity, leg.mass});
        }
        // The archived status must agree with the tolerance test at the returned point.
        if (is_feasible(record.status) != report.feasible) {
            record.status = report.feasible ? SolveStatus::Feasible : SolveStatus::Infeasible;
        }
    } else {
        record.objective = std::numeric_limits<double>::quiet_NaN();
        record.delta_v = std::numeric_limits<double>::quiet_NaN();
    }
    record.wall_time = std::chrono::duration<double>(Clock::now() - start).count();
    return record;
}

FeasibilityReport feasibility_from_defects(const RobustTranscription& problem,
                                           const Eigen::VectorXd& defects) {
    FeasibilityReport report;
    const Eigen::VectorXd bound = problem.component_tolerances();
    if (defects.size() != bound.size()) {
        throw Error(ErrorKind::InvalidInput, "defect vector does not match the problem");
    }
    report.feasible = true;
    for (int l = 0; l < problem.layout().leg_count(); ++l) {
        LegFeasibility leg;
        const auto d = defects.segment<7>(7 * l);
        leg.position = d.head<3>().norm();
        leg.velocity = d.segment<3>(3).norm();
        leg.mass = std::abs(d[6]);
        for (int i = 0; i < 7; ++i) {
            if (!(std::abs(d[i]) <= bound[7 * l + i])) leg.flagged.push_back(i);
        }
        leg.pass = leg.flagged.empty();
        report.feasible = report.feasible && leg.pass;
        report.legs.push_back(std::move(leg));
    }
    return report;
}

FeasibilityReport check_feasibility(const RobustTranscription& problem, const Eigen::VectorXd& x) {
    try {
        return feasibility_from_defects(problem, problem.evaluate_defects(x).flat());
    } catch (const Error& e) {
        FeasibilityReport report;
        report.error = e.what();
        return report;
    }
}

}  // namespace robust_lt
