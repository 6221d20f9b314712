#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace robust_lt {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct NlpValue {
    double objective = 0.0;
    Eigen::VectorXd constraints;
};

struct NlpDerivatives {
    NlpValue value;
    Eigen::VectorXd gradient;  // d(objective)/dx
    SparseMatrix jacobian;     // d(constraints)/dx
};

/// Equality-constrained program  min f(x)  s.t.  c(x) = 0,  lower <= x <= upper.
/// Feasibility of c is decided by the problem itself so the solver's status and
/// the problem's own tolerance test can never disagree.
class NlpProblem {
public:
    virtual ~NlpProblem() = default;

    virtual int variable_count() const = 0;
    virtual int constraint_count() const = 0;
    virtual const Eigen::VectorXd& lower_bounds() const = 0;
    virtual const Eigen::VectorXd& upper_bounds() const = 0;

    virtual NlpValue evaluate(const Eigen::VectorXd& x) const = 0;
    virtual NlpDerivatives evaluate_with_derivatives(const Eigen::VectorXd& x) const = 0;

    /// Closed tolerance test on a constraint vector.
    virtual bool within_tolerance(const Eigen::VectorXd& constraints) const = 0;

    /// Positive per-row weights; the solver works on scales .* c.
    virtual Eigen::VectorXd constraint_scales() const {
        return Eigen::VectorXd::Ones(constraint_count());
    }
};

}  // namespace robust_lt
