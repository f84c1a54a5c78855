#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace dataens {

/// Clamped B-spline basis of a given degree over strictly increasing breakpoints.
/// The knot vector repeats each end breakpoint degree+1 times, so the basis has
/// (breakpoints - 1) + degree members and interpolates at both ends.
class BSplineBasis {
public:
    BSplineBasis() = default;
    explicit BSplineBasis(std::vector<double> breakpoints, int degree = 3);

    std::size_t size() const { return size_; }
    int degree() const { return degree_; }
    double lower() const { return breaks_.front(); }
    double upper() const { return breaks_.back(); }
    const std::vector<double>& breakpoints() const { return breaks_; }

    /// Index of the first basis function that may be nonzero at x; the next
    /// degree+1 functions are the only nonzero ones.
    std::size_t first_active(double x) const;

    /// Derivatives 0..max_deriv of the degree+1 active basis functions at x,
    /// as a (max_deriv+1) x (degree+1) matrix. x is clamped into [lower, upper].
    Eigen::MatrixXd local_derivatives(double x, int max_deriv) const;

    /// Dense row of all basis functions' deriv-th derivative at x.
    Eigen::RowVectorXd row(double x, int deriv = 0) const;

    /// Gram matrix of second derivatives, integral over [lower, upper] of B''_i B''_j.
    Eigen::MatrixXd second_derivative_gram() const;

private:
    std::size_t find_span(double x) const;

    std::vector<double> breaks_;
    std::vector<double> knots_;
    int degree_ = 3;
    std::size_t size_ = 0;
};

enum class Symmetry { Even, Odd };

/// Cubic spline space on [-L, L] that is even or odd in omega and satisfies
/// homogeneous derivative conditions at the right end (and by symmetry the left).
///
/// Built on [0, L] with a clamped basis and reflected. At the origin an even
/// function is given g'(0) = 0 and an odd one g(0) = 0, so every member is C1 at 0.
/// The constraints are eliminated by Gaussian elimination that pivots on the
/// coefficients nearest the ends, which leaves a basis of merged B-splines
/// (for instance B0 + B1 at the origin of an even space). Members vanish outside [-L, L].
class ConstrainedBasis {
public:
    ConstrainedBasis() = default;
    ConstrainedBasis(Symmetry symmetry, std::vector<double> positive_knots, std::vector<int> right_zero_derivatives);

    Symmetry symmetry() const { return symmetry_; }
    std::size_t dimension() const { return static_cast<std::size_t>(reduction_.cols()); }
    double support() const { return raw_.upper(); }
    const std::vector<double>& positive_knots() const { return knots_; }

    /// Values of the deriv-th derivative of every basis member at omega.
    Eigen::RowVectorXd row(double omega, int deriv = 0) const;
    double eval(const Eigen::VectorXd& coeffs, double omega, int deriv = 0) const;

    /// Raw B-spline coefficients (on [0, L]) for constrained coefficients.
    const Eigen::MatrixXd& reduction() const { return reduction_; }

private:
    Symmetry symmetry_ = Symmetry::Even;
    std::vector<double> knots_;
    BSplineBasis raw_;
    Eigen::MatrixXd reduction_;
};

}  // namespace dataens
