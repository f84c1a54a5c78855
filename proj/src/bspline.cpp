#include "dataens/bspline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dataens/errors.hpp"

namespace dataens {

BSplineBasis::BSplineBasis(std::vector<double> breakpoints, int degree)
    : breaks_(std::move(breakpoints)), degree_(degree) {
    if (degree_ < 1) throw std::invalid_argument("B-spline degree must be at least 1");
    if (breaks_.size() < 2) throw std::invalid_argument("B-spline needs at least two breakpoints");
    for (std::size_t i = 1; i < breaks_.size(); ++i)
        if (!(breaks_[i] > breaks_[i - 1])) throw std::invalid_argument("B-spline breakpoints must increase strictly");
    knots_.assign(static_cast<std::size_t>(degree_), breaks_.front());
    knots_.insert(knots_.end(), breaks_.begin(), breaks_.end());
    knots_.insert(knots_.end(), static_cast<std::size_t>(degree_), breaks_.back());
    size_ = breaks_.size() - 1 + static_cast<std::size_t>(degree_);
}

std::size_t BSplineBasis::find_span(double x) const {
    // span index s such that knots_[s] <= x < knots_[s+1], with s in [degree, size-1]
    const auto p = static_cast<std::size_t>(degree_);
    if (x >= knots_[size_]) return size_ - 1;
    if (x <= knots_[p]) return p;
    auto it = std::upper_bound(knots_.begin() + static_cast<std::ptrdiff_t>(p),
                               knots_.begin() + static_cast<std::ptrdiff_t>(size_) + 1, x);
    return static_cast<std::size_t>(it - knots_.begin()) - 1;
}

std::size_t BSplineBasis::first_active(double x) const { return find_span(x) - static_cast<std::size_t>(degree_); }

Eigen::MatrixXd BSplineBasis::local_derivatives(double x, int max_deriv) const {
    // Derivatives of the nonzero basis functions (Piegl & Tiller, algorithm A2.3).
    x = std::clamp(x, lower(), upper());
    const int p = degree_;
    const std::size_t span = find_span(x);
    Eigen::MatrixXd ndu(p + 1, p + 1);
    std::vector<double> left(p + 1), right(p + 1);
    ndu(0, 0) = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = x - knots_[span + 1 - j];
        right[j] = knots_[span + j] - x;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            ndu(j, r) = right[r + 1] + left[j - r];
            const double temp = ndu(r, j - 1) / ndu(j, r);
            ndu(r, j) = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu(j, j) = saved;
    }
    Eigen::MatrixXd ders = Eigen::MatrixXd::Zero(max_deriv + 1, p + 1);
    for (int j = 0; j <= p; ++j) ders(0, j) = ndu(j, p);
    Eigen::MatrixXd a(2, p + 1);
    for (int r = 0; r <= p; ++r) {
        int s1 = 0, s2 = 1;
        a(0, 0) = 1.0;
        for (int k = 1; k <= std::min(max_deriv, p); ++k) {
            double d = 0.0;
            const int rk = r - k, pk = p - k;
            if (r >= k) {
                a(s2, 0) = a(s1, 0) / ndu(pk + 1, rk);
                d = a(s2, 0) * ndu(rk, pk);
            }
            const int j1 = rk >= -1 ? 1 : -rk;
            const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
            for (int j = j1; j <= j2; ++j) {
                a(s2, j) = (a(s1, j) - a(s1, j - 1)) / ndu(pk + 1, rk + j);
                d += a(s2, j) * ndu(rk + j, pk);
            }
            if (r <= pk) {
                a(s2, k) = -a(s1, k - 1) / ndu(pk + 1, r);
                d += a(s2, k) * ndu(r, pk);
            }
            ders(k, r) = d;
            std::swap(s1, s2);
        }
    }
    int factor = p;
    for (int k = 1; k <= std::min(max_deriv, p); ++k) {
        ders.row(k) *= factor;
        factor *= (p - k);
    }
    return ders;
}

Eigen::RowVectorXd BSplineBasis::row(double x, int deriv) const {
    Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(size_));
    if (deriv > degree_) return out;
    const auto d = local_derivatives(x, deriv);
    const auto first = static_cast<Eigen::Index>(first_active(std::clamp(x, lower(), upper())));
    out.segment(first, degree_ + 1) = d.row(deriv);
    return out;
}

Eigen::MatrixXd BSplineBasis::second_derivative_gram() const {
    const auto k = static_cast<Eigen::Index>(size_);
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(k, k);
    if (degree_ < 2) return gram;
    // Gauss-Legendre with enough nodes to integrate products of degree-2(p-2) polynomials exactly.
    static const double nodes3[] = {-0.7745966692414834, 0.0, 0.7745966692414834};
    static const double weights3[] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
    for (std::size_t i = 0; i + 1 < breaks_.size(); ++i) {
        const double a = breaks_[i];
        const double b = breaks_[i + 1];
        const double half = 0.5 * (b - a);
        const double mid = 0.5 * (a + b);
        for (int q = 0; q < 3; ++q) {
            const double x = mid + half * nodes3[q];
            const auto d = local_derivatives(x, 2);
            const auto first = static_cast<Eigen::Index>(first_active(x));
            for (int r = 0; r <= degree_; ++r)
                for (int c = 0; c <= degree_; ++c)
                    gram(first + r, first + c) += weights3[q] * half * d(2, r) * d(2, c);
        }
    }
    return gram;
}

ConstrainedBasis::ConstrainedBasis(Symmetry symmetry, std::vector<double> positive_knots,
                                   std::vector<int> right_zero_derivatives)
    : symmetry_(symmetry), knots_(std::move(positive_knots)) {
    if (knots_.empty()) throw ConfigError("constrained basis needs at least one positive knot");
    if (!(knots_.front() > 0.0)) throw ConfigError("knots must be positive");
    std::vector<double> breaks{0.0};
    breaks.insert(breaks.end(), knots_.begin(), knots_.end());
    try {
        raw_ = BSplineBasis(breaks, 3);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("invalid knot set: ") + e.what());
    }
    const auto k = static_cast<Eigen::Index>(raw_.size());

    // Constraint rows G c = 0.
    std::vector<Eigen::RowVectorXd> rows;
    rows.push_back(raw_.row(0.0, symmetry_ == Symmetry::Even ? 1 : 0));
    for (int d : right_zero_derivatives) {
        if (d < 0 || d > 3) throw ConfigError("endpoint constraint derivative order must be in 0..3");
        rows.push_back(raw_.row(raw_.upper(), d));
    }
    Eigen::MatrixXd g(static_cast<Eigen::Index>(rows.size()), k);
    for (std::size_t r = 0; r < rows.size(); ++r) g.row(static_cast<Eigen::Index>(r)) = rows[r];

    // Row reduction, pivoting on the column nearest either end.
    std::vector<Eigen::Index> pivot_col(rows.size(), -1);
    std::vector<bool> is_pivot(static_cast<std::size_t>(k), false);
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
        const double scale = g.row(r).cwiseAbs().maxCoeff();
        if (scale == 0.0) throw ConfigError("constraint system is rank-deficient");
        Eigen::Index best = -1;
        Eigen::Index best_dist = k;
        for (Eigen::Index c = 0; c < k; ++c) {
            if (is_pivot[static_cast<std::size_t>(c)] || std::abs(g(r, c)) <= 1e-10 * scale) continue;
            const Eigen::Index dist = std::min(c, k - 1 - c);
            if (dist < best_dist) {
                best_dist = dist;
                best = c;
            }
        }
        if (best < 0) throw ConfigError("constraint system is rank-deficient");
        g.row(r) /= g(r, best);
        for (Eigen::Index o = 0; o < g.rows(); ++o)
            if (o != r && g(o, best) != 0.0) g.row(o) -= g(o, best) * g.row(r);
        for (Eigen::Index c = 0; c < k; ++c)
            if (std::abs(g(r, c)) < 1e-14) g(r, c) = 0.0;
        pivot_col[static_cast<std::size_t>(r)] = best;
        is_pivot[static_cast<std::size_t>(best)] = true;
    }

    std::vector<Eigen::Index> free_cols;
    for (Eigen::Index c = 0; c < k; ++c)
        if (!is_pivot[static_cast<std::size_t>(c)]) free_cols.push_back(c);
    reduction_ = Eigen::MatrixXd::Zero(k, static_cast<Eigen::Index>(free_cols.size()));
    for (std::size_t f = 0; f < free_cols.size(); ++f) {
        const auto col = static_cast<Eigen::Index>(f);
        reduction_(free_cols[f], col) = 1.0;
        for (Eigen::Index r = 0; r < g.rows(); ++r)
            reduction_(pivot_col[static_cast<std::size_t>(r)], col) = -g(r, free_cols[f]);
    }
}

Eigen::RowVectorXd ConstrainedBasis::row(double omega, int deriv) const {
    const double a = std::abs(omega);
    if (a > raw_.upper() || dimension() == 0) return Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(dimension()));
    Eigen::RowVectorXd r = raw_.row(a, deriv) * reduction_;
    if (omega < 0.0) {
        // even: f(w) = g(-w); odd: f(w) = -g(-w)
        const bool odd_deriv = (deriv % 2) == 1;
        const bool flip = (symmetry_ == Symmetry::Even) ? odd_deriv : !odd_deriv;
        if (flip) r = -r;
    }
    return r;
}

double ConstrainedBasis::eval(const Eigen::VectorXd& coeffs, double omega, int deriv) const {
    if (static_cast<std::size_t>(coeffs.size()) != dimension())
        throw std::invalid_argument("coefficient vector length does not match basis dimension");
    return row(omega, deriv).dot(coeffs);
}

}  // namespace dataens
