#include "dataens/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "dataens/bspline.hpp"
#include "dataens/errors.hpp"

namespace dataens {

double SeaLevelModel::p0() const { return std::exp(log_p0); }

void SeaLevelModel::validate() const {
    if (!(scale_height > 0.0) || !std::isfinite(scale_height) || !std::isfinite(log_p0))
        throw ValidationError("sea-level model needs a finite p0 and a positive scale height");
}

SeaLevelFit fit_sea_level(const Eigen::VectorXd& site_means, const Eigen::VectorXd& elevations) {
    const auto n = site_means.size();
    if (n != elevations.size()) throw std::invalid_argument("site means and elevations differ in length");
    if (n < 2) throw ValidationError("sea-level fit needs at least two stations");
    if ((site_means.array() <= 0.0).any()) throw ValidationError("site means must be positive");
    const Eigen::ArrayXd y = site_means.array().log();
    const Eigen::ArrayXd a = elevations.array();
    const double abar = a.mean();
    const double ybar = y.mean();
    const double saa = (a - abar).square().sum();
    if (saa <= 1e-12 * std::max(1.0, a.square().sum()))
        throw NumericalError("sea-level regression is rank-deficient: all elevations are equal");
    const double slope = ((a - abar) * (y - ybar)).sum() / saa;
    if (!(slope < 0.0)) throw NumericalError("sea-level regression gives a non-negative slope; scale height undefined");
    SeaLevelFit fit;
    fit.model.scale_height = -1.0 / slope;
    fit.model.log_p0 = ybar - slope * abar;
    const double sst = (y - ybar).square().sum();
    const double sse = (y - (fit.model.log_p0 + slope * a)).square().sum();
    fit.r_squared = sst > 0.0 ? 1.0 - sse / sst : 1.0;
    return fit;
}

double to_sea_level(double value, double elevation, const SeaLevelModel& model) {
    return value * std::exp(elevation / model.scale_height);
}

double from_sea_level(double value, double elevation, const SeaLevelModel& model) {
    return value * std::exp(-elevation / model.scale_height);
}

Eigen::MatrixXd difference(const Eigen::MatrixXd& values) {
    if (values.cols() < 2) throw std::invalid_argument("differencing needs at least two time points");
    const auto t = values.cols() - 1;
    return values.rightCols(t) - values.leftCols(t);
}

Eigen::MatrixXd undifference(const Eigen::MatrixXd& diffs, const Eigen::VectorXd& first) {
    Eigen::MatrixXd out(diffs.rows(), diffs.cols() + 1);
    out.col(0) = first;
    for (Eigen::Index t = 0; t < diffs.cols(); ++t) out.col(t + 1) = out.col(t) + diffs.col(t);
    return out;
}

void DiurnalModel::validate() const {
    if (period < 2 || n_harmonics < 1 || 2 * n_harmonics >= period)
        throw ValidationError("diurnal model needs period >= 2, harmonics >= 1 and 2*harmonics < period");
    if (coefficients.size() != 2 * n_harmonics) throw ValidationError("diurnal coefficient count mismatch");
}

Eigen::MatrixXd DiurnalModel::design(std::size_t length, int period, int n_harmonics) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(length), 2 * n_harmonics);
    for (std::size_t t = 0; t < length; ++t) {
        const double base = 2.0 * std::numbers::pi * static_cast<double>(t + 1) / period;
        for (int j = 1; j <= n_harmonics; ++j) {
            x(static_cast<Eigen::Index>(t), 2 * (j - 1)) = std::cos(base * j);
            x(static_cast<Eigen::Index>(t), 2 * (j - 1) + 1) = std::sin(base * j);
        }
    }
    return x;
}

double DiurnalModel::at(std::size_t t) const {
    const double base = 2.0 * std::numbers::pi * static_cast<double>(t) / period;
    double s = 0.0;
    for (int j = 1; j <= n_harmonics; ++j)
        s += coefficients[2 * (j - 1)] * std::cos(base * j) + coefficients[2 * (j - 1) + 1] * std::sin(base * j);
    return s;
}

Eigen::VectorXd DiurnalModel::series(std::size_t length) const {
    return design(length, period, n_harmonics) * coefficients;
}

DiurnalFit fit_diurnal(const Eigen::MatrixXd& diffs, int period, int n_harmonics) {
    DiurnalFit fit;
    fit.model.period = period;
    fit.model.n_harmonics = n_harmonics;
    fit.model.coefficients = Eigen::VectorXd::Zero(2 * n_harmonics);
    fit.model.validate();
    const auto len = static_cast<std::size_t>(diffs.cols());
    if (len < static_cast<std::size_t>(2 * n_harmonics + 1))
        throw ValidationError("series too short for " + std::to_string(n_harmonics) + " harmonics");
    const Eigen::MatrixXd x = DiurnalModel::design(len, period, n_harmonics);
    const Eigen::VectorXd mean_series = diffs.colwise().mean().transpose();
    fit.model.coefficients = x.colPivHouseholderQr().solve(mean_series);
    const Eigen::RowVectorXd cycle = (x * fit.model.coefficients).transpose();
    fit.variance_removed.resize(diffs.rows());
    for (Eigen::Index i = 0; i < diffs.rows(); ++i) {
        const Eigen::ArrayXd y = diffs.row(i).transpose().array();
        const Eigen::ArrayXd r = (diffs.row(i) - cycle).transpose().array();
        const double vy = (y - y.mean()).square().sum();
        const double vr = (r - r.mean()).square().sum();
        fit.variance_removed[i] = vy > 0.0 ? 1.0 - vr / vy : 0.0;
    }
    fit.mean_variance_removed = diffs.rows() ? fit.variance_removed.mean() : 0.0;
    return fit;
}

SmoothingSpline::SmoothingSpline(std::size_t n, double df) : n_(n) {
    if (n < 4) throw std::invalid_argument("smoothing spline needs at least 4 points");
    if (!(df > 2.0) || !(df < static_cast<double>(n)))
        throw std::invalid_argument("smoothing spline df must lie in (2, n)");
    // Knots every k-th point with at least 4*df knots, and always a knot at n.
    const auto wanted = static_cast<std::size_t>(std::ceil(4.0 * df));
    const std::size_t k = std::max<std::size_t>(1, (n - 1) / std::max<std::size_t>(1, wanted - 1));
    std::vector<double> breaks;
    for (std::size_t x = 1; x <= n; x += k) breaks.push_back(static_cast<double>(x));
    if (breaks.back() != static_cast<double>(n)) breaks.push_back(static_cast<double>(n));
    n_knots_ = breaks.size();
    const BSplineBasis basis(breaks, 3);
    const auto kdim = static_cast<Eigen::Index>(basis.size());
    if (df >= static_cast<double>(kdim) - 1e-9)
        throw std::invalid_argument("smoothing spline df exceeds the regression-spline dimension");

    basis_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), kdim);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = static_cast<double>(i + 1);
        const auto d = basis.local_derivatives(x, 0);
        const auto first = static_cast<Eigen::Index>(basis.first_active(x));
        basis_.row(static_cast<Eigen::Index>(i)).segment(first, 4) = d.row(0);
    }
    const Eigen::MatrixXd gram = basis_.transpose() * basis_;
    const Eigen::MatrixXd penalty = basis.second_derivative_gram();

    // trace(S_lambda) = sum 1 / (1 + lambda mu_i) for the generalized eigenvalues mu of (penalty, gram).
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(penalty, gram);
    if (ges.info() != Eigen::Success) throw NumericalError("smoothing spline eigen decomposition failed");
    eigenvalues_ = ges.eigenvalues().cwiseMax(0.0);

    const double scale = gram.trace() / std::max(penalty.trace(), 1e-300);
    double lo = std::log(scale) - 60.0;  // trace near K
    double hi = std::log(scale) + 60.0;  // trace near 2
    for (int it = 0; it < 300; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double tr = trace_at(std::exp(mid));
        if (tr > df) lo = mid;
        else hi = mid;
        if (std::abs(tr - df) < 1e-6) break;
    }
    lambda_ = std::exp(0.5 * (lo + hi));
    achieved_df_ = trace_at(lambda_);
    system_.compute(gram + lambda_ * penalty);
}

double SmoothingSpline::trace_at(double lambda) const {
    return (1.0 / (1.0 + lambda * eigenvalues_.array())).sum();
}

Eigen::VectorXd SmoothingSpline::smooth(const Eigen::VectorXd& y) const {
    if (static_cast<std::size_t>(y.size()) != n_) throw std::invalid_argument("smoothing spline length mismatch");
    const Eigen::VectorXd coeffs = system_.solve(basis_.transpose() * y);
    return basis_ * coeffs;
}

VolatilitySeries estimate_volatility(const Eigen::MatrixXd& residuals, double df, double sd_floor) {
    if (residuals.rows() < 2) throw ValidationError("volatility estimation needs at least two sites");
    const auto len = residuals.cols();
    Eigen::VectorXd log_sd(len);
    const double n = static_cast<double>(residuals.rows());
    for (Eigen::Index t = 0; t < len; ++t) {
        const auto col = residuals.col(t).array();
        const double sd = std::sqrt((col - col.mean()).square().sum() / (n - 1.0));
        log_sd[t] = std::log(std::max(sd, sd_floor));
    }
    const SmoothingSpline spline(static_cast<std::size_t>(len), df);
    VolatilitySeries v;
    v.values = spline.smooth(log_sd).array().exp();
    v.spline_df = spline.effective_df();
    return v;
}

Eigen::MatrixXd standardize(const Eigen::MatrixXd& residuals, const Eigen::VectorXd& volatility) {
    if (residuals.cols() != volatility.size()) throw std::invalid_argument("volatility length mismatch");
    if ((volatility.array() <= 0.0).any()) throw std::invalid_argument("volatility must be positive");
    return residuals.array().rowwise() / volatility.transpose().array();
}

Eigen::MatrixXd unstandardize(const Eigen::MatrixXd& adjusted, const Eigen::VectorXd& volatility) {
    if (adjusted.cols() != volatility.size()) throw std::invalid_argument("volatility length mismatch");
    return adjusted.array().rowwise() * volatility.transpose().array();
}

namespace {

Eigen::MatrixXd sea_level_corrected(const Eigen::MatrixXd& values, const Eigen::VectorXd& elevations,
                                    const SeaLevelModel& model) {
    Eigen::MatrixXd out = values;
    for (Eigen::Index i = 0; i < values.rows(); ++i)
        out.row(i) *= std::exp(elevations[i] / model.scale_height);
    return out;
}

}  // namespace

TransformStack fit_stack(const DataGrid& grid, const StackOptions& options) {
    if (grid.n_times() < 2) throw ValidationError("grid needs at least two time points");
    TransformStack stack;
    for (const auto& s : grid.stations) stack.station_ids.push_back(s.id);
    stack.site_means = grid.values.rowwise().mean();
    const Eigen::VectorXd elev = grid.elevations();
    if (options.fixed_sea_level) {
        stack.sea_level = *options.fixed_sea_level;
        stack.sea_level.validate();
    } else {
        const auto fit = fit_sea_level(stack.site_means, elev);
        stack.sea_level = fit.model;
        stack.sea_level_r2 = fit.r_squared;
    }
    const Eigen::MatrixXd d = difference(sea_level_corrected(grid.values, elev, stack.sea_level));
    const auto diurnal = fit_diurnal(d, options.diurnal_period, options.n_harmonics);
    stack.diurnal = diurnal.model;
    stack.diurnal_variance_removed = diurnal.variance_removed;
    const Eigen::MatrixXd r = d.rowwise() - stack.diurnal.series(static_cast<std::size_t>(d.cols())).transpose();
    stack.volatility = estimate_volatility(r, options.volatility_df, options.sd_floor);
    return stack;
}

Eigen::MatrixXd apply_stack(const DataGrid& grid, const TransformStack& stack) {
    if (grid.n_times() != stack.n_times() + 1)
        throw ValidationError("grid has " + std::to_string(grid.n_times()) + " time points, transform stack expects " +
                              std::to_string(stack.n_times() + 1));
    const Eigen::MatrixXd d = difference(sea_level_corrected(grid.values, grid.elevations(), stack.sea_level));
    const Eigen::MatrixXd r = d.rowwise() - stack.diurnal.series(static_cast<std::size_t>(d.cols())).transpose();
    return standardize(r, stack.volatility.values);
}

Reconstruction invert_stack(const Eigen::MatrixXd& adjusted, const TransformStack& stack,
                            const Eigen::VectorXd& elevations, const Eigen::VectorXd& site_means) {
    if (static_cast<std::size_t>(adjusted.cols()) != stack.n_times())
        throw ValidationError("simulated series length does not match the transform stack");
    if (adjusted.rows() != elevations.size() || adjusted.rows() != site_means.size())
        throw ValidationError("one elevation and one site mean are needed per simulated series");
    Reconstruction out;
    Eigen::MatrixXd d = unstandardize(adjusted, stack.volatility.values);
    d.rowwise() += stack.diurnal.series(static_cast<std::size_t>(d.cols())).transpose();
    for (Eigen::Index i = 0; i < d.rows(); ++i) d.row(i) *= std::exp(-elevations[i] / stack.sea_level.scale_height);
    out.diffs = d;
    out.pressure = undifference(d, Eigen::VectorXd::Zero(d.rows()));
    for (Eigen::Index i = 0; i < d.rows(); ++i)
        out.pressure.row(i).array() += site_means[i] - out.pressure.row(i).mean();
    return out;
}

}  // namespace dataens
