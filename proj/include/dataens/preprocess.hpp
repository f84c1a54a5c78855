#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dataens/ingest.hpp"

namespace dataens {

/// Mean pressure p0 exp(-a / H) at altitude a (meters).
struct SeaLevelModel {
    double log_p0 = 0.0;        // log kPa
    double scale_height = 8310; // meters

    double p0() const;
    void validate() const;
};

struct SeaLevelFit {
    SeaLevelModel model;
    double r_squared = 0.0;
};

/// Least-squares fit of log(mean) = log p0 - a / H.
SeaLevelFit fit_sea_level(const Eigen::VectorXd& site_means, const Eigen::VectorXd& elevations);

/// value * exp(a / H)
double to_sea_level(double value, double elevation, const SeaLevelModel& model);
/// value * exp(-a / H)
double from_sea_level(double value, double elevation, const SeaLevelModel& model);

/// out(i, t) = in(i, t + 1) - in(i, t)
Eigen::MatrixXd difference(const Eigen::MatrixXd& values);
/// Inverse of `difference` given the first column.
Eigen::MatrixXd undifference(const Eigen::MatrixXd& diffs, const Eigen::VectorXd& first);

/// Shared diurnal cycle: sum over j of a_j cos(2 pi j t / period) + b_j sin(2 pi j t / period),
/// with t = 1, 2, ... indexing the differenced series.
struct DiurnalModel {
    int period = 288;
    int n_harmonics = 15;
    Eigen::VectorXd coefficients;  // [a_1, b_1, a_2, b_2, ...]

    void validate() const;
    double at(std::size_t t) const;  // t is 1-based
    Eigen::VectorXd series(std::size_t length) const;
    static Eigen::MatrixXd design(std::size_t length, int period, int n_harmonics);
};

struct DiurnalFit {
    DiurnalModel model;
    Eigen::VectorXd variance_removed;  // per site, 1 - var(residual) / var(diffs)
    double mean_variance_removed = 0.0;
};

/// Regresses the cross-site mean of `diffs` on the harmonics; coefficients are shared by all sites.
DiurnalFit fit_diurnal(const Eigen::MatrixXd& diffs, int period = 288, int n_harmonics = 15);

/// Cubic smoothing spline for equispaced data at x = 1..n, fitted as a penalized
/// regression spline with the integrated squared second derivative as penalty.
/// The penalty weight is chosen so the smoother matrix has trace equal to `df`.
class SmoothingSpline {
public:
    SmoothingSpline(std::size_t n, double df);

    Eigen::VectorXd smooth(const Eigen::VectorXd& y) const;
    double lambda() const { return lambda_; }
    double effective_df() const { return achieved_df_; }
    std::size_t n_knots() const { return n_knots_; }
    /// Trace of the smoother matrix at an arbitrary penalty weight.
    double trace_at(double lambda) const;

private:
    std::size_t n_ = 0;
    std::size_t n_knots_ = 0;
    double lambda_ = 0.0;
    double achieved_df_ = 0.0;
    Eigen::MatrixXd basis_;       // n x K
    Eigen::VectorXd eigenvalues_; // generalized eigenvalues of (penalty, B'B)
    Eigen::LDLT<Eigen::MatrixXd> system_;
};

struct VolatilitySeries {
    Eigen::VectorXd values;  // V(t) > 0
    double spline_df = 72.0;
};

/// Cross-site SD per time (floored at sd_floor), log, cubic smoothing spline with `df`
/// effective degrees of freedom, exponentiated.
VolatilitySeries estimate_volatility(const Eigen::MatrixXd& residuals, double df = 72.0, double sd_floor = 0.005);

/// A(x, t) = R(x, t) / V(t)
Eigen::MatrixXd standardize(const Eigen::MatrixXd& residuals, const Eigen::VectorXd& volatility);
Eigen::MatrixXd unstandardize(const Eigen::MatrixXd& adjusted, const Eigen::VectorXd& volatility);

struct TransformStack {
    SeaLevelModel sea_level;
    double sea_level_r2 = 0.0;
    DiurnalModel diurnal;
    Eigen::VectorXd diurnal_variance_removed;
    VolatilitySeries volatility;
    std::vector<std::string> station_ids;
    Eigen::VectorXd site_means;  // time mean of the 5-minute averages, kPa

    std::size_t n_times() const { return static_cast<std::size_t>(volatility.values.size()); }
};

struct StackOptions {
    int diurnal_period = 288;
    int n_harmonics = 15;
    double volatility_df = 72.0;
    double sd_floor = 0.005;
    std::optional<SeaLevelModel> fixed_sea_level;
};

/// Fits every transform on `grid` (n x (T + 1)).
TransformStack fit_stack(const DataGrid& grid, const StackOptions& options = {});

/// Sea-level correction, differencing, diurnal removal and standardization; returns n x T.
Eigen::MatrixXd apply_stack(const DataGrid& grid, const TransformStack& stack);

struct Reconstruction {
    Eigen::MatrixXd diffs;     // m x T pressure changes at site elevation, kPa
    Eigen::MatrixXd pressure;  // m x (T + 1), kPa, time mean equal to the requested site mean
};

Reconstruction invert_stack(const Eigen::MatrixXd& adjusted, const TransformStack& stack,
                            const Eigen::VectorXd& elevations, const Eigen::VectorXd& site_means);

}  // namespace dataens
