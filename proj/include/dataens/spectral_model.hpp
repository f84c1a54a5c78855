#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "dataens/bspline.hpp"
#include "dataens/geometry.hpp"

namespace dataens {

/// Positive knot frequencies (radians per time step) for each spectral function.
/// Knots are mirrored about 0 implicitly.
struct KnotSet {
    std::vector<double> s;
    std::vector<double> beta;
    std::vector<double> delta;
    std::vector<double> theta;
    double cutoff = 0.0;  // omega_0: no cross-site coherence above this frequency

    /// Knots at pi*j/4320 for the j values used with 5-minute data over 30 days.
    /// If `cutoff` exceeds the hourly frequency, it is appended as the last
    /// knot of beta, delta and theta.
    static KnotSet defaults(double cutoff = kHourlyCutoff);
    static KnotSet from_indices(const std::vector<int>& s, const std::vector<int>& beta,
                                const std::vector<int>& delta, const std::vector<int>& theta, double cutoff,
                                int denominator = 4320);

    /// Throws ConfigError unless knots are positive and increasing, delta/theta/beta
    /// end at the cutoff, S ends at pi, and cutoff is in (0, pi].
    void validate() const;

    static constexpr double kHourlyCutoff = 3.14159265358979323846 / 6.0;
};

/// Offsets of each block within the packed parameter vector
/// [s | beta | delta | theta | u_angle].
struct ParamLayout {
    std::size_t n_s = 0;
    std::size_t n_beta = 0;
    std::size_t n_delta = 0;
    std::size_t n_theta = 0;

    std::size_t beta_offset() const { return n_s; }
    std::size_t delta_offset() const { return n_s + n_beta; }
    std::size_t theta_offset() const { return n_s + n_beta + n_delta; }
    std::size_t u_offset() const { return n_s + n_beta + n_delta + n_theta; }
    std::size_t total() const { return u_offset() + 1; }
};

struct SpectralParams {
    Eigen::VectorXd s;      // log S spline coefficients
    Eigen::VectorXd beta;   // log(S1/S0) spline coefficients
    Eigen::VectorXd delta;  // range spline coefficients (km); correlation is C(d / |delta|)
    Eigen::VectorXd theta;  // phase slope spline coefficients (radians per km)
    double u_angle = 0.0;   // direction of u, radians counterclockwise from east

    static SpectralParams zeros(const ParamLayout& layout);
    Eigen::VectorXd pack() const;
    static SpectralParams unpack(const Eigen::VectorXd& v, const ParamLayout& layout);
    ParamLayout layout() const;
    bool finite() const;
};

/// e^{-r}(1 + r), Matern correlation with smoothness 3/2. Throws for r < 0.
double matern32(double r);

/// Point values of the four spectral functions at one frequency.
struct SpectralValues {
    double S = 0.0;
    double S0 = 0.0;  // spatial nugget part
    double S1 = 0.0;  // spatially correlated part
    double delta = 0.0;
    double theta = 0.0;
};

/// Assembles f(w) = S0 I + S1 [C(d_jk/|delta|) exp(i u'(x_j - x_k) theta)] for given
/// point values; C(d/0) is 1{d = 0}.
Eigen::MatrixXcd assemble_cross_spectrum(const SpectralValues& v, double u_angle, const SiteGeometry& geometry);

class SpectralModel {
public:
    explicit SpectralModel(KnotSet knots);

    const KnotSet& knots() const { return knots_; }
    double cutoff() const { return knots_.cutoff; }
    ParamLayout layout() const;

    const ConstrainedBasis& s_basis() const { return s_basis_; }
    const ConstrainedBasis& beta_basis() const { return beta_basis_; }
    const ConstrainedBasis& delta_basis() const { return delta_basis_; }
    const ConstrainedBasis& theta_basis() const { return theta_basis_; }

    double log_S(const SpectralParams& p, double omega) const;
    double eval_S(const SpectralParams& p, double omega) const;
    /// Beyond the cutoff beta is irrelevant; its value at the cutoff is returned.
    double eval_beta(const SpectralParams& p, double omega) const;
    double eval_delta(const SpectralParams& p, double omega) const;
    double eval_theta(const SpectralParams& p, double omega) const;

    /// (S0, S1) with S0 + S1 = S; above the cutoff everything goes to S0.
    std::pair<double, double> split_S(const SpectralParams& p, double omega) const;
    SpectralValues evaluate(const SpectralParams& p, double omega) const;

    Eigen::MatrixXcd cross_spectrum(const SpectralParams& p, const SiteGeometry& geometry, double omega) const;
    std::complex<double> coherence(const SpectralParams& p, const SiteGeometry& geometry, double omega,
                                   std::size_t j, std::size_t k) const;

private:
    KnotSet knots_;
    ConstrainedBasis s_basis_;
    ConstrainedBasis beta_basis_;
    ConstrainedBasis delta_basis_;
    ConstrainedBasis theta_basis_;
};

/// Basis rows tabulated once on a fixed frequency grid, so repeated evaluation
/// for many parameter vectors is a handful of matrix-vector products.
class SpectralTable {
public:
    SpectralTable(const SpectralModel& model, std::vector<double> omegas);

    std::size_t size() const { return omegas_.size(); }
    const std::vector<double>& omegas() const { return omegas_; }
    bool within_cutoff(std::size_t i) const { return within_[i]; }

    std::vector<SpectralValues> values(const SpectralParams& p) const;

private:
    std::vector<double> omegas_;
    std::vector<bool> within_;
    Eigen::MatrixXd s_rows_;
    Eigen::MatrixXd beta_rows_;
    Eigen::MatrixXd delta_rows_;
    Eigen::MatrixXd theta_rows_;
};

}  // namespace dataens
