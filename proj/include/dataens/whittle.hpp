#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dataens/dft.hpp"
#include "dataens/geometry.hpp"
#include "dataens/rng.hpp"
#include "dataens/spectral_model.hpp"

namespace dataens {

/// Weight of Fourier index j in the one-sided sum: 1/2 for the real frequencies
/// (0 and, for even T, pi), 1 for the complex ones, which stand for j and T - j together.
double one_sided_weight(std::size_t j, std::size_t length);

struct WhittleEval {
    double value = 0.0;
    std::optional<std::size_t> singular_frequency;  // Fourier index where f was not positive definite
};

/// Whittle log-likelihood of a spectral field under the cross-spectral model.
///
///   l = sum_{j=0}^{floor(T/2)} -w_j [ log det f(w_j) + J_j^* f(w_j)^{-1} J_j / (2 pi T) ]
///
/// which is the exact log-density (up to a constant) of the DFT of a periodic
/// Gaussian process with E[J J^*] = 2 pi T f. Above the cutoff f = S I and the
/// term has a closed form.
class WhittleProblem {
public:
    WhittleProblem(SpectralModel model, SpectralField field, SiteGeometry geometry);

    const SpectralModel& model() const { return model_; }
    const SiteGeometry& geometry() const { return geometry_; }
    const SpectralField& field() const { return field_; }
    ParamLayout layout() const { return model_.layout(); }
    std::size_t length() const { return length_; }

    WhittleEval evaluate(const SpectralParams& p) const;
    double loglik(const SpectralParams& p) const { return evaluate(p).value; }
    double loglik(const Eigen::VectorXd& packed) const;

    /// The same sum evaluated with the general n x n path at every frequency (no shortcut).
    double loglik_general(const SpectralParams& p) const;

    /// Typical magnitude of each packed coordinate, used to scale optimizer steps.
    Eigen::VectorXd natural_scales() const;

    /// Average of the site periodograms |J|^2 / (2 pi T) at one-sided index j.
    double mean_periodogram(std::size_t j) const;

private:
    double term(std::size_t slot, const SpectralValues& v, double u_angle, bool general, bool& singular) const;

    SpectralModel model_;
    SpectralField field_;
    SiteGeometry geometry_;
    std::size_t length_ = 0;
    std::vector<std::size_t> indices_;  // one-sided Fourier indices
    std::vector<double> weights_;
    std::vector<double> power_;         // sum over sites of |J|^2
    SpectralTable table_;
};

struct OptimOptions {
    int max_iterations = 500;
    double gradient_tolerance = 1e-3;  // on the infinity norm of the scaled gradient
    double relative_step = 1e-5;       // central-difference step, relative per coordinate
    std::optional<Eigen::VectorXd> scales;
};

struct Convergence {
    bool converged = false;
    std::string status;
    int iterations = 0;
    int evaluations = 0;
    double gradient_norm = 0.0;
    std::vector<double> trace;  // log-likelihood after each iteration
};

struct HessianResult {
    Eigen::MatrixXd matrix;
    double min_eigenvalue = 0.0;
    bool positive_definite = false;
};

struct FitResult {
    SpectralParams params;
    double loglik = 0.0;
    HessianResult hessian;  // of the negative log-likelihood
    Convergence convergence;
    KnotSet knots;
};

/// Minimizes f by BFGS with central-difference gradients and a backtracking line search.
/// Coordinates are divided by `scales` internally. Deterministic.
struct MinimizeResult {
    Eigen::VectorXd x;
    double value = 0.0;
    Convergence convergence;
};
MinimizeResult minimize_bfgs(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x0,
                             const OptimOptions& options);

/// Central second differences with step rel_step * max(|x_i|, scale_i); symmetrized.
HessianResult numerical_hessian(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                double rel_step = 1e-4, const std::optional<Eigen::VectorXd>& scales = std::nullopt);

/// Hessian of the negative Whittle log-likelihood.
HessianResult hessian_at(const SpectralParams& p, const WhittleProblem& problem);

/// Starting point: log S from the smoothed average periodogram, beta = 0, theta = 0,
/// u from the west, and delta a smooth bump scaled by a coarse search over ranges.
SpectralParams initial_params(const WhittleProblem& problem);

/// Maximizes the Whittle likelihood from `initial` and evaluates the Hessian at the optimum.
FitResult fit_mle(const SpectralParams& initial, const WhittleProblem& problem, const OptimOptions& options = {});

struct ParamSamples {
    std::vector<SpectralParams> draws;
    bool fallback_used = false;  // Hessian was not positive definite and was floored
};

/// Draws from N(params_hat, H^{-1}). A Hessian that is not positive definite has its
/// eigenvalues floored at 1e-8 times the largest one.
ParamSamples sample_params(const FitResult& fit, std::size_t count, Rng& rng);

}  // namespace dataens
