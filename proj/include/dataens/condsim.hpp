#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dataens/dft.hpp"
#include "dataens/geometry.hpp"
#include "dataens/ingest.hpp"
#include "dataens/meanfield.hpp"
#include "dataens/preprocess.hpp"
#include "dataens/spectral_model.hpp"
#include "dataens/whittle.hpp"

namespace dataens {

/// Observed sites followed by prediction targets.
struct PredictionSetup {
    SiteGeometry observed;
    std::vector<StationMeta> targets;
    SiteGeometry combined;                   // observed sites first, then targets
    std::vector<bool> coincident;            // target shares a location with an observed site

    static PredictionSetup make(const SiteGeometry& observed, std::vector<StationMeta> targets);
    std::size_t n_observed() const { return observed.size(); }
    std::size_t n_targets() const { return targets.size(); }
};

/// Conditional distribution of the target coefficients at one Fourier index:
/// mean f_po f_oo^{-1} J_o and covariance 2 pi T (f_pp - f_po f_oo^{-1} f_op).
struct ConditionalMoments {
    Eigen::VectorXcd mean;
    Eigen::MatrixXcd covariance;
    bool ridged = false;
};

ConditionalMoments conditional_moments(const SpectralModel& model, const SpectralParams& params,
                                       const PredictionSetup& setup, const SpectralField& observed, std::size_t j);

struct DrawInfo {
    std::size_t ridged_frequencies = 0;
};

/// Draws the target coefficients independently at every one-sided Fourier index
/// and mirrors them by conjugate symmetry. Index j uses the substream
/// (seed, "condsim", member, j), so results do not depend on scheduling.
SpectralField conditional_draw(const SpectralModel& model, const SpectralParams& params, const PredictionSetup& setup,
                               const SpectralField& observed, std::uint64_t seed, std::uint64_t member,
                               DrawInfo* info = nullptr);

/// Unconditional draw at every site of `geometry`: J(w) ~ CN(0, 2 pi T f(w)).
SpectralField unconditional_draw(const SpectralModel& model, const SpectralParams& params,
                                 const SiteGeometry& geometry, std::size_t length, std::uint64_t seed,
                                 std::uint64_t member);

struct EnsembleMember {
    std::optional<std::size_t> param_draw_id;  // empty when the MLE was used
    Eigen::VectorXd mean_field_draw;           // simulated time mean per target, kPa
    Eigen::MatrixXd pressure;                  // targets x (T + 1), kPa
    Eigen::MatrixXd diffs;                     // targets x T, kPa
};

struct Ensemble {
    std::vector<EnsembleMember> members;
    std::vector<StationMeta> targets;
    Timestamp start_time = 0;
    std::int64_t step = 300;
    std::uint64_t seed = 0;
    bool vary_params = true;
    bool hessian_fallback = false;
    std::size_t ridged_frequencies = 0;
    std::string provenance;  // fit report hash
};

struct EnsembleOptions {
    std::size_t count = 99;
    bool vary_params = true;
    std::uint64_t seed = 0;
    std::string provenance;
};

/// Full ensemble: per member optionally draw parameters, draw the target field
/// conditionally on the observed sites, invert the DFT, draw the target means
/// from the mean-field model and invert the transform stack.
/// `observed` must hold the sites of `setup.observed` in the same order.
Ensemble run_ensemble(const FitResult& fit, const TransformStack& stack, const PredictionSetup& setup,
                      const DataGrid& observed, const MeanFieldModel& mean_field, const EnsembleOptions& options);

}  // namespace dataens
