#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dataens/geometry.hpp"
#include "dataens/rng.hpp"

namespace dataens {

/// Spatial model for the field of elevation-adjusted monthly means M(x):
/// a constant unknown mean plus a process with variogram theta * G(d).
enum class Variogram {
    PureNugget,  // G(d) = 1{d > 0}
    Linear,      // G(d) = d, km
};

std::string to_string(Variogram v);
Variogram variogram_from_string(const std::string& s);

double variogram_shape(Variogram v, double distance_km);

struct KrigingPrediction {
    Eigen::VectorXd predictor;   // kPa on the M scale
    Eigen::MatrixXd covariance;  // kPa^2, prediction-error covariance across targets
};

struct MeanFieldModel {
    Variogram variogram = Variogram::PureNugget;
    double theta_hat = 0.0;
    double reml_loglik = 0.0;
    std::size_t n_fit = 0;
    std::vector<LatLon> sites;
    Eigen::VectorXd values;
    std::optional<KrigingPrediction> krige;  // filled by krige()

    std::size_t degrees_of_freedom() const { return n_fit - 1; }
};

/// Restricted log-likelihood of theta for the given variogram, computed from
/// orthonormal error contrasts (so values are comparable across variograms).
double reml_loglik(const Eigen::VectorXd& values, const std::vector<LatLon>& sites, Variogram variogram, double theta);

/// Closed-form REML estimate of theta under a constant unknown mean.
MeanFieldModel reml_fit(const Eigen::VectorXd& values, const std::vector<LatLon>& sites, Variogram variogram);

/// Ordinary (nugget) or intrinsic (linear) kriging at the targets, with the full
/// error covariance between targets. Stores the result in `model.krige`.
KrigingPrediction krige(MeanFieldModel& model, const std::vector<LatLon>& targets);

struct MeanFieldChoice {
    MeanFieldModel nugget;
    MeanFieldModel linear;
    Variogram chosen = Variogram::PureNugget;
    const MeanFieldModel& selected() const { return chosen == Variogram::PureNugget ? nugget : linear; }
};

/// Fits both variograms. Keeps the pure nugget unless the linear model's REML
/// log-likelihood is larger by at least `margin`; `forced` overrides.
MeanFieldChoice choose_mean_field(const Eigen::VectorXd& values, const std::vector<LatLon>& sites,
                                  std::optional<Variogram> forced = std::nullopt, double margin = 2.0);

/// One multivariate-t draw: predictor + L z sqrt(df / w), L L' = covariance, w ~ chi^2_df.
Eigen::VectorXd sample_t(const KrigingPrediction& prediction, double df, Rng& rng);

/// `count` draws (rows) on the M scale.
Eigen::MatrixXd sample_means(const KrigingPrediction& prediction, double df, std::size_t count, Rng& rng);

}  // namespace dataens
