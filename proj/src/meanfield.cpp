#include "dataens/meanfield.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "dataens/errors.hpp"

namespace dataens {

namespace {

void check_inputs(const Eigen::VectorXd& values, const std::vector<LatLon>& sites) {
    if (static_cast<std::size_t>(values.size()) != sites.size())
        throw ValidationError("mean field: " + std::to_string(values.size()) + " values for " +
                              std::to_string(sites.size()) + " sites");
    if (sites.size() < 3) throw ValidationError("mean field needs at least three sites");
    if (!values.allFinite()) throw ValidationError("mean field values must be finite");
}

Eigen::MatrixXd shape_matrix(const std::vector<LatLon>& a, const std::vector<LatLon>& b, Variogram v) {
    Eigen::MatrixXd g(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) g(i, j) = variogram_shape(v, great_circle(a[i], b[j]));
    return g;
}

// Helmert contrasts: (n-1) x n with orthonormal rows orthogonal to the ones vector.
Eigen::MatrixXd helmert(std::size_t n) {
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n - 1, n);
    for (std::size_t k = 1; k < n; ++k) {
        const double c = 1.0 / std::sqrt(static_cast<double>(k * (k + 1)));
        for (std::size_t i = 0; i < k; ++i) w(k - 1, i) = c;
        w(k - 1, k) = -static_cast<double>(k) * c;
    }
    return w;
}

struct Contrasts {
    Eigen::LDLT<Eigen::MatrixXd> k;  // of -W G W'
    Eigen::VectorXd wy;
    double log_det = 0.0;
    double quad = 0.0;
};

Contrasts contrasts(const Eigen::VectorXd& values, const std::vector<LatLon>& sites, Variogram v) {
    const Eigen::MatrixXd w = helmert(sites.size());
    const Eigen::MatrixXd kmat = -(w * shape_matrix(sites, sites, v) * w.transpose());
    Contrasts c;
    c.k.compute(kmat);
    if (c.k.info() != Eigen::Success || (c.k.vectorD().array() <= 0.0).any())
        throw GeometryError("mean field: contrast covariance for the " + to_string(v) +
                            " variogram is not positive definite (duplicate sites?)");
    c.wy = w * values;
    c.log_det = c.k.vectorD().array().log().sum();
    c.quad = c.wy.dot(c.k.solve(c.wy));
    return c;
}

double loglik_from(const Contrasts& c, std::size_t n, double theta) {
    const double m = static_cast<double>(n - 1);
    return -0.5 * (m * std::log(2.0 * std::numbers::pi) + m * std::log(theta) + c.log_det + c.quad / theta);
}

}  // namespace

std::string to_string(Variogram v) { return v == Variogram::PureNugget ? "nugget" : "linear"; }

Variogram variogram_from_string(const std::string& s) {
    if (s == "nugget") return Variogram::PureNugget;
    if (s == "linear") return Variogram::Linear;
    throw ConfigError("unknown variogram '" + s + "' (expected nugget or linear)");
}

double variogram_shape(Variogram v, double d) {
    if (d < 0.0) throw std::invalid_argument("negative distance");
    return v == Variogram::PureNugget ? (d > 0.0 ? 1.0 : 0.0) : d;
}

double reml_loglik(const Eigen::VectorXd& values, const std::vector<LatLon>& sites, Variogram variogram,
                   double theta) {
    check_inputs(values, sites);
    if (!(theta > 0.0)) throw std::invalid_argument("theta must be positive");
    return loglik_from(contrasts(values, sites, variogram), sites.size(), theta);
}

MeanFieldModel reml_fit(const Eigen::VectorXd& values, const std::vector<LatLon>& sites, Variogram variogram) {
    check_inputs(values, sites);
    const auto c = contrasts(values, sites, variogram);
    MeanFieldModel m;
    m.variogram = variogram;
    m.n_fit = sites.size();
    m.sites = sites;
    m.values = values;
    m.theta_hat = c.quad / static_cast<double>(sites.size() - 1);
    if (!(m.theta_hat > 0.0)) throw NumericalError("mean field: all site values are identical");
    m.reml_loglik = loglik_from(c, sites.size(), m.theta_hat);
    return m;
}

KrigingPrediction krige(MeanFieldModel& model, const std::vector<LatLon>& targets) {
    const auto n = static_cast<Eigen::Index>(model.sites.size());
    const auto m = static_cast<Eigen::Index>(targets.size());
    const double th = model.theta_hat;
    Eigen::MatrixXd sys = Eigen::MatrixXd::Zero(n + 1, n + 1);
    sys.topLeftCorner(n, n) = th * shape_matrix(model.sites, model.sites, model.variogram);
    sys.block(0, n, n, 1).setOnes();
    sys.block(n, 0, 1, n).setOnes();
    const Eigen::MatrixXd g0 = th * shape_matrix(model.sites, targets, model.variogram);
    Eigen::MatrixXd rhs(n + 1, m);
    rhs.topRows(n) = g0;
    rhs.row(n).setOnes();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(sys);
    if (!lu.isInvertible()) throw GeometryError("mean field: kriging system is singular");
    const Eigen::MatrixXd sol = lu.solve(rhs);
    const Eigen::MatrixXd lam = sol.topRows(n);
    const Eigen::MatrixXd gamma = sys.topLeftCorner(n, n);
    const Eigen::MatrixXd gtt = th * shape_matrix(targets, targets, model.variogram);

    KrigingPrediction p;
    p.predictor = lam.transpose() * model.values;
    const Eigen::MatrixXd cross = lam.transpose() * g0;
    p.covariance = -gtt + cross + cross.transpose() - lam.transpose() * gamma * lam;
    p.covariance = 0.5 * (p.covariance + p.covariance.transpose()).eval();
    model.krige = p;
    return p;
}

MeanFieldChoice choose_mean_field(const Eigen::VectorXd& values, const std::vector<LatLon>& sites,
                                  std::optional<Variogram> forced, double margin) {
    MeanFieldChoice c;
    c.nugget = reml_fit(values, sites, Variogram::PureNugget);
    c.linear = reml_fit(values, sites, Variogram::Linear);
    if (forced)
        c.chosen = *forced;
    else
        c.chosen = c.linear.reml_loglik - c.nugget.reml_loglik >= margin ? Variogram::Linear : Variogram::PureNugget;
    return c;
}

Eigen::VectorXd sample_t(const KrigingPrediction& prediction, double df, Rng& rng) {
    if (!(df > 0.0)) throw std::invalid_argument("t degrees of freedom must be positive");
    const auto m = prediction.predictor.size();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(prediction.covariance);
    const Eigen::MatrixXd factor = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    Eigen::VectorXd z(m);
    for (Eigen::Index i = 0; i < m; ++i) z[i] = standard_normal(rng);
    std::gamma_distribution<double> chi2(df / 2.0, 2.0);
    const double w = chi2(rng);
    return prediction.predictor + factor * z * std::sqrt(df / w);
}

Eigen::MatrixXd sample_means(const KrigingPrediction& prediction, double df, std::size_t count, Rng& rng) {
    Eigen::MatrixXd out(count, prediction.predictor.size());
    for (std::size_t k = 0; k < count; ++k) out.row(k) = sample_t(prediction, df, rng).transpose();
    return out;
}

}  // namespace dataens
