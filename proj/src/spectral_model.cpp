#include "dataens/spectral_model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "dataens/errors.hpp"

namespace dataens {

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<double> positive_part(const std::vector<int>& js, int denominator) {
    std::vector<double> out;
    for (int j : js)
        if (j > 0) out.push_back(kPi * j / denominator);
    return out;
}

void check_knots(const std::vector<double>& k, double last, const char* name) {
    if (k.empty()) throw ConfigError(std::string("no knots for ") + name);
    for (std::size_t i = 0; i < k.size(); ++i) {
        if (!(k[i] > 0.0) || !std::isfinite(k[i])) throw ConfigError(std::string(name) + " knots must be positive");
        if (i > 0 && !(k[i] > k[i - 1])) throw ConfigError(std::string(name) + " knots must increase strictly");
    }
    if (std::abs(k.back() - last) > 1e-12 * std::max(1.0, last))
        throw ConfigError(std::string("last ") + name + " knot must equal " + std::to_string(last));
}

}  // namespace

KnotSet KnotSet::from_indices(const std::vector<int>& s, const std::vector<int>& beta, const std::vector<int>& delta,
                              const std::vector<int>& theta, double cutoff, int denominator) {
    KnotSet k;
    k.s = positive_part(s, denominator);
    k.beta = positive_part(beta, denominator);
    k.delta = positive_part(delta, denominator);
    k.theta = positive_part(theta, denominator);
    k.cutoff = cutoff;
    return k;
}

KnotSet KnotSet::defaults(double cutoff) {
    KnotSet k = from_indices({0, 10, 30, 60, 120, 400, 720, 4320}, {0, 40, 120, 360, 720},
                             {0, 5, 10, 15, 25, 40, 60, 90, 150, 240, 360, 480, 600, 720}, {0, 40, 120, 360, 720},
                             kHourlyCutoff);
    if (cutoff > kHourlyCutoff * (1.0 + 1e-12)) {
        k.beta.push_back(cutoff);
        k.delta.push_back(cutoff);
        k.theta.push_back(cutoff);
    }
    k.cutoff = cutoff;
    return k;
}

void KnotSet::validate() const {
    if (!(cutoff > 0.0) || cutoff > kPi * (1.0 + 1e-12)) throw ConfigError("cutoff must lie in (0, pi]");
    check_knots(s, kPi, "S");
    check_knots(beta, cutoff, "beta");
    check_knots(delta, cutoff, "delta");
    check_knots(theta, cutoff, "theta");
}

SpectralParams SpectralParams::zeros(const ParamLayout& l) {
    SpectralParams p;
    p.s = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(l.n_s));
    p.beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(l.n_beta));
    p.delta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(l.n_delta));
    p.theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(l.n_theta));
    return p;
}

ParamLayout SpectralParams::layout() const {
    return {static_cast<std::size_t>(s.size()), static_cast<std::size_t>(beta.size()),
            static_cast<std::size_t>(delta.size()), static_cast<std::size_t>(theta.size())};
}

Eigen::VectorXd SpectralParams::pack() const {
    const auto l = layout();
    Eigen::VectorXd v(static_cast<Eigen::Index>(l.total()));
    v << s, beta, delta, theta, u_angle;
    return v;
}

SpectralParams SpectralParams::unpack(const Eigen::VectorXd& v, const ParamLayout& l) {
    if (static_cast<std::size_t>(v.size()) != l.total())
        throw std::invalid_argument("parameter vector has " + std::to_string(v.size()) + " entries, layout needs " +
                                    std::to_string(l.total()));
    SpectralParams p;
    p.s = v.segment(0, static_cast<Eigen::Index>(l.n_s));
    p.beta = v.segment(static_cast<Eigen::Index>(l.beta_offset()), static_cast<Eigen::Index>(l.n_beta));
    p.delta = v.segment(static_cast<Eigen::Index>(l.delta_offset()), static_cast<Eigen::Index>(l.n_delta));
    p.theta = v.segment(static_cast<Eigen::Index>(l.theta_offset()), static_cast<Eigen::Index>(l.n_theta));
    p.u_angle = v[static_cast<Eigen::Index>(l.u_offset())];
    return p;
}

bool SpectralParams::finite() const { return pack().allFinite(); }

double matern32(double r) {
    if (r < 0.0 || std::isnan(r)) throw std::invalid_argument("matern32 needs a nonnegative argument");
    return std::exp(-r) * (1.0 + r);
}

Eigen::MatrixXcd assemble_cross_spectrum(const SpectralValues& v, double u_angle, const SiteGeometry& geometry) {
    const auto n = static_cast<Eigen::Index>(geometry.size());
    Eigen::MatrixXcd f = Eigen::MatrixXcd::Zero(n, n);
    const double range = std::abs(v.delta);
    const Eigen::Vector2d u(std::cos(u_angle), std::sin(u_angle));
    const auto& pos = geometry.positions();
    for (Eigen::Index j = 0; j < n; ++j) {
        f(j, j) = v.S0 + v.S1;
        for (Eigen::Index k = j + 1; k < n; ++k) {
            if (v.S1 == 0.0) continue;
            const double d = geometry.distance(static_cast<std::size_t>(j), static_cast<std::size_t>(k));
            double c;
            if (d == 0.0) c = 1.0;
            else if (range == 0.0) c = 0.0;
            else c = matern32(d / range);
            if (c == 0.0) continue;
            const double phase = v.theta * (u[0] * (pos(j, 0) - pos(k, 0)) + u[1] * (pos(j, 1) - pos(k, 1)));
            const std::complex<double> z = v.S1 * c * std::polar(1.0, phase);
            f(j, k) = z;
            f(k, j) = std::conj(z);
        }
    }
    return f;
}

SpectralModel::SpectralModel(KnotSet knots) : knots_(std::move(knots)) {
    knots_.validate();
    s_basis_ = ConstrainedBasis(Symmetry::Even, knots_.s, {1});
    beta_basis_ = ConstrainedBasis(Symmetry::Even, knots_.beta, {1, 2});
    delta_basis_ = ConstrainedBasis(Symmetry::Even, knots_.delta, {0, 1, 2});
    theta_basis_ = ConstrainedBasis(Symmetry::Odd, knots_.theta, {0, 1, 2});
}

ParamLayout SpectralModel::layout() const {
    return {s_basis_.dimension(), beta_basis_.dimension(), delta_basis_.dimension(), theta_basis_.dimension()};
}

double SpectralModel::log_S(const SpectralParams& p, double omega) const { return s_basis_.eval(p.s, omega); }

double SpectralModel::eval_S(const SpectralParams& p, double omega) const { return std::exp(log_S(p, omega)); }

double SpectralModel::eval_beta(const SpectralParams& p, double omega) const {
    const double c = knots_.cutoff;
    return beta_basis_.eval(p.beta, std::clamp(omega, -c, c));
}

double SpectralModel::eval_delta(const SpectralParams& p, double omega) const {
    if (std::abs(omega) >= knots_.cutoff) return 0.0;
    return delta_basis_.eval(p.delta, omega);
}

double SpectralModel::eval_theta(const SpectralParams& p, double omega) const {
    if (std::abs(omega) >= knots_.cutoff || omega == 0.0) return 0.0;
    return theta_basis_.eval(p.theta, omega);
}

std::pair<double, double> SpectralModel::split_S(const SpectralParams& p, double omega) const {
    const double s = eval_S(p, omega);
    if (std::abs(omega) > knots_.cutoff) return {s, 0.0};
    const double b = eval_beta(p, omega);
    // logistic split written to stay accurate for large |beta|
    const double w1 = b >= 0.0 ? 1.0 / (1.0 + std::exp(-b)) : std::exp(b) / (1.0 + std::exp(b));
    const double s1 = s * w1;
    return {s - s1, s1};
}

SpectralValues SpectralModel::evaluate(const SpectralParams& p, double omega) const {
    SpectralValues v;
    v.S = eval_S(p, omega);
    std::tie(v.S0, v.S1) = split_S(p, omega);
    v.delta = eval_delta(p, omega);
    v.theta = eval_theta(p, omega);
    return v;
}

Eigen::MatrixXcd SpectralModel::cross_spectrum(const SpectralParams& p, const SiteGeometry& geometry,
                                               double omega) const {
    return assemble_cross_spectrum(evaluate(p, omega), p.u_angle, geometry);
}

std::complex<double> SpectralModel::coherence(const SpectralParams& p, const SiteGeometry& geometry, double omega,
                                              std::size_t j, std::size_t k) const {
    if (j == k) throw std::invalid_argument("coherence needs two distinct site indices");
    const auto f = cross_spectrum(p, geometry, omega);
    const auto jj = static_cast<Eigen::Index>(j);
    const auto kk = static_cast<Eigen::Index>(k);
    return f(jj, kk) / std::sqrt(f(jj, jj).real() * f(kk, kk).real());
}

SpectralTable::SpectralTable(const SpectralModel& model, std::vector<double> omegas) : omegas_(std::move(omegas)) {
    const auto m = static_cast<Eigen::Index>(omegas_.size());
    const auto l = model.layout();
    s_rows_.resize(m, static_cast<Eigen::Index>(l.n_s));
    beta_rows_.resize(m, static_cast<Eigen::Index>(l.n_beta));
    delta_rows_.resize(m, static_cast<Eigen::Index>(l.n_delta));
    theta_rows_.resize(m, static_cast<Eigen::Index>(l.n_theta));
    within_.resize(omegas_.size());
    const double c = model.cutoff();
    for (Eigen::Index i = 0; i < m; ++i) {
        const double w = omegas_[static_cast<std::size_t>(i)];
        within_[static_cast<std::size_t>(i)] = std::abs(w) <= c;
        s_rows_.row(i) = model.s_basis().row(w);
        beta_rows_.row(i) = model.beta_basis().row(std::clamp(w, -c, c));
        delta_rows_.row(i) = std::abs(w) >= c ? Eigen::RowVectorXd::Zero(delta_rows_.cols()) : model.delta_basis().row(w);
        theta_rows_.row(i) =
            (std::abs(w) >= c || w == 0.0) ? Eigen::RowVectorXd::Zero(theta_rows_.cols()) : model.theta_basis().row(w);
    }
}

std::vector<SpectralValues> SpectralTable::values(const SpectralParams& p) const {
    const Eigen::VectorXd log_s = s_rows_ * p.s;
    const Eigen::VectorXd beta = beta_rows_ * p.beta;
    const Eigen::VectorXd delta = delta_rows_ * p.delta;
    const Eigen::VectorXd theta = theta_rows_ * p.theta;
    std::vector<SpectralValues> out(omegas_.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        auto& v = out[i];
        v.S = std::exp(log_s[ii]);
        if (within_[i]) {
            const double b = beta[ii];
            const double w1 = b >= 0.0 ? 1.0 / (1.0 + std::exp(-b)) : std::exp(b) / (1.0 + std::exp(b));
            v.S1 = v.S * w1;
            v.S0 = v.S - v.S1;
        } else {
            v.S0 = v.S;
        }
        v.delta = delta[ii];
        v.theta = theta[ii];
    }
    return out;
}

}  // namespace dataens
