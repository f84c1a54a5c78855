#include "dataens/whittle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "dataens/errors.hpp"
#include "dataens/parallel.hpp"

namespace dataens {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<double> one_sided_frequencies(std::size_t length) {
    std::vector<double> w;
    for (std::size_t j = 0; j <= length / 2; ++j) w.push_back(SpectralField::frequency(j, length));
    return w;
}

}  // namespace

double one_sided_weight(std::size_t j, std::size_t length) {
    if (j == 0) return 0.5;
    if (length % 2 == 0 && j == length / 2) return 0.5;
    return 1.0;
}

WhittleProblem::WhittleProblem(SpectralModel model, SpectralField field, SiteGeometry geometry)
    : model_(std::move(model)),
      field_(std::move(field)),
      geometry_(std::move(geometry)),
      length_(field_.length()),
      table_(model_, one_sided_frequencies(field_.length())) {
    if (field_.n_sites() != geometry_.size())
        throw ValidationError("spectral field has " + std::to_string(field_.n_sites()) + " sites, geometry has " +
                              std::to_string(geometry_.size()));
    if (length_ < 2) throw ValidationError("spectral field needs at least two time points");
    for (std::size_t j = 0; j <= length_ / 2; ++j) {
        indices_.push_back(j);
        weights_.push_back(one_sided_weight(j, length_));
        power_.push_back(field_.coeffs.col(static_cast<Eigen::Index>(j)).squaredNorm());
    }
}

double WhittleProblem::mean_periodogram(std::size_t j) const {
    return power_.at(j) / (static_cast<double>(field_.n_sites()) * kTwoPi * static_cast<double>(length_));
}

double WhittleProblem::term(std::size_t slot, const SpectralValues& v, double u_angle, bool general,
                            bool& singular) const {
    const double n = static_cast<double>(field_.n_sites());
    const double scale = kTwoPi * static_cast<double>(length_);
    const double w = weights_[slot];
    if (!general && !table_.within_cutoff(slot)) {
        return -w * (n * std::log(v.S) + power_[slot] / (scale * v.S));
    }
    const Eigen::MatrixXcd f = assemble_cross_spectrum(v, u_angle, geometry_);
    Eigen::LLT<Eigen::MatrixXcd> llt(f);
    if (llt.info() != Eigen::Success) {
        singular = true;
        return kNegInf;
    }
    const Eigen::MatrixXcd& l = llt.matrixLLT();
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < l.rows(); ++i) {
        const double d = l(i, i).real();
        if (!(d > 0.0)) {
            singular = true;
            return kNegInf;
        }
        logdet += 2.0 * std::log(d);
    }
    const Eigen::VectorXcd y = llt.matrixL().solve(field_.coeffs.col(static_cast<Eigen::Index>(indices_[slot])));
    return -w * (logdet + y.squaredNorm() / scale);
}

WhittleEval WhittleProblem::evaluate(const SpectralParams& p) const {
    const auto values = table_.values(p);
    std::vector<double> terms(indices_.size());
    std::vector<char> singular(indices_.size(), 0);
    parallel_for(indices_.size(), [&](std::size_t i) {
        bool s = false;
        terms[i] = term(i, values[i], p.u_angle, false, s);
        singular[i] = s;
    });
    WhittleEval out;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        if (singular[i] && !out.singular_frequency) out.singular_frequency = indices_[i];
        out.value += terms[i];
    }
    if (out.singular_frequency || !std::isfinite(out.value)) out.value = kNegInf;
    return out;
}

double WhittleProblem::loglik(const Eigen::VectorXd& packed) const {
    return loglik(SpectralParams::unpack(packed, layout()));
}

double WhittleProblem::loglik_general(const SpectralParams& p) const {
    const auto values = table_.values(p);
    double total = 0.0;
    for (std::size_t i = 0; i < indices_.size(); ++i) {
        bool s = false;
        total += term(i, values[i], p.u_angle, true, s);
    }
    return total;
}

Eigen::VectorXd WhittleProblem::natural_scales() const {
    const auto l = layout();
    Eigen::VectorXd s = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(l.total()));
    const double range = std::max(geometry_.diameter(), 1.0);
    s.segment(static_cast<Eigen::Index>(l.delta_offset()), static_cast<Eigen::Index>(l.n_delta)).setConstant(range);
    s.segment(static_cast<Eigen::Index>(l.theta_offset()), static_cast<Eigen::Index>(l.n_theta))
        .setConstant(1.0 / range);
    return s;
}

namespace {

Eigen::VectorXd central_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                 double rel, int& evals) {
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd xp = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = rel * std::max(std::abs(x[i]), 1.0);
        xp[i] = x[i] + h;
        const double fp = f(xp);
        xp[i] = x[i] - h;
        const double fm = f(xp);
        xp[i] = x[i];
        evals += 2;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

}  // namespace

MinimizeResult minimize_bfgs(const std::function<double(const Eigen::VectorXd&)>& f_natural,
                             const Eigen::VectorXd& x0, const OptimOptions& options) {
    const auto n = x0.size();
    const Eigen::VectorXd scales = options.scales ? *options.scales : Eigen::VectorXd::Ones(n);
    if (scales.size() != n) throw std::invalid_argument("optimizer scale vector has the wrong length");
    auto f = [&](const Eigen::VectorXd& z) { return f_natural(z.cwiseProduct(scales)); };

    MinimizeResult res;
    Convergence& conv = res.convergence;
    Eigen::VectorXd z = x0.cwiseQuotient(scales);
    double fz = f(z);
    conv.evaluations = 1;
    if (!std::isfinite(fz)) throw NumericalError("objective is not finite at the initial point");
    Eigen::VectorXd g = central_gradient(f, z, options.relative_step, conv.evaluations);
    Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(n, n);
    bool fresh = true;
    int stalls = 0;
    conv.status = "iteration limit reached";

    for (int it = 0; it < options.max_iterations; ++it) {
        conv.gradient_norm = g.cwiseAbs().maxCoeff();
        if (conv.gradient_norm < options.gradient_tolerance) {
            conv.converged = true;
            conv.status = "gradient tolerance reached";
            break;
        }
        Eigen::VectorXd dir = -hinv * g;
        double slope = g.dot(dir);
        if (!(slope < 0.0)) {
            hinv.setIdentity();
            fresh = true;
            dir = -g;
            slope = -g.squaredNorm();
        }
        double step = 1.0;
        if (fresh) step = std::min(1.0, 1.0 / std::max(dir.cwiseAbs().maxCoeff(), 1e-300));
        double f_new = 0.0;
        Eigen::VectorXd z_new;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            z_new = z + step * dir;
            f_new = f(z_new);
            ++conv.evaluations;
            if (std::isfinite(f_new) && f_new <= fz + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            if (!fresh) {
                hinv.setIdentity();
                fresh = true;
                continue;
            }
            conv.status = "line search failed";
            conv.converged = conv.gradient_norm < 100.0 * options.gradient_tolerance;
            break;
        }
        const Eigen::VectorXd g_new = central_gradient(f, z_new, options.relative_step, conv.evaluations);
        const Eigen::VectorXd s = z_new - z;
        const Eigen::VectorXd y = g_new - g;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            if (fresh) hinv *= sy / y.squaredNorm();
            const double rho = 1.0 / sy;
            const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
            hinv = (eye - rho * s * y.transpose()) * hinv * (eye - rho * y * s.transpose()) + rho * s * s.transpose();
            fresh = false;
        }
        const double improvement = fz - f_new;
        z = z_new;
        fz = f_new;
        g = g_new;
        conv.iterations = it + 1;
        conv.trace.push_back(-fz);
        if (improvement <= 1e-13 * std::max(1.0, std::abs(fz))) {
            if (++stalls >= 3) {
                conv.gradient_norm = g.cwiseAbs().maxCoeff();
                conv.converged = true;
                conv.status = "no further progress";
                break;
            }
        } else {
            stalls = 0;
        }
    }
    conv.gradient_norm = g.cwiseAbs().maxCoeff();
    res.x = z.cwiseProduct(scales);
    res.value = fz;
    return res;
}

HessianResult numerical_hessian(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                double rel_step, const std::optional<Eigen::VectorXd>& scales) {
    const auto n = x.size();
    Eigen::VectorXd h(n);
    for (Eigen::Index i = 0; i < n; ++i)
        h[i] = rel_step * std::max(std::abs(x[i]), scales ? (*scales)[i] : 1.0);
    HessianResult out;
    out.matrix.resize(n, n);
    const double f0 = f(x);
    Eigen::VectorXd xp = x;
    for (Eigen::Index i = 0; i < n; ++i) {
        xp[i] = x[i] + h[i];
        const double fp = f(xp);
        xp[i] = x[i] - h[i];
        const double fm = f(xp);
        xp[i] = x[i];
        out.matrix(i, i) = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for (Eigen::Index j = i + 1; j < n; ++j) {
            double acc = 0.0;
            for (int si = -1; si <= 1; si += 2) {
                for (int sj = -1; sj <= 1; sj += 2) {
                    xp[i] = x[i] + si * h[i];
                    xp[j] = x[j] + sj * h[j];
                    acc += si * sj * f(xp);
                }
            }
            xp[i] = x[i];
            xp[j] = x[j];
            out.matrix(i, j) = out.matrix(j, i) = acc / (4.0 * h[i] * h[j]);
        }
    }
    out.matrix = 0.5 * (out.matrix + out.matrix.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(out.matrix, Eigen::EigenvaluesOnly);
    out.min_eigenvalue = es.eigenvalues().size() ? es.eigenvalues().minCoeff() : 0.0;
    out.positive_definite = out.min_eigenvalue > 0.0 && out.matrix.allFinite();
    return out;
}

HessianResult hessian_at(const SpectralParams& p, const WhittleProblem& problem) {
    const auto l = problem.layout();
    auto negll = [&](const Eigen::VectorXd& v) { return -problem.loglik(SpectralParams::unpack(v, l)); };
    return numerical_hessian(negll, p.pack(), 1e-4, problem.natural_scales());
}

SpectralParams initial_params(const WhittleProblem& problem) {
    const auto& model = problem.model();
    const auto l = model.layout();
    SpectralParams p = SpectralParams::zeros(l);
    p.u_angle = std::numbers::pi;  // from the west

    // log S: least squares on the log of a locally averaged mean periodogram
    const std::size_t half = problem.length() / 2;
    std::vector<double> raw(half + 1);
    for (std::size_t j = 0; j <= half; ++j) raw[j] = problem.mean_periodogram(j);
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(half + 1), static_cast<Eigen::Index>(l.n_s));
    Eigen::VectorXd target(static_cast<Eigen::Index>(half + 1));
    for (std::size_t j = 0; j <= half; ++j) {
        const std::size_t w = std::max<std::size_t>(1, j / 8);
        const std::size_t lo = j > w ? j - w : 0;
        const std::size_t hi = std::min(half, j + w);
        double s = 0.0;
        for (std::size_t k = lo; k <= hi; ++k) s += raw[k];
        s /= static_cast<double>(hi - lo + 1);
        target[static_cast<Eigen::Index>(j)] = std::log(std::max(s, 1e-300));
        rows.row(static_cast<Eigen::Index>(j)) = model.s_basis().row(SpectralField::frequency(j, problem.length()));
    }
    p.s = rows.colPivHouseholderQr().solve(target);

    // delta: smooth bump (1 - (w/w0)^2)^3 projected on the basis, scaled by a coarse range search
    if (l.n_delta > 0) {
        const double c = model.cutoff();
        const int grid = 400;
        Eigen::MatrixXd drows(grid, static_cast<Eigen::Index>(l.n_delta));
        Eigen::VectorXd bump(grid);
        for (int i = 0; i < grid; ++i) {
            const double w = c * i / grid;
            drows.row(i) = model.delta_basis().row(w);
            bump[i] = std::pow(1.0 - (w / c) * (w / c), 3);
        }
        const Eigen::VectorXd shape = drows.colPivHouseholderQr().solve(bump);
        const double base = std::max(problem.geometry().diameter(), 1.0);
        double best = -std::numeric_limits<double>::infinity();
        Eigen::VectorXd best_delta = shape * base;
        for (double mult : {0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0}) {
            p.delta = shape * (base * mult);
            const double ll = problem.loglik(p);
            if (ll > best) {
                best = ll;
                best_delta = p.delta;
            }
        }
        p.delta = best_delta;
    }
    return p;
}

FitResult fit_mle(const SpectralParams& initial, const WhittleProblem& problem, const OptimOptions& options) {
    if (!initial.finite()) throw NumericalError("initial parameters are not finite");
    const auto l = problem.layout();
    const auto e0 = problem.evaluate(initial);
    if (!std::isfinite(e0.value))
        throw NumericalError("Whittle likelihood is not finite at the initial point" +
                             (e0.singular_frequency ? " (singular at Fourier index " +
                                                          std::to_string(*e0.singular_frequency) + ")"
                                                    : std::string()));
    OptimOptions opts = options;
    if (!opts.scales) opts.scales = problem.natural_scales();
    auto negll = [&](const Eigen::VectorXd& v) { return -problem.loglik(SpectralParams::unpack(v, l)); };
    const auto res = minimize_bfgs(negll, initial.pack(), opts);
    FitResult fit;
    fit.params = SpectralParams::unpack(res.x, l);
    fit.loglik = -res.value;
    fit.convergence = res.convergence;
    fit.knots = problem.model().knots();
    fit.hessian = hessian_at(fit.params, problem);
    return fit;
}

ParamSamples sample_params(const FitResult& fit, std::size_t count, Rng& rng) {
    ParamSamples out;
    const Eigen::VectorXd mean = fit.params.pack();
    const auto n = mean.size();
    const Eigen::MatrixXd& h = fit.hessian.matrix;
    if (h.rows() != n || h.cols() != n) throw ValidationError("Hessian does not match the parameter vector");
    // transform: x = mean + m z with m m' = H^{-1}
    Eigen::MatrixXd m;
    Eigen::LLT<Eigen::MatrixXd> llt(h);
    if (llt.info() == Eigen::Success && fit.hessian.positive_definite) {
        m = llt.matrixU().solve(Eigen::MatrixXd::Identity(n, n));
    } else {
        out.fallback_used = true;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (h + h.transpose()));
        const double top = std::max(es.eigenvalues().maxCoeff(), 1e-300);
        const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(1e-8 * top);
        m = es.eigenvectors() * lam.cwiseSqrt().cwiseInverse().asDiagonal();
    }
    const auto layout = fit.params.layout();
    out.draws.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        Eigen::VectorXd z(n);
        for (Eigen::Index i = 0; i < n; ++i) z[i] = standard_normal(rng);
        out.draws.push_back(SpectralParams::unpack(mean + m * z, layout));
    }
    return out;
}

}  // namespace dataens
