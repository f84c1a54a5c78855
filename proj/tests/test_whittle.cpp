#include <doctest.h>

#include <numbers>

#include "dataens/condsim.hpp"
#include "dataens/dft.hpp"
#include "dataens/errors.hpp"
#include "dataens/parallel.hpp"
#include "dataens/whittle.hpp"
#include "support.hpp"

using namespace dataens;

namespace {

struct Fixture {
    SpectralModel model{testing::coarse_knots()};
    SiteGeometry geometry{testing::small_network(3, 4)};
    Eigen::MatrixXd data;
    SpectralParams truth;

    explicit Fixture(std::size_t T = 32, std::uint64_t seed = 9) {
        Rng rng(seed);
        truth = testing::random_params(model, rng);
        data = inverse_dft(unconditional_draw(model, truth, geometry, T, seed, 0));
    }
    WhittleProblem problem() const { return WhittleProblem(model, forward_dft(data), geometry); }
};

// coefficients of the constant function 1 in the S basis
Eigen::VectorXd constant_coefficients(const ConstrainedBasis& b) {
    Eigen::MatrixXd rows(200, static_cast<Eigen::Index>(b.dimension()));
    for (int i = 0; i < 200; ++i) rows.row(i) = b.row(std::numbers::pi * i / 199.0);
    return rows.colPivHouseholderQr().solve(Eigen::VectorXd::Ones(200));
}

}  // namespace

TEST_CASE("one-sided weights") {
    CHECK(one_sided_weight(0, 32) == 0.5);
    CHECK(one_sided_weight(16, 32) == 0.5);
    CHECK(one_sided_weight(5, 32) == 1.0);
    CHECK(one_sided_weight(15, 31) == 1.0);
}

TEST_CASE("Whittle likelihood differs from the exact periodic density by a constant") {
    const Fixture fx;
    const auto problem = fx.problem();
    Rng rng(21);
    std::vector<double> diffs;
    for (int i = 0; i < 6; ++i) {
        const auto p = testing::random_params(fx.model, rng);
        diffs.push_back(problem.loglik(p) - testing::exact_periodic_loglik(fx.model, p, fx.geometry, fx.data));
    }
    for (double d : diffs) CHECK(d == doctest::Approx(diffs[0]).epsilon(1e-10));
}

TEST_CASE("the above-cutoff shortcut equals the general evaluation") {
    const Fixture fx(64);
    const auto problem = fx.problem();
    Rng rng(3);
    for (int i = 0; i < 5; ++i) {
        const auto p = testing::random_params(fx.model, rng);
        CHECK(problem.loglik(p) == doctest::Approx(problem.loglik_general(p)).epsilon(1e-12));
    }
}

TEST_CASE("scaling S is equivalent to rescaling the data") {
    const Fixture fx(48);
    const auto c = constant_coefficients(fx.model.s_basis());
    Rng rng(4);
    auto p = testing::random_params(fx.model, rng);
    auto p2 = p;
    p2.s += std::log(2.0) * c;
    CHECK(fx.model.eval_S(p2, 0.7) == doctest::Approx(2.0 * fx.model.eval_S(p, 0.7)).epsilon(1e-10));

    const WhittleProblem scaled(fx.model, forward_dft(fx.data / std::sqrt(2.0)), fx.geometry);
    double weight = 0.0;
    for (std::size_t j = 0; j <= 24; ++j) weight += one_sided_weight(j, 48);
    const double expected = scaled.loglik(p) - weight * 3.0 * std::log(2.0);
    CHECK(fx.problem().loglik(p2) == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("identifiability invariances") {
    const Fixture fx(64);
    const auto problem = fx.problem();
    Rng rng(8);
    const auto p = testing::random_params(fx.model, rng);
    auto q = p;
    q.delta = -p.delta;
    CHECK(problem.loglik(q) == doctest::Approx(problem.loglik(p)).epsilon(1e-12));
    q = p;
    q.theta = -p.theta;
    q.u_angle = p.u_angle + std::numbers::pi;
    CHECK(problem.loglik(q) == doctest::Approx(problem.loglik(p)).epsilon(1e-12));
}

TEST_CASE("likelihood evaluation does not depend on the thread count") {
    const Fixture fx(128);
    const auto problem = fx.problem();
    set_thread_count(1);
    const double one = problem.loglik(fx.truth);
    set_thread_count(4);
    const double four = problem.loglik(fx.truth);
    set_thread_count(1);
    CHECK(one == four);
}

TEST_CASE("BFGS minimizes a badly scaled quadratic") {
    auto f = [](const Eigen::VectorXd& x) {
        return (x[0] - 1.0) * (x[0] - 1.0) + 100.0 * (x[1] + 2.0) * (x[1] + 2.0) + (x[0] - 1.0) * (x[1] + 2.0);
    };
    OptimOptions o;
    o.gradient_tolerance = 1e-8;
    const auto r = minimize_bfgs(f, Eigen::Vector2d(5.0, 5.0), o);
    CHECK(r.convergence.converged);
    CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(r.x[1] == doctest::Approx(-2.0).epsilon(1e-5));
}

TEST_CASE("numerical Hessian of a quadratic is exact") {
    Eigen::Matrix3d a;
    a << 4, 1, 0.5, 1, 3, 0.2, 0.5, 0.2, 2;
    auto f = [&](const Eigen::VectorXd& x) { return 0.5 * x.dot(a * x) + x.sum(); };
    const auto h = numerical_hessian(f, Eigen::Vector3d(0.3, -1.0, 2.0));
    CHECK((h.matrix - a).cwiseAbs().maxCoeff() < 1e-5);
    CHECK(h.positive_definite);
    CHECK(h.min_eigenvalue > 0.0);
}

TEST_CASE("fitting improves on the truth and returns a usable Hessian") {
    const Fixture fx(256, 31);
    const auto problem = fx.problem();
    const auto init = initial_params(problem);
    OptimOptions o;
    o.max_iterations = 300;
    const auto fit = fit_mle(init, problem, o);
    CHECK(fit.loglik >= problem.loglik(fx.truth) - 1e-6);
    CHECK(fit.loglik == doctest::Approx(problem.loglik(fit.params)));
    CHECK(fit.hessian.matrix.rows() == static_cast<Eigen::Index>(fx.model.layout().total()));
    CHECK(fit.hessian.matrix.isApprox(fit.hessian.matrix.transpose()));
}

TEST_CASE("non-finite starting points are rejected") {
    const Fixture fx;
    auto p = fx.truth;
    p.s[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(fit_mle(p, fx.problem()), NumericalError);
}

TEST_CASE("parameter draws follow the inverse Hessian") {
    const SpectralModel m(testing::coarse_knots());
    FitResult fit;
    fit.knots = m.knots();
    fit.params = SpectralParams::zeros(m.layout());
    const auto n = static_cast<Eigen::Index>(m.layout().total());
    Eigen::MatrixXd b = Eigen::MatrixXd::Random(n, n);
    fit.hessian.matrix = b * b.transpose() + Eigen::MatrixXd::Identity(n, n) * n;
    fit.hessian.positive_definite = true;
    Rng rng(12);
    const auto s = sample_params(fit, 20000, rng);
    CHECK_FALSE(s.fallback_used);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n, n);
    for (const auto& d : s.draws) cov += d.pack() * d.pack().transpose();
    cov /= 20000.0;
    const Eigen::MatrixXd target = fit.hessian.matrix.inverse();
    CHECK((cov - target).cwiseAbs().maxCoeff() < 0.05 * target.diagonal().maxCoeff());

    fit.hessian.matrix(0, 0) = -1.0;
    fit.hessian.positive_definite = false;
    CHECK(sample_params(fit, 3, rng).fallback_used);
}
