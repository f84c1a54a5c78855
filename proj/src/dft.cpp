#include "dataens/dft.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "dataens/errors.hpp"

namespace dataens {

namespace {

std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

// In-place complex transform of one row; sign = FFTW_BACKWARD gives sum x_k e^{+2 pi i jk/T}.
void transform(std::vector<std::complex<double>>& data, int sign) {
    auto* buf = reinterpret_cast<fftw_complex*>(data.data());
    fftw_plan plan;
    {
        std::lock_guard lock(planner_mutex());
        plan = fftw_plan_dft_1d(static_cast<int>(data.size()), buf, buf, sign, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
}

}  // namespace

double SpectralField::frequency(std::size_t j, std::size_t length) {
    return 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(length);
}

double SpectralField::conjugate_asymmetry() const {
    const auto t = coeffs.cols();
    if (t == 0 || coeffs.rows() == 0) return 0.0;
    const double scale = std::max(coeffs.cwiseAbs().maxCoeff(), 1e-300);
    double worst = 0.0;
    for (Eigen::Index j = 0; j < t; ++j) {
        const Eigen::Index mirror = (t - j) % t;
        worst = std::max(worst, (coeffs.col(mirror) - coeffs.col(j).conjugate()).cwiseAbs().maxCoeff());
    }
    return worst / scale;
}

SpectralField forward_dft(const Eigen::MatrixXd& values) {
    const auto t = values.cols();
    if (t < 2) throw std::invalid_argument("DFT needs at least two time points");
    SpectralField out;
    out.coeffs.resize(values.rows(), t);
    std::vector<std::complex<double>> row(static_cast<std::size_t>(t));
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        for (Eigen::Index k = 0; k < t; ++k) row[static_cast<std::size_t>(k)] = values(i, k);
        transform(row, FFTW_BACKWARD);
        // shift from t = 0..T-1 to t = 1..T
        for (Eigen::Index j = 0; j < t; ++j)
            out.coeffs(i, j) = row[static_cast<std::size_t>(j)] *
                               std::polar(1.0, SpectralField::frequency(static_cast<std::size_t>(j), static_cast<std::size_t>(t)));
    }
    return out;
}

Eigen::MatrixXcd inverse_dft_complex(const SpectralField& field) {
    const auto t = field.coeffs.cols();
    Eigen::MatrixXcd out(field.coeffs.rows(), t);
    std::vector<std::complex<double>> row(static_cast<std::size_t>(t));
    for (Eigen::Index i = 0; i < field.coeffs.rows(); ++i) {
        for (Eigen::Index j = 0; j < t; ++j)
            row[static_cast<std::size_t>(j)] =
                field.coeffs(i, j) *
                std::polar(1.0, -SpectralField::frequency(static_cast<std::size_t>(j), static_cast<std::size_t>(t)));
        transform(row, FFTW_FORWARD);
        for (Eigen::Index k = 0; k < t; ++k) out(i, k) = row[static_cast<std::size_t>(k)] / static_cast<double>(t);
    }
    return out;
}

Eigen::MatrixXd inverse_dft(const SpectralField& field, double symmetry_tol) {
    const double asym = field.conjugate_asymmetry();
    if (asym > symmetry_tol)
        throw ValidationError("inverse DFT input is not conjugate symmetric (relative asymmetry " +
                              std::to_string(asym) + ")");
    const Eigen::MatrixXcd z = inverse_dft_complex(field);
    const Eigen::MatrixXd re = z.real();
    const double rms = z.size() ? std::sqrt(re.squaredNorm() / static_cast<double>(z.size())) : 0.0;
    const double imag = z.size() ? z.imag().cwiseAbs().maxCoeff() : 0.0;
    if (imag > 1e-9 * std::max(rms, 1e-300) && imag > 1e-300)
        throw NumericalError("inverse DFT left an imaginary residual of " + std::to_string(imag));
    return re;
}

}  // namespace dataens
