#pragma once

#include <complex>
#include <cstddef>

#include <Eigen/Dense>

namespace dataens {

/// Per-Fourier-frequency DFT coefficients across sites:
/// coeffs(x, j) = sum_{t=1}^{T} A(x, t) exp(i w_j t), w_j = 2 pi j / T.
struct SpectralField {
    Eigen::MatrixXcd coeffs;  // n_sites x T

    std::size_t n_sites() const { return static_cast<std::size_t>(coeffs.rows()); }
    std::size_t length() const { return static_cast<std::size_t>(coeffs.cols()); }
    static double frequency(std::size_t j, std::size_t length);
    /// Largest deviation from coeffs(., T - j) = conj(coeffs(., j)), relative to the largest coefficient.
    double conjugate_asymmetry() const;
};

/// Forward transform of each row (length T >= 2), t indexed from 1.
SpectralField forward_dft(const Eigen::MatrixXd& values);

/// Complex inverse: A(x, t) = (1/T) sum_j coeffs(x, j) exp(-i w_j t).
Eigen::MatrixXcd inverse_dft_complex(const SpectralField& field);

/// Real inverse. Throws if the field is not conjugate symmetric (relative
/// tolerance `symmetry_tol`) or the imaginary residual exceeds 1e-9 of the RMS.
Eigen::MatrixXd inverse_dft(const SpectralField& field, double symmetry_tol = 1e-9);

}  // namespace dataens
