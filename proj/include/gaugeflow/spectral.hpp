#pragma once

#include <complex>
#include <numbers>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "gaugeflow/errors.hpp"

namespace gaugeflow {

inline bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Periodic spectral operators on N equispaced samples of [0, 2pi).
// The Nyquist mode has no odd-derivative counterpart for real data, so it is
// dropped by first derivatives and by the half-sample shift; the second
// derivative keeps it with symbol -(N/2)^2.
class Spectral {
 public:
  explicit Spectral(int n) : n_(n), fft_(std::make_shared<Eigen::FFT<double>>()) {
    if (!is_power_of_two(n) || n < 2)
      throw InvalidInput("sample count must be a power of two >= 2");
  }

  int size() const { return n_; }

  // Signed wavenumber of FFT bin q.
  int wavenumber(int q) const { return q <= n_ / 2 ? q : q - n_; }

  void derivative(std::span<const double> f, std::span<double> out) const {
    apply(f, out, [this](int q, std::complex<double> c) {
      const int k = wavenumber(q);
      if (2 * q == n_) return std::complex<double>(0.0, 0.0);
      return std::complex<double>(0.0, k) * c;
    });
  }

  void second_derivative(std::span<const double> f, std::span<double> out) const {
    apply(f, out, [this](int q, std::complex<double> c) {
      const double k = wavenumber(q);
      return -k * k * c;
    });
  }

  // Trigonometric interpolant evaluated at t_j + dt/2.
  void half_shift(std::span<const double> f, std::span<double> out) const {
    const double dt = 2.0 * std::numbers::pi / n_;
    apply(f, out, [this, dt](int q, std::complex<double> c) {
      if (2 * q == n_) return std::complex<double>(0.0, 0.0);
      const double k = wavenumber(q);
      return std::polar(1.0, 0.5 * k * dt) * c;
    });
  }

  // Keeps wavenumbers |k| <= kmax.
  void low_pass(std::span<const double> f, std::span<double> out, int kmax) const {
    apply(f, out, [this, kmax](int q, std::complex<double> c) {
      return std::abs(wavenumber(q)) <= kmax && 2 * q != n_ ? c : std::complex<double>(0.0, 0.0);
    });
  }

  // Dense matrices of the operators above, acting on sample vectors.
  Eigen::MatrixXd derivative_matrix() const { return as_matrix(&Spectral::derivative); }
  Eigen::MatrixXd second_derivative_matrix() const {
    return as_matrix(&Spectral::second_derivative);
  }

 private:
  template <class Symbol>
  void apply(std::span<const double> f, std::span<double> out, Symbol symbol) const {
    std::vector<double> in(f.begin(), f.end());
    std::vector<std::complex<double>> spec;
    fft_->fwd(spec, in);
    for (int q = 0; q < n_; ++q) spec[q] = symbol(q, spec[q]);
    // Conjugate symmetry is restored explicitly so the inverse is real.
    for (int q = 1; q < n_ / 2; ++q) spec[n_ - q] = std::conj(spec[q]);
    spec[n_ / 2] = std::complex<double>(spec[n_ / 2].real(), 0.0);
    spec[0] = std::complex<double>(spec[0].real(), 0.0);
    std::vector<double> res;
    fft_->inv(res, spec);
    for (int j = 0; j < n_; ++j) out[j] = res[j];
  }

  Eigen::MatrixXd as_matrix(void (Spectral::*op)(std::span<const double>, std::span<double>) const) const {
    Eigen::MatrixXd m(n_, n_);
    std::vector<double> e(n_, 0.0), col(n_);
    for (int l = 0; l < n_; ++l) {
      e[l] = 1.0;
      (this->*op)(e, col);
      for (int j = 0; j < n_; ++j) m(j, l) = col[j];
      e[l] = 0.0;
    }
    return m;
  }

  int n_;
  std::shared_ptr<Eigen::FFT<double>> fft_;
};

}  // namespace gaugeflow
