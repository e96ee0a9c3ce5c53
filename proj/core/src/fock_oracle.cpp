#include "sta/fock_oracle.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "sta/constants.hpp"
#include "sta/errors.hpp"

namespace sta {

namespace {

using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

constexpr double kTailTolerance = 1e-10;
constexpr double kWeightCutoff = 1e-14;
constexpr double kSqueezeFloor = 1e-10;

// Eigenvectors psi_k (columns, rows 0..n_max) and weights p_k of one state.
struct Spectrum {
  CMatrix vectors;
  std::vector<double> weights;
  bool number_diagonal = false;
};

std::vector<double> thermal_weights(double nbar, std::size_t limit) {
  std::vector<double> w;
  if (nbar < kPurityFloor) {
    w.push_back(1.0);
    return w;
  }
  const double ratio = nbar / (nbar + 1.0);
  double p = 1.0 / (nbar + 1.0);
  double tail = 1.0;  // mass of levels not yet taken
  for (std::size_t k = 0; k < limit; ++k) {
    w.push_back(p);
    tail -= p;
    if (tail < kWeightCutoff) break;
    p *= ratio;
  }
  return w;
}

// <m|S(zeta)|n> for S(zeta) = exp((zeta* a^2 - zeta a+^2)/2), zeta = r e^{i theta}. Exact per element.
CMatrix squeeze_matrix(double r, double theta, std::size_t dim, std::size_t cols) {
  const auto rows = static_cast<Eigen::Index>(dim);
  const auto ncols = static_cast<Eigen::Index>(cols);
  CMatrix s = CMatrix::Zero(rows, ncols);
  const double sech = 1.0 / std::cosh(r);
  const std::complex<double> r00 = -std::polar(std::tanh(r), theta);
  const std::complex<double> r11 = std::polar(std::tanh(r), -theta);
  std::vector<double> root(dim + 1);
  for (std::size_t k = 0; k <= dim; ++k) root[k] = std::sqrt(static_cast<double>(k));
  s(0, 0) = std::sqrt(sech);
  for (Eigen::Index m = 2; m < rows; m += 2) {
    s(m, 0) = root[static_cast<std::size_t>(m - 1)] / root[static_cast<std::size_t>(m)] * r00 * s(m - 2, 0);
  }
  for (Eigen::Index n = 1; n < ncols; ++n) {
    const double rn = root[static_cast<std::size_t>(n)];
    for (Eigen::Index m = (n % 2); m < rows; m += 2) {
      std::complex<double> v = 0.0;
      if (n >= 2) v += root[static_cast<std::size_t>(n - 1)] / rn * r11 * s(m, n - 2);
      if (m >= 1) v += root[static_cast<std::size_t>(m)] / rn * sech * s(m - 1, n - 1);
      s(m, n) = v;
    }
  }
  return s;
}

// <m|D(alpha)|n>, filled column by column from the coherent column.
CMatrix displacement_matrix(std::complex<double> alpha, std::size_t rows_n, std::size_t cols_n) {
  const auto rows = static_cast<Eigen::Index>(rows_n);
  const auto cols = static_cast<Eigen::Index>(cols_n);
  CMatrix d = CMatrix::Zero(rows, cols);
  d(0, 0) = std::exp(-0.5 * std::norm(alpha));
  for (Eigen::Index m = 1; m < rows; ++m) d(m, 0) = alpha / std::sqrt(static_cast<double>(m)) * d(m - 1, 0);
  const std::complex<double> ac = std::conj(alpha);
  for (Eigen::Index n = 1; n < cols; ++n) {
    const double inv = 1.0 / std::sqrt(static_cast<double>(n));
    d(0, n) = -ac * inv * d(0, n - 1);
    for (Eigen::Index m = 1; m < rows; ++m) {
      d(m, n) = inv * (-ac * d(m, n - 1) + std::sqrt(static_cast<double>(m)) * d(m - 1, n - 1));
    }
  }
  return d;
}

CVector coherent_vector(std::complex<double> alpha, std::size_t dim) {
  CVector c(static_cast<Eigen::Index>(dim));
  c(0) = std::exp(-0.5 * std::norm(alpha));
  for (std::size_t n = 1; n < dim; ++n) {
    c(static_cast<Eigen::Index>(n)) = c(static_cast<Eigen::Index>(n - 1)) * alpha / std::sqrt(static_cast<double>(n));
  }
  return c;
}

Spectrum spectrum(const GaussianState& state, double omega_ref, std::size_t n_max) {
  const auto d = fock_decompose(state, omega_ref);
  const std::size_t dim = n_max + 1;
  Spectrum out;
  out.weights = thermal_weights(d.nbar, dim);
  const std::size_t levels = out.weights.size();

  const bool squeezed = d.squeeze_r > kSqueezeFloor;
  const bool displaced = std::abs(d.alpha) > 0.0;
  const auto rows = static_cast<Eigen::Index>(dim);
  const auto cols = static_cast<Eigen::Index>(levels);

  if (!squeezed && !displaced) {
    out.vectors = CMatrix::Identity(rows, cols);
    out.number_diagonal = true;
  } else if (!squeezed && levels == 1) {
    out.vectors = coherent_vector(d.alpha, dim);
  } else {
    // D(alpha) S(zeta) columns; the product sums over a padded intermediate index.
    const std::size_t pad = dim + std::max<std::size_t>(40, dim / 2);
    if (levels > pad) throw NumericalError("Fock oracle: thermal spectrum exceeds the working space");
    const CMatrix s = squeezed ? squeeze_matrix(d.squeeze_r, d.squeeze_phi, pad, levels)
                               : CMatrix(CMatrix::Identity(static_cast<Eigen::Index>(pad), cols));
    if (displaced) {
      out.vectors = displacement_matrix(d.alpha, dim, pad) * s;
    } else {
      out.vectors = s.topRows(rows);
    }
  }

  // Trace kept inside the truncated space.
  double kept = 0.0;
  for (std::size_t k = 0; k < levels; ++k) {
    kept += out.weights[k] * out.vectors.col(static_cast<Eigen::Index>(k)).squaredNorm();
  }
  const double lost = 1.0 - kept;
  if (!(lost < kTailTolerance)) {
    std::ostringstream msg;
    msg << "Fock oracle: truncation at n_max = " << n_max << " loses " << lost
        << " of the trace (limit 1e-10); increase n_max";
    throw NumericalError(msg.str());
  }
  return out;
}

std::size_t thermal_tail_levels(double nbar) {
  if (nbar < kPurityFloor) return 1;
  const double ratio = nbar / (nbar + 1.0);
  return static_cast<std::size_t>(std::ceil(std::log(kTailTolerance * 1e-2) / std::log(ratio)));
}

}  // namespace

FockDecomposition fock_decompose(const GaussianState& state, double omega_ref) {
  if (!(omega_ref > 0.0)) throw ConfigError("Fock reference frequency must be > 0");
  const auto form = covariance(state);
  const double m = state.mass;
  const double xscale = std::sqrt(m * omega_ref / kHbar);         // x = q * xscale
  const double yscale = 1.0 / std::sqrt(m * kHbar * omega_ref);   // y = p * yscale
  const double sxx = form.matrix[0][0] * xscale * xscale;
  const double syy = form.matrix[1][1] * yscale * yscale;
  const double sxy = form.matrix[0][1] * xscale * yscale;
  const double nu = std::sqrt(sxx * syy - sxy * sxy);

  FockDecomposition d;
  d.omega_ref = omega_ref;
  d.nbar = std::max(0.0, nu - 0.5);
  d.alpha = std::complex<double>(state.mean_q * xscale, state.mean_p * yscale) / std::numbers::sqrt2;
  const double m11 = sxx / nu;
  const double m22 = syy / nu;
  const double m12 = sxy / nu;
  // sinh 2r from the traceless part; acosh of the trace would amplify rounding near r = 0.
  const double half_diff = 0.5 * (m22 - m11);
  d.squeeze_r = 0.5 * std::asinh(std::hypot(half_diff, m12));
  d.squeeze_phi = (d.squeeze_r > 0.0) ? std::atan2(-m12, half_diff) : 0.0;
  return d;
}

double fock_reference_omega(const GaussianState& a, const GaussianState& b) {
  auto natural = [](const GaussianState& s) { return std::sqrt(s.var_p() / s.var_q()) / s.mass; };
  return std::sqrt(natural(a) * natural(b));
}

std::size_t fock_dimension_for_tail(const GaussianState& a, const GaussianState& b) {
  const double w = fock_reference_omega(a, b);
  std::size_t need = 50;
  for (const auto* s : {&a, &b}) {
    const auto d = fock_decompose(*s, w);
    // Squeezing spreads the thermal ladder by roughly e^{2r}; the displacement
    // adds a Poisson-like shell of width ~|alpha| around |alpha|^2.
    const double spread = std::exp(2.0 * d.squeeze_r);
    const double levels = static_cast<double>(thermal_tail_levels(d.nbar)) * spread;
    const double shell = std::norm(d.alpha) + 12.0 * std::abs(d.alpha) + 12.0 * spread;
    need = std::max(need, static_cast<std::size_t>(std::ceil(levels + shell + 20.0)));
  }
  return need;
}

std::size_t default_fock_dimension(const GaussianState& a, const GaussianState& b) {
  const double w = fock_reference_omega(a, b);
  double need = 50.0;
  for (const auto* s : {&a, &b}) {
    const auto d = fock_decompose(*s, w);
    need = std::max(need, std::ceil(20.0 * (d.nbar + std::norm(d.alpha) + 1.0)));
  }
  return std::max(static_cast<std::size_t>(need), fock_dimension_for_tail(a, b));
}

double fidelity_fock_oracle(const GaussianState& a, const GaussianState& b, std::size_t n_max) {
  if (std::abs(a.mass - b.mass) > 1e-12 * std::max(a.mass, b.mass)) {
    throw ConfigError("fidelity needs two states of the same particle mass");
  }
  const double w = fock_reference_omega(a, b);
  const auto sa = spectrum(a, w, n_max);
  const auto sb = spectrum(b, w, n_max);

  if (sa.number_diagonal && sb.number_diagonal) {
    double f = 0.0;
    const std::size_t n = std::min(sa.weights.size(), sb.weights.size());
    for (std::size_t k = 0; k < n; ++k) f += std::sqrt(sa.weights[k] * sb.weights[k]);
    return std::min(1.0, f);
  }

  Eigen::VectorXd ra(static_cast<Eigen::Index>(sa.weights.size()));
  Eigen::VectorXd rb(static_cast<Eigen::Index>(sb.weights.size()));
  for (Eigen::Index k = 0; k < ra.size(); ++k) ra(k) = std::sqrt(sa.weights[static_cast<std::size_t>(k)]);
  for (Eigen::Index k = 0; k < rb.size(); ++k) rb(k) = std::sqrt(sb.weights[static_cast<std::size_t>(k)]);

  const CMatrix overlap = ra.asDiagonal() * (sa.vectors.adjoint() * sb.vectors) * rb.asDiagonal();
  if (overlap.rows() == 1 || overlap.cols() == 1) return std::min(1.0, overlap.norm());
  Eigen::BDCSVD<CMatrix> svd(overlap);
  return std::min(1.0, svd.singularValues().sum());
}

double fidelity_fock_oracle(const GaussianState& a, const GaussianState& b) {
  return fidelity_fock_oracle(a, b, default_fock_dimension(a, b));
}

std::vector<std::complex<double>> fock_density_matrix(const GaussianState& state, double omega_ref,
                                                      std::size_t n_max) {
  const auto s = spectrum(state, omega_ref, n_max);
  CMatrix weighted = s.vectors;
  for (Eigen::Index k = 0; k < weighted.cols(); ++k) {
    weighted.col(k) *= std::sqrt(s.weights[static_cast<std::size_t>(k)]);
  }
  const CMatrix rho = weighted * weighted.adjoint();
  const auto dim = static_cast<std::size_t>(rho.rows());
  std::vector<std::complex<double>> out(dim * dim);
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < dim; ++j)
      out[i * dim + j] = rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return out;
}

}  // namespace sta
