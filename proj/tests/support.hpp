#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include <Eigen/QR>

#include "qkd/qtoolbox.hpp"
#include "qkd/random.hpp"

namespace qkd::testing {

inline CMatrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, RandomStream& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  CMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = Complex(g(rng), g(rng));
  return m;
}

inline CMatrix random_unitary(Eigen::Index d, RandomStream& rng) {
  Eigen::HouseholderQR<CMatrix> qr(gaussian_matrix(d, d, rng));
  return qr.householderQ() * CMatrix::Identity(d, d);
}

inline CMatrix hermitize(const CMatrix& m) { return 0.5 * (m + m.adjoint()); }

// Random density matrix of the given rank, scaled to trace `trace`.
inline DensityMatrix random_state(Eigen::Index d, RandomStream& rng, double trace = 1.0, Eigen::Index rank = 0) {
  const CMatrix w = gaussian_matrix(d, rank == 0 ? d : rank, rng);
  CMatrix rho = hermitize(w * w.adjoint());
  rho *= trace / rho.trace().real();
  return DensityMatrix(hermitize(rho));
}

// A basis-blind family: for each basis phi a random unitary U splits the common
// average tau into weighted pure states sqrt(tau) U |x><x| U^dagger sqrt(tau).
inline PreparedStateFamily random_blind_family(Eigen::Index d, std::size_t bases, RandomStream& rng) {
  const CMatrix tau = random_state(d, rng).matrix();
  const CMatrix root = detail::psd_sqrt(tau);
  std::vector<std::vector<DensityMatrix>> states;
  std::vector<std::vector<double>> probs;
  for (std::size_t phi = 0; phi < bases; ++phi) {
    const CMatrix u = random_unitary(d, rng);
    std::vector<DensityMatrix> row;
    std::vector<double> p;
    double total = 0.0;
    for (Eigen::Index x = 0; x < d; ++x) {
      const CMatrix weighted = hermitize(root * u.col(x) * u.col(x).adjoint() * root);
      const double px = weighted.trace().real();
      row.emplace_back(hermitize(weighted / px));
      p.push_back(px);
      total += px;
    }
    for (double& px : p) px /= total;
    states.push_back(std::move(row));
    probs.push_back(std::move(p));
  }
  return PreparedStateFamily(std::move(states), std::move(probs));
}

inline double max_abs(const CMatrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

}  // namespace qkd::testing
