#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace qkd {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline constexpr std::size_t kMaxDimension = 16;
inline constexpr double kHermitianTol = 1e-12;
inline constexpr double kPsdTol = 1e-10;
inline constexpr double kTraceTol = 1e-12;
inline constexpr double kCompletenessTol = 1e-10;
inline constexpr double kBlindnessTol = 1e-10;
// Eigenvalues below this are treated as outside the support (generalized inverse).
inline constexpr double kSupportCutoff = 1e-12;

namespace detail {

inline void require_square(const CMatrix& m, const char* what) {
  if (m.rows() != m.cols()) throw std::invalid_argument(std::string(what) + ": matrix is not square");
}

inline void require_same_dim(const CMatrix& a, const CMatrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch");
  }
}

inline Eigen::SelfAdjointEigenSolver<CMatrix> hermitian_eigen(const CMatrix& m) {
  const CMatrix sym = 0.5 * (m + m.adjoint());
  return Eigen::SelfAdjointEigenSolver<CMatrix>(sym);
}

// f applied to the spectrum of a Hermitian matrix.
template <class F>
CMatrix spectral_apply(const CMatrix& m, F&& f) {
  const auto es = hermitian_eigen(m);
  const Eigen::VectorXd mapped = es.eigenvalues().unaryExpr(f);
  return es.eigenvectors() * mapped.cast<Complex>().asDiagonal() * es.eigenvectors().adjoint();
}

inline CMatrix psd_sqrt(const CMatrix& m) {
  return spectral_apply(m, [](double x) { return x > 0.0 ? std::sqrt(x) : 0.0; });
}

inline CMatrix psd_pinv(const CMatrix& m, double cutoff = kSupportCutoff) {
  return spectral_apply(m, [cutoff](double x) { return x > cutoff ? 1.0 / x : 0.0; });
}

inline double trace_norm_hermitian(const CMatrix& m) {
  return hermitian_eigen(m).eigenvalues().cwiseAbs().sum();
}

// tr sqrt( sqrt(rho) sigma sqrt(rho) ).
inline double fidelity_root(const CMatrix& rho, const CMatrix& sigma) {
  const CMatrix s = psd_sqrt(rho);
  const CMatrix inner = s * sigma * s;
  const auto ev = hermitian_eigen(inner).eigenvalues();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) acc += ev(i) > 0.0 ? std::sqrt(ev(i)) : 0.0;
  return acc;
}

inline double real_trace(const CMatrix& m) { return m.trace().real(); }

}  // namespace detail

// Sub-normalized quantum state of dimension <= 16.
class DensityMatrix {
 public:
  explicit DensityMatrix(CMatrix entries) : m_(std::move(entries)) {
    detail::require_square(m_, "DensityMatrix");
    if (m_.rows() == 0 || static_cast<std::size_t>(m_.rows()) > kMaxDimension) {
      throw std::invalid_argument("DensityMatrix: dimension must be in [1, 16]");
    }
    if ((m_ - m_.adjoint()).cwiseAbs().maxCoeff() > kHermitianTol) {
      throw std::invalid_argument("DensityMatrix: not Hermitian");
    }
    if (detail::hermitian_eigen(m_).eigenvalues().minCoeff() < -kPsdTol) {
      throw std::invalid_argument("DensityMatrix: not positive semi-definite");
    }
    const double tr = detail::real_trace(m_);
    if (!(tr > 0.0 && tr <= 1.0 + kTraceTol)) {
      throw std::invalid_argument("DensityMatrix: trace outside (0, 1]");
    }
  }

  static DensityMatrix pure(const CVector& psi) { return DensityMatrix(psi * psi.adjoint()); }

  const CMatrix& matrix() const { return m_; }
  std::size_t dim() const { return static_cast<std::size_t>(m_.rows()); }
  double trace() const { return detail::real_trace(m_); }

 private:
  CMatrix m_;
};

// Generalized measurement {M^x}_x with sum_x (M^x)^dagger M^x = 1.
class MeasurementSet {
 public:
  explicit MeasurementSet(std::vector<CMatrix> operators) : ops_(std::move(operators)) {
    if (ops_.empty()) throw std::invalid_argument("MeasurementSet: no operators");
    const Eigen::Index d = ops_.front().rows();
    CMatrix sum = CMatrix::Zero(d, d);
    for (const auto& op : ops_) {
      detail::require_square(op, "MeasurementSet");
      if (op.rows() != d) throw std::invalid_argument("MeasurementSet: dimension mismatch");
      sum += op.adjoint() * op;
    }
    if ((sum - CMatrix::Identity(d, d)).cwiseAbs().maxCoeff() > kCompletenessTol) {
      throw std::invalid_argument("MeasurementSet: operators are not complete");
    }
  }

  // Projective measurement onto the columns of an orthonormal basis.
  static MeasurementSet projective(const CMatrix& basis) {
    std::vector<CMatrix> ops;
    for (Eigen::Index j = 0; j < basis.cols(); ++j) {
      ops.emplace_back(basis.col(j) * basis.col(j).adjoint());
    }
    return MeasurementSet(std::move(ops));
  }

  const std::vector<CMatrix>& operators() const { return ops_; }
  const CMatrix& operator[](std::size_t x) const { return ops_.at(x); }
  std::size_t size() const { return ops_.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(ops_.front().rows()); }

  // Outcome probabilities tr{ M^dagger M rho }.
  std::vector<double> probabilities(const DensityMatrix& rho) const {
    if (rho.dim() != dim()) throw std::invalid_argument("MeasurementSet: dimension mismatch");
    std::vector<double> p;
    p.reserve(ops_.size());
    for (const auto& op : ops_) p.push_back((op.adjoint() * op * rho.matrix()).trace().real());
    return p;
  }

 private:
  std::vector<CMatrix> ops_;
};

// States rho^{phi,x} with preparation probabilities p_x^phi, indexed [phi][x].
class PreparedStateFamily {
 public:
  PreparedStateFamily(std::vector<std::vector<DensityMatrix>> states,
                      std::vector<std::vector<double>> probabilities)
      : states_(std::move(states)), probs_(std::move(probabilities)) {
    if (states_.empty() || states_.size() != probs_.size()) {
      throw std::invalid_argument("PreparedStateFamily: bases/probabilities mismatch");
    }
    const std::size_t d = states_.front().at(0).dim();
    for (std::size_t phi = 0; phi < states_.size(); ++phi) {
      if (states_[phi].empty() || states_[phi].size() != probs_[phi].size()) {
        throw std::invalid_argument("PreparedStateFamily: outcomes/probabilities mismatch");
      }
      double total = 0.0;
      for (std::size_t x = 0; x < states_[phi].size(); ++x) {
        if (states_[phi][x].dim() != d) throw std::invalid_argument("PreparedStateFamily: dimension mismatch");
        if (probs_[phi][x] < 0.0) throw std::invalid_argument("PreparedStateFamily: negative probability");
        total += probs_[phi][x];
      }
      if (std::abs(total - 1.0) > 1e-12) {
        throw std::invalid_argument("PreparedStateFamily: probabilities do not sum to 1");
      }
    }
  }

  // The four ideal BB84 qubit states with uniform bit values.
  static PreparedStateFamily bb84() {
    const double s = 1.0 / std::sqrt(2.0);
    CVector zero(2), one(2), plus(2), minus(2);
    zero << 1.0, 0.0;
    one << 0.0, 1.0;
    plus << s, s;
    minus << s, -s;
    return PreparedStateFamily(
        {{DensityMatrix::pure(zero), DensityMatrix::pure(one)},
         {DensityMatrix::pure(plus), DensityMatrix::pure(minus)}},
        {{0.5, 0.5}, {0.5, 0.5}});
  }

  std::size_t num_bases() const { return states_.size(); }
  std::size_t num_values(std::size_t phi) const { return states_.at(phi).size(); }
  std::size_t dim() const { return states_.front().front().dim(); }
  const DensityMatrix& state(std::size_t phi, std::size_t x) const { return states_.at(phi).at(x); }
  double probability(std::size_t phi, std::size_t x) const { return probs_.at(phi).at(x); }

  // sum_x p_x^phi rho^{phi,x}
  CMatrix average(std::size_t phi) const {
    CMatrix acc = CMatrix::Zero(static_cast<Eigen::Index>(dim()), static_cast<Eigen::Index>(dim()));
    for (std::size_t x = 0; x < num_values(phi); ++x) acc += probs_[phi][x] * states_[phi][x].matrix();
    return acc;
  }

  // Largest entrywise deviation between the basis averages.
  double blindness_violation() const {
    double worst = 0.0;
    const CMatrix ref = average(0);
    for (std::size_t phi = 1; phi < num_bases(); ++phi) {
      worst = std::max(worst, (average(phi) - ref).cwiseAbs().maxCoeff());
    }
    return worst;
  }

 private:
  std::vector<std::vector<DensityMatrix>> states_;
  std::vector<std::vector<double>> probs_;
};

// Joint probability table P(x, d), stored row-major as [x][d].
class ClassicalJoint {
 public:
  explicit ClassicalJoint(std::vector<std::vector<double>> table) : pmf_(std::move(table)) {
    if (pmf_.empty() || pmf_.front().empty()) throw std::invalid_argument("ClassicalJoint: empty table");
    double total = 0.0;
    for (const auto& row : pmf_) {
      if (row.size() != pmf_.front().size()) throw std::invalid_argument("ClassicalJoint: ragged table");
      for (double p : row) {
        if (!(p >= 0.0)) throw std::invalid_argument("ClassicalJoint: negative mass");
        total += p;
      }
    }
    if (total > 1.0 + kTraceTol) throw std::invalid_argument("ClassicalJoint: total mass exceeds 1");
  }

  std::size_t num_x() const { return pmf_.size(); }
  std::size_t num_d() const { return pmf_.front().size(); }
  double operator()(std::size_t x, std::size_t d) const { return pmf_.at(x).at(d); }
  const std::vector<std::vector<double>>& table() const { return pmf_; }

 private:
  std::vector<std::vector<double>> pmf_;
};

// Largest singular value.
inline double operator_norm(const CMatrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<CMatrix> svd(m);
  return svd.singularValues()(0);
}

inline double trace_distance(const DensityMatrix& rho, const DensityMatrix& sigma) {
  detail::require_same_dim(rho.matrix(), sigma.matrix(), "trace_distance");
  return 0.5 * detail::trace_norm_hermitian(rho.matrix() - sigma.matrix());
}

inline double generalized_fidelity(const CMatrix& rho, const CMatrix& sigma) {
  detail::require_same_dim(rho, sigma, "generalized_fidelity");
  const double root = detail::fidelity_root(rho, sigma);
  const double correction = std::sqrt(std::max(0.0, 1.0 - detail::real_trace(rho))) *
                            std::sqrt(std::max(0.0, 1.0 - detail::real_trace(sigma)));
  const double f = (root + correction) * (root + correction);
  return std::clamp(f, 0.0, 1.0);
}

inline double generalized_fidelity(const DensityMatrix& rho, const DensityMatrix& sigma) {
  return generalized_fidelity(rho.matrix(), sigma.matrix());
}

inline double purified_distance(const DensityMatrix& rho, const DensityMatrix& sigma) {
  return std::sqrt(std::max(0.0, 1.0 - generalized_fidelity(rho, sigma)));
}

// max_{x,y} || M0^x (M1^y)^dagger ||_inf^2
inline double overlap_c(const MeasurementSet& m0, const MeasurementSet& m1) {
  if (m0.dim() != m1.dim()) throw std::invalid_argument("overlap_c: dimension mismatch");
  double best = 0.0;
  for (const auto& a : m0.operators()) {
    for (const auto& b : m1.operators()) {
      const double s = operator_norm(a * b.adjoint());
      best = std::max(best, s * s);
    }
  }
  return best;
}

// Geometric mean of values given in descending order.
inline double geometric_mean_desc(std::span<const double> values) {
  double log_sum = 0.0;
  for (double v : values) {
    if (v == 0.0) return 0.0;
    log_sum += std::log(v);
  }
  return std::exp(log_sum / static_cast<double>(values.size()));
}

// max over n-subsets of the geometric mean of the selected c_i, which is the
// geometric mean of the n largest values.
inline double cbar_bound(std::span<const double> c_values, std::size_t n) {
  if (n == 0 || n > c_values.size()) throw std::invalid_argument("cbar_bound: n out of range");
  std::vector<double> sorted(c_values.begin(), c_values.end());
  for (double c : sorted) {
    if (!(c >= 0.0 && c <= 1.0)) throw std::invalid_argument("cbar_bound: value outside [0, 1]");
  }
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  return geometric_mean_desc(std::span<const double>(sorted.data(), n));
}

// Overlap of two prepared ensembles,
//   max_{x,y} || sqrt(p_x rho^{0,x}) X^+ sqrt(p_y rho^{1,y}) ||_inf^2,
// with X = sum_x p_x rho^{0,x} and X^+ its inverse on the support.
inline double overlap_cprime(const PreparedStateFamily& family, std::size_t phi0 = 0, std::size_t phi1 = 1) {
  const CMatrix x0 = family.average(phi0);
  if ((family.average(phi1) - x0).cwiseAbs().maxCoeff() > kBlindnessTol) {
    throw std::invalid_argument("overlap_cprime: family leaks the basis choice");
  }
  const CMatrix x_inv = detail::psd_pinv(x0);
  double best = 0.0;
  for (std::size_t x = 0; x < family.num_values(phi0); ++x) {
    const CMatrix left = detail::psd_sqrt(family.probability(phi0, x) * family.state(phi0, x).matrix());
    for (std::size_t y = 0; y < family.num_values(phi1); ++y) {
      const CMatrix right = detail::psd_sqrt(family.probability(phi1, y) * family.state(phi1, y).matrix());
      const double s = operator_norm(left * x_inv * right);
      best = std::max(best, s * s);
    }
  }
  return best;
}

// Purification tau_{AA'} of the average prepared state together with one
// measurement per basis on A' that reproduces the preparation.
struct VirtualMeasurement {
  CMatrix tau;                 // |tau><tau| on A (x) A', A-major ordering
  std::size_t dim_a = 0;
  std::size_t dim_aprime = 0;  // rank of tau_A
  std::vector<MeasurementSet> measurements;
};

// The purification is sum_i sqrt(lambda_i) |e_i>_A |i>_{A'} over the support
// of tau_A = sum_x p_x rho^{phi,x}; transposes are taken in that Schmidt basis,
// so an operator O on A maps to (U^dagger O U)^T on A'.
inline VirtualMeasurement virtual_measurement(const PreparedStateFamily& family) {
  if (family.blindness_violation() > kBlindnessTol) {
    throw std::invalid_argument("virtual_measurement: family leaks the basis choice");
  }
  const CMatrix tau_a = family.average(0);
  const auto es = detail::hermitian_eigen(tau_a);
  std::vector<Eigen::Index> support;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    if (es.eigenvalues()(i) > kSupportCutoff) support.push_back(i);
  }
  const auto d = static_cast<Eigen::Index>(family.dim());
  const auto r = static_cast<Eigen::Index>(support.size());
  if (r == 0) throw std::invalid_argument("virtual_measurement: average state vanishes");

  CMatrix basis(d, r);
  Eigen::VectorXd inv_sqrt(r);
  CVector purification = CVector::Zero(d * r);
  for (Eigen::Index j = 0; j < r; ++j) {
    const double lambda = es.eigenvalues()(support[static_cast<std::size_t>(j)]);
    basis.col(j) = es.eigenvectors().col(support[static_cast<std::size_t>(j)]);
    inv_sqrt(j) = 1.0 / std::sqrt(lambda);
    for (Eigen::Index a = 0; a < d; ++a) purification(a * r + j) = std::sqrt(lambda) * basis(a, j);
  }
  const CMatrix tau_inv_sqrt_t = inv_sqrt.cast<Complex>().asDiagonal();

  VirtualMeasurement out;
  out.tau = purification * purification.adjoint();
  out.dim_a = static_cast<std::size_t>(d);
  out.dim_aprime = static_cast<std::size_t>(r);
  for (std::size_t phi = 0; phi < family.num_bases(); ++phi) {
    std::vector<CMatrix> ops;
    for (std::size_t x = 0; x < family.num_values(phi); ++x) {
      const CMatrix root = detail::psd_sqrt(family.state(phi, x).matrix());
      const CMatrix root_t = (basis.adjoint() * root * basis).transpose();
      ops.emplace_back(std::sqrt(family.probability(phi, x)) * root_t * tau_inv_sqrt_t);
    }
    out.measurements.emplace_back(std::move(ops));
  }
  return out;
}

// tr_{B} of an operator on A (x) B stored A-major.
inline CMatrix partial_trace_second(const CMatrix& m, std::size_t dim_a, std::size_t dim_b) {
  const auto da = static_cast<Eigen::Index>(dim_a);
  const auto db = static_cast<Eigen::Index>(dim_b);
  if (m.rows() != da * db || m.cols() != da * db) {
    throw std::invalid_argument("partial_trace_second: dimension mismatch");
  }
  CMatrix out = CMatrix::Zero(da, da);
  for (Eigen::Index i = 0; i < da; ++i)
    for (Eigen::Index j = 0; j < da; ++j)
      for (Eigen::Index b = 0; b < db; ++b) out(i, j) += m(i * db + b, j * db + b);
  return out;
}

// tr_{A'}[ tau (1 (x) M^dagger M) ], which should equal p_x^phi rho^{phi,x}.
inline CMatrix reconstructed_state(const VirtualMeasurement& vm, std::size_t phi, std::size_t x) {
  const CMatrix& m = vm.measurements.at(phi)[x];
  const CMatrix effect = m.adjoint() * m;
  const auto da = static_cast<Eigen::Index>(vm.dim_a);
  const auto db = static_cast<Eigen::Index>(vm.dim_aprime);
  CMatrix lifted = CMatrix::Zero(da * db, da * db);
  for (Eigen::Index a = 0; a < da; ++a) lifted.block(a * db, a * db, db, db) = effect;
  return partial_trace_second(vm.tau * lifted, vm.dim_a, vm.dim_aprime);
}

// State sum_x |x><x| (x) rho_x that is block diagonal in a classical label x,
// with the event Omega marking some labels.
struct EventBlockState {
  std::vector<CMatrix> blocks;
  std::vector<bool> in_event;

  double trace() const {
    double t = 0.0;
    for (const auto& b : blocks) t += detail::real_trace(b);
    return t;
  }
  double event_mass() const {
    double e = 0.0;
    for (std::size_t i = 0; i < blocks.size(); ++i)
      if (in_event.at(i)) e += detail::real_trace(blocks[i]);
    return e;
  }

  CMatrix block_diagonal() const {
    Eigen::Index total = 0;
    for (const auto& b : blocks) total += b.rows();
    CMatrix out = CMatrix::Zero(total, total);
    Eigen::Index at = 0;
    for (const auto& b : blocks) {
      out.block(at, at, b.rows(), b.cols()) = b;
      at += b.rows();
    }
    return out;
  }

  // A classical joint P(x, d) as 1x1 blocks per (x, d), with the event on x.
  static EventBlockState from_classical(const ClassicalJoint& joint, const std::vector<bool>& event_on_x) {
    if (event_on_x.size() != joint.num_x()) throw std::invalid_argument("EventBlockState: event size mismatch");
    EventBlockState s;
    for (std::size_t x = 0; x < joint.num_x(); ++x) {
      for (std::size_t d = 0; d < joint.num_d(); ++d) {
        s.blocks.push_back(CMatrix::Constant(1, 1, Complex(joint(x, d), 0.0)));
        s.in_event.push_back(event_on_x[x]);
      }
    }
    return s;
  }
};

// Generalized fidelity between two states with the same block structure.
inline double block_fidelity(const EventBlockState& a, const EventBlockState& b) {
  if (a.blocks.size() != b.blocks.size()) throw std::invalid_argument("block_fidelity: block count mismatch");
  double root = 0.0;
  for (std::size_t i = 0; i < a.blocks.size(); ++i) root += detail::fidelity_root(a.blocks[i], b.blocks[i]);
  const double corr = std::sqrt(std::max(0.0, 1.0 - a.trace())) * std::sqrt(std::max(0.0, 1.0 - b.trace()));
  return std::clamp((root + corr) * (root + corr), 0.0, 1.0);
}

struct SmoothingResult {
  EventBlockState state;
  double epsilon = 0.0;
  double achieved_distance = 0.0;
};

// Removes the event Omega, rescaling the remainder by sin^2(phi)/(t - eps)
// with tan(phi) = sqrt((t - eps)/(1 - t)); the purified distance to the input is sqrt(eps).
inline SmoothingResult smooth_away_event(const EventBlockState& input) {
  if (input.blocks.size() != input.in_event.size()) {
    throw std::invalid_argument("smooth_away_event: labels do not match blocks");
  }
  const double t = input.trace();
  const double eps = input.event_mass();
  if (!(t <= 1.0 + kTraceTol)) throw std::invalid_argument("smooth_away_event: trace exceeds 1");
  if (!(eps < t)) throw std::invalid_argument("smooth_away_event: event mass must be below the trace");

  // sin^2(phi) = (t - eps) / (1 - eps); also covers t = 1 where tan(phi) is infinite.
  const double sin2 = (t - eps) / (1.0 - eps);
  const double scale = sin2 / (t - eps);

  SmoothingResult out;
  out.epsilon = eps;
  out.state.in_event = input.in_event;
  for (std::size_t i = 0; i < input.blocks.size(); ++i) {
    if (input.in_event[i]) {
      out.state.blocks.push_back(CMatrix::Zero(input.blocks[i].rows(), input.blocks[i].cols()));
    } else {
      out.state.blocks.push_back(scale * input.blocks[i]);
    }
  }
  // The output is proportional to the input on every kept block, so the states commute and
  // 1 - sqrt(F) = (1/2) sum (sqrt(p) - sqrt(q))^2 over the shared spectrum, including the
  // 1 - trace slot. This avoids the cancellation in 1 - F near F = 1.
  const double t_out = scale * (t - eps);
  const double shrink = 1.0 - std::sqrt(scale);
  const double slot = std::sqrt(std::max(0.0, 1.0 - t)) - std::sqrt(std::max(0.0, 1.0 - t_out));
  const double gap = 0.5 * (shrink * shrink * (t - eps) + eps + slot * slot);
  out.achieved_distance = std::sqrt(gap * (2.0 - gap));
  return out;
}

struct GuessingResult {
  double p_guess = 0.0;
  double h_min = 0.0;
};

// Classical side information: p_guess = sum_d max_x P(x, d).
inline GuessingResult guessing_prob_classical(const ClassicalJoint& joint) {
  GuessingResult out;
  for (std::size_t d = 0; d < joint.num_d(); ++d) {
    double best = 0.0;
    for (std::size_t x = 0; x < joint.num_x(); ++x) best = std::max(best, joint(x, d));
    out.p_guess += best;
  }
  out.h_min = -std::log2(out.p_guess);
  return out;
}

}  // namespace qkd
