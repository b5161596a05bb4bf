#pragma once
// Dense/sparse linear algebra helpers shared by every module.

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <Eigen/Sparse>
#ifndef LAPACK_COMPLEX_CPP
#define LAPACK_COMPLEX_CPP
#endif
#include <lapacke.h>

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>
#include <algorithm>

namespace locidx {

using cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<cplx, Eigen::ColMajor>;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct HermitianEigen {
  RVec values;   // ascending
  CMat vectors;  // columns
};

// Full Hermitian eigendecomposition (divide and conquer).
inline HermitianEigen eigh(const CMat& a) {
  if (a.rows() != a.cols()) throw Error("eigh: matrix not square");
  HermitianEigen out;
  const lapack_int n = static_cast<lapack_int>(a.rows());
  out.vectors = a;
  out.values.resize(n);
  if (n == 0) return out;
  auto* data = reinterpret_cast<lapack_complex_double*>(out.vectors.data());
  lapack_int info = LAPACKE_zheevd(LAPACK_COL_MAJOR, 'V', 'U', n, data, n, out.values.data());
  if (info != 0) throw Error("eigh: zheevd failed with info=" + std::to_string(info));
  return out;
}

inline RVec eigvalsh(const CMat& a) {
  CMat work = a;
  const lapack_int n = static_cast<lapack_int>(a.rows());
  RVec w(n);
  if (n == 0) return w;
  auto* data = reinterpret_cast<lapack_complex_double*>(work.data());
  lapack_int info = LAPACKE_zheevd(LAPACK_COL_MAJOR, 'N', 'U', n, data, n, w.data());
  if (info != 0) throw Error("eigvalsh: zheevd failed with info=" + std::to_string(info));
  return w;
}

// Exact 2-norm, largest singular value.
inline double spectral_norm(const CMat& r) {
  if (r.size() == 0) return 0.0;
  Eigen::BDCSVD<CMat> svd(r);
  return svd.singularValues()(0);
}

// f(A) for Hermitian A given its decomposition.
template <class F>
CMat apply_function(const HermitianEigen& eig, F&& f) {
  RVec fv(eig.values.size());
  for (Eigen::Index i = 0; i < fv.size(); ++i) fv(i) = f(eig.values(i));
  return eig.vectors * fv.asDiagonal() * eig.vectors.adjoint();
}

inline double hermitian_defect(const CMat& a) { return (a - a.adjoint()).cwiseAbs().maxCoeff(); }

// Power iteration on M*M with a seeded random start.
template <class Apply, class ApplyAdjoint>
double power_norm(Apply&& apply, ApplyAdjoint&& apply_adj, Eigen::Index n, std::uint64_t seed = 1,
                  int iters = 200, double rtol = 1e-10) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  CVec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = cplx(g(rng), g(rng));
  v.normalize();
  double est = 0.0;
  for (int k = 0; k < iters; ++k) {
    CVec w = apply(v);
    double nw = w.norm();
    if (nw == 0.0) return 0.0;
    CVec u = apply_adj(w);
    double nu = u.norm();
    if (nu == 0.0) return nw;
    double next = std::sqrt(nu);
    v = u / nu;
    if (k > 3 && std::abs(next - est) <= rtol * next) return next;
    est = next;
  }
  return est;
}

inline double sparse_norm(const SpMat& m, std::uint64_t seed = 1) {
  return power_norm([&](const CVec& v) { return CVec(m * v); },
                    [&](const CVec& v) { return CVec(m.adjoint() * v); }, m.cols(), seed);
}

// Least-squares slope of y against x.
inline double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw Error("ls_slope: need at least two paired samples");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) mx += x[i], my += y[i];
  mx /= n, my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) sxx += (x[i] - mx) * (x[i] - mx), sxy += (x[i] - mx) * (y[i] - my);
  if (sxx == 0.0) throw Error("ls_slope: degenerate abscissae");
  return sxy / sxx;
}

}  // namespace locidx
