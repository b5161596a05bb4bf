#pragma once
// Graded Clifford bundles over flat models: exterior algebra and spinors.

#include "linalg.hpp"

#include <bit>
#include <optional>
#include <string>

namespace locidx {

enum class BundleKind { spinor, exterior };

inline BundleKind parse_bundle_kind(const std::string& s) {
  if (s == "spinor") return BundleKind::spinor;
  if (s == "exterior") return BundleKind::exterior;
  throw Error("unsupported bundle kind '" + s + "'");
}
inline std::string to_string(BundleKind k) { return k == BundleKind::spinor ? "spinor" : "exterior"; }

struct CliffordBundle {
  BundleKind kind = BundleKind::exterior;
  int dim = 1;
  int fiber_dim = 1;
  std::vector<CMat> generators;  // c_1..c_n, skew-adjoint
  CMat grading;                  // gamma
  // Hermitian involution anticommuting with every generator and with gamma; mass term.
  std::optional<CMat> mass_generator;
};

namespace detail {

inline CMat kron(const CMat& a, const CMat& b) {
  CMat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline CMat pauli(char which) {
  CMat p(2, 2);
  const cplx i(0, 1);
  switch (which) {
    case 'x': p << 0, 1, 1, 0; break;
    case 'y': p << 0, -i, i, 0; break;
    case 'z': p << 1, 0, 0, -1; break;
    default: p = CMat::Identity(2, 2);
  }
  return p;
}

// Wedge with e_i on the exterior algebra, basis indexed by bitmask.
inline CMat wedge(int n, int i) {
  const int f = 1 << n;
  CMat e = CMat::Zero(f, f);
  for (int mask = 0; mask < f; ++mask) {
    if (mask & (1 << i)) continue;
    int sign = (std::popcount(static_cast<unsigned>(mask & ((1 << i) - 1))) % 2) ? -1 : 1;
    e(mask | (1 << i), mask) = sign;
  }
  return e;
}

}  // namespace detail

inline CliffordBundle build_clifford(int n, BundleKind kind) {
  if (n < 1) throw Error("build_clifford: dimension must be >= 1");
  CliffordBundle b;
  b.kind = kind;
  b.dim = n;
  if (kind == BundleKind::exterior) {
    if (n > 10) throw Error("build_clifford: exterior fiber too large");
    b.fiber_dim = 1 << n;
    for (int i = 0; i < n; ++i) {
      CMat e = detail::wedge(n, i);
      b.generators.push_back(e - e.adjoint());
    }
    b.grading = CMat::Zero(b.fiber_dim, b.fiber_dim);
    for (int mask = 0; mask < b.fiber_dim; ++mask) b.grading(mask, mask) = (std::popcount(unsigned(mask)) % 2) ? -1 : 1;
    CMat e0 = detail::wedge(n, 0);
    b.mass_generator = e0 + e0.adjoint();
    return b;
  }
  // Jordan-Wigner gamma matrices on ceil(n/2) qubits.
  const int q = (n + 1) / 2;
  b.fiber_dim = 1 << q;
  std::vector<CMat> gammas;
  for (int k = 0; k < q; ++k)
    for (char p : {'x', 'y'}) {
      CMat g = CMat::Identity(1, 1);
      for (int l = 0; l < q; ++l) g = detail::kron(g, l < k ? detail::pauli('z') : l == k ? detail::pauli(p) : detail::pauli('1'));
      gammas.push_back(g);
    }
  for (int i = 0; i < n; ++i) b.generators.push_back(cplx(0, 1) * gammas[i]);
  CMat z = CMat::Identity(1, 1);
  for (int l = 0; l < q; ++l) z = detail::kron(z, detail::pauli('z'));
  b.grading = z;
  if (n % 2 == 1) b.mass_generator = gammas[n];
  return b;
}

// Largest violation of the graded Clifford relations.
inline double clifford_defect(const CliffordBundle& b) {
  const Eigen::Index f = b.fiber_dim;
  const CMat id = CMat::Identity(f, f);
  double worst = 0.0;
  auto upd = [&](const CMat& m) { worst = std::max(worst, m.size() ? m.cwiseAbs().maxCoeff() : 0.0); };
  for (int i = 0; i < b.dim; ++i) {
    const CMat& ci = b.generators[i];
    upd(ci + ci.adjoint());
    upd(b.grading * ci + ci * b.grading);
    for (int j = 0; j < b.dim; ++j) upd(ci * b.generators[j] + b.generators[j] * ci + (i == j ? 2.0 : 0.0) * id);
    if (b.mass_generator) upd(*b.mass_generator * ci + ci * *b.mass_generator);
  }
  upd(b.grading * b.grading - id);
  upd(b.grading - b.grading.adjoint());
  if (b.mass_generator) {
    const CMat& e = *b.mass_generator;
    upd(e * e - id);
    upd(e - e.adjoint());
    upd(e * b.grading + b.grading * e);
  }
  return worst;
}

}  // namespace locidx
