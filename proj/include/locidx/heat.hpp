#pragma once
// Kernel families f(tD), e^{-t^2 D^2}: continuum closed forms, spectral oracle, decay envelopes.
// Kernel blocks are in density units (operator matrix entries / h^n).

#include "dirac.hpp"

#include <functional>
#include <numbers>

namespace locidx {

enum class KernelSource { continuum_gaussian, torus_image_sum, spectral_oracle, composite };

inline std::string to_string(KernelSource s) {
  switch (s) {
    case KernelSource::continuum_gaussian: return "continuum_gaussian";
    case KernelSource::torus_image_sum: return "torus_image_sum";
    case KernelSource::spectral_oracle: return "spectral_oracle";
    default: return "composite";
  }
}

inline constexpr std::size_t kDefaultEigBudget = 6000;

// Kernel of one family member at fixed t.
class KernelAt {
 public:
  using BlockFn = std::function<CMat(std::size_t, std::size_t)>;
  using MatrixFn = std::function<CMat()>;

  KernelAt(double t, std::shared_ptr<const LatticeModel> model, int fiber, BlockFn block, MatrixFn matrix)
      : t_(t), model_(std::move(model)), fiber_(fiber), block_(std::move(block)), matrix_(std::move(matrix)) {}

  // Dense operator matrix in operator units.
  static KernelAt from_matrix(double t, std::shared_ptr<const LatticeModel> model, int fiber, CMat op) {
    auto shared = std::make_shared<const CMat>(std::move(op));
    const double w = model->weight();
    return KernelAt(
        t, model, fiber,
        [shared, fiber, w](std::size_t m, std::size_t mp) {
          return CMat(shared->block(m * fiber, mp * fiber, fiber, fiber) / w);
        },
        [shared] { return *shared; });
  }

  double t() const { return t_; }
  int fiber_dim() const { return fiber_; }
  const LatticeModel& model() const { return *model_; }
  std::shared_ptr<const LatticeModel> model_ptr() const { return model_; }
  CMat block(std::size_t m, std::size_t mp) const { return block_(m, mp); }
  CMat matrix() const {
    if (!matrix_) throw Error("kernel has no materialized operator matrix");
    return matrix_();
  }

 private:
  double t_;
  std::shared_ptr<const LatticeModel> model_;
  int fiber_;
  BlockFn block_;
  MatrixFn matrix_;
};

struct KernelFamily {
  std::string symbol;
  KernelSource source = KernelSource::composite;
  std::shared_ptr<const LatticeModel> model;
  int fiber_dim = 1;
  std::function<KernelAt(double)> at_fn;

  KernelAt at(double t) const {
    if (!(t > 0.0)) throw Error("kernel family '" + symbol + "': t must be positive");
    return at_fn(t);
  }
  CMat block(double t, std::size_t m, std::size_t mp) const { return at(t).block(m, mp); }
};

// Family defined by a dense operator-matrix function of t.
inline KernelFamily matrix_family(std::shared_ptr<const LatticeModel> model, int fiber, std::string symbol,
                                  std::function<CMat(double)> op) {
  KernelFamily k{std::move(symbol), KernelSource::composite, model, fiber, {}};
  k.at_fn = [model, fiber, op](double t) { return KernelAt::from_matrix(t, model, fiber, op(t)); };
  return k;
}

// ---------------------------------------------------------------------------
// Continuum Gaussian

namespace detail {

// One-dimensional heat kernel (4 pi t^2)^{-1/2} sum_k exp(-(d + kC)^2 / 4t^2).
inline double gauss1d(double d, double t, double period, double image_tol, int max_images) {
  const double norm = 1.0 / std::sqrt(4.0 * std::numbers::pi * t * t);
  auto term = [&](double x) { return std::exp(-x * x / (4.0 * t * t)); };
  double s = term(d);
  if (period <= 0.0) return norm * s;
  for (int k = 1;; ++k) {
    if (k > max_images) throw Error("image sum did not reach image_tol within max_images");
    double a = term(d + k * period), b = term(d - k * period);
    s += a + b;
    if (a < image_tol && b < image_tol) break;
  }
  return norm * s;
}

}  // namespace detail

// e^{-t^2 Delta} (x) I_fiber; exact on R^n, image sum on a torus.
inline KernelFamily gaussian_heat_kernel(std::shared_ptr<const LatticeModel> model, int fiber_dim,
                                         double image_tol = 1e-16, int max_images = 1000) {
  const bool torus = model->is_torus();
  KernelFamily k{"e^{-t^2 D^2}", torus ? KernelSource::torus_image_sum : KernelSource::continuum_gaussian, model,
                 fiber_dim, {}};
  k.at_fn = [model, fiber_dim, image_tol, max_images, torus](double t) {
    auto scalar = [=](std::size_t m, std::size_t mp) {
      double v = 1.0;
      for (int a = 0; a < model->dim(); ++a) {
        double d = model->coord(mp, a) - model->coord(m, a);
        if (torus) d = model->axis_delta(model->coord(m, a), model->coord(mp, a), a);
        v *= detail::gauss1d(d, t, torus ? model->extent(a) : 0.0, image_tol, max_images);
      }
      return v;
    };
    auto block = [=](std::size_t m, std::size_t mp) {
      return CMat(scalar(m, mp) * CMat::Identity(fiber_dim, fiber_dim));
    };
    auto matrix = [=] {
      const std::size_t ns = model->size();
      CMat out = CMat::Zero(ns * fiber_dim, ns * fiber_dim);
      for (std::size_t m = 0; m < ns; ++m)
        for (std::size_t mp = 0; mp < ns; ++mp) {
          double v = scalar(m, mp) * model->weight();
          for (int a = 0; a < fiber_dim; ++a) out(m * fiber_dim + a, mp * fiber_dim + a) = v;
        }
      return out;
    };
    return KernelAt(t, model, fiber_dim, block, matrix);
  };
  return k;
}

// ---------------------------------------------------------------------------
// Spectral oracle

struct SpectralData {
  HermitianEigen eig;
};

inline std::shared_ptr<const SpectralData> spectral_decomposition(const DiracOperator& d,
                                                                  std::size_t budget = kDefaultEigBudget) {
  if (static_cast<std::size_t>(d.dim()) > budget)
    throw Error("dense eigensolver budget exceeded: dimension " + std::to_string(d.dim()) + " > " +
                std::to_string(budget));
  return std::make_shared<const SpectralData>(SpectralData{eigh(d.dense())});
}

// Family t -> g(t, D) through the eigendecomposition of D.
inline KernelFamily spectral_family(const DiracOperator& d, std::function<double(double, double)> g, std::string symbol,
                                    std::shared_ptr<const SpectralData> data = nullptr,
                                    std::size_t budget = kDefaultEigBudget) {
  if (!data) data = spectral_decomposition(d, budget);
  auto model = d.model;
  const int f = d.fiber_dim();
  KernelFamily k{std::move(symbol), KernelSource::spectral_oracle, model, f, {}};
  k.at_fn = [data, model, f, g](double t) {
    const RVec& lam = data->eig.values;
    RVec w(lam.size());
    for (Eigen::Index i = 0; i < lam.size(); ++i) w(i) = g(t, lam(i));
    auto weighted = std::make_shared<const CMat>(data->eig.vectors * w.asDiagonal());
    const double wt = model->weight();
    auto block = [data, weighted, f, wt](std::size_t m, std::size_t mp) {
      return CMat(weighted->middleRows(m * f, f) * data->eig.vectors.middleRows(mp * f, f).adjoint() / wt);
    };
    auto matrix = [data, weighted] { return CMat(*weighted * data->eig.vectors.adjoint()); };
    return KernelAt(t, model, f, block, matrix);
  };
  return k;
}

// f(tD) for a scalar function f.
inline KernelFamily spectral_kernel(const DiracOperator& d, std::function<double(double)> f, std::string symbol = "f(tD)",
                                    std::shared_ptr<const SpectralData> data = nullptr,
                                    std::size_t budget = kDefaultEigBudget) {
  return spectral_family(
      d, [f](double t, double l) { return f(t * l); }, std::move(symbol), std::move(data), budget);
}

// D^j e^{-t^2 D^2}
inline KernelFamily dj_heat_family(const DiracOperator& d, int j, std::shared_ptr<const SpectralData> data = nullptr,
                                   std::size_t budget = kDefaultEigBudget) {
  if (j < 0) throw Error("dj_heat_family: j must be >= 0");
  std::string sym = j == 0 ? "e^{-t^2 D^2}" : "D^" + std::to_string(j) + " e^{-t^2 D^2}";
  return spectral_family(
      d, [j](double t, double l) { return std::pow(l, j) * std::exp(-t * t * l * l); }, sym, std::move(data), budget);
}

inline KernelFamily heat_family(const DiracOperator& d, std::shared_ptr<const SpectralData> data = nullptr,
                                std::size_t budget = kDefaultEigBudget) {
  return dj_heat_family(d, 0, std::move(data), budget);
}

// sup_x |x^j e^{-t^2 x^2}|
inline double dj_norm_bound(int j, double t) {
  if (j == 0) return 1.0;
  return std::pow(j / (2.0 * t * t), 0.5 * j) * std::exp(-0.5 * j);
}

// (1 - e^{-t^2 x^2}) / x, zero at x = 0.
inline double parametrix_symbol(double t, double x) {
  const double y = t * t * x * x;
  if (y < 1e-6) return t * t * x * (1.0 - y / 2.0 + y * y / 6.0 - y * y * y / 24.0);
  return -std::expm1(-y) / x;
}

inline KernelFamily parametrix_family(const DiracOperator& d, std::shared_ptr<const SpectralData> data = nullptr,
                                      std::size_t budget = kDefaultEigBudget) {
  return spectral_family(d, parametrix_symbol, "Q(t)", std::move(data), budget);
}

// ---------------------------------------------------------------------------
// Off-diagonal mass and envelopes

struct OffdiagonalMass {
  double row = 0.0;
  double column = 0.0;
};

// sum over d(m, m') >= r of ||kappa(m, m')||_F^2 h^n, and the column version.
inline OffdiagonalMass offdiagonal_mass(const KernelAt& k, std::size_t m, double r) {
  if (r < 0) throw Error("offdiagonal_mass: radius must be nonnegative");
  const auto& model = k.model();
  const double eps = 1e-12 * std::max(1.0, r);
  OffdiagonalMass out;
  for (std::size_t mp = 0; mp < model.size(); ++mp) {
    if (model.distance(m, mp) < r - eps) continue;
    out.row += k.block(m, mp).squaredNorm();
    out.column += k.block(mp, m).squaredNorm();
  }
  out.row *= model.weight();
  out.column *= model.weight();
  return out;
}

// Row masses for a list of radii in one pass over the row.
inline std::vector<double> offdiagonal_mass_profile(const KernelAt& k, std::size_t m, const std::vector<double>& radii) {
  const auto& model = k.model();
  std::vector<double> out(radii.size(), 0.0);
  for (std::size_t mp = 0; mp < model.size(); ++mp) {
    const double d = model.distance(m, mp);
    const double v = k.block(m, mp).squaredNorm() * model.weight();
    for (std::size_t i = 0; i < radii.size(); ++i)
      if (d >= radii[i] - 1e-12 * std::max(1.0, radii[i])) out[i] += v;
  }
  return out;
}

// C t^{-a}
struct PowerLawBound {
  double C = 0.0;
  double a = 0.0;
  double operator()(double t) const { return C * std::pow(t, -a); }
};

// Exponent from a log-log least-squares slope, C from the worst calibration ratio.
inline PowerLawBound fit_power_law(const std::vector<double>& ts, const std::vector<double>& values, double margin = 1.1) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (!(values[i] > 0.0)) continue;
    lx.push_back(std::log(ts[i]));
    ly.push_back(std::log(values[i]));
  }
  PowerLawBound b;
  if (lx.size() >= 2) b.a = std::max(0.0, -ls_slope(lx, ly));
  for (std::size_t i = 0; i < ts.size(); ++i) b.C = std::max(b.C, values[i] * std::pow(ts[i], b.a));
  b.C *= margin;
  return b;
}

struct DecayEnvelope {
  enum class Kind { gaussian, polynomial } kind = Kind::gaussian;
  double C = 1.0;
  double a = 1.0;       // gaussian rate
  double p = 0.0;       // gaussian prefactor power t^{-p}
  double b = 4.0;       // polynomial order
  double ktilde = 0.0;  // polynomial shift

  double operator()(double r, double t) const {
    if (kind == Kind::gaussian) return C * std::pow(t, -p) * std::exp(-a * r * r / (t * t));
    return C * std::pow(r, ktilde - b + 1.0) * std::pow(t, b - ktilde - 1.0);
  }
  std::string describe() const {
    if (kind == Kind::gaussian)
      return "C t^-p exp(-a r^2/t^2), C=" + std::to_string(C) + " a=" + std::to_string(a) + " p=" + std::to_string(p);
    return "C_b r^(k-b+1) t^(b-k-1), C_b=" + std::to_string(C) + " b=" + std::to_string(b) + " k=" + std::to_string(ktilde);
  }
};

inline DecayEnvelope gaussian_envelope(double c, double a, double p = 0.0) {
  DecayEnvelope e;
  e.kind = DecayEnvelope::Kind::gaussian;
  e.C = c, e.a = a, e.p = p;
  return e;
}

inline DecayEnvelope polynomial_envelope(double cb, double b, double ktilde = 0.0) {
  DecayEnvelope e;
  e.kind = DecayEnvelope::Kind::polynomial;
  e.C = cb, e.b = b, e.ktilde = ktilde;
  return e;
}

struct EnvelopeSample {
  std::size_t site = 0;
  double r = 0.0;
  double t = 0.0;
  double value = 0.0;
};

// log(v t^p) = log C - a r^2/t^2 by least squares. The rate is shrunk by rate_margin so the
// envelope stays valid below the calibrated t range; C then dominates every calibration sample.
inline DecayEnvelope fit_gaussian_envelope(const std::vector<EnvelopeSample>& cal, double p = 0.0, double margin = 1.1,
                                           double rate_margin = 0.8) {
  std::vector<double> x, y;
  for (const auto& s : cal)
    if (s.value > 0.0) {
      x.push_back(s.r * s.r / (s.t * s.t));
      y.push_back(std::log(s.value * std::pow(s.t, p)));
    }
  if (x.size() < 2) throw Error("fit_gaussian_envelope: need two positive calibration samples");
  double a = std::max(1e-6, -rate_margin * ls_slope(x, y));
  double c = 0.0;
  for (const auto& s : cal) c = std::max(c, s.value * std::pow(s.t, p) * std::exp(a * s.r * s.r / (s.t * s.t)));
  return gaussian_envelope(c * margin, a, p);
}

// C_b such that the envelope equals the measured value at a calibration point.
inline DecayEnvelope calibrate_polynomial_envelope(double b, double ktilde, double r0, double t0, double value) {
  DecayEnvelope e = polynomial_envelope(1.0, b, ktilde);
  e.C = value / e(r0, t0);
  return e;
}

struct EnvelopeReport {
  std::vector<EnvelopeSample> samples;
  std::vector<double> bound;
  std::vector<bool> pass;
  double max_violation_ratio = 0.0;  // max value/bound
  bool all_pass = true;
};

inline EnvelopeReport check_envelope(const std::vector<EnvelopeSample>& grid, const DecayEnvelope& env) {
  EnvelopeReport rep;
  rep.samples = grid;
  for (const auto& s : grid) {
    double b = env(s.r, s.t);
    bool ok = s.value <= b;
    rep.bound.push_back(b);
    rep.pass.push_back(ok);
    rep.all_pass = rep.all_pass && ok;
    rep.max_violation_ratio = std::max(rep.max_violation_ratio, b > 0 ? s.value / b : kInf);
  }
  return rep;
}

// Samples offdiagonal row masses over a (site, r, t) grid.
inline std::vector<EnvelopeSample> sample_offdiagonal_mass(const KernelFamily& k, const std::vector<std::size_t>& sites,
                                                           const std::vector<double>& radii,
                                                           const std::vector<double>& ts) {
  std::vector<EnvelopeSample> out;
  for (double t : ts) {
    KernelAt kt = k.at(t);
    for (auto m : sites) {
      auto prof = offdiagonal_mass_profile(kt, m, radii);
      for (std::size_t i = 0; i < radii.size(); ++i) out.push_back({m, radii[i], t, prof[i]});
    }
  }
  return out;
}

inline bool envelope_decreasing_in_r(const DecayEnvelope& env, double t, const std::vector<double>& radii) {
  for (std::size_t i = 1; i < radii.size(); ++i)
    if (env(radii[i], t) > env(radii[i - 1], t)) return false;
  return true;
}

// t -> t^{-a} env(r, t) non-decreasing along increasing ts
inline bool envelope_weighted_nondecreasing(const DecayEnvelope& env, double r, double a, const std::vector<double>& ts) {
  for (std::size_t i = 1; i < ts.size(); ++i)
    if (std::pow(ts[i], -a) * env(r, ts[i]) < std::pow(ts[i - 1], -a) * env(r, ts[i - 1]) * (1.0 - 1e-12)) return false;
  return true;
}

// Multiplication operator by psi(x) (x) I on sections.
inline CMat multiplication_operator(const LatticeModel& m, int fiber, const std::function<double(std::size_t)>& psi) {
  const Eigen::Index n = static_cast<Eigen::Index>(m.size()) * fiber;
  CMat out = CMat::Zero(n, n);
  for (std::size_t s = 0; s < m.size(); ++s)
    for (int a = 0; a < fiber; ++a) out(s * fiber + a, s * fiber + a) = psi(s);
  return out;
}

}  // namespace locidx
