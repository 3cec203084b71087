#include "fmd/gp.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <random>

#include "fmd/error.hpp"

namespace fmd {

Encoder::Encoder(const Catalog& catalog) {
  int i = 0;
  for (const auto& id : catalog.ids()) index_[id] = i++;
}

Eigen::VectorXd Encoder::encode(const ConceptSet& set) const {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(dim());
  for (const auto& id : set) {
    auto it = index_.find(id);
    if (it == index_.end()) throw CatalogError("unknown concept: " + id);
    x[it->second] = 1.0;
  }
  return x;
}

Eigen::MatrixXd Encoder::encode_rows(const std::vector<ConceptSet>& sets) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(sets.size()), dim());
  for (std::size_t i = 0; i < sets.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = encode(sets[i]).transpose();
  return out;
}

Eigen::VectorXd encode(const ConceptSet& set, const Catalog& catalog) { return Encoder(catalog).encode(set); }

std::string to_string(KernelFamily f) { return f == KernelFamily::DotProductWhite ? "dotproduct" : "rbf"; }

KernelFamily kernel_family_from_string(const std::string& s) {
  if (s == "dotproduct" || s == "dot" || s == "DotProduct+White") return KernelFamily::DotProductWhite;
  if (s == "rbf" || s == "RBF+White") return KernelFamily::RbfWhite;
  throw ConfigError("unknown kernel: " + s);
}

Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.cols() != b.cols()) throw GpError("dimension mismatch");
  Eigen::MatrixXd k = a * b.transpose();
  if (spec.family == KernelFamily::RbfWhite) {
    const Eigen::VectorXd na = a.rowwise().squaredNorm();
    const Eigen::VectorXd nb = b.rowwise().squaredNorm();
    const double inv = 1.0 / (2.0 * spec.rbf_lengthscale * spec.rbf_lengthscale);
    for (Eigen::Index i = 0; i < k.rows(); ++i) {
      for (Eigen::Index j = 0; j < k.cols(); ++j) {
        const double d2 = std::max(0.0, na[i] + nb[j] - 2.0 * k(i, j));
        k(i, j) = std::exp(-d2 * inv);
      }
    }
  }
  return k;
}

Cholesky cholesky_with_jitter(const Eigen::MatrixXd& a) {
  const Eigen::Index n = a.rows();
  double jitter = 0.0;
  while (true) {
    Eigen::LLT<Eigen::MatrixXd> llt(a + jitter * Eigen::MatrixXd::Identity(n, n));
    if (llt.info() == Eigen::Success) return {llt.matrixL(), jitter};
    jitter = jitter == 0.0 ? 1e-10 : jitter * 10.0;
    if (jitter > 1e-4 * 1.0000001) throw GpError("factorization failed after maximum jitter");
  }
}

GpModel GpModel::fit(Eigen::MatrixXd x, Eigen::VectorXd y, KernelSpec spec) {
  if (x.rows() != y.size()) throw GpError("design rows and targets differ in length");
  if (x.rows() < 1) throw GpError("fit needs at least one observation");
  if (!(spec.noise_variance > 0.0)) throw GpError("factorization failed: noise variance must be positive");
  GpModel m;
  m.dim_ = static_cast<int>(x.cols());
  m.spec_ = spec;
  Eigen::MatrixXd k = kernel_matrix(spec, x, x);
  k.diagonal().array() += spec.noise_variance;
  m.chol_ = cholesky_with_jitter(k);
  const Eigen::MatrixXd& l = m.chol_.lower;
  m.alpha_ = l.triangularView<Eigen::Lower>().transpose().solve(l.triangularView<Eigen::Lower>().solve(y));
  m.x_ = std::move(x);
  m.y_ = std::move(y);
  return m;
}

GpModel GpModel::prior(int dim, KernelSpec spec) {
  GpModel m;
  m.dim_ = dim;
  m.spec_ = spec;
  m.x_ = Eigen::MatrixXd(0, dim);
  m.y_ = Eigen::VectorXd(0);
  m.alpha_ = Eigen::VectorXd(0);
  return m;
}

Posterior GpModel::posterior(const Eigen::MatrixXd& xstar) const {
  if (xstar.cols() != dim_) throw GpError("dimension mismatch");
  Posterior p;
  p.cov = kernel_matrix(spec_, xstar, xstar);
  if (n() == 0) {
    p.mean = Eigen::VectorXd::Zero(xstar.rows());
  } else {
    const Eigen::MatrixXd ks = kernel_matrix(spec_, x_, xstar);
    p.mean = ks.transpose() * alpha_;
    const Eigen::MatrixXd v = chol_.lower.triangularView<Eigen::Lower>().solve(ks);
    p.cov.noalias() -= v.transpose() * v;
  }
  p.cov = 0.5 * (p.cov + p.cov.transpose());
  p.cov.diagonal() = p.cov.diagonal().cwiseMax(0.0);
  return p;
}

Eigen::VectorXd GpModel::sample_posterior(const Eigen::MatrixXd& xstar, Rng& rng) const {
  Posterior p = posterior(xstar);
  if (p.cov.isZero(0.0)) return p.mean;
  const Cholesky c = cholesky_with_jitter(p.cov);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(xstar.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
  return p.mean + c.lower * z;
}

double GpModel::log_marginal_likelihood() const {
  if (n() == 0) return 0.0;
  const double fit_term = -0.5 * y_.dot(alpha_);
  const double det_term = -chol_.lower.diagonal().array().log().sum();
  return fit_term + det_term - 0.5 * static_cast<double>(n()) * std::log(2.0 * std::numbers::pi);
}

GpModel fit_with_noise_grid(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, KernelSpec spec,
                            const std::vector<double>& grid) {
  if (grid.empty()) throw ConfigError("empty noise grid");
  std::optional<GpModel> best;
  double best_lml = -std::numeric_limits<double>::infinity();
  for (double s2 : grid) {
    spec.noise_variance = s2;
    GpModel m = GpModel::fit(x, y, spec);
    const double lml = m.log_marginal_likelihood();
    if (!best || lml > best_lml) {
      best_lml = lml;
      best = std::move(m);
    }
  }
  return *best;
}

}  // namespace fmd
