#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fmd/catalog.hpp"
#include "fmd/concept_set.hpp"
#include "fmd/rng.hpp"

namespace fmd {

/// Multi-hot encoding in canonical concept order.
class Encoder {
 public:
  explicit Encoder(const Catalog& catalog);
  int dim() const { return static_cast<int>(index_.size()); }
  Eigen::VectorXd encode(const ConceptSet& set) const;
  Eigen::MatrixXd encode_rows(const std::vector<ConceptSet>& sets) const;

 private:
  std::map<std::string, int> index_;
};

Eigen::VectorXd encode(const ConceptSet& set, const Catalog& catalog);

enum class KernelFamily { DotProductWhite, RbfWhite };

std::string to_string(KernelFamily f);
KernelFamily kernel_family_from_string(const std::string& s);

struct KernelSpec {
  KernelFamily family = KernelFamily::DotProductWhite;
  double noise_variance = 0.05;
  double rbf_lengthscale = 1.0;
};

/// Latent kernel k(A_i, B_j) without the white-noise term.
Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

struct Cholesky {
  Eigen::MatrixXd lower;
  double jitter = 0.0;
};

/// Plain LLT first, then diagonal jitter 1e-10, 1e-9, ... 1e-4. Throws GpError past that.
Cholesky cholesky_with_jitter(const Eigen::MatrixXd& a);

struct Posterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

class GpModel {
 public:
  /// Zero-mean GP conditioned on (X, y). noise_variance must be positive.
  static GpModel fit(Eigen::MatrixXd x, Eigen::VectorXd y, KernelSpec spec);
  /// Unconditioned model over d inputs.
  static GpModel prior(int dim, KernelSpec spec);

  int n() const { return static_cast<int>(y_.size()); }
  int dim() const { return dim_; }
  const KernelSpec& kernel() const { return spec_; }
  double jitter() const { return chol_.jitter; }

  /// Symmetric covariance with its diagonal clamped at zero.
  Posterior posterior(const Eigen::MatrixXd& xstar) const;
  /// One joint draw mean + L z. A covariance that is exactly zero returns the mean.
  Eigen::VectorXd sample_posterior(const Eigen::MatrixXd& xstar, Rng& rng) const;
  double log_marginal_likelihood() const;

 private:
  GpModel() = default;
  int dim_ = 0;
  KernelSpec spec_;
  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
  Cholesky chol_;
  Eigen::VectorXd alpha_;
};

/// Refits over each noise level and keeps the highest log marginal likelihood.
GpModel fit_with_noise_grid(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, KernelSpec spec,
                            const std::vector<double>& grid = {0.01, 0.05, 0.1});

}  // namespace fmd
