#ifndef PTTRUST_TESTS_SAE_FIXTURES_HPP_
#define PTTRUST_TESTS_SAE_FIXTURES_HPP_

// Shared synthetic data for SAE tests and the acceptance suite.

#include <vector>

#include <Eigen/Dense>

#include "pttrust/rng.hpp"
#include "pttrust/sae.hpp"

namespace pttrust::testing {

inline SaeModel random_sae(int d, int m, int k, Rng& rng) {
  SaeModel model;
  model.w_enc.resize(m, d);
  model.w_dec.resize(d, m);
  model.b_pre.resize(d);
  model.b_enc.resize(m);
  for (Eigen::Index i = 0; i < model.w_enc.size(); ++i) model.w_enc.data()[i] = rng.normal() * 0.5;
  for (Eigen::Index i = 0; i < model.w_dec.size(); ++i) model.w_dec.data()[i] = rng.normal() * 0.5;
  for (Eigen::Index i = 0; i < d; ++i) model.b_pre[i] = rng.normal() * 0.1;
  for (Eigen::Index i = 0; i < m; ++i) model.b_enc[i] = rng.normal() * 0.1;
  model.k = k;
  return model;
}

inline Eigen::VectorXd random_vector(int n, Rng& rng, double scale = 1.0) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.normal() * scale;
  return v;
}

/// Samples lying exactly in a random k-dimensional subspace of R^d.
inline std::vector<Eigen::VectorXd> subspace_samples(int d, int k, int n, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd basis(d, k);
  for (Eigen::Index i = 0; i < basis.size(); ++i) basis.data()[i] = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(basis);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, k);
  std::vector<Eigen::VectorXd> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(q * random_vector(k, rng));
  return out;
}

}  // namespace pttrust::testing

#endif  // PTTRUST_TESTS_SAE_FIXTURES_HPP_
