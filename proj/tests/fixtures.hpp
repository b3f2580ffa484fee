#pragma once

// Synthetic data shared by the unit, CLI and acceptance suites.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/QR>

#include "nsnet/dataset.hpp"
#include "nsnet/feature_matrix.hpp"
#include "nsnet/random.hpp"

namespace nsnet::fixture {

inline FeatureMatrix gaussian_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  FeatureMatrix m(rows, cols);
  for (double& v : m.data()) v = scale * rng.normal();
  return m;
}

/// d x k matrix with orthonormal columns (Householder QR of a Gaussian matrix).
inline Eigen::MatrixXd random_orthonormal(std::size_t d, std::size_t k, Rng& rng) {
  Eigen::MatrixXd g(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  const Eigen::MatrixXd q = qr.householderQ();
  return q.leftCols(static_cast<Eigen::Index>(k));
}

inline std::vector<float> to_float(const Eigen::VectorXd& v) {
  std::vector<float> out(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = static_cast<float>(v(i));
  return out;
}

struct SeparableParams {
  std::size_t samples = 512;
  std::size_t dim = 16;
  std::size_t semantic_rank = 4;
  double sigma = 1.0;
  /// Gap between the two classes along the artifact direction, in sigmas.
  double margin = 4.0;
  double semantic_scale = 3.0;
  std::uint64_t seed = 7;
};

/// Two Gaussian clusters separated along one hidden direction by a hard gap
/// of `margin * sigma`: the artifact coordinate is +-(margin/2 + |g|) sigma.
/// Every record also carries a semantic component drawn in a separate
/// `semantic_rank`-dim subspace; its text vector is that component alone.
/// Fake records alternate between two source tags.
inline EmbeddingSet separable_set(const SeparableParams& params) {
  Rng rng(params.seed);
  const Eigen::MatrixXd q = random_orthonormal(params.dim, params.dim, rng);
  const Eigen::VectorXd artifact = q.col(0);
  const auto d = static_cast<Eigen::Index>(params.dim);
  const auto r = static_cast<Eigen::Index>(params.semantic_rank);

  EmbeddingSet set;
  set.dim = params.dim;
  for (std::size_t i = 0; i < params.samples; ++i) {
    const std::uint8_t label = i % 2;
    Eigen::VectorXd semantic = Eigen::VectorXd::Zero(d);
    for (Eigen::Index k = 1; k <= r; ++k) semantic += params.semantic_scale * params.sigma * rng.normal() * q.col(k);
    Eigen::VectorXd noise = Eigen::VectorXd::Zero(d);
    for (Eigen::Index k = r + 1; k < d; ++k) noise += params.sigma * rng.normal() * q.col(k);
    const double offset = (params.margin / 2.0 + std::abs(rng.normal())) * params.sigma;
    const Eigen::VectorXd visual = semantic + noise + (label ? offset : -offset) * artifact;

    EmbeddingRecord rec;
    rec.id = "s" + std::to_string(i);
    rec.label = label;
    rec.source = label == 0 ? "real" : ((i / 2) % 2 == 0 ? "gen_a" : "gen_b");
    rec.visual = to_float(visual);
    rec.text = to_float(semantic);
    set.records.push_back(std::move(rec));
  }
  return set;
}

inline EmbeddingSet random_set(std::size_t count, std::size_t dim, Rng& rng, bool with_text) {
  EmbeddingSet set;
  set.dim = dim;
  for (std::size_t i = 0; i < count; ++i) {
    EmbeddingRecord rec;
    rec.id = "rec-" + std::to_string(i) + "-" + std::to_string(rng.below(1000));
    rec.label = static_cast<std::uint8_t>(rng.below(2));
    rec.source = rng.below(2) ? "progan" : "sdv1.4";
    rec.visual.resize(dim);
    for (float& v : rec.visual) v = static_cast<float>(rng.normal());
    if (with_text && rng.below(3) != 0) {
      rec.text.emplace(dim);
      for (float& v : *rec.text) v = static_cast<float>(rng.uniform(-2.0, 2.0));
    }
    set.records.push_back(std::move(rec));
  }
  return set;
}

}  // namespace nsnet::fixture
