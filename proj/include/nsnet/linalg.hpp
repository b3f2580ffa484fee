#pragma once

// Semantic null-space construction and projection.
//
// Given a corpus V of text embeddings (one per row), the right singular
// directions whose singular value exceeds threshold * sigma_max are treated
// as semantic. The remaining directions form an orthonormal basis N of the
// (thresholded) null-space, and P = N N^T removes the semantic component of
// any visual feature: project(U) = U P.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "nsnet/feature_matrix.hpp"

namespace nsnet {

inline constexpr double kDefaultNullspaceThreshold = 0.05;

struct NullSpaceBasis {
  std::size_t dim = 0;
  /// Number of retained (semantic) singular directions.
  std::size_t rank_kept = 0;
  double threshold = 0.0;
  std::size_t source_count = 0;
  /// dim x (dim - rank_kept), orthonormal columns.
  Eigen::MatrixXd columns;
};

struct SemanticNullSpace {
  std::size_t dim = 0;
  /// dim x dim projection matrix P.
  FeatureMatrix matrix{0, 1};
  double threshold = 0.0;
  std::size_t rank_kept = 0;
  std::size_t source_count = 0;
};

/// Null-space basis of `corpus` under the relative singular-value cutoff
/// `threshold` in [0, 1). An empty corpus yields the identity basis.
NullSpaceBasis nullspace_basis(const FeatureMatrix& corpus, double threshold);

/// P = N N^T. Rejects a basis whose Gram matrix is more than 1e-4 (Frobenius)
/// away from the identity.
SemanticNullSpace projection_matrix(const NullSpaceBasis& basis);

/// Convenience: projection_matrix(nullspace_basis(corpus, threshold)).
SemanticNullSpace build_nullspace(const FeatureMatrix& corpus, double threshold);

/// U P. Pure; usable on its own wherever a detector consumes embeddings.
FeatureMatrix project(const FeatureMatrix& features, const SemanticNullSpace& ns);

/// Single-vector form of project().
std::vector<double> project(std::span<const double> feature, const SemanticNullSpace& ns);

// NSPJ file: "NSPJ", u16 version, u32 dim, u32 rank_kept, f64 threshold,
// dim*dim f32 row-major, all little-endian.
inline constexpr std::uint16_t kProjectionFormatVersion = 1;

std::size_t write_projection(const SemanticNullSpace& ns, std::ostream& out);
SemanticNullSpace read_projection(std::istream& in);

}  // namespace nsnet
