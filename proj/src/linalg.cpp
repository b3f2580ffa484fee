#include "nsnet/linalg.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <string>

#include <Eigen/SVD>

#include "nsnet/binary_io.hpp"
#include "nsnet/error.hpp"
#include "nsnet/kernels.hpp"

namespace nsnet {

NullSpaceBasis nullspace_basis(const FeatureMatrix& corpus, double threshold) {
  if (!(threshold >= 0.0 && threshold < 1.0)) {
    throw InputError("null-space threshold must lie in [0, 1), got " + std::to_string(threshold));
  }
  corpus.require_finite("text feature matrix");

  const auto d = static_cast<Eigen::Index>(corpus.cols());
  NullSpaceBasis basis;
  basis.dim = corpus.cols();
  basis.threshold = threshold;
  basis.source_count = corpus.rows();

  if (corpus.rows() == 0) {
    basis.columns = Eigen::MatrixXd::Identity(d, d);
    return basis;
  }

  // Full V is needed: when n < d the trailing d - n right singular vectors
  // (exact zeros) belong to the null-space too.
  const Eigen::MatrixXd v = corpus.eigen();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(v, Eigen::ComputeFullV);
  const Eigen::VectorXd& sigma = svd.singularValues();

  const double cutoff = sigma.size() > 0 ? threshold * sigma(0) : 0.0;
  Eigen::Index kept = 0;
  while (kept < sigma.size() && sigma(kept) > cutoff) ++kept;

  basis.rank_kept = static_cast<std::size_t>(kept);
  basis.columns = svd.matrixV().rightCols(d - kept);
  return basis;
}

SemanticNullSpace projection_matrix(const NullSpaceBasis& basis) {
  const auto d = static_cast<Eigen::Index>(basis.dim);
  if (basis.dim == 0) throw InputError("null-space basis has dimension 0");
  if (basis.columns.rows() != d) {
    throw InputError("basis has " + std::to_string(basis.columns.rows()) +
                     " rows, expected dimension " + std::to_string(basis.dim));
  }
  if (basis.rank_kept + static_cast<std::size_t>(basis.columns.cols()) != basis.dim) {
    throw InputError("basis column count plus rank_kept must equal the dimension");
  }
  const Eigen::Index k = basis.columns.cols();
  if (k > 0) {
    const double gram_error =
        (basis.columns.transpose() * basis.columns - Eigen::MatrixXd::Identity(k, k)).norm();
    if (!(gram_error <= 1e-4)) {
      throw InputError("basis columns are not orthonormal (|N^T N - I|_F = " +
                       std::to_string(gram_error) + ")");
    }
  }

  SemanticNullSpace ns;
  ns.dim = basis.dim;
  ns.threshold = basis.threshold;
  ns.rank_kept = basis.rank_kept;
  ns.source_count = basis.source_count;
  ns.matrix = FeatureMatrix(basis.dim, basis.dim);
  if (k > 0) {
    ns.matrix.eigen().noalias() = basis.columns * basis.columns.transpose();
    // Exact symmetry; rounding in the product can differ across the diagonal.
    auto p = ns.matrix.eigen();
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = i + 1; j < d; ++j) p(j, i) = p(i, j);
  }
  return ns;
}

SemanticNullSpace build_nullspace(const FeatureMatrix& corpus, double threshold) {
  return projection_matrix(nullspace_basis(corpus, threshold));
}

FeatureMatrix project(const FeatureMatrix& features, const SemanticNullSpace& ns) {
  if (features.cols() != ns.dim) {
    throw InputError("cannot project " + std::to_string(features.cols()) +
                     "-dim features with a " + std::to_string(ns.dim) + "-dim null-space");
  }
  FeatureMatrix out(features.rows(), features.cols());
  kernels::parallel::matmul(features.data(), ns.matrix.data(), out.data(), features.rows(),
                            ns.dim, ns.dim);
  return out;
}

std::vector<double> project(std::span<const double> feature, const SemanticNullSpace& ns) {
  if (feature.size() != ns.dim) {
    throw InputError("cannot project a " + std::to_string(feature.size()) +
                     "-dim feature with a " + std::to_string(ns.dim) + "-dim null-space");
  }
  std::vector<double> out(ns.dim);
  kernels::serial::matmul(feature, ns.matrix.data(), out, 1, ns.dim, ns.dim);
  return out;
}

std::size_t write_projection(const SemanticNullSpace& ns, std::ostream& out) {
  io::Writer w(out);
  w.magic("NSPJ");
  w.u16(kProjectionFormatVersion);
  w.u32(static_cast<std::uint32_t>(ns.dim));
  w.u32(static_cast<std::uint32_t>(ns.rank_kept));
  w.f64(ns.threshold);
  for (double v : ns.matrix.data()) w.f32(static_cast<float>(v));
  return w.count();
}

SemanticNullSpace read_projection(std::istream& in) {
  io::Reader r(in);
  const auto tag = r.magic();
  if (std::memcmp(tag.data(), "NSPJ", 4) != 0) {
    throw ParseError(ParseErrc::bad_magic, "expected NSPJ projection file");
  }
  const auto version = r.u16("version");
  if (version != kProjectionFormatVersion) {
    throw ParseError(ParseErrc::unknown_version,
                     "NSPJ version " + std::to_string(version) + " is not supported");
  }
  SemanticNullSpace ns;
  ns.dim = r.u32("dim");
  ns.rank_kept = r.u32("rank_kept");
  ns.threshold = r.f64("threshold");
  if (ns.dim == 0) throw ParseError(ParseErrc::invalid_field, "NSPJ dimension is 0");
  if (ns.rank_kept > ns.dim) {
    throw ParseError(ParseErrc::invalid_field, "NSPJ rank_kept exceeds dimension");
  }
  if (!std::isfinite(ns.threshold)) {
    throw ParseError(ParseErrc::non_finite, "NSPJ threshold is not finite");
  }
  std::vector<double> data(ns.dim * ns.dim);
  for (auto& v : data) {
    v = r.f32("projection matrix");
    if (!std::isfinite(v)) throw ParseError(ParseErrc::non_finite, "NSPJ matrix entry");
  }
  ns.matrix = FeatureMatrix(ns.dim, ns.dim, std::move(data));
  return ns;
}

}  // namespace nsnet
