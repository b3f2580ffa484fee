#include "nsnet/feature_matrix.hpp"

#include <cmath>
#include <string>

#include "nsnet/error.hpp"

namespace nsnet {

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t cols)
    : FeatureMatrix(rows, cols, std::vector<double>(rows * cols, 0.0)) {}

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (cols_ == 0) throw InputError("feature matrix needs at least one column");
  if (data_.size() != rows_ * cols_) {
    throw InputError("feature matrix data has " + std::to_string(data_.size()) +
                     " entries, expected " + std::to_string(rows_ * cols_));
  }
}

FeatureMatrix FeatureMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw InputError("from_rows needs at least one row to fix the width");
  const std::size_t cols = rows.front().size();
  std::vector<double> data;
  data.reserve(rows.size() * cols);
  for (const auto& r : rows) {
    if (r.size() != cols) throw InputError("ragged rows in feature matrix");
    data.insert(data.end(), r.begin(), r.end());
  }
  return {rows.size(), cols, std::move(data)};
}

FeatureMatrix FeatureMatrix::from_eigen(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  FeatureMatrix out(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  out.eigen() = m;
  return out;
}

bool FeatureMatrix::all_finite() const noexcept {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

void FeatureMatrix::require_finite(const char* what) const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw InputError(std::string(what) + " has a non-finite entry at row " +
                       std::to_string(i / cols_) + ", column " + std::to_string(i % cols_));
    }
  }
}

double FeatureMatrix::frobenius_norm() const noexcept {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return std::sqrt(s);
}

}  // namespace nsnet
