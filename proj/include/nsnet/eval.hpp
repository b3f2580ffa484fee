#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nsnet/dataset.hpp"
#include "nsnet/linalg.hpp"
#include "nsnet/trainer.hpp"

namespace nsnet {

/// sigmoid(w . (A (P x)) + b) for each record, in record order.
std::vector<double> predict(const DetectionHead& head, const SemanticNullSpace& ns,
                            const EmbeddingSet& set);

/// Adapter outputs A (P x), one row per record.
FeatureMatrix adapter_features(const DetectionHead& head, const SemanticNullSpace& ns,
                               const EmbeddingSet& set);

struct EvalReport {
  double threshold = 0.5;
  /// Absent when the set has no real records.
  std::optional<double> real_acc;
  std::map<std::string, double> per_source_fake_acc;
  /// Unweighted mean of real_acc and every per-source fake accuracy.
  double mean_acc = 0.0;
  /// Absent when the set has no fake records.
  std::optional<double> ap;
  /// Records per source tag, both labels.
  std::map<std::string, std::size_t> counts;
};

/// A score >= threshold is a fake prediction.
EvalReport accuracy_report(std::span<const double> scores, std::span<const std::uint8_t> labels,
                           std::span<const std::string> sources, double threshold);

EvalReport evaluate(const DetectionHead& head, const SemanticNullSpace& ns,
                    const EmbeddingSet& set, double threshold);

/// Mean over positives (descending score, ties kept in input order) of the
/// precision at that positive's rank. Throws InputError without positives.
double average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// JSON object, numbers printed with 6 decimals.
std::string report_to_json(const EvalReport& report);

/// `id,label,source,f_1..f_h` rows of adapter outputs.
void write_feature_csv(const EmbeddingSet& set, const FeatureMatrix& features, std::ostream& out);

}  // namespace nsnet
