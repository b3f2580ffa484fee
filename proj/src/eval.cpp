#include "nsnet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include <nlohmann/json.hpp>

#include "nsnet/error.hpp"

namespace nsnet {

namespace {

double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string quoted(const std::string& s) { return nlohmann::json(s).dump(); }

}  // namespace

FeatureMatrix adapter_features(const DetectionHead& head, const SemanticNullSpace& ns,
                               const EmbeddingSet& set) {
  if (set.dim != ns.dim || head.dim != ns.dim) {
    throw InputError("dimension mismatch: embeddings " + std::to_string(set.dim) +
                     ", null-space " + std::to_string(ns.dim) + ", head " +
                     std::to_string(head.dim));
  }
  return head.adapt(project(visual_matrix(set), ns));
}

std::vector<double> predict(const DetectionHead& head, const SemanticNullSpace& ns,
                            const EmbeddingSet& set) {
  auto scores = head.logits(adapter_features(head, ns, set));
  for (double& s : scores) s = sigmoid(s);
  return scores;
}

EvalReport accuracy_report(std::span<const double> scores, std::span<const std::uint8_t> labels,
                           std::span<const std::string> sources, double threshold) {
  if (scores.empty()) throw InputError("cannot build a report from an empty score set");
  if (labels.size() != scores.size() || sources.size() != scores.size()) {
    throw InputError("scores, labels and sources differ in length");
  }
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must lie in (0, 1)");

  EvalReport report;
  report.threshold = threshold;
  std::size_t reals = 0;
  std::size_t reals_correct = 0;
  std::map<std::string, std::pair<std::size_t, std::size_t>> fakes;  // correct, total
  for (std::size_t i = 0; i < scores.size(); ++i) {
    ++report.counts[sources[i]];
    const bool flagged = scores[i] >= threshold;
    if (labels[i] == 0) {
      ++reals;
      if (!flagged) ++reals_correct;
    } else {
      auto& [correct, total] = fakes[sources[i]];
      ++total;
      if (flagged) ++correct;
    }
  }

  double sum = 0.0;
  std::size_t terms = 0;
  if (reals > 0) {
    report.real_acc = static_cast<double>(reals_correct) / static_cast<double>(reals);
    sum += *report.real_acc;
    ++terms;
  }
  for (const auto& [source, ct] : fakes) {
    const double acc = static_cast<double>(ct.first) / static_cast<double>(ct.second);
    report.per_source_fake_acc[source] = acc;
    sum += acc;
    ++terms;
  }
  report.mean_acc = sum / static_cast<double>(terms);
  if (!fakes.empty()) report.ap = average_precision(scores, labels);
  return report;
}

EvalReport evaluate(const DetectionHead& head, const SemanticNullSpace& ns,
                    const EmbeddingSet& set, double threshold) {
  const auto scores = predict(head, ns, set);
  const auto labels = labels_of(set);
  std::vector<std::string> sources;
  sources.reserve(set.records.size());
  for (const auto& rec : set.records) sources.push_back(rec.source);
  return accuracy_report(scores, labels, sources, threshold);
}

double average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (labels.size() != scores.size()) throw InputError("scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (labels[order[rank]] == 1) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  }
  if (hits == 0) throw InputError("average precision is undefined without positive labels");
  return sum / static_cast<double>(hits);
}

std::string report_to_json(const EvalReport& report) {
  std::string out = "{\n";
  out += "  \"threshold\": " + fixed6(report.threshold) + ",\n";
  out += "  \"real_acc\": " + (report.real_acc ? fixed6(*report.real_acc) : "null") + ",\n";
  out += "  \"per_source_fake_acc\": {";
  bool first = true;
  for (const auto& [source, acc] : report.per_source_fake_acc) {
    out += first ? "" : ",";
    out += "\n    " + quoted(source) + ": " + fixed6(acc);
    first = false;
  }
  out += first ? "},\n" : "\n  },\n";
  out += "  \"mean_acc\": " + fixed6(report.mean_acc) + ",\n";
  out += "  \"ap\": " + (report.ap ? fixed6(*report.ap) : "null") + ",\n";
  out += "  \"counts\": {";
  first = true;
  for (const auto& [source, count] : report.counts) {
    out += first ? "" : ",";
    out += "\n    " + quoted(source) + ": " + std::to_string(count);
    first = false;
  }
  out += first ? "}\n" : "\n  }\n";
  out += "}\n";
  return out;
}

void write_feature_csv(const EmbeddingSet& set, const FeatureMatrix& features, std::ostream& out) {
  if (features.rows() != set.records.size()) {
    throw InputError("feature rows do not match record count");
  }
  out << "id,label,source";
  for (std::size_t k = 0; k < features.cols(); ++k) out << ",f_" << (k + 1);
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < set.records.size(); ++i) {
    const auto& rec = set.records[i];
    out << csv_field(rec.id) << ',' << static_cast<int>(rec.label) << ',' << csv_field(rec.source);
    for (double v : features.row(i)) {
      std::snprintf(buf, sizeof buf, "%.9g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("feature CSV write failed");
}

}  // namespace nsnet
