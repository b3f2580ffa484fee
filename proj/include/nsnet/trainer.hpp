#pragma once

// Detection head training on null-space-projected features.
//
// The head is a linear adapter A (h x d) followed by a single-logit linear
// classifier. For a batch of decoupled features x_i:
//   z_i = A x_i,  f_i = z_i / |z_i|,  logit_i = w . z_i + b
//   L = (1 - lambda) * L_contrastive(f) + lambda * L_bce(logit)
// and all parameters are updated with bias-corrected Adam.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "nsnet/dataset.hpp"
#include "nsnet/feature_matrix.hpp"
#include "nsnet/linalg.hpp"

namespace nsnet {

enum class AdapterInit { uniform_noise, identity };

struct TrainConfig {
  double lambda = 0.2;
  double tau = 0.07;
  double learning_rate = 2e-4;
  std::size_t batch_size = 32;
  std::size_t epochs = 2;
  std::uint64_t seed = 0;
  std::size_t adapter_width = 256;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// L2-normalise adapter outputs before the contrastive term.
  bool normalize = true;
  AdapterInit adapter_init = AdapterInit::uniform_noise;
  /// Half-width of the uniform adapter initialisation. The classifier starts at zero.
  double init_scale = 1e-2;
  bool freeze_adapter = false;

  void validate() const;
  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Adapter and classifier parameters packed into one vector:
/// [adapter (h x d, row-major) | classifier_w (h) | classifier_b].
struct DetectionHead {
  std::size_t dim = 0;
  std::size_t width = 0;
  std::vector<double> params;
  TrainConfig config;

  DetectionHead() = default;
  DetectionHead(std::size_t d, std::size_t h);

  static std::size_t parameter_count(std::size_t d, std::size_t h) { return h * d + h + 1; }

  std::span<double> adapter() { return {params.data(), width * dim}; }
  std::span<const double> adapter() const { return {params.data(), width * dim}; }
  std::span<double> classifier_w() { return {params.data() + width * dim, width}; }
  std::span<const double> classifier_w() const { return {params.data() + width * dim, width}; }
  double& classifier_b() { return params.back(); }
  double classifier_b() const { return params.back(); }

  /// z = x A^T for a batch of decoupled features (rows).
  FeatureMatrix adapt(const FeatureMatrix& decoupled) const;
  /// Raw classifier logits w . z + b for adapted features.
  std::vector<double> logits(const FeatureMatrix& adapted) const;

  friend bool operator==(const DetectionHead&, const DetectionHead&) = default;
};

struct ContrastiveResult {
  double loss = 0.0;
  /// dL/dF, same shape as the input features.
  FeatureMatrix grad{0, 1};
};

/// Supervised contrastive loss over a batch of (already normalised) features.
/// Anchors without a same-label partner are skipped; an all-skipped batch
/// returns zero loss and gradient.
ContrastiveResult contrastive_loss(const FeatureMatrix& features,
                                   std::span<const std::uint8_t> labels, double tau);

struct BceResult {
  double loss = 0.0;
  std::vector<double> grad;
};

/// Mean binary cross-entropy on logits, in the log-sum-exp form.
BceResult bce_loss(std::span<const double> logits, std::span<const std::uint8_t> labels);

/// (1 - lambda) * contrastive + lambda * bce.
double combined_loss(double contrastive, double bce, double lambda);

struct AdamHyper {
  double learning_rate = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;

  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected Adam update applied in place.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamHyper& hyper);

struct ObjectiveResult {
  double loss = 0.0;
  double contrastive = 0.0;
  double bce = 0.0;
  /// Gradient in DetectionHead::params layout.
  std::vector<double> grad;
};

/// Combined objective and its gradient for one batch of decoupled features.
ObjectiveResult head_objective(const DetectionHead& head, const FeatureMatrix& decoupled,
                               std::span<const std::uint8_t> labels, const TrainConfig& cfg);

DetectionHead init_head(std::size_t dim, const TrainConfig& cfg);

/// Full training run; deterministic for a given config (including seed).
DetectionHead train(const EmbeddingSet& set, const SemanticNullSpace& ns, const TrainConfig& cfg);

// NSHD file: "NSHD", u16 version, u32 d, u32 h, adapter h*d f32, classifier_w
// h f32, classifier_b f32, u32 length + UTF-8 JSON of the TrainConfig.
inline constexpr std::uint16_t kHeadFormatVersion = 1;

std::size_t write_head(const DetectionHead& head, std::ostream& out);
DetectionHead read_head(std::istream& in);

}  // namespace nsnet
