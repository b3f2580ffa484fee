#include "nsnet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "nsnet/binary_io.hpp"
#include "nsnet/error.hpp"
#include "nsnet/kernels.hpp"
#include "nsnet/random.hpp"

namespace nsnet {

namespace {

constexpr double kMinNorm = 1e-12;

double log_sum_exp(std::span<const double> values) {
  double hi = -INFINITY;
  for (double v : values) hi = std::max(hi, v);
  if (!std::isfinite(hi)) return hi;
  double s = 0.0;
  for (double v : values) s += std::exp(v - hi);
  return hi + std::log(s);
}

const char* init_name(AdapterInit init) {
  return init == AdapterInit::identity ? "identity" : "uniform_noise";
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must lie in [0, 1]");
  if (!(tau > 0.0)) throw ConfigError("temperature tau must be positive");
  if (!(learning_rate >= 0.0)) throw ConfigError("learning rate must be non-negative");
  if (batch_size < 2) throw ConfigError("batch size must be at least 2");
  if (adapter_width < 1) throw ConfigError("adapter width must be at least 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (!(init_scale >= 0.0) || !std::isfinite(init_scale)) {
    throw ConfigError("init scale must be finite and non-negative");
  }
}

std::string TrainConfig::to_json() const {
  nlohmann::ordered_json j;
  j["lambda"] = lambda;
  j["tau"] = tau;
  j["learning_rate"] = learning_rate;
  j["batch_size"] = batch_size;
  j["epochs"] = epochs;
  j["seed"] = seed;
  j["adapter_width"] = adapter_width;
  j["beta1"] = beta1;
  j["beta2"] = beta2;
  j["epsilon"] = epsilon;
  j["normalize"] = normalize;
  j["adapter_init"] = init_name(adapter_init);
  j["init_scale"] = init_scale;
  j["freeze_adapter"] = freeze_adapter;
  return j.dump();
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    TrainConfig c;
    c.lambda = j.at("lambda").get<double>();
    c.tau = j.at("tau").get<double>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.epochs = j.at("epochs").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.adapter_width = j.at("adapter_width").get<std::size_t>();
    c.beta1 = j.at("beta1").get<double>();
    c.beta2 = j.at("beta2").get<double>();
    c.epsilon = j.at("epsilon").get<double>();
    c.normalize = j.value("normalize", true);
    const auto init = j.value("adapter_init", std::string("uniform_noise"));
    if (init == "identity") {
      c.adapter_init = AdapterInit::identity;
    } else if (init == "uniform_noise") {
      c.adapter_init = AdapterInit::uniform_noise;
    } else {
      throw ParseError(ParseErrc::invalid_field, "unknown adapter_init '" + init + "'");
    }
    c.init_scale = j.value("init_scale", 1e-2);
    c.freeze_adapter = j.value("freeze_adapter", false);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(ParseErrc::invalid_field, std::string("train config JSON: ") + e.what());
  }
}

DetectionHead::DetectionHead(std::size_t d, std::size_t h)
    : dim(d), width(h), params(parameter_count(d, h), 0.0) {}

FeatureMatrix DetectionHead::adapt(const FeatureMatrix& decoupled) const {
  if (decoupled.cols() != dim) {
    throw InputError("head expects " + std::to_string(dim) + "-dim features, got " +
                     std::to_string(decoupled.cols()));
  }
  FeatureMatrix z(decoupled.rows(), width);
  kernels::parallel::matmul_bt(decoupled.data(), adapter(), z.data(), decoupled.rows(), dim, width);
  return z;
}

std::vector<double> DetectionHead::logits(const FeatureMatrix& adapted) const {
  std::vector<double> out(adapted.rows());
  kernels::serial::matmul(adapted.data(), classifier_w(), out, adapted.rows(), width, 1);
  for (double& v : out) v += classifier_b();
  return out;
}

ContrastiveResult contrastive_loss(const FeatureMatrix& features,
                                   std::span<const std::uint8_t> labels, double tau) {
  if (!(tau > 0.0)) throw ConfigError("temperature tau must be positive");
  const std::size_t n = features.rows();
  if (n < 2) throw InputError("contrastive loss needs at least 2 samples");
  if (labels.size() != n) throw InputError("label count does not match batch size");
  const std::size_t h = features.cols();

  FeatureMatrix sim(n, n);
  kernels::serial::matmul_bt(features.data(), features.data(), sim.data(), n, h, n);
  for (double& s : sim.data()) s /= tau;

  // coeff(i, j) = dL / dS_ij, accumulated over anchors.
  FeatureMatrix coeff(n, n);
  std::size_t anchors = 0;
  double total = 0.0;
  std::vector<double> others;
  others.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t positives = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i && labels[j] == labels[i]) ++positives;
    if (positives == 0) continue;
    ++anchors;

    others.clear();
    double pos_sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      others.push_back(sim(i, j));
      if (labels[j] == labels[i]) pos_sum += sim(i, j);
    }
    const double lse = log_sum_exp(others);
    total += lse - pos_sum / static_cast<double>(positives);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double g = std::exp(sim(i, j) - lse);
      if (labels[j] == labels[i]) g -= 1.0 / static_cast<double>(positives);
      coeff(i, j) = g;
    }
  }

  ContrastiveResult result;
  result.grad = FeatureMatrix(n, h);
  if (anchors == 0) return result;

  const double scale = 1.0 / (static_cast<double>(anchors) * tau);
  result.loss = total / static_cast<double>(anchors);
  for (std::size_t i = 0; i < n; ++i) {
    auto gi = result.grad.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      // S_ij touches f_i through f_j and f_j through f_i.
      const double c = (coeff(i, j) + coeff(j, i)) * scale;
      if (c == 0.0) continue;
      const auto fj = features.row(j);
      for (std::size_t k = 0; k < h; ++k) gi[k] += c * fj[k];
    }
  }
  return result;
}

BceResult bce_loss(std::span<const double> logits, std::span<const std::uint8_t> labels) {
  if (logits.empty()) throw InputError("binary cross-entropy needs a non-empty batch");
  if (labels.size() != logits.size()) throw InputError("label count does not match logit count");
  const auto n = static_cast<double>(logits.size());
  BceResult r;
  r.grad.resize(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits[i];
    const double y = labels[i];
    // softplus(z) - y z
    total += std::max(z, 0.0) - y * z + std::log1p(std::exp(-std::abs(z)));
    const double sig = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    r.grad[i] = (sig - y) / n;
  }
  r.loss = total / n;
  return r;
}

double combined_loss(double contrastive, double bce, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must lie in [0, 1]");
  return (1.0 - lambda) * contrastive + lambda * bce;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamHyper& hyper) {
  if (grads.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw InputError("Adam: parameter, gradient and state shapes differ");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correct1 = 1.0 - std::pow(hyper.beta1, t);
  const double correct2 = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * g;
    state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * g * g;
    const double m_hat = state.m[i] / correct1;
    const double v_hat = state.v[i] / correct2;
    params[i] -= hyper.learning_rate * m_hat / (std::sqrt(v_hat) + hyper.epsilon);
  }
}

ObjectiveResult head_objective(const DetectionHead& head, const FeatureMatrix& decoupled,
                               std::span<const std::uint8_t> labels, const TrainConfig& cfg) {
  const std::size_t n = decoupled.rows();
  const std::size_t h = head.width;
  const std::size_t d = head.dim;
  if (labels.size() != n) throw InputError("label count does not match batch size");

  const FeatureMatrix z = head.adapt(decoupled);

  FeatureMatrix f = z;
  std::vector<double> norms(n, 1.0);
  if (cfg.normalize) {
    for (std::size_t i = 0; i < n; ++i) {
      auto row = f.row(i);
      double s = 0.0;
      for (double v : row) s += v * v;
      norms[i] = std::max(std::sqrt(s), kMinNorm);
      for (double& v : row) v /= norms[i];
    }
  }

  const auto con = contrastive_loss(f, labels, cfg.tau);
  const auto logits = head.logits(z);
  const auto bce = bce_loss(logits, labels);

  ObjectiveResult out;
  out.contrastive = con.loss;
  out.bce = bce.loss;
  out.loss = combined_loss(con.loss, bce.loss, cfg.lambda);
  out.grad.assign(head.params.size(), 0.0);

  const auto w = head.classifier_w();
  FeatureMatrix dz(n, h);
  for (std::size_t i = 0; i < n; ++i) {
    auto g = dz.row(i);
    const auto gf = con.grad.row(i);
    if (cfg.normalize) {
      const auto fi = f.row(i);
      double dot = 0.0;
      for (std::size_t k = 0; k < h; ++k) dot += fi[k] * gf[k];
      for (std::size_t k = 0; k < h; ++k) g[k] = (1.0 - cfg.lambda) * (gf[k] - fi[k] * dot) / norms[i];
    } else {
      for (std::size_t k = 0; k < h; ++k) g[k] = (1.0 - cfg.lambda) * gf[k];
    }
    const double dl = cfg.lambda * bce.grad[i];
    for (std::size_t k = 0; k < h; ++k) g[k] += dl * w[k];
  }

  std::span<double> grad(out.grad);
  if (!cfg.freeze_adapter) {
    kernels::parallel::matmul_at(dz.data(), decoupled.data(), grad.first(h * d), n, h, d);
  }
  auto gw = grad.subspan(h * d, h);
  double gb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dl = cfg.lambda * bce.grad[i];
    const auto zi = z.row(i);
    for (std::size_t k = 0; k < h; ++k) gw[k] += dl * zi[k];
    gb += dl;
  }
  grad.back() = gb;
  return out;
}

DetectionHead init_head(std::size_t dim, const TrainConfig& cfg) {
  cfg.validate();
  if (dim == 0) throw InputError("feature dimension must be positive");
  DetectionHead head(dim, cfg.adapter_width);
  head.config = cfg;
  Rng rng(derive_seed(cfg.seed, 0));
  auto a = head.adapter();
  if (cfg.adapter_init == AdapterInit::identity) {
    for (std::size_t k = 0; k < std::min(head.width, dim); ++k) a[k * dim + k] = 1.0;
  } else {
    for (double& v : a) v = rng.uniform(-cfg.init_scale, cfg.init_scale);
  }
  head.classifier_b() = 0.0;
  return head;
}

DetectionHead train(const EmbeddingSet& set, const SemanticNullSpace& ns, const TrainConfig& cfg) {
  cfg.validate();
  if (set.records.size() < 2) throw InputError("training needs at least 2 records");
  if (set.dim != ns.dim) {
    throw InputError("embeddings are " + std::to_string(set.dim) + "-dim but the null-space is " +
                     std::to_string(ns.dim) + "-dim");
  }

  const FeatureMatrix decoupled = project(visual_matrix(set), ns);
  const auto labels = labels_of(set);
  const std::size_t n = set.records.size();
  const std::size_t d = set.dim;

  DetectionHead head = init_head(d, cfg);
  AdamState state(head.params.size());
  const AdamHyper hyper{cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon};
  Rng order_rng(derive_seed(cfg.seed, 1));

  std::vector<std::size_t> order(n);
  std::vector<std::uint8_t> batch_labels;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(std::span<std::size_t>(order), order_rng);
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      const std::size_t b = end - start;
      // A trailing single record has no pair to contrast with.
      if (b < 2) continue;
      FeatureMatrix batch(b, d);
      batch_labels.resize(b);
      for (std::size_t i = 0; i < b; ++i) {
        const auto src = decoupled.row(order[start + i]);
        std::copy(src.begin(), src.end(), batch.row(i).begin());
        batch_labels[i] = labels[order[start + i]];
      }
      const auto obj = head_objective(head, batch, batch_labels, cfg);
      adam_step(head.params, obj.grad, state, hyper);
    }
  }
  return head;
}

std::size_t write_head(const DetectionHead& head, std::ostream& out) {
  if (head.params.size() != DetectionHead::parameter_count(head.dim, head.width)) {
    throw InputError("head parameter vector has the wrong length");
  }
  io::Writer w(out);
  w.magic("NSHD");
  w.u16(kHeadFormatVersion);
  w.u32(static_cast<std::uint32_t>(head.dim));
  w.u32(static_cast<std::uint32_t>(head.width));
  for (double v : head.params) w.f32(static_cast<float>(v));
  const std::string json = head.config.to_json();
  w.u32(static_cast<std::uint32_t>(json.size()));
  w.bytes(json.data(), json.size());
  return w.count();
}

DetectionHead read_head(std::istream& in) {
  io::Reader r(in);
  const auto tag = r.magic();
  if (std::memcmp(tag.data(), "NSHD", 4) != 0) {
    throw ParseError(ParseErrc::bad_magic, "expected NSHD head file");
  }
  const auto version = r.u16("version");
  if (version != kHeadFormatVersion) {
    throw ParseError(ParseErrc::unknown_version,
                     "NSHD version " + std::to_string(version) + " is not supported");
  }
  const std::size_t d = r.u32("dim");
  const std::size_t h = r.u32("width");
  if (d == 0 || h == 0) throw ParseError(ParseErrc::invalid_field, "NSHD dimensions must be positive");
  DetectionHead head(d, h);
  for (double& v : head.params) {
    v = r.f32("head parameters");
    if (!std::isfinite(v)) throw ParseError(ParseErrc::non_finite, "NSHD parameter");
  }
  const auto len = r.u32("config length");
  head.config = TrainConfig::from_json(r.str(len, "config JSON"));
  return head;
}

}  // namespace nsnet
