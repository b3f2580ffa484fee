// One line per acceptance criterion; exit status is non-zero if any fails.
#include <Eigen/SVD>

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>

#include <unistd.h>

#include "fixtures.hpp"
#include "mechanism.hpp"
#include "nsnet/cli.hpp"
#include "nsnet/eval.hpp"
#include "nsnet/patchsel.hpp"
#include "nsnet/trainer.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace nsnet;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

using MatrixXd = Eigen::MatrixXd;

Outcome projector_suite() {
  Outcome o;
  Rng rng(101);
  std::size_t corpora = 0;
  double worst_sym = 0, worst_idem = 0, worst_trace = 0, worst_ann = 0;
  for (std::size_t d : {4u, 16u, 64u, 768u}) {
    for (double theta : {1e-6, 0.05, 0.2}) {
      const int reps = d == 768 ? 4 : 10;
      for (int rep = 0; rep < reps; ++rep) {
        const std::size_t n = 1 + rng.below(2 * d);
        // Low-rank corpora with a decaying spectrum exercise the cutoff.
        const std::size_t r = 1 + rng.below(std::min(n, d));
        const auto left = fixture::gaussian_matrix(n, r, rng);
        auto right = fixture::gaussian_matrix(r, d, rng);
        for (std::size_t k = 0; k < r; ++k)
          for (double& v : right.row(k)) v *= std::pow(0.7, static_cast<double>(k));
        const FeatureMatrix corpus = FeatureMatrix::from_eigen(left.eigen() * right.eigen());
        const auto ns = build_nullspace(corpus, theta);
        const MatrixXd p = ns.matrix.eigen();
        const double dd = static_cast<double>(d);

        const double sym = (p - p.transpose()).norm();
        const double idem = (p * p - p).norm();
        const double trace = std::abs(p.trace() - static_cast<double>(d - ns.rank_kept));

        const MatrixXd c = corpus.eigen();
        Eigen::JacobiSVD<MatrixXd> svd(c, Eigen::ComputeThinV);
        const auto& sv = svd.singularValues();
        Eigen::Index kept = 0;
        while (kept < sv.size() && sv(kept) > theta * sv(0)) ++kept;
        const MatrixXd vr = svd.matrixV().leftCols(kept).transpose();
        const double ann = kept ? (vr * p).norm() / vr.norm() : 0.0;

        worst_sym = std::max(worst_sym, sym / dd);
        worst_idem = std::max(worst_idem, idem / dd);
        worst_trace = std::max(worst_trace, trace);
        worst_ann = std::max(worst_ann, ann);
        o.require(sym <= 1e-6 * dd, "symmetry d=" + std::to_string(d));
        o.require(idem <= 1e-5 * dd, "idempotence d=" + std::to_string(d));
        o.require(trace <= 1e-4, "trace d=" + std::to_string(d));
        o.require(static_cast<std::size_t>(kept) == ns.rank_kept, "rank disagreement d=" + std::to_string(d));
        o.require(ann <= 1e-6, "annihilation d=" + std::to_string(d));
        ++corpora;
      }
    }
  }
  o.require(corpora >= 100, "too few corpora");
  char buf[200];
  std::snprintf(buf, sizeof buf, "%zu corpora; max sym/d %.1e, idem/d %.1e, trace %.1e, annihilation %.1e",
                corpora, worst_sym, worst_idem, worst_trace, worst_ann);
  if (o.pass) o.detail = buf;
  return o;
}

std::vector<std::uint8_t> block(const RasterImage& img, int bx, int by, int n) {
  std::vector<std::uint8_t> out;
  out.reserve(static_cast<std::size_t>(n * n * 3));
  for (int y = by * n; y < (by + 1) * n; ++y)
    for (int x = bx * n; x < (bx + 1) * n; ++x)
      for (int c = 0; c < 3; ++c) out.push_back(img.at(x, y, c));
  return out;
}

RasterImage test_image(Rng& rng) {
  RasterImage img{224, 224, std::vector<std::uint8_t>(224 * 224 * 3)};
  // Noise of varying amplitude per block gives a wide entropy spread.
  for (int by = 0; by < 7; ++by) {
    for (int bx = 0; bx < 7; ++bx) {
      const auto amp = 1 + rng.below(255);
      const auto base = rng.below(256 - amp + 1);
      for (int y = by * 32; y < (by + 1) * 32; ++y)
        for (int x = bx * 32; x < (bx + 1) * 32; ++x)
          for (int c = 0; c < 3; ++c)
            img.data[static_cast<std::size_t>((y * 224 + x) * 3 + c)] =
                static_cast<std::uint8_t>(base + rng.below(amp));
    }
  }
  return img;
}

Outcome patch_suite(double& selection_seconds) {
  Outcome o;
  // Entropy fixtures.
  const std::vector<std::uint8_t> flat(32 * 32 * 3, 77);
  o.require(std::abs(spectral_entropy(std::span<const std::uint8_t>(flat), 32)) <= 1e-9, "constant patch");
  std::vector<double> wave(32 * 32 * 3);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      for (int c = 0; c < 3; ++c) wave[static_cast<std::size_t>((y * 32 + x) * 3 + c)] = std::cos(2 * std::numbers::pi * 3 * x / 32.0);
  const double two_bin = spectral_entropy(std::span<const double>(wave), 32);
  o.require(std::abs(two_bin - std::log(2.0)) <= 1e-9, "two-bin cosine");

  Rng rng(202);
  const SelectionConfig cfg{32, 224, 9};
  selection_seconds = 0;
  for (std::size_t k = 0; k < 100; ++k) {
    const auto img = test_image(rng);
    const auto t0 = std::chrono::steady_clock::now();
    const auto result = select_and_reassemble(img, cfg);
    selection_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    o.require(result.image.width == 224 && result.image.height == 224, "output size");
    std::vector<std::size_t> order(result.scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return result.scores[a].entropy > result.scores[b].entropy; });
    std::vector<std::size_t> expected;
    for (std::size_t i = 0; i < order.size(); ++i)
      if (i < 25 || i + 24 >= order.size()) expected.push_back(order[i]);
    std::sort(expected.begin(), expected.end());

    std::vector<std::size_t> found;
    for (int oy = 0; oy < 7; ++oy) {
      for (int ox = 0; ox < 7; ++ox) {
        const auto out_block = block(result.image, ox, oy, 32);
        std::size_t match = 49;
        for (int iy = 0; iy < 7 && match == 49; ++iy)
          for (int ix = 0; ix < 7 && match == 49; ++ix)
            if (block(img, ix, iy, 32) == out_block) match = static_cast<std::size_t>(iy * 7 + ix);
        found.push_back(match);
      }
    }
    std::sort(found.begin(), found.end());
    o.require(found == expected, "multiset mismatch on image " + std::to_string(k));
    if (k < 10) o.require(select_and_reassemble(img, cfg).image.data == result.image.data, "non-deterministic");
  }
  o.require(selection_seconds < 5.0, "selection slower than 5 s");
  char buf[160];
  std::snprintf(buf, sizeof buf, "100 images, selection %.3f s; two-bin entropy error %.1e", selection_seconds,
                std::abs(two_bin - std::log(2.0)));
  if (o.pass) o.detail = buf;
  return o;
}

double rel_error(std::span<const double> a, std::span<const double> b) {
  double num = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(std::max(na, nb)), 1e-8);
}

std::vector<double> central_difference(std::span<double> x, const std::function<double()>& f) {
  const double h = 1e-5;
  std::vector<double> g(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double keep = x[k];
    x[k] = keep + h;
    const double up = f();
    x[k] = keep - h;
    const double down = f();
    x[k] = keep;
    g[k] = (up - down) / (2 * h);
  }
  return g;
}

Outcome gradient_suite() {
  Outcome o;
  Rng rng(303);
  double worst = 0.0;
  int instances = 0;
  for (int trial = 0; trial < 25; ++trial, ++instances) {
    const std::size_t n = 2 + rng.below(7), h = 1 + rng.below(5), d = 1 + rng.below(6);
    std::vector<std::uint8_t> y(n);
    for (auto& v : y) v = static_cast<std::uint8_t>(rng.below(2));
    y[0] = y[1];

    FeatureMatrix f(n, h);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0;
      for (double& v : f.row(i)) s += (v = rng.normal()) * v;
      for (double& v : f.row(i)) v /= std::sqrt(s);
    }
    const double tau = rng.uniform(0.1, 1.0);
    const auto con = contrastive_loss(f, y, tau).grad;
    const auto con_fd = central_difference(f.data(), [&] { return contrastive_loss(f, y, tau).loss; });
    worst = std::max(worst, rel_error(con.data(), con_fd));

    std::vector<double> z(n);
    for (double& v : z) v = rng.uniform(-4, 4);
    const auto bce = bce_loss(z, y).grad;
    const auto bce_fd = central_difference(z, [&] { return bce_loss(z, y).loss; });
    worst = std::max(worst, rel_error(bce, bce_fd));

    TrainConfig cfg;
    cfg.adapter_width = h;
    cfg.lambda = rng.uniform();
    cfg.tau = rng.uniform(0.2, 1.0);
    cfg.init_scale = 0.5;
    cfg.seed = static_cast<std::uint64_t>(trial);
    auto head = init_head(d, cfg);
    for (double& w : head.classifier_w()) w = rng.uniform(-1, 1);
    head.classifier_b() = rng.uniform(-1, 1);
    const auto x = fixture::gaussian_matrix(n, d, rng);
    const auto obj = head_objective(head, x, y, cfg).grad;
    const auto obj_fd = central_difference(head.params, [&] { return head_objective(head, x, y, cfg).loss; });
    worst = std::max(worst, rel_error(obj, obj_fd));
  }
  o.require(worst <= 1e-4, "relative error above 1e-4");
  char buf[120];
  std::snprintf(buf, sizeof buf, "%d instances x 3 objectives; max relative error %.2e", instances, worst);
  o.detail = o.pass ? buf : o.detail + " (" + buf + ")";
  return o;
}

Outcome metric_suite() {
  Outcome o;
  Rng rng(404);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(64);
    std::vector<double> s(n);
    std::vector<std::uint8_t> y(n);
    const bool coarse = trial % 2 == 0;
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = coarse ? static_cast<double>(rng.below(10)) / 10.0 : rng.uniform();
      y[i] = static_cast<std::uint8_t>(rng.below(2));
    }
    y[rng.below(n)] = 1;
    worst = std::max(worst, std::abs(average_precision(s, y) - oracle::brute_force_ap(s, y)));
  }
  o.require(worst <= 1e-12, "disagreement with enumeration");
  const double fixture_ap =
      average_precision(std::vector<double>{0.9, 0.8, 0.3}, std::vector<std::uint8_t>{1, 0, 1});
  o.require(std::abs(fixture_ap - 5.0 / 6.0) <= 1e-15, "5/6 fixture");
  char buf[120];
  std::snprintf(buf, sizeof buf, "1000 sets; max deviation %.1e; fixture %.15f", worst, fixture_ap);
  if (o.pass) o.detail = buf;
  return o;
}

Outcome mechanism_suite() {
  Outcome o;
  double raw_max = 0.0, proj_min = 1.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    fixture::MechanismParams params;
    params.seed = seed;
    const auto r = fixture::run_mechanism(params);
    raw_max = std::max(raw_max, r.raw_accuracy);
    proj_min = std::min(proj_min, r.projected_accuracy);
    o.require(r.rank_kept == params.semantic_rank, "semantic rank not recovered");
  }
  o.require(raw_max <= 0.75, "raw probe above 75%");
  o.require(proj_min >= 0.95, "projected probe below 95%");
  char buf[120];
  std::snprintf(buf, sizeof buf, "10 draws; raw probe max %.4f, projected probe min %.4f", raw_max, proj_min);
  o.detail = o.pass ? buf : o.detail + " (" + buf + ")";
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome end_to_end_suite() {
  Outcome o;
  const fs::path dir = fs::temp_directory_path() / ("nsnet_accept_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto path = [&](const char* name) { return (dir / name).string(); };
  auto invoke = [&](std::vector<std::string> args) {
    args.insert(args.begin(), "nsnet");
    std::ostringstream sink;
    const auto r = cli::run(args, sink);
    if (r.exit_code != 0) o.require(false, args[1] + " failed: " + r.diagnostics);
    return r.exit_code == 0;
  };

  save_embeddings(fixture::separable_set({}), path("train.nseb"));
  double mean_acc = 0.0;
  if (invoke({"nullspace", "--embeddings", path("train.nseb"), "--out", path("p.nspj")})) {
    std::vector<std::string> train{"train", "--embeddings", path("train.nseb"), "--proj", path("p.nspj"),
                                   "--epochs", "2", "--lr", "2e-4", "--batch", "32", "--lambda", "0.2",
                                   "--seed", "0", "--out", path("h1.nshd")};
    invoke(train);
    train.back() = path("h2.nshd");
    invoke(train);
    o.require(slurp(path("h1.nshd")) == slurp(path("h2.nshd")), "heads differ across runs");
    if (invoke({"eval", "--embeddings", path("train.nseb"), "--proj", path("p.nspj"), "--head", path("h1.nshd"),
                "--report", path("r.json")})) {
      mean_acc = nlohmann::json::parse(slurp(path("r.json")))["mean_acc"].get<double>();
      o.require(mean_acc >= 0.99, "mean_acc below 0.99");
    }
  }
  fs::remove_all(dir);
  char buf[120];
  std::snprintf(buf, sizeof buf, "mean_acc %.6f; repeated heads byte-identical", mean_acc);
  o.detail = o.pass ? buf : o.detail + " (" + buf + ")";
  return o;
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](const char* name, double limit, const std::function<Outcome()>& suite) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = suite();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (limit > 0 && secs >= limit) {
      o.pass = false;
      o.detail += " (runtime over limit)";
    }
    failures += o.pass ? 0 : 1;
    std::printf("%s  %-22s %7.2fs  %s\n", o.pass ? "PASS" : "FAIL", name, secs, o.detail.c_str());
    std::fflush(stdout);
  };

  double selection_seconds = 0.0;
  report("projector-algebra", 60.0, projector_suite);
  report("patch-selection", 0.0, [&] { return patch_suite(selection_seconds); });
  report("gradients", 0.0, gradient_suite);
  report("average-precision", 0.0, metric_suite);
  report("mechanism", 30.0, mechanism_suite);
  report("end-to-end", 0.0, end_to_end_suite);
  std::printf("%d of 6 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
