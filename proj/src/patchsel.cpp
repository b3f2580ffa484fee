#include "nsnet/patchsel.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <numeric>
#include <string>

#include <fftw3.h>

#include "nsnet/error.hpp"
#include "nsnet/random.hpp"

namespace nsnet {

RasterImage::RasterImage(int w, int h)
    : RasterImage(w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(std::max(w, 0)) *
                                                   static_cast<std::size_t>(std::max(h, 0)) *
                                                   kChannels)) {}

RasterImage::RasterImage(int w, int h, std::vector<std::uint8_t> pixels)
    : width(w), height(h), data(std::move(pixels)) {
  if (w < 0 || h < 0) throw InputError("image dimensions must be non-negative");
  if (data.size() != static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * kChannels) {
    throw InputError("image buffer has " + std::to_string(data.size()) + " bytes, expected " +
                     std::to_string(static_cast<std::size_t>(w) * h * kChannels));
  }
}

void SelectionConfig::validate() const {
  if (patch_size < 2) throw ConfigError("patch size must be at least 2");
  if (target_size < patch_size) throw ConfigError("target size must be at least the patch size");
  if (target_size % patch_size != 0) {
    throw ConfigError("target size " + std::to_string(target_size) +
                      " is not a multiple of patch size " + std::to_string(patch_size));
  }
}

std::size_t SelectionConfig::patch_budget() const {
  const auto per_side = static_cast<std::size_t>(target_size / patch_size);
  return per_side * per_side;
}

std::vector<Patch> tile(const RasterImage& img, int patch_size) {
  if (patch_size < 1) throw InputError("patch size must be positive");
  if (img.width < patch_size || img.height < patch_size) {
    throw InputError("image " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                     " is smaller than patch size " + std::to_string(patch_size));
  }
  const int cols = img.width / patch_size;
  const int rows = img.height / patch_size;
  const auto n = static_cast<std::size_t>(patch_size);
  const std::size_t row_bytes = n * RasterImage::kChannels;

  std::vector<Patch> patches;
  patches.reserve(static_cast<std::size_t>(rows) * cols);
  for (int gr = 0; gr < rows; ++gr) {
    for (int gc = 0; gc < cols; ++gc) {
      Patch p;
      p.grid_row = static_cast<std::size_t>(gr);
      p.grid_col = static_cast<std::size_t>(gc);
      p.pixels.resize(n * row_bytes);
      for (int y = 0; y < patch_size; ++y) {
        const auto* src = &img.data[(static_cast<std::size_t>(gr * patch_size + y) * img.width +
                                     static_cast<std::size_t>(gc * patch_size)) *
                                    RasterImage::kChannels];
        std::copy(src, src + row_bytes, p.pixels.begin() + static_cast<std::ptrdiff_t>(y * row_bytes));
      }
      patches.push_back(std::move(p));
    }
  }
  return patches;
}

namespace {

// FFTW's planner is not thread-safe; execution with new-array execute is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class Dft2d {
 public:
  explicit Dft2d(int n) : n_(n) {
    const auto count = static_cast<std::size_t>(n) * n;
    in_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * count));
    out_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * count));
    std::lock_guard lock(planner_mutex());
    plan_ = fftw_plan_dft_2d(n, n, in_, out_, FFTW_FORWARD, FFTW_ESTIMATE);
  }
  ~Dft2d() {
    {
      std::lock_guard lock(planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }
  Dft2d(const Dft2d&) = delete;
  Dft2d& operator=(const Dft2d&) = delete;

  int size() const { return n_; }

  template <typename Sample>
  double channel_entropy(std::span<const Sample> patch, int channel) {
    const auto count = static_cast<std::size_t>(n_) * n_;
    for (std::size_t i = 0; i < count; ++i) {
      in_[i][0] = static_cast<double>(patch[i * RasterImage::kChannels + static_cast<std::size_t>(channel)]);
      in_[i][1] = 0.0;
    }
    fftw_execute(plan_);

    double total = 0.0;
    for (std::size_t i = 0; i < count; ++i) total += std::hypot(out_[i][0], out_[i][1]);
    if (total == 0.0) return 0.0;

    double h = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      const double p = std::hypot(out_[i][0], out_[i][1]) / total;
      if (p > 0.0) h -= p * std::log(p);
    }
    return h;
  }

 private:
  int n_;
  fftw_complex* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

Dft2d& thread_dft(int n) {
  thread_local std::unique_ptr<Dft2d> dft;
  if (!dft || dft->size() != n) dft = std::make_unique<Dft2d>(n);
  return *dft;
}

template <typename Sample>
double entropy_with(Dft2d& dft, std::span<const Sample> patch) {
  double sum = 0.0;
  for (int c = 0; c < RasterImage::kChannels; ++c) sum += dft.channel_entropy(patch, c);
  return sum / RasterImage::kChannels;
}

void check_patch_shape(std::size_t samples, int patch_size) {
  if (patch_size < 2) throw InputError("patch size must be at least 2");
  const auto expected = static_cast<std::size_t>(patch_size) * patch_size * RasterImage::kChannels;
  if (samples != expected) {
    throw InputError("patch has " + std::to_string(samples) + " samples, expected " +
                     std::to_string(expected));
  }
}

}  // namespace

double spectral_entropy(std::span<const std::uint8_t> patch, int patch_size) {
  check_patch_shape(patch.size(), patch_size);
  return entropy_with(thread_dft(patch_size), patch);
}

double spectral_entropy(std::span<const double> patch, int patch_size) {
  check_patch_shape(patch.size(), patch_size);
  for (double v : patch)
    if (!std::isfinite(v)) throw InputError("patch has a non-finite sample");
  return entropy_with(thread_dft(patch_size), patch);
}

std::vector<PatchScore> score_patches_serial(std::span<const Patch> patches, int patch_size) {
  std::vector<PatchScore> scores(patches.size());
  for (std::size_t i = 0; i < patches.size(); ++i) {
    scores[i] = {patches[i].grid_row, patches[i].grid_col,
                 spectral_entropy(std::span<const std::uint8_t>(patches[i].pixels), patch_size)};
  }
  return scores;
}

std::vector<PatchScore> score_patches(std::span<const Patch> patches, int patch_size) {
  for (const auto& p : patches) check_patch_shape(p.pixels.size(), patch_size);
  std::vector<PatchScore> scores(patches.size());
  const auto count = static_cast<std::int64_t>(patches.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t ii = 0; ii < count; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    Dft2d& dft = thread_dft(patch_size);
    scores[i] = {patches[i].grid_row, patches[i].grid_col,
                 entropy_with(dft, std::span<const std::uint8_t>(patches[i].pixels))};
  }
  return scores;
}

RasterImage resize_bilinear(const RasterImage& img, int width, int height) {
  if (img.width <= 0 || img.height <= 0) throw InputError("cannot resize an empty image");
  if (width <= 0 || height <= 0) throw InputError("resize target must be positive");
  RasterImage out(width, height);
  const double sx = static_cast<double>(img.width) / width;
  const double sy = static_cast<double>(img.height) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(img.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(img.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < RasterImage::kChannels; ++c) {
        const double top = img.at(x0, y0, c) * (1.0 - wx) + img.at(x1, y0, c) * wx;
        const double bottom = img.at(x0, y1, c) * (1.0 - wx) + img.at(x1, y1, c) * wx;
        const double v = top * (1.0 - wy) + bottom * wy;
        out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

RasterImage fit_for_selection(const RasterImage& img, const SelectionConfig& cfg) {
  cfg.validate();
  if (img.width <= 0 || img.height <= 0) throw InputError("image is empty");
  const int n = cfg.patch_size;
  const std::size_t budget = cfg.patch_budget();
  const auto available = static_cast<std::size_t>(img.width / n) * static_cast<std::size_t>(img.height / n);
  if (available >= budget) return img;

  const bool width_is_short = img.width <= img.height;
  const int short_side = width_is_short ? img.width : img.height;
  const int long_side = width_is_short ? img.height : img.width;
  for (int k = 1;; ++k) {
    const int new_short = k * n;
    const auto new_long = static_cast<int>(std::max<long>(
        new_short, std::lround(static_cast<double>(long_side) * new_short / short_side)));
    if (static_cast<std::size_t>(k) * static_cast<std::size_t>(new_long / n) >= budget) {
      return width_is_short ? resize_bilinear(img, new_short, new_long)
                            : resize_bilinear(img, new_long, new_short);
    }
  }
}

SelectionResult select_and_reassemble(const RasterImage& img, const SelectionConfig& cfg) {
  cfg.validate();
  const RasterImage fitted = fit_for_selection(img, cfg);
  const auto patches = tile(fitted, cfg.patch_size);
  const std::size_t budget = cfg.patch_budget();
  if (patches.size() < budget) {
    throw InputError("image yields " + std::to_string(patches.size()) + " patches, need " +
                     std::to_string(budget));
  }

  SelectionResult result;
  result.scores = score_patches(patches, cfg.patch_size);

  std::vector<std::size_t> order(patches.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return result.scores[a].entropy > result.scores[b].entropy;
  });

  const std::size_t keep_high = (budget + 1) / 2;
  const std::size_t keep_low = budget / 2;
  std::vector<std::size_t> chosen(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep_high));
  chosen.insert(chosen.end(), order.end() - static_cast<std::ptrdiff_t>(keep_low), order.end());

  Rng rng(cfg.seed);
  shuffle(std::span<std::size_t>(chosen), rng);

  const int per_side = cfg.target_size / cfg.patch_size;
  const auto n = static_cast<std::size_t>(cfg.patch_size);
  const std::size_t row_bytes = n * RasterImage::kChannels;
  result.image = RasterImage(cfg.target_size, cfg.target_size);
  for (std::size_t slot = 0; slot < chosen.size(); ++slot) {
    const auto& src = patches[chosen[slot]].pixels;
    const std::size_t out_row = slot / static_cast<std::size_t>(per_side);
    const std::size_t out_col = slot % static_cast<std::size_t>(per_side);
    for (std::size_t y = 0; y < n; ++y) {
      auto* dst = &result.image.data[((out_row * n + y) * static_cast<std::size_t>(cfg.target_size) +
                                      out_col * n) *
                                     RasterImage::kChannels];
      std::copy(src.begin() + static_cast<std::ptrdiff_t>(y * row_bytes),
                src.begin() + static_cast<std::ptrdiff_t>((y + 1) * row_bytes), dst);
    }
  }
  result.placement = std::move(chosen);
  return result;
}

}  // namespace nsnet
