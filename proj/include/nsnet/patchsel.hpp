#pragma once

// Spectral-entropy patch selection.
//
// An image is cut into non-overlapping N x N tiles. Each tile is scored by
// the Shannon entropy of its L1-normalised 2-D DFT magnitude spectrum
// (averaged over the RGB channels). For a target of M x M pixels the
// T = (M/N)^2 tiles kept are the ceil(T/2) highest- and floor(T/2)
// lowest-entropy ones; they are shuffled with a seeded Fisher-Yates pass
// and laid out row-major into the output.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace nsnet {

/// 8-bit interleaved RGB, row-major.
struct RasterImage {
  static constexpr int kChannels = 3;

  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  RasterImage() = default;
  RasterImage(int w, int h);
  RasterImage(int w, int h, std::vector<std::uint8_t> pixels);

  std::uint8_t& at(int x, int y, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * kChannels + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * kChannels + c];
  }

  friend bool operator==(const RasterImage&, const RasterImage&) = default;
};

/// One N x N x 3 tile and its grid position.
struct Patch {
  std::size_t grid_row = 0;
  std::size_t grid_col = 0;
  std::vector<std::uint8_t> pixels;
};

struct PatchScore {
  std::size_t grid_row = 0;
  std::size_t grid_col = 0;
  /// Nats, in [0, ln(N^2)].
  double entropy = 0.0;
};

struct SelectionConfig {
  int patch_size = 32;
  int target_size = 224;
  std::uint64_t seed = 0;

  /// Throws ConfigError unless N >= 2, M >= N and M mod N == 0.
  void validate() const;
  std::size_t patch_budget() const;
};

/// Row-major grid of floor(w/N) * floor(h/N) tiles; trailing pixels dropped.
std::vector<Patch> tile(const RasterImage& img, int patch_size);

/// Mean over channels of the spectral entropy of an N x N x 3 patch, with
/// samples taken as real values 0-255.
double spectral_entropy(std::span<const std::uint8_t> patch, int patch_size);
/// Same measure over arbitrary real samples (interleaved N x N x 3).
double spectral_entropy(std::span<const double> patch, int patch_size);

/// Scores every patch; patches are split across OpenMP threads.
std::vector<PatchScore> score_patches(std::span<const Patch> patches, int patch_size);
/// Single-threaded reference for score_patches().
std::vector<PatchScore> score_patches_serial(std::span<const Patch> patches, int patch_size);

/// Bilinear resample with pixel-centre alignment and edge clamping.
RasterImage resize_bilinear(const RasterImage& img, int width, int height);

/// Returns `img` unchanged when it already yields the patch budget; otherwise
/// upscales it, preserving aspect ratio, so the shorter side is the smallest
/// multiple of N that does.
RasterImage fit_for_selection(const RasterImage& img, const SelectionConfig& cfg);

struct SelectionResult {
  RasterImage image;
  /// Scores of the tiled (possibly upscaled) input, in grid order.
  std::vector<PatchScore> scores;
  /// Row-major grid index (into `scores`) of the patch placed at each output slot.
  std::vector<std::size_t> placement;
};

SelectionResult select_and_reassemble(const RasterImage& img, const SelectionConfig& cfg);

}  // namespace nsnet
