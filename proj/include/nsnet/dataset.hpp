#pragma once

// Embedding records and the NSEB container.
//
// NSEB layout (little-endian):
//   "NSEB" | u16 version | u32 dim | u64 count
//   per record: u16 id_len, id bytes | u8 label | u16 source_len, source bytes
//               | u8 flags (bit0: text present) | dim x f32 visual
//               | dim x f32 text (if flagged)

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nsnet/feature_matrix.hpp"

namespace nsnet {

inline constexpr std::uint16_t kEmbeddingFormatVersion = 1;

struct EmbeddingRecord {
  std::string id;
  /// 0 real, 1 fake.
  std::uint8_t label = 0;
  std::string source;
  std::vector<float> visual;
  std::optional<std::vector<float>> text;

  friend bool operator==(const EmbeddingRecord&, const EmbeddingRecord&) = default;
};

struct EmbeddingSet {
  std::size_t dim = 0;
  std::vector<EmbeddingRecord> records;

  /// Throws ParseError describing the first violated invariant.
  void validate() const;

  friend bool operator==(const EmbeddingSet&, const EmbeddingSet&) = default;
};

std::size_t write_embeddings(const EmbeddingSet& set, std::ostream& out);
EmbeddingSet read_embeddings(std::istream& in);

EmbeddingSet load_embeddings(const std::filesystem::path& path);
void save_embeddings(const EmbeddingSet& set, const std::filesystem::path& path);

/// Text vectors of every record that has one, in record order.
FeatureMatrix text_matrix(const EmbeddingSet& set);
FeatureMatrix visual_matrix(const EmbeddingSet& set);
std::vector<std::uint8_t> labels_of(const EmbeddingSet& set);

/// One line of the extraction manifest CSV `path,label,source`.
struct ManifestEntry {
  std::string path;
  std::uint8_t label = 0;
  std::string source;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

std::vector<ManifestEntry> read_manifest(std::istream& in);
void write_manifest(const std::vector<ManifestEntry>& entries, std::ostream& out);

/// RFC 4180 style quoting when the field contains a comma, quote or newline.
std::string csv_field(const std::string& value);

}  // namespace nsnet
