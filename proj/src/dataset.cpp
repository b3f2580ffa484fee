#include "nsnet/dataset.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <unordered_set>

#include "nsnet/binary_io.hpp"
#include "nsnet/error.hpp"

namespace nsnet {

namespace {

bool all_finite(const std::vector<float>& v) {
  for (float x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

void require_short_string(const std::string& s, const char* what) {
  if (s.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw InputError(std::string(what) + " longer than 65535 bytes");
  }
}

std::vector<float> read_vector(io::Reader& r, std::size_t dim, const char* what) {
  std::vector<float> v(dim);
  for (auto& x : v) x = r.f32(what);
  return v;
}

}  // namespace

void EmbeddingSet::validate() const {
  if (dim == 0) throw ParseError(ParseErrc::invalid_field, "embedding dimension is 0");
  std::unordered_set<std::string_view> ids;
  ids.reserve(records.size());
  for (const auto& rec : records) {
    if (rec.label > 1) {
      throw ParseError(ParseErrc::invalid_field,
                       "record '" + rec.id + "' has label " + std::to_string(rec.label));
    }
    if (rec.visual.size() != dim) {
      throw ParseError(ParseErrc::invalid_field, "record '" + rec.id + "' visual vector has " +
                                                     std::to_string(rec.visual.size()) +
                                                     " entries, expected " + std::to_string(dim));
    }
    if (!all_finite(rec.visual)) {
      throw ParseError(ParseErrc::non_finite, "record '" + rec.id + "' visual vector");
    }
    if (rec.text) {
      if (rec.text->size() != dim) {
        throw ParseError(ParseErrc::invalid_field,
                         "record '" + rec.id + "' text vector has wrong dimension");
      }
      if (!all_finite(*rec.text)) {
        throw ParseError(ParseErrc::non_finite, "record '" + rec.id + "' text vector");
      }
    }
    if (!ids.insert(rec.id).second) {
      throw ParseError(ParseErrc::duplicate_id, "id '" + rec.id + "' appears more than once");
    }
  }
}

std::size_t write_embeddings(const EmbeddingSet& set, std::ostream& out) {
  set.validate();
  io::Writer w(out);
  w.magic("NSEB");
  w.u16(kEmbeddingFormatVersion);
  w.u32(static_cast<std::uint32_t>(set.dim));
  w.u64(set.records.size());
  for (const auto& rec : set.records) {
    require_short_string(rec.id, "record id");
    require_short_string(rec.source, "record source");
    w.u16(static_cast<std::uint16_t>(rec.id.size()));
    w.bytes(rec.id.data(), rec.id.size());
    w.u8(rec.label);
    w.u16(static_cast<std::uint16_t>(rec.source.size()));
    w.bytes(rec.source.data(), rec.source.size());
    w.u8(rec.text ? 1 : 0);
    for (float v : rec.visual) w.f32(v);
    if (rec.text)
      for (float v : *rec.text) w.f32(v);
  }
  return w.count();
}

EmbeddingSet read_embeddings(std::istream& in) {
  io::Reader r(in);
  const auto tag = r.magic();
  if (std::memcmp(tag.data(), "NSEB", 4) != 0) {
    throw ParseError(ParseErrc::bad_magic, "expected NSEB embedding file");
  }
  const auto version = r.u16("version");
  if (version != kEmbeddingFormatVersion) {
    throw ParseError(ParseErrc::unknown_version,
                     "NSEB version " + std::to_string(version) + " is not supported");
  }
  EmbeddingSet set;
  set.dim = r.u32("dim");
  if (set.dim == 0) throw ParseError(ParseErrc::invalid_field, "embedding dimension is 0");
  const std::uint64_t count = r.u64("record count");

  for (std::uint64_t i = 0; i < count; ++i) {
    try {
      EmbeddingRecord rec;
      rec.id = r.str(r.u16("id length"), "id");
      rec.label = r.u8("label");
      rec.source = r.str(r.u16("source length"), "source");
      const auto flags = r.u8("flags");
      if (flags & ~1U) throw ParseError(ParseErrc::invalid_field, "unknown record flags");
      rec.visual = read_vector(r, set.dim, "visual vector");
      if (flags & 1U) rec.text = read_vector(r, set.dim, "text vector");
      set.records.push_back(std::move(rec));
    } catch (const ParseError& e) {
      if (e.code() != ParseErrc::truncated) throw;
      throw ParseError(ParseErrc::truncated, "header declares " + std::to_string(count) +
                                                 " records, found " + std::to_string(i) +
                                                 " complete");
    }
  }
  set.validate();
  return set;
}

EmbeddingSet load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return read_embeddings(in);
  } catch (const ParseError& e) {
    throw ParseError(e.code(), path.string() + ": " + e.what());
  }
}

void save_embeddings(const EmbeddingSet& set, const std::filesystem::path& path) {
  io::write_file_atomic(path, [&](std::ostream& out) { write_embeddings(set, out); });
}

FeatureMatrix text_matrix(const EmbeddingSet& set) {
  std::size_t n = 0;
  for (const auto& rec : set.records)
    if (rec.text) ++n;
  if (n == 0) throw InputError("no record carries a text vector");
  FeatureMatrix m(n, set.dim);
  std::size_t row = 0;
  for (const auto& rec : set.records) {
    if (!rec.text) continue;
    auto dst = m.row(row++);
    for (std::size_t j = 0; j < set.dim; ++j) dst[j] = (*rec.text)[j];
  }
  return m;
}

FeatureMatrix visual_matrix(const EmbeddingSet& set) {
  FeatureMatrix m(set.records.size(), set.dim);
  for (std::size_t i = 0; i < set.records.size(); ++i) {
    auto dst = m.row(i);
    for (std::size_t j = 0; j < set.dim; ++j) dst[j] = set.records[i].visual[j];
  }
  return m;
}

std::vector<std::uint8_t> labels_of(const EmbeddingSet& set) {
  std::vector<std::uint8_t> labels;
  labels.reserve(set.records.size());
  for (const auto& rec : set.records) labels.push_back(rec.label);
  return labels;
}

std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\r\n") == std::string::npos) return value;
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"' && cur.empty()) {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) {
    throw ParseError(ParseErrc::invalid_field,
                     "unterminated quote on manifest line " + std::to_string(line_no));
  }
  fields.push_back(std::move(cur));
  return fields;
}

}  // namespace

std::vector<ManifestEntry> read_manifest(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError(ParseErrc::truncated, "manifest is empty");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "path,label,source") {
    throw ParseError(ParseErrc::bad_magic, "manifest header must be 'path,label,source'");
  }
  std::vector<ManifestEntry> entries;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line, line_no);
    if (fields.size() != 3) {
      throw ParseError(ParseErrc::invalid_field,
                       "manifest line " + std::to_string(line_no) + " needs 3 fields");
    }
    if (fields[1] != "0" && fields[1] != "1") {
      throw ParseError(ParseErrc::invalid_field,
                       "manifest line " + std::to_string(line_no) + " label must be 0 or 1");
    }
    entries.push_back({std::move(fields[0]), static_cast<std::uint8_t>(fields[1][0] - '0'),
                       std::move(fields[2])});
  }
  return entries;
}

void write_manifest(const std::vector<ManifestEntry>& entries, std::ostream& out) {
  out << "path,label,source\n";
  for (const auto& e : entries) {
    out << csv_field(e.path) << ',' << static_cast<int>(e.label) << ',' << csv_field(e.source)
        << '\n';
  }
  if (!out) throw IoError("manifest write failed");
}

}  // namespace nsnet
