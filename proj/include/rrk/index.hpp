#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rrk/compressor.hpp"
#include "rrk/corpus.hpp"

namespace rrk {

enum class DType : std::uint32_t { F32 = 0, F16 = 1 };
DType parse_dtype(const std::string& s);
const char* dtype_name(DType d);
std::size_t dtype_bytes(DType d);

/// IEEE binary16 conversion, round to nearest even.
std::uint16_t float_to_half(float f);
float half_to_float(std::uint16_t h);

/// 32-byte header: magic "RRKIDX1\0", u32 version, u32 l, u32 d_model,
/// u32 dtype, u64 doc_count. Records follow sorted by doc_id: u32 id length,
/// id bytes, l * d_model values. Little-endian throughout.
inline constexpr std::size_t kIndexHeaderBytes = 32;
inline constexpr std::uint32_t kIndexVersion = 1;

struct IndexHeader {
  std::uint32_t version = kIndexVersion;
  std::uint32_t l = 0;
  std::uint32_t d_model = 0;
  DType dtype = DType::F32;
  std::uint64_t doc_count = 0;
};

/// Serializes records (any order; sorted here). Throws IdError on a
/// duplicate or empty id.
std::string encode_index(std::vector<CompressedDoc<float>> docs, std::uint32_t l, std::uint32_t d_model,
                         DType dtype);

struct IndexBuildOptions {
  std::size_t max_doc_len = 128;
  DType dtype = DType::F32;
  /// Worker threads for compression; output does not depend on it.
  std::size_t threads = 1;
};

struct IndexBuildStats {
  std::size_t docs = 0;
  std::uint64_t file_bytes = 0;
  std::uint64_t payload_bytes = 0;
};

/// Compresses every document once and writes the index file.
IndexBuildStats build_index(const std::vector<Document>& corpus, const Transformer<float>& compressor,
                            const Tokenizer& tokenizer, const IndexBuildOptions& options,
                            const std::filesystem::path& path);

struct Lookup {
  std::string doc_id;
  std::optional<CompressedDoc<float>> doc;  // empty when not found

  bool found() const { return doc.has_value(); }
};

/// Read-only view of an index file held in memory. Safe for concurrent readers.
class CompressedIndex {
 public:
  /// Throws CorruptionError on bad magic, version, sizes, ordering or
  /// truncation.
  static CompressedIndex open(const std::filesystem::path& path);
  static CompressedIndex from_bytes(std::string bytes);

  const IndexHeader& header() const { return header_; }
  std::size_t size() const { return offsets_.size(); }

  /// Values widened to f32.
  std::optional<CompressedDoc<float>> get(std::string_view doc_id) const;
  std::vector<Lookup> get_many(const std::vector<std::string>& doc_ids) const;
  std::vector<std::string> ids() const;

  /// Position of doc_id in the sorted records, counting string comparisons.
  std::optional<std::size_t> find(std::string_view doc_id, std::size_t* comparisons = nullptr) const;

 private:
  std::string_view id_at(std::size_t i) const;
  CompressedDoc<float> record_at(std::size_t i) const;

  std::string bytes_;
  IndexHeader header_;
  std::vector<std::size_t> offsets_;  // start of each record's id length
};

/// n_docs * c * h * bytes_per_value.
std::uint64_t storage_estimate(std::uint64_t n_docs, std::uint64_t c, std::uint64_t h,
                               std::uint64_t bytes_per_value);

}  // namespace rrk
