#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace cascade {

/// Row-major n x dim float32 matrix keyed by document id.
///
/// Invariants (checked on construction): ids unique and aligned 1:1 with
/// rows, dim > 0, every value finite.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix(std::vector<std::string> ids, std::uint32_t dim, std::vector<float> values,
                  std::string encoder_tag = {});

  /// Builds from per-row vectors; rejects ragged rows.
  static EmbeddingMatrix from_rows(std::vector<std::string> ids, const std::vector<std::vector<float>>& rows,
                                   std::string encoder_tag = {});

  std::size_t rows() const { return ids_.size(); }
  std::uint32_t dim() const { return dim_; }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::vector<float>& values() const { return values_; }
  const std::string& encoder_tag() const { return encoder_tag_; }

  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(values_).subspan(i * dim_, dim_);
  }

  bool operator==(const EmbeddingMatrix&) const = default;

 private:
  std::vector<std::string> ids_;
  std::uint32_t dim_;
  std::vector<float> values_;
  std::string encoder_tag_;
};

inline constexpr std::uint32_t kEmbeddingFormatVersion = 1;

/// CGEM layout, little-endian:
///   "CGEM" | u32 version | u32 n | u32 dim | u32 len + encoder_tag bytes
///   | n x (u32 len + id bytes) | n*dim float32 row-major | u32 CRC32
/// The CRC covers every byte between the magic and the CRC itself.
void write_embeddings(const EmbeddingMatrix& matrix, const std::filesystem::path& path);
std::vector<std::byte> encode_embeddings(const EmbeddingMatrix& matrix);

EmbeddingMatrix read_embeddings(const std::filesystem::path& path);
EmbeddingMatrix decode_embeddings(std::span<const std::byte> bytes);

/// Selects/reorders rows to follow `ids`. Row values are copied verbatim.
EmbeddingMatrix align(const EmbeddingMatrix& matrix, const std::vector<std::string>& ids);

}  // namespace cascade
