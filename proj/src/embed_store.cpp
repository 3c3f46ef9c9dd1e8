#include "cascade/embed_store.hpp"

#include <fmt/format.h>

#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "cascade/binary_io.hpp"
#include "cascade/checksum.hpp"
#include "cascade/errors.hpp"

namespace cascade {

namespace {
constexpr std::string_view kMagic = "CGEM";

void check_finite(std::span<const float> values, std::uint32_t dim) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw InputError(fmt::format("non-finite embedding value at row {}, column {}", i / dim, i % dim));
    }
  }
}
}  // namespace

EmbeddingMatrix::EmbeddingMatrix(std::vector<std::string> ids, std::uint32_t dim, std::vector<float> values,
                                 std::string encoder_tag)
    : ids_(std::move(ids)), dim_(dim), values_(std::move(values)), encoder_tag_(std::move(encoder_tag)) {
  if (dim_ == 0) throw InputError("embedding dimension must be positive");
  if (values_.size() != ids_.size() * dim_) {
    throw InputError(fmt::format("embedding payload has {} values, expected {} rows x {} dims", values_.size(),
                                 ids_.size(), dim_));
  }
  std::unordered_set<std::string_view> seen;
  for (const auto& id : ids_) {
    if (!seen.insert(id).second) throw InputError(fmt::format("duplicate embedding id '{}'", id));
  }
  check_finite(values_, dim_);
}

EmbeddingMatrix EmbeddingMatrix::from_rows(std::vector<std::string> ids, const std::vector<std::vector<float>>& rows,
                                           std::string encoder_tag) {
  if (ids.size() != rows.size()) {
    throw InputError(fmt::format("{} ids for {} embedding rows", ids.size(), rows.size()));
  }
  if (rows.empty()) throw InputError("cannot infer dimension from zero rows");
  const auto dim = rows.front().size();
  std::vector<float> flat;
  flat.reserve(rows.size() * dim);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != dim) {
      throw InputError(fmt::format("row {} has dimension {}, expected {}", r, rows[r].size(), dim));
    }
    flat.insert(flat.end(), rows[r].begin(), rows[r].end());
  }
  return EmbeddingMatrix(std::move(ids), static_cast<std::uint32_t>(dim), std::move(flat), std::move(encoder_tag));
}

std::vector<std::byte> encode_embeddings(const EmbeddingMatrix& matrix) {
  if (matrix.rows() == 0) throw InputError("empty matrix");
  binary::Writer w;
  w.raw(kMagic);
  w.u32(kEmbeddingFormatVersion);
  w.u32(static_cast<std::uint32_t>(matrix.rows()));
  w.u32(matrix.dim());
  w.str(matrix.encoder_tag());
  for (const auto& id : matrix.ids()) w.str(id);
  for (const float v : matrix.values()) w.f32(v);
  auto& buf = w.buffer();
  const auto crc = crc32(std::span<const std::byte>(buf).subspan(kMagic.size()));
  w.u32(crc);
  return std::move(buf);
}

void write_embeddings(const EmbeddingMatrix& matrix, const std::filesystem::path& path) {
  const auto bytes = encode_embeddings(matrix);
  binary::write_all(path.string(), bytes);
}

EmbeddingMatrix decode_embeddings(std::span<const std::byte> bytes) {
  if (bytes.size() < kMagic.size() + 4 ||
      std::string_view(reinterpret_cast<const char*>(bytes.data()), kMagic.size()) != kMagic) {
    throw InputError("bad magic: not a CGEM embedding file");
  }
  if (bytes.size() < kMagic.size() + 16) throw InputError("truncated file");
  const auto body = bytes.subspan(kMagic.size(), bytes.size() - kMagic.size() - 4);
  binary::Reader crc_reader(bytes.subspan(bytes.size() - 4));
  const auto stored_crc = crc_reader.u32();

  binary::Reader r(body);
  const auto version = r.u32();
  if (version != kEmbeddingFormatVersion) throw InputError(fmt::format("unsupported CGEM version {}", version));
  // Validate the checksum before trusting any length field.
  const auto actual_crc = crc32(body);
  if (actual_crc != stored_crc) {
    throw InputError(fmt::format("CRC mismatch: stored {:08x}, computed {:08x}", stored_crc, actual_crc));
  }
  const auto n = r.u32();
  const auto dim = r.u32();
  if (n == 0) throw InputError("empty matrix");
  if (dim == 0) throw InputError("embedding dimension must be positive");
  std::string tag = r.str();
  std::vector<std::string> ids;
  ids.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) ids.push_back(r.str());
  const std::size_t count = static_cast<std::size_t>(n) * dim;
  if (r.remaining() != count * 4) {
    throw InputError(fmt::format("payload size {} does not match {} x {} float32", r.remaining(), n, dim));
  }
  std::vector<float> values(count);
  for (auto& v : values) v = r.f32();
  check_finite(values, dim);
  return EmbeddingMatrix(std::move(ids), dim, std::move(values), std::move(tag));
}

EmbeddingMatrix read_embeddings(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw InputError(fmt::format("embeddings file '{}' not found", path.string()));
  const auto bytes = binary::read_all(path.string());
  try {
    return decode_embeddings(bytes);
  } catch (const InputError& e) {
    throw InputError(fmt::format("'{}': {}", path.string(), e.what()));
  }
}

EmbeddingMatrix align(const EmbeddingMatrix& matrix, const std::vector<std::string>& ids) {
  std::unordered_map<std::string_view, std::size_t> index;
  index.reserve(matrix.rows());
  for (std::size_t i = 0; i < matrix.rows(); ++i) index.emplace(matrix.ids()[i], i);
  std::vector<float> values;
  values.reserve(ids.size() * matrix.dim());
  for (const auto& id : ids) {
    const auto it = index.find(id);
    if (it == index.end()) throw InputError(fmt::format("embedding for document '{}' is missing", id));
    const auto row = matrix.row(it->second);
    values.insert(values.end(), row.begin(), row.end());
  }
  return EmbeddingMatrix(ids, matrix.dim(), std::move(values), matrix.encoder_tag());
}

}  // namespace cascade
