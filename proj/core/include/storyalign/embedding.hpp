#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace storyalign {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// On-disk element type of an embedding file.
enum class DType { F32, F64 };

std::string_view to_string(DType dtype) noexcept;
DType parse_dtype(std::string_view tag);

/// Frozen base-encoder output: one row per identifier.
///
/// Construction validates that ids are unique, that there is one id per row,
/// and that every value is finite. Instances are immutable afterwards and can
/// be shared between readers.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(RowMatrix data, std::vector<std::string> ids);

  std::size_t rows() const noexcept { return static_cast<std::size_t>(data_.rows()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(data_.cols()); }
  const RowMatrix& data() const noexcept { return data_; }
  const std::vector<std::string>& ids() const noexcept { return ids_; }

  std::optional<std::size_t> index_of(std::string_view id) const;
  /// Row for `id`; throws NotFound when absent.
  Eigen::RowVectorXd row(std::string_view id) const;
  /// Rows for `ids` stacked in the given order.
  RowMatrix gather(const std::vector<std::string>& ids) const;

 private:
  RowMatrix data_;
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// What the manifest declares about one embedding file.
struct EmbeddingFileRef {
  std::filesystem::path path;
  std::vector<std::string> ids;
  std::size_t dim = 0;
  DType dtype = DType::F32;
};

// File layout: one ASCII header line "STORYEMB1 <f32|f64> <rows> <dim>\n"
// followed by rows*dim little-endian IEEE-754 values in row-major order.
inline constexpr std::string_view kEmbeddingMagic = "STORYEMB1";

void save_embedding_file(const std::filesystem::path& path, const RowMatrix& data, DType dtype);
RowMatrix read_embedding_file(const std::filesystem::path& path, std::size_t expected_rows,
                              std::size_t expected_dim, DType expected_dtype);

EmbeddingMatrix load_embeddings(const EmbeddingFileRef& ref);
void save_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& matrix, DType dtype);

/// FNV-1a over the raw bytes of a file; used for run manifests and frozen-base checks.
std::uint64_t file_checksum(const std::filesystem::path& path);
std::uint64_t matrix_checksum(const RowMatrix& data);

}  // namespace storyalign
