#include "storyalign/embedding.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "storyalign/error.hpp"

namespace storyalign {

static_assert(std::endian::native == std::endian::little,
              "embedding files are little-endian; big-endian hosts need byte swapping");

std::string_view to_string(DType dtype) noexcept {
  return dtype == DType::F32 ? "f32" : "f64";
}

DType parse_dtype(std::string_view tag) {
  if (tag == "f32") return DType::F32;
  if (tag == "f64") return DType::F64;
  throw Error(ErrorKind::Format, "unknown dtype tag '" + std::string(tag) + "'");
}

EmbeddingMatrix::EmbeddingMatrix(RowMatrix data, std::vector<std::string> ids)
    : data_(std::move(data)), ids_(std::move(ids)) {
  if (ids_.size() != rows()) {
    throw Error(ErrorKind::RowCountMismatch, "embedding has " + std::to_string(rows()) +
                                                 " rows but " + std::to_string(ids_.size()) + " ids");
  }
  if (!data_.allFinite()) throw Error(ErrorKind::NonFinite, "embedding contains a non-finite value");
  index_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!index_.emplace(ids_[i], i).second) {
      throw Error(ErrorKind::DuplicateId, "duplicate embedding id '" + ids_[i] + "'");
    }
  }
}

std::optional<std::size_t> EmbeddingMatrix::index_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Eigen::RowVectorXd EmbeddingMatrix::row(std::string_view id) const {
  auto idx = index_of(id);
  if (!idx) throw Error(ErrorKind::NotFound, "no embedding row for id '" + std::string(id) + "'");
  return data_.row(static_cast<Eigen::Index>(*idx));
}

RowMatrix EmbeddingMatrix::gather(const std::vector<std::string>& ids) const {
  RowMatrix out(static_cast<Eigen::Index>(ids.size()), data_.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = row(ids[i]);
  return out;
}

void save_embedding_file(const std::filesystem::path& path, const RowMatrix& data, DType dtype) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
  out << kEmbeddingMagic << ' ' << to_string(dtype) << ' ' << data.rows() << ' ' << data.cols() << '\n';
  const auto count = static_cast<std::size_t>(data.size());
  if (dtype == DType::F64) {
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(count * sizeof(double)));
  } else {
    std::vector<float> narrowed(count);
    for (std::size_t i = 0; i < count; ++i) narrowed[i] = static_cast<float>(data.data()[i]);
    out.write(reinterpret_cast<const char*>(narrowed.data()),
              static_cast<std::streamsize>(count * sizeof(float)));
  }
  if (!out) throw Error(ErrorKind::Io, "short write to '" + path.string() + "'");
}

RowMatrix read_embedding_file(const std::filesystem::path& path, std::size_t expected_rows,
                              std::size_t expected_dim, DType expected_dtype) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "'");

  std::string header;
  if (!std::getline(in, header)) throw Error(ErrorKind::Format, "missing header in '" + path.string() + "'");
  std::istringstream fields(header);
  std::string magic, dtype_tag;
  long long rows = -1, dim = -1;
  fields >> magic >> dtype_tag >> rows >> dim;
  if (!fields || magic != kEmbeddingMagic || rows < 0 || dim < 0) {
    throw Error(ErrorKind::Format, "malformed header in '" + path.string() + "'");
  }
  const DType dtype = parse_dtype(dtype_tag);
  if (dtype != expected_dtype) {
    throw Error(ErrorKind::Format, "dtype " + dtype_tag + " does not match declared " +
                                       std::string(to_string(expected_dtype)));
  }
  if (static_cast<std::size_t>(dim) != expected_dim) {
    throw Error(ErrorKind::DimensionMismatch, "file dim " + std::to_string(dim) + " != declared " +
                                                  std::to_string(expected_dim));
  }
  if (static_cast<std::size_t>(rows) != expected_rows) {
    throw Error(ErrorKind::RowCountMismatch, "file rows " + std::to_string(rows) + " != declared " +
                                                 std::to_string(expected_rows));
  }

  RowMatrix data(rows, dim);
  const auto count = static_cast<std::size_t>(rows * dim);
  if (dtype == DType::F64) {
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(count * sizeof(double)));
  } else {
    std::vector<float> raw(count);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count * sizeof(float)));
    for (std::size_t i = 0; i < count; ++i) data.data()[i] = raw[i];
  }
  if (!in) throw Error(ErrorKind::RowCountMismatch, "payload of '" + path.string() + "' is truncated");
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorKind::RowCountMismatch, "trailing bytes after payload in '" + path.string() + "'");
  }
  if (!data.allFinite()) throw Error(ErrorKind::NonFinite, "'" + path.string() + "' contains a non-finite value");
  return data;
}

EmbeddingMatrix load_embeddings(const EmbeddingFileRef& ref) {
  return EmbeddingMatrix(read_embedding_file(ref.path, ref.ids.size(), ref.dim, ref.dtype), ref.ids);
}

void save_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& matrix, DType dtype) {
  save_embedding_file(path, matrix.data(), dtype);
}

namespace {
constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

std::uint64_t fnv1a(std::uint64_t h, const unsigned char* bytes, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= kFnvPrime;
  }
  return h;
}
}  // namespace

std::uint64_t file_checksum(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "'");
  std::uint64_t h = kFnvOffset;
  char buf[1 << 14];
  while (in) {
    in.read(buf, sizeof buf);
    h = fnv1a(h, reinterpret_cast<const unsigned char*>(buf), static_cast<std::size_t>(in.gcount()));
  }
  return h;
}

std::uint64_t matrix_checksum(const RowMatrix& data) {
  return fnv1a(kFnvOffset, reinterpret_cast<const unsigned char*>(data.data()),
               static_cast<std::size_t>(data.size()) * sizeof(double));
}

}  // namespace storyalign
