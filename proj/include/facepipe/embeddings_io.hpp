#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "facepipe/errors.hpp"

namespace facepipe {

/// Row-major T x D block of 32-bit floats. D is fixed at construction and
/// must be positive; T may be zero.
class EmbeddingMatrix {
 public:
  explicit EmbeddingMatrix(std::size_t dim, std::size_t rows = 0);
  EmbeddingMatrix(std::size_t dim, std::vector<float> data);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t rows() const noexcept { return rows_; }
  bool empty() const noexcept { return rows_ == 0; }

  std::span<const float> row(std::size_t i) const;
  std::span<float> row(std::size_t i);
  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }

  float operator()(std::size_t r, std::size_t c) const { return data_[r * dim_ + c]; }
  float& operator()(std::size_t r, std::size_t c) { return data_[r * dim_ + c]; }

  void append_row(std::span<const float> values);
  void reserve_rows(std::size_t n) { data_.reserve(n * dim_); }

  friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;

 private:
  std::size_t dim_;
  std::size_t rows_;
  std::vector<float> data_;
};

/// Bit-exact EMB1 reader / writer. Layout: "EMB1", u32 D, u32 T, then T*D
/// little-endian float32 values.
EmbeddingMatrix read_embedding_file(const std::filesystem::path& path);
void write_embedding_file(const EmbeddingMatrix& matrix, const std::filesystem::path& path);

// In-memory variants used by the file functions and by the Python bindings.
EmbeddingMatrix decode_embedding_bytes(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_embedding_bytes(const EmbeddingMatrix& matrix);

struct Box {
  double x = 0;
  double y = 0;
  double width = 0;
  double height = 0;

  double area() const noexcept { return width * height; }
  friend bool operator==(const Box&, const Box&) = default;
};

struct FaceDetection {
  Box box;
  std::string file;        // EMB1 file, relative to the manifest directory
  std::uint32_t row = 0;   // row inside `file`
  friend bool operator==(const FaceDetection&, const FaceDetection&) = default;
};

using Frame = std::vector<FaceDetection>;

struct VideoSample {
  std::string id;
  std::int64_t label = 0;
  std::vector<Frame> frames;  // source order; an empty frame has no faces

  bool has_faces() const noexcept;
  friend bool operator==(const VideoSample&, const VideoSample&) = default;
};

/// Caches EMB1 files referenced from a manifest. Relative paths resolve
/// against `base_dir`. All files must share one embedding dimension.
class EmbeddingStore {
 public:
  explicit EmbeddingStore(std::filesystem::path base_dir = {});

  const EmbeddingMatrix& get(const std::string& file);
  std::span<const float> resolve(const FaceDetection& face);

  /// Shared D of every file loaded so far; 0 if nothing is loaded.
  std::size_t dim() const noexcept { return dim_; }
  const std::filesystem::path& base_dir() const noexcept { return base_dir_; }

 private:
  std::filesystem::path base_dir_;
  std::map<std::string, EmbeddingMatrix> files_;
  std::size_t dim_ = 0;
};

/// Parses a JSON-lines manifest and checks every (file, row) reference
/// against the referenced file's row count. The store receives the loaded
/// embedding files.
std::vector<VideoSample> load_manifest(const std::filesystem::path& path, EmbeddingStore& store);
std::vector<VideoSample> load_manifest(const std::filesystem::path& path);

void write_manifest(std::span<const VideoSample> samples, const std::filesystem::path& path);

/// Index of the detection with the largest box area; ties go to the
/// lowest index.
std::size_t select_primary_face(std::span<const FaceDetection> detections);

// Plain-text side files: one value per line.
std::vector<std::int64_t> read_label_file(const std::filesystem::path& path);
std::vector<double> read_value_file(const std::filesystem::path& path);
void write_label_file(std::span<const std::int64_t> labels, const std::filesystem::path& path);

}  // namespace facepipe
