#include "facepipe/embeddings_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "json.hpp"

namespace facepipe {

namespace {

constexpr std::array<char, 4> kEmbMagic = {'E', 'M', 'B', '1'};
constexpr std::size_t kEmbHeaderBytes = 12;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | bytes[offset + static_cast<std::size_t>(i)];
  return v;
}

std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failure on '" + path.string() + "'");
  return bytes;
}

std::string trim(std::string_view s) {
  auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

template <typename Fn>
void for_each_nonblank_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto text = trim(line);
    if (!text.empty()) fn(text, lineno);
  }
  if (in.bad()) throw IoError("read failure on '" + path.string() + "'");
}

std::string where(const std::filesystem::path& path, std::size_t lineno) {
  return path.string() + ":" + std::to_string(lineno) + ": ";
}

}  // namespace

// ---------------------------------------------------------------------------
// EmbeddingMatrix

EmbeddingMatrix::EmbeddingMatrix(std::size_t dim, std::size_t rows)
    : dim_(dim), rows_(rows), data_(dim * rows, 0.0f) {
  if (dim == 0) throw FormatError("embedding dimension must be positive");
}

EmbeddingMatrix::EmbeddingMatrix(std::size_t dim, std::vector<float> data)
    : dim_(dim), rows_(0), data_(std::move(data)) {
  if (dim == 0) throw FormatError("embedding dimension must be positive");
  if (data_.size() % dim != 0) {
    throw ShapeError("data length " + std::to_string(data_.size()) + " is not a multiple of dim " +
                     std::to_string(dim));
  }
  rows_ = data_.size() / dim;
}

std::span<const float> EmbeddingMatrix::row(std::size_t i) const {
  if (i >= rows_) throw IndexError("row " + std::to_string(i) + " out of range");
  return std::span<const float>(data_).subspan(i * dim_, dim_);
}

std::span<float> EmbeddingMatrix::row(std::size_t i) {
  if (i >= rows_) throw IndexError("row " + std::to_string(i) + " out of range");
  return std::span<float>(data_).subspan(i * dim_, dim_);
}

void EmbeddingMatrix::append_row(std::span<const float> values) {
  if (values.size() != dim_) {
    throw ShapeError("row of length " + std::to_string(values.size()) + " appended to dim " +
                     std::to_string(dim_) + " matrix");
  }
  data_.insert(data_.end(), values.begin(), values.end());
  ++rows_;
}

// ---------------------------------------------------------------------------
// EMB1

std::vector<std::uint8_t> encode_embedding_bytes(const EmbeddingMatrix& matrix) {
  if (matrix.dim() > UINT32_MAX || matrix.rows() > UINT32_MAX) {
    throw FormatError("matrix too large for EMB1 header");
  }
  std::vector<std::uint8_t> out;
  out.reserve(kEmbHeaderBytes + matrix.data().size() * 4);
  out.insert(out.end(), kEmbMagic.begin(), kEmbMagic.end());
  put_u32(out, static_cast<std::uint32_t>(matrix.dim()));
  put_u32(out, static_cast<std::uint32_t>(matrix.rows()));
  for (float v : matrix.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

EmbeddingMatrix decode_embedding_bytes(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || !std::equal(kEmbMagic.begin(), kEmbMagic.end(), bytes.begin())) {
    throw FormatError("bad magic: expected \"EMB1\"");
  }
  if (bytes.size() < kEmbHeaderBytes) throw TruncationError("EMB1 header is truncated");
  const std::uint32_t dim = get_u32(bytes, 4);
  const std::uint32_t rows = get_u32(bytes, 8);
  if (dim == 0) throw FormatError("EMB1 header declares D = 0");
  const std::uint64_t expected = std::uint64_t{dim} * rows * 4;
  const std::uint64_t payload = bytes.size() - kEmbHeaderBytes;
  if (payload != expected) {
    throw TruncationError("EMB1 payload is " + std::to_string(payload) + " bytes, header implies " +
                          std::to_string(expected));
  }
  std::vector<float> data(static_cast<std::size_t>(dim) * rows);
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = std::bit_cast<float>(get_u32(bytes, kEmbHeaderBytes + 4 * i));
  }
  return EmbeddingMatrix(dim, std::move(data));
}

EmbeddingMatrix read_embedding_file(const std::filesystem::path& path) {
  auto bytes = read_all(path);
  try {
    return decode_embedding_bytes(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const TruncationError& e) {
    throw TruncationError(path.string() + ": " + e.what());
  }
}

void write_embedding_file(const EmbeddingMatrix& matrix, const std::filesystem::path& path) {
  const auto bytes = encode_embedding_bytes(matrix);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw IoError("write failure on '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Manifest

bool VideoSample::has_faces() const noexcept {
  return std::any_of(frames.begin(), frames.end(), [](const Frame& f) { return !f.empty(); });
}

EmbeddingStore::EmbeddingStore(std::filesystem::path base_dir) : base_dir_(std::move(base_dir)) {}

const EmbeddingMatrix& EmbeddingStore::get(const std::string& file) {
  if (auto it = files_.find(file); it != files_.end()) return it->second;
  std::filesystem::path p(file);
  if (p.is_relative() && !base_dir_.empty()) p = base_dir_ / p;
  auto matrix = read_embedding_file(p);
  if (dim_ != 0 && matrix.dim() != dim_) {
    throw ShapeError("embedding file '" + file + "' has D = " + std::to_string(matrix.dim()) +
                     ", expected " + std::to_string(dim_));
  }
  dim_ = matrix.dim();
  return files_.emplace(file, std::move(matrix)).first->second;
}

std::span<const float> EmbeddingStore::resolve(const FaceDetection& face) {
  const auto& m = get(face.file);
  if (face.row >= m.rows()) {
    throw RefError("row " + std::to_string(face.row) + " out of range for '" + face.file + "' (" +
                   std::to_string(m.rows()) + " rows)");
  }
  return m.row(face.row);
}

namespace {

FaceDetection parse_face(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("face entry must be an object");
  const auto& box = j.at("box");
  if (!box.is_array() || box.size() != 4) throw ParseError("\"box\" must be [x, y, w, h]");
  for (const auto& v : box) {
    if (!v.is_number()) throw ParseError("\"box\" entries must be numbers");
  }
  FaceDetection f;
  f.box = {box[0].get<double>(), box[1].get<double>(), box[2].get<double>(), box[3].get<double>()};
  if (!(f.box.width > 0) || !(f.box.height > 0)) throw ParseError("box width and height must be positive");
  const auto& file = j.at("file");
  if (!file.is_string()) throw ParseError("\"file\" must be a string");
  f.file = file.get<std::string>();
  const auto& row = j.at("row");
  if (!row.is_number_integer()) throw ParseError("\"row\" must be an integer");
  if (row.get<std::int64_t>() < 0 || row.get<std::int64_t>() > UINT32_MAX) {
    throw ParseError("\"row\" out of range");
  }
  f.row = static_cast<std::uint32_t>(row.get<std::int64_t>());
  return f;
}

VideoSample parse_sample(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("line must be a JSON object");
  VideoSample s;
  try {
    const auto& id = j.at("id");
    if (!id.is_string()) throw ParseError("\"id\" must be a string");
    s.id = id.get<std::string>();
    const auto& label = j.at("label");
    if (!label.is_number_integer()) throw ParseError("\"label\" must be an integer");
    s.label = label.get<std::int64_t>();
    const auto& frames = j.at("frames");
    if (!frames.is_array()) throw ParseError("\"frames\" must be an array");
    s.frames.reserve(frames.size());
    for (const auto& fr : frames) {
      if (!fr.is_array()) throw ParseError("each frame must be an array of faces");
      Frame frame;
      frame.reserve(fr.size());
      for (const auto& face : fr) frame.push_back(parse_face(face));
      s.frames.push_back(std::move(frame));
    }
  } catch (const nlohmann::json::out_of_range& e) {
    throw ParseError(std::string("missing field: ") + e.what());
  } catch (const nlohmann::json::type_error& e) {
    throw ParseError(std::string("wrong field type: ") + e.what());
  }
  return s;
}

}  // namespace

std::vector<VideoSample> load_manifest(const std::filesystem::path& path, EmbeddingStore& store) {
  std::vector<VideoSample> samples;
  for_each_nonblank_line(path, [&](const std::string& text, std::size_t lineno) {
    try {
      samples.push_back(parse_sample(text));
    } catch (const ParseError& e) {
      throw ParseError(where(path, lineno) + e.what());
    }
  });
  for (const auto& s : samples) {
    for (const auto& frame : s.frames) {
      for (const auto& face : frame) {
        try {
          store.resolve(face);
        } catch (const RefError& e) {
          throw RefError("sample '" + s.id + "': " + e.what());
        }
      }
    }
  }
  return samples;
}

std::vector<VideoSample> load_manifest(const std::filesystem::path& path) {
  EmbeddingStore store(path.parent_path());
  return load_manifest(path, store);
}

void write_manifest(std::span<const VideoSample> samples, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  for (const auto& s : samples) {
    nlohmann::json frames = nlohmann::json::array();
    for (const auto& frame : s.frames) {
      nlohmann::json faces = nlohmann::json::array();
      for (const auto& f : frame) {
        faces.push_back({{"box", {f.box.x, f.box.y, f.box.width, f.box.height}},
                         {"file", f.file},
                         {"row", f.row}});
      }
      frames.push_back(std::move(faces));
    }
    nlohmann::json line = {{"id", s.id}, {"label", s.label}, {"frames", std::move(frames)}};
    out << line.dump() << '\n';
  }
  if (!out) throw IoError("write failure on '" + path.string() + "'");
}

std::size_t select_primary_face(std::span<const FaceDetection> detections) {
  if (detections.empty()) throw EmptyInputError("no face detections to select from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < detections.size(); ++i) {
    if (detections[i].box.area() > detections[best].box.area()) best = i;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Side files

std::vector<std::int64_t> read_label_file(const std::filesystem::path& path) {
  std::vector<std::int64_t> labels;
  for_each_nonblank_line(path, [&](const std::string& text, std::size_t lineno) {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
      throw ParseError(where(path, lineno) + "expected an integer, got '" + text + "'");
    }
    labels.push_back(v);
  });
  return labels;
}

std::vector<double> read_value_file(const std::filesystem::path& path) {
  std::vector<double> values;
  for_each_nonblank_line(path, [&](const std::string& text, std::size_t lineno) {
    double v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
      throw ParseError(where(path, lineno) + "expected a number, got '" + text + "'");
    }
    values.push_back(v);
  });
  return values;
}

void write_label_file(std::span<const std::int64_t> labels, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  for (auto v : labels) out << v << '\n';
  if (!out) throw IoError("write failure on '" + path.string() + "'");
}

}  // namespace facepipe
