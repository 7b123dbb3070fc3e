// Copyright 2026 The muco Authors
// SPDX-License-Identifier: Apache-2.0

#include "muco/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "muco/error.hpp"

namespace muco {
namespace {

constexpr std::string_view kMagic = "MUCO-TENSORS";
constexpr std::string_view kVersion = "1";

void check_word(const std::string& w) {
  if (w.empty() || w.find_first_of(" \t\r\n=:,") != std::string::npos) {
    throw Error(ErrorCode::kInvalidConfig, "illegal header word: '" + w + "'");
  }
}

void put_le(std::ostream& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  char bytes[8];
  for (int i = 0; i < 8; ++i) {
    bytes[i] = static_cast<char>(bits & 0xff);
    bits >>= 8;
  }
  out.write(bytes, 8);
}

double get_le(const unsigned char* bytes) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | bytes[i];
  return std::bit_cast<double>(bits);
}

[[noreturn]] void malformed(const std::filesystem::path& path, const std::string& what) {
  throw Error(ErrorCode::kIo, path.string() + ": " + what);
}

std::size_t to_size(const std::string& s) { return static_cast<std::size_t>(std::stoull(s)); }

std::vector<double> labels_to_doubles(const std::vector<RowLabel>& labels) {
  std::vector<double> out;
  out.reserve(labels.size() * 4);
  for (const auto& l : labels) {
    out.push_back(static_cast<double>(l.image_index));
    out.push_back(static_cast<double>(l.turn_index));
    out.push_back(l.role == Role::kQuery ? 0.0 : 1.0);
    out.push_back(l.variant == Variant::kOriginal ? 0.0 : 1.0);
  }
  return out;
}

std::vector<RowLabel> doubles_to_labels(const std::vector<double>& v) {
  std::vector<RowLabel> out;
  for (std::size_t i = 0; i + 3 < v.size(); i += 4) {
    out.push_back({static_cast<std::size_t>(v[i]), static_cast<std::size_t>(v[i + 1]),
                   v[i + 2] == 0.0 ? Role::kQuery : Role::kTarget,
                   v[i + 3] == 0.0 ? Variant::kOriginal : Variant::kAugmented});
  }
  return out;
}

}  // namespace

const std::string& TensorFile::attribute(const std::string& key) const {
  for (const auto& [k, v] : attributes) {
    if (k == key) return v;
  }
  throw Error(ErrorCode::kIo, "tensor file has no attribute " + key);
}

const std::vector<double>& TensorFile::segment(const std::string& name) const {
  for (const auto& [k, v] : segments) {
    if (k == name) return v;
  }
  throw Error(ErrorCode::kIo, "tensor file has no segment " + name);
}

void write_tensor_file(const std::filesystem::path& path, const TensorFile& file) {
  std::ostringstream header;
  header << kMagic << ' ' << kVersion;
  for (const auto& [k, v] : file.attributes) {
    check_word(k);
    check_word(v);
    header << ' ' << k << '=' << v;
  }
  header << " segments=";
  for (std::size_t i = 0; i < file.segments.size(); ++i) {
    check_word(file.segments[i].first);
    header << (i ? "," : "") << file.segments[i].first << ':' << file.segments[i].second.size();
  }
  header << '\n';

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  const auto h = header.str();
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (const auto& seg : file.segments) {
    for (double v : seg.second) put_le(out, v);
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

TensorFile read_tensor_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::string header;
  if (!std::getline(in, header)) malformed(path, "missing header");

  std::istringstream words(header);
  std::string magic, version;
  words >> magic >> version;
  if (magic != kMagic || version != kVersion) malformed(path, "bad magic or version");

  TensorFile file;
  std::vector<std::pair<std::string, std::size_t>> layout;
  std::string word;
  while (words >> word) {
    const auto eq = word.find('=');
    if (eq == std::string::npos) malformed(path, "header word without '='");
    const auto key = word.substr(0, eq);
    const auto value = word.substr(eq + 1);
    if (key != "segments") {
      file.attributes.emplace_back(key, value);
      continue;
    }
    std::istringstream segs(value);
    std::string item;
    while (std::getline(segs, item, ',')) {
      const auto colon = item.find(':');
      if (colon == std::string::npos) malformed(path, "segment without size");
      layout.emplace_back(item.substr(0, colon), to_size(item.substr(colon + 1)));
    }
  }

  std::vector<unsigned char> buf;
  for (const auto& [name, count] : layout) {
    buf.resize(count * 8);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(in.gcount()) != buf.size()) malformed(path, "truncated payload");
    std::vector<double> values(count);
    for (std::size_t i = 0; i < count; ++i) values[i] = get_le(buf.data() + 8 * i);
    file.segments.emplace_back(name, std::move(values));
  }
  if (in.peek() != std::char_traits<char>::eof()) malformed(path, "trailing bytes");
  return file;
}

void save_encoder(const std::filesystem::path& path, const EncoderState& state,
                  const std::vector<std::pair<std::string, std::string>>& extra) {
  const auto& c = state.config();
  TensorFile file;
  file.attributes = {{"kind", "encoder"},
                     {"vocab_size", std::to_string(c.vocab_size)},
                     {"dim", std::to_string(c.dim)},
                     {"heads", std::to_string(c.heads)},
                     {"layers", std::to_string(c.layers)},
                     {"max_seq", std::to_string(c.max_seq)},
                     {"seed", std::to_string(c.seed)}};
  file.attributes.insert(file.attributes.end(), extra.begin(), extra.end());
  const auto params = state.params();
  for (const auto& seg : state.segments()) {
    file.segments.emplace_back(seg.name, std::vector<double>(params.begin() + seg.offset,
                                                             params.begin() + seg.offset + seg.size));
  }
  write_tensor_file(path, file);
}

EncoderState load_encoder(const std::filesystem::path& path,
                          std::vector<std::pair<std::string, std::string>>* extra) {
  const auto file = read_tensor_file(path);
  if (file.attribute("kind") != "encoder") malformed(path, "not an encoder checkpoint");
  EncoderConfig c;
  c.vocab_size = to_size(file.attribute("vocab_size"));
  c.dim = to_size(file.attribute("dim"));
  c.heads = to_size(file.attribute("heads"));
  c.layers = to_size(file.attribute("layers"));
  c.max_seq = to_size(file.attribute("max_seq"));
  c.seed = std::stoull(file.attribute("seed"));

  const auto layout = parameter_layout(c);
  if (layout.size() != file.segments.size()) malformed(path, "segment count mismatch");
  std::vector<double> params;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& [name, values] = file.segments[i];
    if (name != layout[i].name || values.size() != layout[i].size) {
      malformed(path, "segment " + name + " does not match the encoder layout");
    }
    params.insert(params.end(), values.begin(), values.end());
  }
  if (extra) {
    extra->clear();
    for (const auto& kv : file.attributes) {
      static const std::vector<std::string> known = {"kind", "vocab_size", "dim", "heads",
                                                     "layers", "max_seq", "seed"};
      if (std::find(known.begin(), known.end(), kv.first) == known.end()) extra->push_back(kv);
    }
  }
  return make_encoder_state(c, std::move(params));
}

void write_embedding_dump(const std::filesystem::path& path, const EmbeddingMatrix& queries,
                          const EmbeddingMatrix& targets) {
  if (queries.dim() != targets.dim()) {
    throw Error(ErrorCode::kLabelMismatch, "query and target dims differ");
  }
  TensorFile file;
  file.attributes = {{"kind", "embeddings"},
                     {"dim", std::to_string(queries.dim())},
                     {"query_rows", std::to_string(queries.rows())},
                     {"target_rows", std::to_string(targets.rows())}};
  file.segments.emplace_back("queries", queries.values().data());
  file.segments.emplace_back("query_labels", labels_to_doubles(queries.labels()));
  file.segments.emplace_back("targets", targets.values().data());
  file.segments.emplace_back("target_labels", labels_to_doubles(targets.labels()));
  write_tensor_file(path, file);
}

std::pair<EmbeddingMatrix, EmbeddingMatrix> read_embedding_dump(
    const std::filesystem::path& path) {
  const auto file = read_tensor_file(path);
  if (file.attribute("kind") != "embeddings") malformed(path, "not an embedding dump");
  const auto dim = to_size(file.attribute("dim"));
  return {EmbeddingMatrix(doubles_to_labels(file.segment("query_labels")), dim,
                          file.segment("queries")),
          EmbeddingMatrix(doubles_to_labels(file.segment("target_labels")), dim,
                          file.segment("targets"))};
}

}  // namespace muco
