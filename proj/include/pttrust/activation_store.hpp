#ifndef PTTRUST_ACTIVATION_STORE_HPP_
#define PTTRUST_ACTIVATION_STORE_HPP_

// PTAS: streaming container for per-line internal-state vectors.
//
//   "PTAS" | format_version u32 | header_json_len u32 | header JSON
//   record_count x { snippet_id u32, line_index u32, token_index u32,
//                    line_token_count u32, label_flag u8, 3 x 0x00,
//                    dim x f32 }
//
// All integers and floats are little-endian.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ranges>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pttrust/binary_io.hpp"
#include "pttrust/errors.hpp"

namespace pttrust {

inline constexpr char kStoreMagic[4] = {'P', 'T', 'A', 'S'};
inline constexpr std::uint32_t kStoreFormatVersion = 1;
inline constexpr std::size_t kRecordHeaderBytes = 20;

/// line_index used for the snippet's final-token record (snippet classifier
/// feature); never collides with a real line.
inline constexpr std::uint32_t kFinalTokenLine = 0xFFFFFFFFu;

enum class LabelFlag : std::uint8_t { unknown = 0, correct = 1, buggy = 2 };

inline const char* to_string(LabelFlag f) {
  switch (f) {
    case LabelFlag::correct: return "correct";
    case LabelFlag::buggy: return "buggy";
    default: return "unknown";
  }
}

struct StoreHeader {
  std::uint32_t format_version = kStoreFormatVersion;
  std::string model_id;
  std::uint32_t layer_index = 0;
  std::uint32_t dim = 0;
  std::uint64_t record_count = 0;
  std::string dtype_tag = "f32le";

  nlohmann::json to_json() const {
    return {{"format_version", format_version}, {"model_id", model_id},
            {"layer_index", layer_index},       {"dim", dim},
            {"record_count", record_count},     {"dtype_tag", dtype_tag}};
  }

  static StoreHeader from_json(const nlohmann::json& j) {
    StoreHeader h;
    h.format_version = j.at("format_version").get<std::uint32_t>();
    h.model_id = j.at("model_id").get<std::string>();
    h.layer_index = j.at("layer_index").get<std::uint32_t>();
    h.dim = j.at("dim").get<std::uint32_t>();
    h.record_count = j.at("record_count").get<std::uint64_t>();
    h.dtype_tag = j.at("dtype_tag").get<std::string>();
    return h;
  }

  bool operator==(const StoreHeader&) const = default;
};

struct ActivationRecord {
  std::uint32_t snippet_id = 0;
  std::uint32_t line_index = 0;
  std::uint32_t token_index = 0;
  std::uint32_t line_token_count = 1;
  LabelFlag label = LabelFlag::unknown;
  std::vector<float> vector;

  bool is_final_token() const noexcept { return line_index == kFinalTokenLine; }
  bool operator==(const ActivationRecord&) const = default;
};

inline std::uint64_t record_key(std::uint32_t snippet_id, std::uint32_t line_index) {
  return (static_cast<std::uint64_t>(snippet_id) << 32) | line_index;
}

inline std::size_t record_bytes(std::uint32_t dim) { return kRecordHeaderBytes + 4u * dim; }

struct WriteSummary {
  std::uint64_t count = 0;
  std::uint64_t bytes = 0;
};

/// Single-writer PTAS sink. Records go to `<path>.tmp`; finish() patches the
/// header count and renames into place. A writer destroyed before finish()
/// leaves no file behind.
class StoreWriter {
 public:
  StoreWriter(std::filesystem::path path, StoreHeader header)
      : path_(std::move(path)), header_(std::move(header)) {
    if (header_.dim == 0) throw StoreError("store dim must be >= 1");
    if (header_.dtype_tag != "f32le") throw StoreError("unsupported dtype " + header_.dtype_tag);
    header_.format_version = kStoreFormatVersion;
    tmp_path_ = path_;
    tmp_path_ += ".tmp";
    file_ = std::fopen(tmp_path_.c_str(), "wb");
    if (file_ == nullptr) throw StoreError("cannot open " + tmp_path_.string() + " for writing");

    // Reserve slack so the final count fits without moving the records.
    header_.record_count = 0;
    json_len_ = header_.to_json().dump().size() + 20;
    std::string head(kStoreMagic, 4);
    io::put_u32(head, kStoreFormatVersion);
    io::put_u32(head, static_cast<std::uint32_t>(json_len_));
    head += padded_json();
    write_bytes(head);
  }

  StoreWriter(const StoreWriter&) = delete;
  StoreWriter& operator=(const StoreWriter&) = delete;

  ~StoreWriter() { abort(); }

  void append(const ActivationRecord& rec) {
    if (file_ == nullptr) throw StoreError("store writer is closed");
    if (rec.vector.size() != header_.dim) {
      abort();
      throw StoreError("dimension mismatch at record " + std::to_string(header_.record_count) +
                       ": expected " + std::to_string(header_.dim) + ", got " +
                       std::to_string(rec.vector.size()));
    }
    for (float v : rec.vector) {
      if (!std::isfinite(v)) {
        abort();
        throw StoreError("non-finite entry in record (snippet " + std::to_string(rec.snippet_id) +
                         ", line " + std::to_string(rec.line_index) + ")");
      }
    }
    if (!seen_.insert(record_key(rec.snippet_id, rec.line_index)).second) {
      abort();
      throw StoreError("duplicate record (snippet " + std::to_string(rec.snippet_id) + ", line " +
                       std::to_string(rec.line_index) + ")");
    }
    buf_.clear();
    io::put_u32(buf_, rec.snippet_id);
    io::put_u32(buf_, rec.line_index);
    io::put_u32(buf_, rec.token_index);
    io::put_u32(buf_, rec.line_token_count);
    buf_.push_back(static_cast<char>(rec.label));
    buf_.append(3, '\0');
    io::put_f32_span(buf_, rec.vector);
    write_bytes(buf_);
    ++header_.record_count;
  }

  WriteSummary finish() {
    if (file_ == nullptr) throw StoreError("store writer is closed");
    const std::string json = padded_json();
    bool ok = std::fseek(file_, 12, SEEK_SET) == 0 &&
              std::fwrite(json.data(), 1, json.size(), file_) == json.size() &&
              std::fflush(file_) == 0 && ::fsync(::fileno(file_)) == 0;
    ok = (std::fclose(file_) == 0) && ok;
    file_ = nullptr;
    if (!ok) {
      std::filesystem::remove(tmp_path_);
      throw StoreError("failed to finalize " + path_.string());
    }
    std::filesystem::rename(tmp_path_, path_);
    return {header_.record_count, 12 + json_len_ + header_.record_count * record_bytes(header_.dim)};
  }

  const StoreHeader& header() const noexcept { return header_; }

 private:
  std::string padded_json() const {
    std::string json = header_.to_json().dump();
    if (json.size() > json_len_) throw StoreError("store header overflow");
    json.append(json_len_ - json.size(), ' ');
    return json;
  }

  void write_bytes(const std::string& bytes) {
    if (std::fwrite(bytes.data(), 1, bytes.size(), file_) != bytes.size()) {
      abort();
      throw StoreError("short write to " + tmp_path_.string());
    }
  }

  void abort() noexcept {
    if (file_ != nullptr) {
      std::fclose(file_);
      file_ = nullptr;
      std::error_code ec;
      std::filesystem::remove(tmp_path_, ec);
    }
  }

  std::filesystem::path path_;
  std::filesystem::path tmp_path_;
  StoreHeader header_;
  std::size_t json_len_ = 0;
  std::FILE* file_ = nullptr;
  std::string buf_;
  std::unordered_set<std::uint64_t> seen_;
};

template <std::ranges::input_range R>
  requires std::same_as<std::ranges::range_value_t<R>, ActivationRecord>
WriteSummary write_store(const std::filesystem::path& path, const StoreHeader& header,
                         R&& records) {
  StoreWriter writer(path, header);
  for (const ActivationRecord& r : records) writer.append(r);
  return writer.finish();
}

using RecordFilter = std::function<bool(std::uint32_t snippet_id, LabelFlag label)>;

/// Forward-only PTAS reader. Records rejected by the filter are skipped by
/// seeking past their vectors.
class StoreReader {
 public:
  explicit StoreReader(const std::filesystem::path& path, RecordFilter filter = {})
      : path_(path), filter_(std::move(filter)) {
    in_.open(path, std::ios::binary);
    if (!in_) throw StoreError("cannot open store " + path.string());
    std::error_code ec;
    file_size_ = std::filesystem::file_size(path, ec);
    if (ec) throw StoreError("cannot stat store " + path.string());

    unsigned char pre[12];
    if (io::read_exact(in_, pre, 12) != 12 || std::memcmp(pre, kStoreMagic, 4) != 0)
      throw StoreError("bad magic in " + path.string(), 0);
    const std::uint32_t version = io::get_u32(pre + 4);
    if (version != kStoreFormatVersion)
      throw StoreError("unsupported store version " + std::to_string(version), 4);
    const std::uint32_t json_len = io::get_u32(pre + 8);
    if (12ull + json_len > file_size_) throw StoreError("truncated store header", 12);
    std::string json(json_len, '\0');
    in_.read(json.data(), json_len);
    try {
      header_ = StoreHeader::from_json(nlohmann::json::parse(json));
    } catch (const nlohmann::json::exception& e) {
      throw StoreError(std::string("malformed store header: ") + e.what(), 12);
    }
    if (header_.format_version != version) throw StoreError("header/version disagreement", 12);
    if (header_.dim == 0) throw StoreError("store dim must be >= 1", 12);
    if (header_.dtype_tag != "f32le") throw StoreError("unsupported dtype " + header_.dtype_tag, 12);
    offset_ = 12ull + json_len;
    rec_bytes_ = record_bytes(header_.dim);
  }

  const StoreHeader& header() const noexcept { return header_; }

  /// Next record passing the filter, or nullopt at end of store.
  std::optional<ActivationRecord> next() {
    unsigned char head[kRecordHeaderBytes];
    while (index_ < header_.record_count) {
      if (offset_ + rec_bytes_ > file_size_)
        throw StoreError("truncated record " + std::to_string(index_) + " at offset " +
                             std::to_string(offset_),
                         offset_);
      in_.seekg(static_cast<std::streamoff>(offset_));
      if (io::read_exact(in_, head, kRecordHeaderBytes) != kRecordHeaderBytes)
        throw StoreError("truncated record at offset " + std::to_string(offset_), offset_);
      ActivationRecord rec;
      rec.snippet_id = io::get_u32(head);
      rec.line_index = io::get_u32(head + 4);
      rec.token_index = io::get_u32(head + 8);
      rec.line_token_count = io::get_u32(head + 12);
      if (head[16] > 2) throw StoreError("invalid label flag", offset_ + 16);
      rec.label = static_cast<LabelFlag>(head[16]);
      const std::uint64_t at = offset_;
      offset_ += rec_bytes_;
      ++index_;
      if (filter_ && !filter_(rec.snippet_id, rec.label)) continue;

      raw_.resize(4u * header_.dim);
      if (io::read_exact(in_, raw_.data(), raw_.size()) != raw_.size())
        throw StoreError("truncated record at offset " + std::to_string(at), at);
      rec.vector.resize(header_.dim);
      for (std::uint32_t i = 0; i < header_.dim; ++i) rec.vector[i] = io::get_f32(raw_.data() + 4 * i);
      return rec;
    }
    if (!checked_tail_) {
      checked_tail_ = true;
      if (offset_ != file_size_)
        throw StoreError("store has " + std::to_string(file_size_ - offset_) +
                             " trailing bytes after the last record",
                         offset_);
    }
    return std::nullopt;
  }

 private:
  std::filesystem::path path_;
  RecordFilter filter_;
  std::ifstream in_;
  std::uint64_t file_size_ = 0;
  StoreHeader header_;
  std::uint64_t offset_ = 0;
  std::uint64_t index_ = 0;
  std::size_t rec_bytes_ = 0;
  bool checked_tail_ = false;
  std::vector<unsigned char> raw_;
};

inline std::vector<ActivationRecord> read_store(const std::filesystem::path& path,
                                                RecordFilter filter = {},
                                                StoreHeader* header_out = nullptr) {
  StoreReader reader(path, std::move(filter));
  if (header_out != nullptr) *header_out = reader.header();
  std::vector<ActivationRecord> out;
  while (auto rec = reader.next()) out.push_back(std::move(*rec));
  return out;
}

struct SnippetGroup {
  std::uint32_t snippet_id = 0;
  std::vector<ActivationRecord> lines;  // ascending line_index
};

/// Groups records by snippet in first-seen order; each group is sorted by
/// line_index. Final-token records (kFinalTokenLine) sort last.
template <std::ranges::input_range R>
std::vector<SnippetGroup> group_by_snippet(R&& records) {
  std::vector<SnippetGroup> groups;
  std::unordered_map<std::uint32_t, std::size_t> slot;
  std::unordered_set<std::uint64_t> seen;
  for (auto&& rec : records) {
    if (!seen.insert(record_key(rec.snippet_id, rec.line_index)).second)
      throw DataError("duplicate record (snippet " + std::to_string(rec.snippet_id) + ", line " +
                      std::to_string(rec.line_index) + ")");
    auto [it, inserted] = slot.try_emplace(rec.snippet_id, groups.size());
    if (inserted) groups.push_back({rec.snippet_id, {}});
    groups[it->second].lines.push_back(rec);
  }
  for (auto& g : groups)
    std::ranges::sort(g.lines, {}, &ActivationRecord::line_index);
  return groups;
}

}  // namespace pttrust

#endif  // PTTRUST_ACTIVATION_STORE_HPP_
