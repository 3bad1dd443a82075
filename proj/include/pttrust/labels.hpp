#ifndef PTTRUST_LABELS_HPP_
#define PTTRUST_LABELS_HPP_

// Append-only reviewer label log (JSON lines). Later records for a snippet
// supersede earlier ones when read back.

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "json.hpp"
#include "pttrust/errors.hpp"

namespace pttrust {

struct LabelRecord {
  std::uint32_t snippet_id = 0;
  std::vector<std::uint32_t> error_lines;  // sorted, unique
  std::string stored_at;                   // UTC, ISO 8601

  bool operator==(const LabelRecord&) const = default;
};

inline nlohmann::json to_json(const LabelRecord& r) {
  return {{"snippet_id", r.snippet_id}, {"error_lines", r.error_lines}, {"stored_at", r.stored_at}};
}

inline LabelRecord label_from_json(const nlohmann::json& j) {
  LabelRecord r;
  r.snippet_id = j.at("snippet_id").get<std::uint32_t>();
  r.error_lines = j.at("error_lines").get<std::vector<std::uint32_t>>();
  r.stored_at = j.value("stored_at", std::string{});
  std::ranges::sort(r.error_lines);
  r.error_lines.erase(std::unique(r.error_lines.begin(), r.error_lines.end()), r.error_lines.end());
  return r;
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const auto secs = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[40];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

/// Latest label per snippet. A missing file is an empty log. An unterminated
/// final line is a torn append and is ignored.
inline std::map<std::uint32_t, LabelRecord> read_labels(const std::filesystem::path& path) {
  std::map<std::uint32_t, LabelRecord> out;
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    if (std::filesystem::exists(path)) throw DataError("cannot open labels file " + path.string());
    return out;
  }
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    if (nl == std::string::npos) break;
    ++line_no;
    const std::string line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto rec = label_from_json(nlohmann::json::parse(line));
      out[rec.snippet_id] = std::move(rec);
    } catch (const std::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

/// Thread-safe appender. Each record is written with one write(2) on an
/// O_APPEND descriptor and fsync'd before append() returns.
class LabelLog {
 public:
  explicit LabelLog(std::filesystem::path path) : path_(std::move(path)), latest_(read_labels(path_)) {}

  LabelRecord append(std::uint32_t snippet_id, std::vector<std::uint32_t> error_lines) {
    std::ranges::sort(error_lines);
    error_lines.erase(std::unique(error_lines.begin(), error_lines.end()), error_lines.end());
    std::unique_lock lock(mu_);
    LabelRecord rec{snippet_id, std::move(error_lines), utc_timestamp()};
    const std::string line = to_json(rec).dump() + "\n";
    const int fd = ::open(path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (fd < 0) throw DataError("cannot open labels file " + path_.string() + ": " + std::strerror(errno));
    ssize_t n;
    do {
      n = ::write(fd, line.data(), line.size());
    } while (n < 0 && errno == EINTR);
    const bool ok = n == static_cast<ssize_t>(line.size()) && ::fsync(fd) == 0;
    ::close(fd);
    if (!ok) throw DataError("failed to persist label for snippet " + std::to_string(snippet_id));
    latest_[snippet_id] = rec;
    return rec;
  }

  std::optional<LabelRecord> latest(std::uint32_t snippet_id) const {
    std::shared_lock lock(mu_);
    auto it = latest_.find(snippet_id);
    if (it == latest_.end()) return std::nullopt;
    return it->second;
  }

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::shared_mutex mu_;
  std::map<std::uint32_t, LabelRecord> latest_;
};

}  // namespace pttrust

#endif  // PTTRUST_LABELS_HPP_
