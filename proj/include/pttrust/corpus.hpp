#ifndef PTTRUST_CORPUS_HPP_
#define PTTRUST_CORPUS_HPP_

// Snippet files: JSON lines, one SnippetFileEntry per line.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "pttrust/binary_io.hpp"
#include "pttrust/errors.hpp"

namespace pttrust {

struct CodeSnippet {
  std::uint32_t snippet_id = 0;
  std::string language;
  std::vector<std::string> lines;

  bool operator==(const CodeSnippet&) const = default;
};

struct SnippetFileEntry {
  CodeSnippet snippet;
  std::string task;
  std::optional<std::vector<std::vector<double>>> token_confidences;  // one list per line
  std::optional<std::vector<std::uint32_t>> error_lines;
  // Inline states, an alternative to a PTAS store at assess time.
  std::optional<std::vector<std::vector<float>>> line_states;
  std::optional<std::vector<float>> final_state;
};

inline void validate(const CodeSnippet& s) {
  if (s.lines.empty()) throw DataError("snippet " + std::to_string(s.snippet_id) + " has no lines");
  for (const auto& l : s.lines)
    if (l.find('\n') != std::string::npos || l.find('\r') != std::string::npos)
      throw DataError("snippet " + std::to_string(s.snippet_id) + " has a line with an embedded newline");
}

inline nlohmann::json to_json(const SnippetFileEntry& e) {
  nlohmann::json j = {{"snippet_id", e.snippet.snippet_id},
                      {"language", e.snippet.language},
                      {"task", e.task},
                      {"lines", e.snippet.lines}};
  if (e.token_confidences) j["token_confidences"] = *e.token_confidences;
  if (e.error_lines) j["error_lines"] = *e.error_lines;
  if (e.line_states) j["line_states"] = *e.line_states;
  if (e.final_state) j["final_state"] = *e.final_state;
  return j;
}

inline SnippetFileEntry entry_from_json(const nlohmann::json& j) {
  SnippetFileEntry e;
  e.snippet.snippet_id = j.at("snippet_id").get<std::uint32_t>();
  e.snippet.language = j.value("language", std::string{});
  e.task = j.value("task", std::string{});
  e.snippet.lines = j.at("lines").get<std::vector<std::string>>();
  if (j.contains("token_confidences"))
    e.token_confidences = j["token_confidences"].get<std::vector<std::vector<double>>>();
  if (j.contains("error_lines")) e.error_lines = j["error_lines"].get<std::vector<std::uint32_t>>();
  if (j.contains("line_states")) e.line_states = j["line_states"].get<std::vector<std::vector<float>>>();
  if (j.contains("final_state")) e.final_state = j["final_state"].get<std::vector<float>>();
  validate(e.snippet);
  const auto n = e.snippet.lines.size();
  if (e.token_confidences && e.token_confidences->size() != n)
    throw DataError("token_confidences must have one list per line");
  if (e.line_states && e.line_states->size() != n)
    throw DataError("line_states must have one vector per line");
  if (e.error_lines)
    for (auto idx : *e.error_lines)
      if (idx >= n) throw DataError("error line " + std::to_string(idx) + " out of range");
  return e;
}

inline std::vector<SnippetFileEntry> parse_snippets(std::istream& in, const std::string& source) {
  std::vector<SnippetFileEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(entry_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw DataError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<SnippetFileEntry> read_snippets(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open snippet file " + path.string());
  return parse_snippets(in, path.string());
}

inline std::string serialize_snippets(const std::vector<SnippetFileEntry>& entries) {
  std::string out;
  for (const auto& e : entries) {
    out += to_json(e).dump();
    out += '\n';
  }
  return out;
}

inline void write_snippets(const std::filesystem::path& path,
                           const std::vector<SnippetFileEntry>& entries) {
  io::write_file_atomic(path, serialize_snippets(entries));
}

/// Fallback token unit when the extractor recorded no counts.
inline std::uint32_t whitespace_token_count(const std::string& line) {
  std::istringstream ss(line);
  std::uint32_t n = 0;
  for (std::string tok; ss >> tok;) ++n;
  return n;
}

}  // namespace pttrust

#endif  // PTTRUST_CORPUS_HPP_
