#pragma once

// The tree library: one canonical JSON object per line.
//
// Appends take an exclusive flock on "<path>.lock", write the old content
// plus the new record to a temp file and rename it over the library, so a
// reader always sees some complete prefix of the appends.

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "fvrule/errors.hpp"
#include "fvrule/optree.hpp"
#include "fvrule/text.hpp"

namespace fvrule {

// Key-sorted compact JSON, one line.
inline std::string canonical_line(const OpTree& t) { return t.to_json().dump() + "\n"; }

namespace detail {

class FileLock {
 public:
  explicit FileLock(const std::string& path) : fd_(::open(path.c_str(), O_RDWR | O_CREAT, 0644)) {
    if (fd_ < 0) throw Error(ErrorCode::Io, "cannot open lock file '" + path + "'");
    if (::flock(fd_, LOCK_EX) != 0) {
      ::close(fd_);
      throw Error(ErrorCode::Io, "cannot lock '" + path + "'");
    }
  }
  ~FileLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

 private:
  int fd_;
};

inline void replace_file(const std::string& path, std::string_view content) {
  static std::atomic<unsigned> counter{0};
  const std::string tmp = path + ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  text::write_file(tmp, content);
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorCode::Io, "cannot replace '" + path + "'");
  }
}

}  // namespace detail

inline void library_append(const std::string& path, const OpTree& tree) {
  if (!tree.valid) throw Error(ErrorCode::InvalidTree, "tree '" + tree.id + "' is not valid");
  tree.check_structure();
  detail::FileLock lock(path + ".lock");
  std::string content;
  if (std::filesystem::exists(path)) content = text::read_file(path);
  if (!content.empty() && content.back() != '\n') content += '\n';
  content += canonical_line(tree);
  detail::replace_file(path, content);
}

struct LoadedLibrary {
  std::vector<OpTree> trees;
  std::vector<RecordError> errors;
};

inline LoadedLibrary parse_library(std::string_view content) {
  LoadedLibrary out;
  std::size_t line_no = 0;
  for (const auto& line : text::split_lines(content)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      out.trees.push_back(OpTree::from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      out.errors.push_back({line_no, ErrorCode::Schema, e.what()});
    } catch (const Error& e) {
      out.errors.push_back({line_no, e.code(), e.what()});
    }
  }
  return out;
}

// Throws IoError if the file cannot be read; bad records are reported in
// `errors` and skipped.
inline LoadedLibrary library_load(const std::string& path) {
  return parse_library(text::read_file(path));
}

inline std::string dump_library(const std::vector<OpTree>& trees) {
  std::string out;
  for (const auto& t : trees) out += canonical_line(t);
  return out;
}

// Overwrites the library with exactly these trees.
inline void save_library(const std::string& path, const std::vector<OpTree>& trees) {
  detail::FileLock lock(path + ".lock");
  detail::replace_file(path, dump_library(trees));
}

}  // namespace fvrule
