#pragma once

#include <cctype>
#include <filesystem>
#include <optional>
#include <string>

#include "vlmuq/util.hpp"

namespace vlmuq {

// Content-addressed response cache: one file per key, written via temp file +
// rename. Concurrent writers of the same key race benignly (identical content,
// last rename wins); readers never observe partial files.
class DiskCache {
 public:
  explicit DiskCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  std::optional<std::string> get(const std::string& key) const {
    std::filesystem::path p = path_for(key);
    if (!std::filesystem::exists(p)) return std::nullopt;
    return read_file(p);
  }

  bool contains(const std::string& key) const {
    return std::filesystem::exists(path_for(key));
  }

  void put(const std::string& key, std::string_view value) {
    atomic_write_file(path_for(key), value);
  }

  size_t size() const {
    size_t n = 0;
    // In-flight temp files carry a ".tmp.<n>" suffix; finished keys have none.
    for (const auto& e : std::filesystem::directory_iterator(dir_))
      if (e.is_regular_file() &&
          e.path().filename().string().find('.') == std::string::npos)
        ++n;
    return n;
  }

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path path_for(const std::string& key) const {
    for (char c : key)
      if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-')
        throw ValidationError("cache key is not filename-safe: " + key);
    return dir_ / key;
  }

  std::filesystem::path dir_;
};

}  // namespace vlmuq
