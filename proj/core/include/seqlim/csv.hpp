#pragma once

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

namespace seqlim {

/// Buffered CSV writer that lands on disk atomically: the content is written
/// to `<path>.tmp` and renamed into place on close().
class CsvWriter {
 public:
  explicit CsvWriter(std::filesystem::path path) : path_(std::move(path)) {}
  ~CsvWriter();

  void header(const std::vector<std::string>& names);
  void row(const std::vector<std::string>& cells);
  std::ostringstream& raw() { return buf_; }
  void close();

  static std::string num(double v);
  static std::string num(int v) { return std::to_string(v); }

 private:
  std::filesystem::path path_;
  std::ostringstream buf_;
  bool closed_ = false;
};

/// Write a whole string to `path` atomically (tmp file + rename).
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

std::string read_file(const std::filesystem::path& path);

}  // namespace seqlim
