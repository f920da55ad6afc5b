#include "seqlim/csv.hpp"

#include <cstdio>
#include <fstream>

#include "seqlim/common.hpp"

namespace seqlim {

CsvWriter::~CsvWriter() {
  if (!closed_) {
    try {
      close();
    } catch (...) {
      // destructor must not throw; a failed flush leaves the tmp file behind
    }
  }
}

void CsvWriter::header(const std::vector<std::string>& names) {
  row(names);
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  for (size_t i = 0; i < cells.size(); ++i) {
    if (i) buf_ << ',';
    buf_ << cells[i];
  }
  buf_ << '\n';
}

void CsvWriter::close() {
  if (closed_) return;
  write_file_atomic(path_, buf_.str());
  closed_ = true;
}

std::string CsvWriter::num(double v) {
  char tmp[40];
  std::snprintf(tmp, sizeof tmp, "%.17g", v);
  return tmp;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw NumericError("cannot open for writing: " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw NumericError("short write: " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DomainError("cannot open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace seqlim
