#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "thermosleep/common.hpp"

namespace thermosleep {

// All artifacts are written to a sibling temp file and renamed into place on
// commit, so interrupted runs never leave truncated outputs.
class AtomicFile {
 public:
  explicit AtomicFile(std::string path)
      : path_(std::move(path)), tmp_path_(path_ + ".tmp"), out_(tmp_path_, std::ios::binary) {
    if (!out_) throw ValidationError("cannot write file: " + tmp_path_);
  }
  ~AtomicFile() {
    if (!committed_) {
      out_.close();
      std::error_code ec;
      std::filesystem::remove(tmp_path_, ec);
    }
  }
  AtomicFile(const AtomicFile&) = delete;
  AtomicFile& operator=(const AtomicFile&) = delete;

  std::ostream& stream() { return out_; }

  void commit() {
    out_.flush();
    if (!out_) throw ValidationError("write failed: " + tmp_path_);
    out_.close();
    std::filesystem::rename(tmp_path_, path_);
    committed_ = true;
  }

 private:
  std::string path_;
  std::string tmp_path_;
  std::ofstream out_;
  bool committed_ = false;
};

inline void write_file_atomic(const std::string& path, std::string_view bytes) {
  AtomicFile f(path);
  f.stream().write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  f.commit();
}

// Plain comma-separated values, no quoting: every schema in docs/formats.md
// is comma-free by construction.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header) : file_(path) {
    write_row(header);
  }

  void write_row(const std::vector<std::string>& fields) {
    auto& os = file_.stream();
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) os.put(',');
      os << fields[i];
    }
    os.put('\n');
  }

  void commit() { file_.commit(); }

 private:
  AtomicFile file_;
};

class CsvReader {
 public:
  explicit CsvReader(const std::string& path) : path_(path), in_(path) {
    if (!in_) throw ValidationError("cannot open file: " + path);
    std::string line;
    if (!std::getline(in_, line)) throw ValidationError("empty file: " + path);
    strip_cr(line);
    split(line, header_);
    for (std::size_t i = 0; i < header_.size(); ++i) index_[std::string(header_[i])] = i;
    line_no_ = 1;
  }

  const std::string& path() const { return path_; }
  std::size_t line_no() const { return line_no_; }
  std::size_t n_cols() const { return header_.size(); }
  const std::vector<std::string>& header() const { return header_; }

  std::size_t col(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end())
      throw ValidationError(path_ + ": missing required column '" + name + "'");
    return it->second;
  }

  std::optional<std::size_t> optional_col(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  // Advances to the next data row; fields are views into an internal buffer
  // valid until the next call.
  bool next() {
    if (!std::getline(in_, line_)) return false;
    ++line_no_;
    strip_cr(line_);
    split(line_, fields_);
    if (fields_.size() != header_.size())
      throw ValidationError(path_ + ":" + std::to_string(line_no_) + ": expected " +
                            std::to_string(header_.size()) + " fields, got " +
                            std::to_string(fields_.size()));
    return true;
  }

  std::string_view field(std::size_t i) const { return fields_[i]; }

  std::string context(const std::string& col_name) const {
    return path_ + ":" + std::to_string(line_no_) + " column " + col_name;
  }

  double num_field(std::size_t i, const std::string& col_name) const {
    return parse_double(fields_[i], context(col_name));
  }

  // Empty cell = missing value.
  std::optional<double> opt_num_field(std::size_t i, const std::string& col_name) const {
    if (fields_[i].empty()) return std::nullopt;
    return parse_double(fields_[i], context(col_name));
  }

 private:
  static void strip_cr(std::string& s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
  }
  void split(const std::string& line, std::vector<std::string_view>& out) const {
    out.clear();
    std::size_t start = 0;
    while (true) {
      const std::size_t pos = line.find(',', start);
      if (pos == std::string::npos) {
        out.emplace_back(line.data() + start, line.size() - start);
        break;
      }
      out.emplace_back(line.data() + start, pos - start);
      start = pos + 1;
    }
  }
  void split(const std::string& line, std::vector<std::string>& out) const {
    std::vector<std::string_view> views;
    split(line, views);
    out.assign(views.begin(), views.end());
  }

  std::string path_;
  std::ifstream in_;
  std::vector<std::string> header_;
  std::unordered_map<std::string, std::size_t> index_;
  std::string line_;
  std::vector<std::string_view> fields_;
  std::size_t line_no_ = 0;
};

inline std::string missing_or(const std::optional<double>& v) {
  return v ? fmt_double(*v) : std::string();
}

}  // namespace thermosleep
