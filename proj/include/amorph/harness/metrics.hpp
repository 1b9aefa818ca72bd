#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "amorph/error.hpp"

namespace amorph {

// Line-delimited JSON records, one per iteration or evaluation rollout.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path, bool append = false)
      : path_(path), out_(path, append ? std::ios::app : std::ios::trunc) {
    require(static_cast<bool>(out_), ErrorKind::io, "cannot open metrics file " + path);
  }

  void write(const nlohmann::json& record) {
    out_ << record.dump() << '\n';
    out_.flush();
    require(static_cast<bool>(out_), ErrorKind::io, "write failed for " + path_);
  }

 private:
  std::string path_;
  std::ofstream out_;
};

inline std::vector<nlohmann::json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::io, "cannot read " + path);
  std::vector<nlohmann::json> out;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (line.empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::io, path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace amorph
