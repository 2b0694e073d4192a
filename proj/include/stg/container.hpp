#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "stg/types.hpp"

namespace stg {

using Json = nlohmann::ordered_json;

// Named dense matrices serialized as one raw binary blob plus a JSON sidecar.
// <stem>.bin holds row-major little-endian float64 payloads back to back;
// <stem>.json lists name/rows/cols/offset per entry plus caller metadata.
// Entry order is the insertion order, which makes writes byte-deterministic.
class TensorContainer {
 public:
  void add(const std::string& name, const Mat& value);
  bool has(const std::string& name) const;
  const Mat& get(const std::string& name) const;
  const std::vector<std::pair<std::string, Mat>>& entries() const { return entries_; }

  Json meta;  // free-form caller metadata, round-tripped verbatim

  // Writes <stem>.bin and <stem>.json.
  void save(const std::string& stem) const;
  static TensorContainer load(const std::string& stem);

 private:
  std::vector<std::pair<std::string, Mat>> entries_;
};

// Reads a whole file; throws ConfigError when missing.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

Json parse_json_file(const std::string& path);
void write_json_file(const std::string& path, const Json& j);

}  // namespace stg
