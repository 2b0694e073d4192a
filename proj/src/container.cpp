#include "stg/container.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace stg {

static_assert(std::endian::native == std::endian::little,
              "container payloads are little-endian float64");
static_assert(sizeof(Scalar) == 8, "container payloads are float64");

void TensorContainer::add(const std::string& name, const Mat& value) {
  for (const auto& [existing, _] : entries_) {
    if (existing == name) throw ConfigError("duplicate tensor entry: " + name);
  }
  entries_.emplace_back(name, value);
}

bool TensorContainer::has(const std::string& name) const {
  for (const auto& [existing, _] : entries_) {
    if (existing == name) return true;
  }
  return false;
}

const Mat& TensorContainer::get(const std::string& name) const {
  for (const auto& [existing, value] : entries_) {
    if (existing == name) return value;
  }
  throw ConfigError("missing tensor entry: " + name);
}

void TensorContainer::save(const std::string& stem) const {
  Json manifest;
  manifest["format"] = "stg.tensors.v1";
  Json list = Json::array();
  std::uint64_t offset = 0;
  std::ofstream bin(stem + ".bin", std::ios::binary | std::ios::trunc);
  if (!bin) throw ConfigError("cannot write file: " + stem + ".bin");
  for (const auto& [name, value] : entries_) {
    Json entry;
    entry["name"] = name;
    entry["rows"] = value.rows();
    entry["cols"] = value.cols();
    entry["offset"] = offset;
    list.push_back(entry);
    const std::streamsize bytes =
        static_cast<std::streamsize>(value.size()) * static_cast<std::streamsize>(sizeof(Scalar));
    // Mat is row-major and dense, so the buffer is already the wire format.
    bin.write(reinterpret_cast<const char*>(value.data()), bytes);
    offset += static_cast<std::uint64_t>(bytes);
  }
  if (!bin) throw ConfigError("failed while writing file: " + stem + ".bin");
  manifest["entries"] = std::move(list);
  manifest["meta"] = meta.is_null() ? Json::object() : meta;
  write_json_file(stem + ".json", manifest);
}

TensorContainer TensorContainer::load(const std::string& stem) {
  const Json manifest = parse_json_file(stem + ".json");
  if (!manifest.contains("format") || manifest["format"] != "stg.tensors.v1") {
    throw ConfigError(stem + ".json: not a tensor container manifest");
  }
  std::ifstream bin(stem + ".bin", std::ios::binary);
  if (!bin) throw ConfigError("cannot open file: " + stem + ".bin");
  TensorContainer out;
  out.meta = manifest.value("meta", Json::object());
  for (const auto& entry : manifest.at("entries")) {
    const std::string name = entry.at("name").get<std::string>();
    const Index rows = entry.at("rows").get<Index>();
    const Index cols = entry.at("cols").get<Index>();
    const std::uint64_t offset = entry.at("offset").get<std::uint64_t>();
    if (rows < 0 || cols < 0) throw ConfigError(stem + ": negative shape for " + name);
    Mat value(rows, cols);
    bin.seekg(static_cast<std::streamoff>(offset));
    bin.read(reinterpret_cast<char*>(value.data()),
             static_cast<std::streamsize>(value.size()) * static_cast<std::streamsize>(sizeof(Scalar)));
    if (!bin) throw ConfigError(stem + ".bin: truncated payload for " + name);
    out.entries_.emplace_back(name, std::move(value));
  }
  return out;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write file: " + path);
  out << text;
  if (!out) throw ConfigError("failed while writing file: " + path);
}

Json parse_json_file(const std::string& path) {
  const std::string text = read_text_file(path);
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ConfigError(path + ": invalid JSON");
  return j;
}

void write_json_file(const std::string& path, const Json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace stg
