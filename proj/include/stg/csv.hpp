#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stg/types.hpp"

namespace stg {

// Minimal CSV: comma separated, no quoting (none of the consumed or produced
// files need it), trailing CR tolerated, first row is the header.
struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when absent
};

Csv read_csv(const std::string& path);

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

// Shortest-exact decimal for doubles: survives a write/read round trip
// bit-for-bit and is byte-stable across runs.
std::string format_full(Scalar v);

Scalar parse_double(const std::string& text, const std::string& what);
long parse_long(const std::string& text, const std::string& what);

// 'YYYY-MM-DD HH:MM:SS' <-> seconds since the Unix epoch, no time zone.
std::int64_t parse_timestamp(const std::string& text);
std::string format_timestamp(std::int64_t epoch_seconds);

}  // namespace stg
