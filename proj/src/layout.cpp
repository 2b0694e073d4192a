#include "stg/layout.hpp"

namespace stg {

TokenMode token_mode_from_string(const std::string& text) {
  if (text == "none") return TokenMode::kNone;
  if (text == "cls") return TokenMode::kCls;
  if (text == "graph") return TokenMode::kGraph;
  throw ConfigError("unknown token mode '" + text + "' (expected none, cls, or graph)");
}

std::string to_string(TokenMode mode) {
  switch (mode) {
    case TokenMode::kNone: return "none";
    case TokenMode::kCls: return "cls";
    case TokenMode::kGraph: return "graph";
  }
  return "none";
}

}  // namespace stg
