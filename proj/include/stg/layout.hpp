#pragma once

#include <string>
#include <vector>

#include "stg/types.hpp"

namespace stg {

// How the flattened token sequence is organized.  Node tokens always appear
// time-major: step 0's nodes, then step 1's, and so on.
//  - kNone:  node tokens only, l = T*N
//  - kCls:   one summary token at position 0, l = 1 + T*N
//  - kGraph: one delimiter token opening every step's block, l = T*(N+1)
enum class TokenMode { kNone, kCls, kGraph };

TokenMode token_mode_from_string(const std::string& text);
std::string to_string(TokenMode mode);

struct TokenLayout {
  TokenMode mode = TokenMode::kCls;
  int time_steps = 0;  // context length
  int nodes = 0;

  long node_token_count() const { return static_cast<long>(time_steps) * nodes; }

  long tokens() const {
    switch (mode) {
      case TokenMode::kNone: return node_token_count();
      case TokenMode::kCls: return 1 + node_token_count();
      case TokenMode::kGraph: return static_cast<long>(time_steps) * (nodes + 1);
    }
    return 0;
  }

  bool is_special(long pos) const {
    if (mode == TokenMode::kCls) return pos == 0;
    if (mode == TokenMode::kGraph) return pos % (nodes + 1) == 0;
    return false;
  }

  // Node index of a token, -1 for special tokens.
  int node_of(long pos) const {
    if (mode == TokenMode::kCls) return pos == 0 ? -1 : static_cast<int>((pos - 1) % nodes);
    if (mode == TokenMode::kGraph) {
      const long r = pos % (nodes + 1);
      return r == 0 ? -1 : static_cast<int>(r - 1);
    }
    return static_cast<int>(pos % nodes);
  }

  // Time step of a token; the summary token has no step (-1), a delimiter
  // token belongs to the step it opens.
  int time_of(long pos) const {
    if (mode == TokenMode::kCls) return pos == 0 ? -1 : static_cast<int>((pos - 1) / nodes);
    if (mode == TokenMode::kGraph) return static_cast<int>(pos / (nodes + 1));
    return static_cast<int>(pos / nodes);
  }

  // Flat position of node token (t, i).
  long position(int t, int i) const {
    const long base = static_cast<long>(t) * (mode == TokenMode::kGraph ? nodes + 1 : nodes);
    switch (mode) {
      case TokenMode::kNone: return base + i;
      case TokenMode::kCls: return 1 + base + i;
      case TokenMode::kGraph: return base + 1 + i;
    }
    return -1;
  }

  // All node-token positions in (t, i) order; length T*N.
  std::vector<long> node_positions() const {
    std::vector<long> out;
    out.reserve(static_cast<std::size_t>(node_token_count()));
    for (int t = 0; t < time_steps; ++t) {
      for (int i = 0; i < nodes; ++i) out.push_back(position(t, i));
    }
    return out;
  }
};

}  // namespace stg
