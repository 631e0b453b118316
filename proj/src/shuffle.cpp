#include "premir/shuffle.hpp"

#include <array>
#include <vector>

namespace premir {

namespace {

int code(char c) {
  switch (c) {
    case 'A': return 0;
    case 'C': return 1;
    case 'G': return 2;
    default: return 3;
  }
}

}  // namespace

std::string dinucleotide_shuffle(std::string_view seq, Rng& rng) {
  const std::size_t n = seq.size();
  if (n <= 2) return std::string(seq);

  std::array<std::vector<char>, 4> edges;
  for (std::size_t k = 0; k + 1 < n; ++k) edges[code(seq[k])].push_back(seq[k + 1]);
  const int last = code(seq[n - 1]);

  // Pick one exit edge per vertex so the exit edges form a tree rooted at
  // the last character; rejection sampling over independent choices.
  std::array<int, 4> exit_edge{-1, -1, -1, -1};
  for (;;) {
    for (int v = 0; v < 4; ++v) {
      exit_edge[v] = (v != last && !edges[v].empty())
                         ? static_cast<int>(uniform_index(rng, edges[v].size()))
                         : -1;
    }
    bool tree = true;
    for (int v = 0; v < 4 && tree; ++v) {
      if (exit_edge[v] < 0) continue;
      int cur = v;
      for (int steps = 0; cur != last; ++steps) {
        if (steps > 4 || exit_edge[cur] < 0) {
          tree = false;
          break;
        }
        cur = code(edges[cur][static_cast<std::size_t>(exit_edge[cur])]);
      }
    }
    if (tree) break;
  }

  for (int v = 0; v < 4; ++v) {
    auto& list = edges[v];
    if (list.empty()) continue;
    std::size_t fixed = list.size();
    if (exit_edge[v] >= 0) {
      std::swap(list[static_cast<std::size_t>(exit_edge[v])], list.back());
      fixed = list.size() - 1;
    }
    for (std::size_t i = fixed; i > 1; --i) std::swap(list[i - 1], list[uniform_index(rng, i)]);
  }

  std::string out;
  out.reserve(n);
  out.push_back(seq[0]);
  std::array<std::size_t, 4> next{};
  int cur = code(seq[0]);
  for (std::size_t k = 1; k < n; ++k) {
    const char c = edges[cur][next[cur]++];
    out.push_back(c);
    cur = code(c);
  }
  return out;
}

}  // namespace premir
