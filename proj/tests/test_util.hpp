#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "tmprompt/error.hpp"

namespace testutil {

using tmprompt::Tokens;

inline Tokens random_tokens(std::mt19937_64& rng, std::size_t max_len,
                            int alphabet, std::size_t min_len = 0) {
  std::uniform_int_distribution<std::size_t> len(min_len, max_len);
  std::uniform_int_distribution<int> sym(0, alphabet - 1);
  Tokens out(len(rng));
  for (auto& t : out) t = std::string(1, static_cast<char>('a' + sym(rng)));
  return out;
}

// Edit distance by breadth-first search over single-token edits of `a`,
// restricted to the symbols of a and b and to lengths up to
// max(|a|, |b|) (deletions can always be done first, so longer
// intermediates are never needed). Independent of any DP; meant for
// small alphabets and lengths.
inline std::size_t bfs_edit_distance(const Tokens& a, const Tokens& b) {
  std::vector<std::string> symbols(a.begin(), a.end());
  symbols.insert(symbols.end(), b.begin(), b.end());
  std::sort(symbols.begin(), symbols.end());
  symbols.erase(std::unique(symbols.begin(), symbols.end()), symbols.end());
  const std::size_t s = symbols.size();
  const std::size_t cap = std::max(a.size(), b.size());
  if (s == 0) return 0;

  // State key: offset of its length plus its base-s value.
  std::vector<std::size_t> offset{0}, power{1};
  for (std::size_t len = 0; len <= cap; ++len) {
    offset.push_back(offset.back() + power.back());
    power.push_back(power.back() * s);
    if (offset.back() > 20'000'000) throw tmprompt::Error("oracle too large");
  }
  using Seq = std::vector<std::uint8_t>;
  auto encode = [&](const Seq& q) {
    std::size_t v = 0;
    for (std::size_t i = q.size(); i-- > 0;) v = v * s + q[i];
    return offset[q.size()] + v;
  };
  auto to_seq = [&](const Tokens& t) {
    Seq q;
    for (const auto& x : t) {
      q.push_back(static_cast<std::uint8_t>(
          std::lower_bound(symbols.begin(), symbols.end(), x) - symbols.begin()));
    }
    return q;
  };

  const Seq start = to_seq(a);
  const std::size_t goal = encode(to_seq(b));
  std::vector<int> dist(offset.back(), -1);
  std::deque<Seq> queue{start};
  dist[encode(start)] = 0;
  while (!queue.empty()) {
    Seq q = std::move(queue.front());
    queue.pop_front();
    const int d = dist[encode(q)];
    if (encode(q) == goal) return static_cast<std::size_t>(d);
    auto visit = [&](const Seq& n) {
      auto& slot = dist[encode(n)];
      if (slot < 0) {
        slot = d + 1;
        queue.push_back(n);
      }
    };
    for (std::size_t i = 0; i < q.size(); ++i) {
      Seq del = q;
      del.erase(del.begin() + static_cast<long>(i));
      visit(del);
      for (std::uint8_t c = 0; c < s; ++c) {
        if (c == q[i]) continue;
        Seq sub = q;
        sub[i] = c;
        visit(sub);
      }
    }
    if (q.size() < cap) {
      for (std::size_t i = 0; i <= q.size(); ++i) {
        for (std::uint8_t c = 0; c < s; ++c) {
          Seq ins = q;
          ins.insert(ins.begin() + static_cast<long>(i), c);
          visit(ins);
        }
      }
    }
  }
  throw tmprompt::Error("unreachable");
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("tmprompt_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const {
    return (path_ / name).string();
  }

 private:
  std::filesystem::path path_;
};

}  // namespace testutil
