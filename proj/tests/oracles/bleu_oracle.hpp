#pragma once

// Brute-force sentence BLEU used as a test oracle. Deliberately shares no
// code with the library: n-grams are compared element by element and counts
// come from linear scans.

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

namespace oracle {

using Tokens = std::vector<std::string>;

inline Tokens tokenize(const std::string& s) {
  std::istringstream in(s);
  Tokens out;
  for (std::string t; in >> t;) out.push_back(t);
  return out;
}

inline std::vector<Tokens> ngrams(const Tokens& toks, int n) {
  std::vector<Tokens> out;
  for (int i = 0; i + n <= static_cast<int>(toks.size()); ++i) {
    out.emplace_back(toks.begin() + i, toks.begin() + i + n);
  }
  return out;
}

inline int count_of(const std::vector<Tokens>& grams, const Tokens& g) {
  int c = 0;
  for (const auto& x : grams) c += x == g ? 1 : 0;
  return c;
}

inline double bleu(const std::string& hyp_text, const std::vector<std::string>& ref_texts,
                   int max_order = 4, double eps = 0.1) {
  const Tokens hyp = tokenize(hyp_text);
  if (hyp.empty()) return 0.0;
  std::vector<Tokens> refs;
  for (const auto& r : ref_texts) refs.push_back(tokenize(r));

  double product = 1.0;
  for (int n = 1; n <= max_order; ++n) {
    const auto hyp_grams = ngrams(hyp, n);
    // Count each distinct hypothesis n-gram once, clipped by its max
    // count in any single reference.
    std::vector<Tokens> seen;
    int matched = 0;
    for (const auto& g : hyp_grams) {
      if (std::find(seen.begin(), seen.end(), g) != seen.end()) continue;
      seen.push_back(g);
      int max_ref = 0;
      for (const auto& r : refs) max_ref = std::max(max_ref, count_of(ngrams(r, n), g));
      matched += std::min(count_of(hyp_grams, g), max_ref);
    }
    const int total = static_cast<int>(hyp_grams.size());
    product *= matched > 0 ? static_cast<double>(matched) / total : eps / std::max(total, 1);
  }
  const double geo = std::pow(product, 1.0 / max_order);

  const int c = static_cast<int>(hyp.size());
  int best_len = -1;
  for (const auto& r : refs) {
    const int len = static_cast<int>(r.size());
    if (best_len < 0 || std::abs(len - c) < std::abs(best_len - c) ||
        (std::abs(len - c) == std::abs(best_len - c) && len < best_len)) {
      best_len = len;
    }
  }
  const double bp = c > best_len ? 1.0 : std::exp(1.0 - static_cast<double>(best_len) / c);
  return bp * geo;
}

}  // namespace oracle
