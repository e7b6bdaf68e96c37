// Copyright 2026 The lewisim Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Emergent-language metrics over the deterministic object -> message table:
// topographic similarity (Hamming vs Levenshtein, Spearman-correlated),
// message length statistics, uniqueness and entropy.

#ifndef LEWISIM_ANALYSIS_HPP_
#define LEWISIM_ANALYSIS_HPP_

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <unordered_map>
#include <vector>

#include "lewisim/agents.hpp"
#include "lewisim/world.hpp"

namespace lewisim {

/// Degenerate rank correlations are surfaced, never silently reported as 0.
class UndefinedCorrelationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One greedy message per object, in dataset order; deterministic for a fixed
/// sender.
struct LanguageTable {
  std::vector<ObjectInstance> objects;
  std::vector<Message> messages;

  size_t size() const { return objects.size(); }
};

inline LanguageTable dump_language(const Sender& sender, const Dataset& ds,
                                   const std::vector<int>& object_ids) {
  LanguageTable table;
  table.objects.reserve(object_ids.size());
  for (int id : object_ids) table.objects.push_back(ds.objects[id]);
  const Tensor xs = onehot_batch(ds, object_ids);
  BatchPolicySample roll =
      sender_rollout(nullptr, sender, xs, DecodeMode::kGreedy, nullptr);
  table.messages = std::move(roll.messages);
  return table;
}

inline LanguageTable dump_language(const Sender& sender, const Dataset& ds) {
  std::vector<int> ids(ds.objects.size());
  std::iota(ids.begin(), ids.end(), 0);
  return dump_language(sender, ds, ids);
}

/// Unit-cost edit distance over content symbols (EOS stripped).
inline int levenshtein(const Message& m1, const Message& m2) {
  const auto& a = m1.symbols;
  const auto& b = m2.symbols;
  std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
  for (size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int>(j);
  for (size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (size_t j = 1; j <= b.size(); ++j) {
      const int subst = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, subst});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline int hamming(const ObjectInstance& a, const ObjectInstance& b) {
  if (a.attrs.size() != b.attrs.size()) {
    throw ValueError("hamming: attribute counts differ");
  }
  int d = 0;
  for (size_t k = 0; k < a.attrs.size(); ++k) d += a.attrs[k] != b.attrs[k];
  return d;
}

namespace detail {

inline bool message_less(const Message& a, const Message& b) {
  if (a.symbols != b.symbols) return a.symbols < b.symbols;
  return a.terminated < b.terminated;
}

// Message-type counts in canonical (sorted) order, for order-stable sums.
inline std::vector<std::pair<Message, int>> message_counts(
    const LanguageTable& table) {
  std::unordered_map<Message, int, MessageHash> counts;
  for (const Message& m : table.messages) counts[m] += 1;
  std::vector<std::pair<Message, int>> out(counts.begin(), counts.end());
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return message_less(a.first, b.first);
  });
  return out;
}

// Average-fractional ranks; ties share the mean rank of their block.
inline std::vector<double> fractional_ranks(const std::vector<double>& xs) {
  const size_t n = xs.size();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double mean_rank = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

inline double pearson(const std::vector<double>& xs,
                      const std::vector<double>& ys) {
  const size_t n = xs.size();
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw UndefinedCorrelationError(
        "correlation undefined: an input list is constant");
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace detail

/// Spearman rank correlation with average ranks for ties.
inline double spearman(const std::vector<double>& xs,
                       const std::vector<double>& ys) {
  if (xs.size() != ys.size()) {
    throw ValueError("spearman: lists have different lengths");
  }
  if (xs.size() < 2) {
    throw UndefinedCorrelationError("spearman: need at least 2 observations");
  }
  return detail::pearson(detail::fractional_ranks(xs),
                         detail::fractional_ranks(ys));
}

/// Spearman correlation between pairwise attribute Hamming distances and
/// pairwise message edit distances, over all unordered object pairs.
inline double topographic_similarity(const LanguageTable& table) {
  const size_t n = table.size();
  if (n < 2) {
    throw UndefinedCorrelationError(
        "topographic similarity: need at least 2 objects");
  }
  std::vector<double> input_d, message_d;
  input_d.reserve(n * (n - 1) / 2);
  message_d.reserve(n * (n - 1) / 2);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      input_d.push_back(hamming(table.objects[i], table.objects[j]));
      message_d.push_back(levenshtein(table.messages[i], table.messages[j]));
    }
  }
  return spearman(input_d, message_d);
}

struct LengthStats {
  double mean_length = 0.0;
  std::vector<int> histogram;  // counts for lengths 0..max observed
  // Spearman of (message-type frequency, length); Zipf's law of abbreviation
  // shows up as a negative value. Absent when either list is constant.
  std::optional<double> freq_length_spearman;
};

inline LengthStats length_stats(const LanguageTable& table) {
  if (table.size() == 0) throw ValueError("length_stats: empty table");
  LengthStats out;
  int max_len = 0;
  for (const Message& m : table.messages)
    max_len = std::max(max_len, m.effective_length());
  out.histogram.assign(max_len + 1, 0);
  for (const Message& m : table.messages) {
    out.histogram[m.effective_length()] += 1;
    out.mean_length += m.effective_length();
  }
  out.mean_length /= static_cast<double>(table.size());

  std::vector<double> freqs, lens;
  for (const auto& [msg, count] : detail::message_counts(table)) {
    freqs.push_back(count);
    lens.push_back(msg.effective_length());
  }
  try {
    out.freq_length_spearman = spearman(freqs, lens);
  } catch (const UndefinedCorrelationError&) {
    out.freq_length_spearman = std::nullopt;
  }
  return out;
}

struct UniquenessStats {
  double distinct_ratio = 0.0;   // #distinct messages / #objects
  double message_entropy = 0.0;  // Shannon entropy (nats) of the empirical law
};

inline UniquenessStats uniqueness_and_entropy(const LanguageTable& table) {
  if (table.size() == 0) throw ValueError("uniqueness: empty table");
  const auto counts = detail::message_counts(table);
  UniquenessStats out;
  out.distinct_ratio =
      static_cast<double>(counts.size()) / static_cast<double>(table.size());
  for (const auto& [msg, count] : counts) {
    const double p = static_cast<double>(count) / table.size();
    out.message_entropy -= p * std::log(p);
  }
  return out;
}

}  // namespace lewisim

#endif  // LEWISIM_ANALYSIS_HPP_
