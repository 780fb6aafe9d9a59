#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace bladekit::metrics {

// BLEU-4: geometric mean of the modified n-gram precisions for n = 1..4
// (uniform weights, counts clipped per n-gram by the maximum reference
// count) times the brevity penalty against the closest reference length
// (ties break toward the shorter reference). A precision whose numerator or
// denominator is zero is replaced by epsilon = 1e-9. An empty candidate or
// an empty reference list scores 0. Tokens are lowercased ASCII
// alphanumeric runs; leading/trailing whitespace never matters.
double bleu4(const std::string& candidate, const std::vector<std::string>& references);

// ROUGE-L F-measure over the token longest common subsequence:
// P = LCS/|cand|, R = LCS/|ref|, F = 2PR/(P+R); 0 when either side is empty
// or the LCS is.
double rouge_l(const std::string& candidate, const std::string& reference);

// True when the two texts share at least one token n-gram of length n.
bool has_common_ngram(std::string_view a, std::string_view b, int n);

}  // namespace bladekit::metrics
