#include "bladekit/metrics.hpp"

#include "bladekit/util.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <unordered_map>
#include <unordered_set>

namespace bladekit::metrics {

namespace {

constexpr double kEpsilon = 1e-9;

// n-gram rendered as one key; 0x1f never appears in tokenizer output
std::unordered_map<std::string, int> ngram_counts(const std::vector<std::string>& tokens, int n) {
    std::unordered_map<std::string, int> counts;
    if (static_cast<int>(tokens.size()) < n) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        std::string key = tokens[i];
        for (int k = 1; k < n; ++k) {
            key += '\x1f';
            key += tokens[i + k];
        }
        ++counts[key];
    }
    return counts;
}

}  // namespace

double bleu4(const std::string& candidate, const std::vector<std::string>& references) {
    const std::vector<std::string> cand = util::tokenize(candidate);
    if (cand.empty() || references.empty()) return 0.0;

    std::vector<std::vector<std::string>> refs;
    refs.reserve(references.size());
    for (const std::string& r : references) refs.push_back(util::tokenize(r));

    double log_sum = 0.0;
    for (int n = 1; n <= 4; ++n) {
        const auto cand_counts = ngram_counts(cand, n);
        std::unordered_map<std::string, int> max_ref_counts;
        for (const auto& ref : refs) {
            for (const auto& [gram, count] : ngram_counts(ref, n)) {
                max_ref_counts[gram] = std::max(max_ref_counts[gram], count);
            }
        }
        long total = 0;
        long matched = 0;
        for (const auto& [gram, count] : cand_counts) {
            total += count;
            const auto hit = max_ref_counts.find(gram);
            if (hit != max_ref_counts.end()) matched += std::min(count, hit->second);
        }
        const double p =
            (total == 0 || matched == 0) ? kEpsilon : static_cast<double>(matched) / total;
        log_sum += std::log(p);
    }

    // closest reference length; ties break toward the shorter reference
    const long c = static_cast<long>(cand.size());
    long r = static_cast<long>(refs[0].size());
    for (const auto& ref : refs) {
        const long len = static_cast<long>(ref.size());
        const long best = std::labs(r - c);
        if (std::labs(len - c) < best || (std::labs(len - c) == best && len < r)) r = len;
    }
    const double bp = (c > r) ? 1.0 : std::exp(1.0 - static_cast<double>(r) / c);
    return bp * std::exp(log_sum / 4.0);
}

double rouge_l(const std::string& candidate, const std::string& reference) {
    const std::vector<std::string> cand = util::tokenize(candidate);
    const std::vector<std::string> ref = util::tokenize(reference);
    if (cand.empty() || ref.empty()) return 0.0;

    // two-row LCS table
    std::vector<int> prev(ref.size() + 1, 0);
    std::vector<int> curr(ref.size() + 1, 0);
    for (std::size_t i = 1; i <= cand.size(); ++i) {
        for (std::size_t j = 1; j <= ref.size(); ++j) {
            curr[j] = (cand[i - 1] == ref[j - 1]) ? prev[j - 1] + 1
                                                  : std::max(prev[j], curr[j - 1]);
        }
        std::swap(prev, curr);
    }
    const int lcs = prev[ref.size()];
    if (lcs == 0) return 0.0;
    const double p = static_cast<double>(lcs) / cand.size();
    const double r = static_cast<double>(lcs) / ref.size();
    return 2.0 * p * r / (p + r);
}

bool has_common_ngram(std::string_view a, std::string_view b, int n) {
    if (n <= 0) return false;
    const auto grams_a = ngram_counts(util::tokenize(a), n);
    if (grams_a.empty()) return false;
    for (const auto& [gram, count] : ngram_counts(util::tokenize(b), n)) {
        (void)count;
        if (grams_a.find(gram) != grams_a.end()) return true;
    }
    return false;
}

}  // namespace bladekit::metrics
