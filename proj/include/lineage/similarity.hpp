#pragma once

#include <lineage/model.hpp>

#include <compare>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lineage {

/// Whitespace-separated, lowercased, sorted tokens.
struct TokenBag {
    std::vector<std::string> tokens;

    static TokenBag from_lines(std::span<const std::string> lines);
    static TokenBag from_text(std::string_view text);

    bool empty() const { return tokens.empty(); }
    std::size_t size() const { return tokens.size(); }

    friend auto operator<=>(const TokenBag&, const TokenBag&) = default;
    friend bool operator==(const TokenBag&, const TokenBag&) = default;
};

/// Unit-cost edit distance over bytes.
std::size_t levenshtein(std::string_view a, std::string_view b);

/// 1 - levenshtein(a, b) / max(|a|, |b|); 1 when both are empty.
double string_similarity(std::string_view a, std::string_view b);

/// Closest-match score between two bags, averaged over both directions.
///
/// Each token of one bag is matched with its most similar token of the
/// other; the mean over those best matches gives the directed score. Two
/// empty bags score 1, exactly one empty bag scores 0.
double bag_score(const TokenBag& a, const TokenBag& b);

struct HunkFeatures {
    std::string heading;
    TokenBag insertions;
    TokenBag deletions;

    friend auto operator<=>(const HunkFeatures&, const HunkFeatures&) = default;
    friend bool operator==(const HunkFeatures&, const HunkFeatures&) = default;
};

struct FileFeatures {
    std::string path;
    std::vector<HunkFeatures> hunks;

    friend auto operator<=>(const FileFeatures&, const FileFeatures&) = default;
    friend bool operator==(const FileFeatures&, const FileFeatures&) = default;
};

/// Everything the rating needs from a patch, tokenized once. Files are kept
/// sorted by path so index order doubles as the canonical tie-break.
struct PatchFeatures {
    TokenBag message;
    std::vector<FileFeatures> files;
    std::size_t changed_lines = 0;

    static PatchFeatures of(const Patch& patch);
    static PatchFeatures of_diff(const Diff& diff);
};

/// Tag-stripped subject plus message, tokenized.
TokenBag message_tokens(const Patch& patch);

double message_similarity(const Patch& a, const Patch& b);
double diff_similarity(const Diff& a, const Diff& b, double tf, double th);
double diff_similarity(const PatchFeatures& a, const PatchFeatures& b, double tf, double th);

/// False when min(la, lb) / max(la, lb) < dlr.
bool passes_length_gate(std::size_t la, std::size_t lb, double dlr);

/// Combines component scores the way `rate` does, including the gate.
SimilarityScore combine_scores(double r_msg, double r_diff, std::size_t la, std::size_t lb,
                               double dlr, double w);

SimilarityScore rate(const Patch& a, const Patch& b, const SimilarityConfig& cfg);
SimilarityScore rate(const PatchFeatures& a, const PatchFeatures& b, const SimilarityConfig& cfg);

bool is_similar(const Patch& a, const Patch& b, const SimilarityConfig& cfg);
bool is_similar(const PatchFeatures& a, const PatchFeatures& b, const SimilarityConfig& cfg);

} // namespace lineage
