#include <lineage/diff_parse.hpp>
#include <lineage/similarity.hpp>
#include <lineage/text.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

namespace lineage {

namespace {

void append_tokens(std::vector<std::string>& out, std::string_view line)
{
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && text::is_space(line[i]))
            ++i;
        std::size_t start = i;
        while (i < line.size() && !text::is_space(line[i]))
            ++i;
        if (i > start)
            out.push_back(text::to_lower(line.substr(start, i - start)));
    }
}

struct Candidate {
    double score;
    std::size_t left;
    std::size_t right;
};

// Greedy one-to-one assignment by descending score; index order breaks ties.
std::vector<Candidate> greedy_match(std::vector<Candidate> candidates, std::size_t n_left, std::size_t n_right)
{
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& x, const Candidate& y) {
        return std::tie(y.score, x.left, x.right) < std::tie(x.score, y.left, y.right);
    });
    std::vector<bool> used_left(n_left), used_right(n_right);
    std::vector<Candidate> matched;
    for (const auto& c : candidates) {
        if (used_left[c.left] || used_right[c.right])
            continue;
        used_left[c.left] = used_right[c.right] = true;
        matched.push_back(c);
    }
    return matched;
}

// A threshold of 1 means exact equality, which skips the edit distance.
double thresholded_similarity(std::string_view a, std::string_view b, double threshold)
{
    if (threshold >= 1.0)
        return a == b ? 1.0 : 0.0;
    return string_similarity(a, b);
}

double hunk_score(const HunkFeatures& a, const HunkFeatures& b)
{
    double sum = 0.0;
    int parts = 0;
    auto part = [&](const TokenBag& x, const TokenBag& y) {
        if (x.empty() && y.empty())
            return;
        ++parts;
        if (x.empty() || y.empty())
            return;
        sum += bag_score(x, y);
    };
    part(a.insertions, b.insertions);
    part(a.deletions, b.deletions);
    return parts == 0 ? 1.0 : sum / parts;
}

// Assumes a is the canonically smaller side.
double oriented_diff_similarity(const PatchFeatures& a, const PatchFeatures& b, double tf, double th)
{
    std::vector<Candidate> file_candidates;
    for (std::size_t i = 0; i < a.files.size(); ++i) {
        for (std::size_t j = 0; j < b.files.size(); ++j) {
            double s = thresholded_similarity(a.files[i].path, b.files[j].path, tf);
            if (s >= tf)
                file_candidates.push_back({ s, i, j });
        }
    }

    double total = 0.0;
    std::size_t matched_hunks = 0;
    for (const auto& fm : greedy_match(std::move(file_candidates), a.files.size(), b.files.size())) {
        const auto& fa = a.files[fm.left];
        const auto& fb = b.files[fm.right];
        std::vector<Candidate> hunk_candidates;
        for (std::size_t i = 0; i < fa.hunks.size(); ++i) {
            for (std::size_t j = 0; j < fb.hunks.size(); ++j) {
                double s = thresholded_similarity(fa.hunks[i].heading, fb.hunks[j].heading, th);
                if (s >= th)
                    hunk_candidates.push_back({ s, i, j });
            }
        }
        for (const auto& hm : greedy_match(std::move(hunk_candidates), fa.hunks.size(), fb.hunks.size())) {
            total += hunk_score(fa.hunks[hm.left], fb.hunks[hm.right]);
            ++matched_hunks;
        }
    }
    return matched_hunks == 0 ? 0.0 : total / static_cast<double>(matched_hunks);
}

// Tokens are sorted, so equal tokens are adjacent.
struct UniqueTokens {
    std::vector<std::string_view> tokens;
    std::vector<std::size_t> counts;

    explicit UniqueTokens(const TokenBag& bag)
    {
        for (const auto& t : bag.tokens) {
            if (!tokens.empty() && tokens.back() == t) {
                ++counts.back();
            } else {
                tokens.push_back(t);
                counts.push_back(1);
            }
        }
    }
};

double best_match(std::string_view x, const UniqueTokens& other)
{
    if (std::binary_search(other.tokens.begin(), other.tokens.end(), x))
        return 1.0;
    double best = 0.0;
    for (std::string_view y : other.tokens) {
        double longer = static_cast<double>(std::max(x.size(), y.size()));
        double length_gap = static_cast<double>(x.size() > y.size() ? x.size() - y.size() : y.size() - x.size());
        // The length difference alone bounds the achievable similarity.
        if (1.0 - length_gap / longer <= best)
            continue;
        best = std::max(best, string_similarity(x, y));
    }
    return best;
}

double directed_score(const UniqueTokens& from, std::size_t from_size, const UniqueTokens& to)
{
    double sum = 0.0;
    for (std::size_t i = 0; i < from.tokens.size(); ++i)
        sum += static_cast<double>(from.counts[i]) * best_match(from.tokens[i], to);
    return sum / static_cast<double>(from_size);
}

} // namespace

TokenBag TokenBag::from_lines(std::span<const std::string> lines)
{
    TokenBag bag;
    for (const auto& line : lines)
        append_tokens(bag.tokens, line);
    std::sort(bag.tokens.begin(), bag.tokens.end());
    return bag;
}

TokenBag TokenBag::from_text(std::string_view text)
{
    TokenBag bag;
    append_tokens(bag.tokens, text);
    std::sort(bag.tokens.begin(), bag.tokens.end());
    return bag;
}

std::size_t levenshtein(std::string_view a, std::string_view b)
{
    if (a.size() < b.size())
        std::swap(a, b);
    if (b.empty())
        return a.size();
    thread_local std::vector<std::size_t> row;
    row.resize(b.size() + 1);
    std::iota(row.begin(), row.end(), std::size_t { 0 });
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diagonal = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            std::size_t above = row[j];
            std::size_t substitute = diagonal + (a[i - 1] == b[j - 1] ? 0 : 1);
            row[j] = std::min({ above + 1, row[j - 1] + 1, substitute });
            diagonal = above;
        }
    }
    return row[b.size()];
}

double string_similarity(std::string_view a, std::string_view b)
{
    std::size_t longer = std::max(a.size(), b.size());
    if (longer == 0)
        return 1.0;
    if (a == b)
        return 1.0;
    return 1.0 - static_cast<double>(levenshtein(a, b)) / static_cast<double>(longer);
}

double bag_score(const TokenBag& a, const TokenBag& b)
{
    if (a.empty() && b.empty())
        return 1.0;
    if (a.empty() || b.empty())
        return 0.0;
    UniqueTokens ua(a), ub(b);
    double forward = directed_score(ua, a.size(), ub);
    double backward = directed_score(ub, b.size(), ua);
    return (forward + backward) / 2.0;
}

TokenBag message_tokens(const Patch& patch)
{
    std::vector<std::string> lines;
    lines.reserve(patch.message.size() + 1);
    lines.push_back(patch.subject);
    lines.insert(lines.end(), patch.message.begin(), patch.message.end());
    return TokenBag::from_lines(strip_tags(lines));
}

PatchFeatures PatchFeatures::of_diff(const Diff& diff)
{
    PatchFeatures f;
    for (const auto& file : diff.files) {
        FileFeatures ff { file.path(), {} };
        for (const auto& hunk : file.hunks)
            ff.hunks.push_back({ hunk.heading, TokenBag::from_lines(hunk.insertions), TokenBag::from_lines(hunk.deletions) });
        f.files.push_back(std::move(ff));
    }
    std::sort(f.files.begin(), f.files.end());
    f.changed_lines = diff.total_changed_lines();
    return f;
}

PatchFeatures PatchFeatures::of(const Patch& patch)
{
    PatchFeatures f = of_diff(patch.diff);
    f.message = message_tokens(patch);
    return f;
}

double message_similarity(const Patch& a, const Patch& b)
{
    return bag_score(message_tokens(a), message_tokens(b));
}

double diff_similarity(const PatchFeatures& a, const PatchFeatures& b, double tf, double th)
{
    // Evaluating from the canonically smaller side makes the greedy matching,
    // and therefore the score, exactly symmetric.
    if (std::tie(b.files) < std::tie(a.files))
        return oriented_diff_similarity(b, a, tf, th);
    return oriented_diff_similarity(a, b, tf, th);
}

double diff_similarity(const Diff& a, const Diff& b, double tf, double th)
{
    return diff_similarity(PatchFeatures::of_diff(a), PatchFeatures::of_diff(b), tf, th);
}

bool passes_length_gate(std::size_t la, std::size_t lb, double dlr)
{
    std::size_t larger = std::max(la, lb);
    if (larger == 0)
        return true;
    double ratio = static_cast<double>(std::min(la, lb)) / static_cast<double>(larger);
    return !(ratio < dlr);
}

SimilarityScore combine_scores(double r_msg, double r_diff, std::size_t la, std::size_t lb, double dlr, double w)
{
    SimilarityScore score;
    if (!passes_length_gate(la, lb, dlr)) {
        score.gated = true;
        return score;
    }
    score.r_msg = r_msg;
    score.r_diff = r_diff;
    // Same value as w*r_msg + (1-w)*r_diff, but exactly 1 when both parts are 1.
    score.combined = std::clamp(r_diff + w * (r_msg - r_diff), 0.0, 1.0);
    return score;
}

SimilarityScore rate(const PatchFeatures& a, const PatchFeatures& b, const SimilarityConfig& cfg)
{
    if (!passes_length_gate(a.changed_lines, b.changed_lines, cfg.dlr))
        return combine_scores(0.0, 0.0, a.changed_lines, b.changed_lines, cfg.dlr, cfg.w);
    double r_msg = bag_score(a.message, b.message);
    double r_diff = diff_similarity(a, b, cfg.tf, cfg.th);
    return combine_scores(r_msg, r_diff, a.changed_lines, b.changed_lines, cfg.dlr, cfg.w);
}

SimilarityScore rate(const Patch& a, const Patch& b, const SimilarityConfig& cfg)
{
    return rate(PatchFeatures::of(a), PatchFeatures::of(b), cfg);
}

bool is_similar(const PatchFeatures& a, const PatchFeatures& b, const SimilarityConfig& cfg)
{
    return rate(a, b, cfg).combined >= cfg.ta;
}

bool is_similar(const Patch& a, const Patch& b, const SimilarityConfig& cfg)
{
    return rate(a, b, cfg).combined >= cfg.ta;
}

} // namespace lineage
