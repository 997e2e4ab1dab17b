#include <lineage/baselines.hpp>
#include <lineage/text.hpp>

#include <openssl/evp.h>
#include <tbb/parallel_for.h>

#include <algorithm>
#include <memory>
#include <stdexcept>

namespace lineage {

namespace {

std::size_t multiset_intersection(const std::vector<std::string>& a, const std::vector<std::string>& b)
{
    std::size_t count = 0;
    auto i = a.begin();
    auto j = b.begin();
    while (i != a.end() && j != b.end()) {
        if (*i < *j) {
            ++i;
        } else if (*j < *i) {
            ++j;
        } else {
            ++count;
            ++i;
            ++j;
        }
    }
    return count;
}

double fraction(const std::vector<std::string>& a, const std::vector<std::string>& b, PlusMinusDenominator denominator)
{
    std::size_t shared = multiset_intersection(a, b);
    std::size_t base = denominator == PlusMinusDenominator::smaller ? std::min(a.size(), b.size())
                                                                     : a.size() + b.size() - shared;
    if (base == 0)
        return 0.0;
    return static_cast<double>(shared) / static_cast<double>(base);
}

void split_by_kind(std::span<const Patch> patches, std::vector<Patch>& mails, std::vector<Patch>& commits)
{
    for (const auto& p : patches)
        (p.id.is_mail() ? mails : commits).push_back(p);
}

std::string md5_hex(const std::string& data)
{
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_md5(), nullptr) != 1
        || EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1
        || EVP_DigestFinal_ex(ctx.get(), digest, &length) != 1)
        throw std::runtime_error("md5 digest failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < length; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

std::string without_whitespace(const std::string& line)
{
    std::string out;
    for (char c : line)
        if (!text::is_space(c))
            out += c;
    return out;
}

} // namespace

std::vector<std::string> change_tuples(const Patch& patch)
{
    std::vector<std::string> tuples;
    for (const auto& file : patch.diff.files) {
        for (const auto& hunk : file.hunks) {
            for (const auto& line : hunk.deletions)
                tuples.push_back(file.path() + '\0' + '-' + line);
            for (const auto& line : hunk.insertions)
                tuples.push_back(file.path() + '\0' + '+' + line);
        }
    }
    std::sort(tuples.begin(), tuples.end());
    return tuples;
}

double plusminus_similarity(const Patch& a, const Patch& b, PlusMinusDenominator denominator)
{
    return fraction(change_tuples(a), change_tuples(b), denominator);
}

PlusMinusMatcher::PlusMinusMatcher(std::span<const Patch> patches, PlusMinusDenominator denominator, int window_days)
{
    split_by_kind(patches, m_mails, m_commits);
    m_table = PatchTable(m_mails, m_commits);
    IndexRange all { 0, m_table.size() };
    // Sharing a change tuple implies sharing a file, so tf = 1 loses nothing.
    m_pairs = candidate_index_pairs(m_table, all, all, 1.0, window_days);

    std::vector<std::vector<std::string>> tuples(m_table.size());
    tbb::parallel_for(std::size_t { 0 }, m_table.size(), [&](std::size_t i) { tuples[i] = change_tuples(m_table[i]); });
    m_fractions.resize(m_pairs.size());
    tbb::parallel_for(std::size_t { 0 }, m_pairs.size(), [&](std::size_t k) {
        m_fractions[k] = fraction(tuples[m_pairs[k].first], tuples[m_pairs[k].second], denominator);
    });
}

ClusterSet PlusMinusMatcher::cluster(double threshold) const
{
    DisjointSets sets(m_table.size());
    for (std::size_t k = 0; k < m_pairs.size(); ++k)
        if (m_fractions[k] >= threshold)
            sets.unite(m_pairs[k].first, m_pairs[k].second);
    return to_cluster_set(m_table, sets);
}

ClusterSet plusminus_cluster(std::span<const Patch> patches, double threshold, PlusMinusDenominator denominator,
                             int window_days)
{
    if (!(threshold >= 0.0 && threshold <= 1.0))
        throw ModelError("plus-minus threshold outside [0,1]");
    return PlusMinusMatcher(patches, denominator, window_days).cluster(threshold);
}

std::vector<std::string> hunk_checksums(const Patch& patch)
{
    std::vector<std::string> sums;
    for (const auto& file : patch.diff.files) {
        for (const auto& hunk : file.hunks) {
            if (hunk.changed_lines() == 0)
                continue;
            std::string normalized;
            for (const auto& line : hunk.deletions)
                normalized += '-' + without_whitespace(line) + '\n';
            for (const auto& line : hunk.insertions)
                normalized += '+' + without_whitespace(line) + '\n';
            sums.push_back(md5_hex(normalized));
        }
    }
    std::sort(sums.begin(), sums.end());
    sums.erase(std::unique(sums.begin(), sums.end()), sums.end());
    return sums;
}

ClusterSet checksum_cluster(std::span<const Patch> patches, int window_days)
{
    std::vector<Patch> mails, commits;
    split_by_kind(patches, mails, commits);
    PatchTable table(mails, commits);
    IndexRange all { 0, table.size() };
    auto pairs = candidate_index_pairs(table, all, all, 1.0, window_days);

    std::vector<std::vector<std::string>> sums(table.size());
    tbb::parallel_for(std::size_t { 0 }, table.size(), [&](std::size_t i) { sums[i] = hunk_checksums(table[i]); });
    DisjointSets sets(table.size());
    for (auto [i, j] : pairs)
        if (multiset_intersection(sums[i], sums[j]) > 0)
            sets.unite(i, j);
    return to_cluster_set(table, sets);
}

} // namespace lineage
