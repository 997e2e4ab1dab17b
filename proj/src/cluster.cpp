#include <lineage/cluster.hpp>

#include <tbb/parallel_for.h>

#include <algorithm>
#include <numeric>
#include <string>
#include <unordered_map>
#include <unordered_set>

namespace lineage {

DisjointSets::DisjointSets(std::size_t n)
    : m_parent(n)
{
    std::iota(m_parent.begin(), m_parent.end(), std::uint32_t { 0 });
}

std::size_t DisjointSets::find(std::size_t i)
{
    while (m_parent[i] != i) {
        m_parent[i] = m_parent[m_parent[i]];
        i = m_parent[i];
    }
    return i;
}

bool DisjointSets::unite(std::size_t a, std::size_t b)
{
    std::size_t ra = find(a);
    std::size_t rb = find(b);
    if (ra == rb)
        return false;
    // The smaller index stays root so labels are canonical without a second pass.
    if (rb < ra)
        std::swap(ra, rb);
    m_parent[rb] = static_cast<std::uint32_t>(ra);
    return true;
}

std::vector<std::uint32_t> DisjointSets::labels()
{
    std::vector<std::uint32_t> out(m_parent.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<std::uint32_t>(find(i));
    return out;
}

namespace {

void check_unique(const std::vector<const Patch*>& patches)
{
    for (std::size_t i = 1; i < patches.size(); ++i)
        if (patches[i - 1]->id == patches[i]->id)
            throw ModelError("duplicate patch id " + patches[i]->id.value());
}

void sort_by_id(std::vector<const Patch*>& patches)
{
    std::sort(patches.begin(), patches.end(), [](const Patch* a, const Patch* b) { return a->id < b->id; });
}

} // namespace

PatchTable::PatchTable(std::span<const Patch> mails, std::span<const Patch> commits)
{
    for (const auto& p : mails) {
        if (!p.id.is_mail())
            throw ModelError("commit id among mails: " + p.id.value());
        m_patches.push_back(&p);
    }
    for (const auto& p : commits) {
        if (!p.id.is_commit())
            throw ModelError("mail id among commits: " + p.id.value());
        m_patches.push_back(&p);
    }
    m_mail_count = mails.size();
    sort_by_id(m_patches);
    check_unique(m_patches);
}

PatchTable::PatchTable(const Corpus& corpus)
    : PatchTable(corpus.mails(), corpus.commits())
{
}

std::vector<PatchId> PatchTable::ids() const
{
    std::vector<PatchId> out;
    out.reserve(m_patches.size());
    for (const Patch* p : m_patches)
        out.push_back(p->id);
    return out;
}

std::vector<IndexPair> candidate_index_pairs(const PatchTable& table, IndexRange left, IndexRange right,
                                             double tf, int window_days)
{
    const bool within = left == right;
    const Timestamp window = static_cast<Timestamp>(window_days) * 86400;

    // path → right-side patches ordered by date
    std::unordered_map<std::string, std::vector<std::pair<Timestamp, std::uint32_t>>> index;
    for (std::size_t j = right.begin; j < right.end; ++j)
        for (const auto& file : table[j].diff.files)
            index[file.path()].emplace_back(table.date(j), static_cast<std::uint32_t>(j));
    for (auto& [path, entries] : index) {
        std::sort(entries.begin(), entries.end());
        entries.erase(std::unique(entries.begin(), entries.end()), entries.end());
    }

    std::vector<std::string> right_paths;
    if (tf < 1.0) {
        right_paths.reserve(index.size());
        for (const auto& [path, entries] : index)
            right_paths.push_back(path);
        std::sort(right_paths.begin(), right_paths.end());
    }
    std::unordered_map<std::string, std::vector<const std::string*>> similar_paths;
    auto similar_to = [&](const std::string& path) -> const std::vector<const std::string*>& {
        auto [it, inserted] = similar_paths.try_emplace(path);
        if (inserted) {
            if (tf >= 1.0) {
                if (auto hit = index.find(path); hit != index.end())
                    it->second.push_back(&hit->first);
            } else {
                for (const auto& q : right_paths)
                    if (string_similarity(path, q) >= tf)
                        it->second.push_back(&index.find(q)->first);
            }
        }
        return it->second;
    };

    std::vector<IndexPair> pairs;
    for (std::size_t i = left.begin; i < left.end; ++i) {
        const Timestamp date = table.date(i);
        for (const auto& file : table[i].diff.files) {
            for (const std::string* q : similar_to(file.path())) {
                const auto& entries = index.at(*q);
                auto lo = std::lower_bound(entries.begin(), entries.end(), std::make_pair(date - window, std::uint32_t { 0 }));
                for (auto it = lo; it != entries.end() && it->first <= date + window; ++it) {
                    std::uint32_t j = it->second;
                    if (j == i || (within && j < i))
                        continue;
                    pairs.emplace_back(static_cast<std::uint32_t>(i), j);
                }
            }
        }
    }
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    return pairs;
}

std::vector<std::pair<PatchId, PatchId>> candidate_pairs(const Corpus& corpus, double tf, int window_days)
{
    PatchTable table(corpus);
    IndexRange all { 0, table.size() };
    std::vector<std::pair<PatchId, PatchId>> out;
    for (auto [i, j] : candidate_index_pairs(table, all, all, tf, window_days))
        out.emplace_back(table[i].id, table[j].id);
    return out;
}

std::vector<PatchFeatures> compute_features(const PatchTable& table)
{
    std::vector<PatchFeatures> features(table.size());
    tbb::parallel_for(std::size_t { 0 }, table.size(), [&](std::size_t i) { features[i] = PatchFeatures::of(table[i]); });
    return features;
}

PairJudge rating_judge(const std::vector<PatchFeatures>& features, const SimilarityConfig& cfg)
{
    cfg.validate();
    return [&features, cfg](std::span<const IndexPair> pairs, std::vector<char>& verdicts) {
        verdicts.assign(pairs.size(), 0);
        tbb::parallel_for(std::size_t { 0 }, pairs.size(), [&](std::size_t k) {
            verdicts[k] = is_similar(features[pairs[k].first], features[pairs[k].second], cfg) ? 1 : 0;
        });
    };
}

std::size_t representative_index(const PatchTable& table, std::span<const std::size_t> members)
{
    std::size_t best = SIZE_MAX;
    for (std::size_t i : members) {
        if (i >= table.mail_count())
            continue;
        if (best == SIZE_MAX || table.date(i) > table.date(best) || (table.date(i) == table.date(best) && i < best))
            best = i;
    }
    if (best == SIZE_MAX)
        throw ModelError("cluster without a mail has no representative");
    return best;
}

namespace {

// Representative of each mail cluster, indexed by root; SIZE_MAX for other slots.
std::vector<std::size_t> mail_representatives(const PatchTable& table, DisjointSets& sets)
{
    std::vector<std::size_t> rep(table.size(), SIZE_MAX);
    for (std::size_t i = 0; i < table.mail_count(); ++i) {
        std::size_t root = sets.find(i);
        std::size_t& current = rep[root];
        // Ascending scan: on equal dates the earlier (smaller) index is kept.
        if (current == SIZE_MAX || table.date(i) > table.date(current))
            current = i;
    }
    return rep;
}

std::uint64_t pair_key(std::size_t a, std::size_t b)
{
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(b);
}

} // namespace

void merge_by_representatives(const PatchTable& table, std::span<const IndexPair> mail_pairs,
                              const PairJudge& judge, DisjointSets& sets)
{
    std::unordered_set<std::uint64_t> rejected;
    std::vector<IndexPair> batch;
    std::vector<char> verdicts;
    for (;;) {
        auto rep = mail_representatives(table, sets);
        batch.clear();
        for (auto [i, j] : mail_pairs) {
            std::size_t ri = sets.find(i);
            std::size_t rj = sets.find(j);
            if (ri == rj)
                continue;
            std::size_t a = rep[ri];
            std::size_t b = rep[rj];
            if (b < a)
                std::swap(a, b);
            if (rejected.contains(pair_key(a, b)))
                continue;
            batch.emplace_back(static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b));
        }
        std::sort(batch.begin(), batch.end());
        batch.erase(std::unique(batch.begin(), batch.end()), batch.end());
        if (batch.empty())
            return;

        judge(batch, verdicts);
        bool merged = false;
        for (std::size_t k = 0; k < batch.size(); ++k) {
            if (verdicts[k])
                merged |= sets.unite(batch[k].first, batch[k].second);
            else
                rejected.insert(pair_key(batch[k].first, batch[k].second));
        }
        if (!merged)
            return;
    }
}

void attach_by_representatives(const PatchTable& table, std::span<const IndexPair> mail_commit_pairs,
                               const PairJudge& judge, DisjointSets& sets)
{
    auto rep = mail_representatives(table, sets);
    std::vector<IndexPair> batch;
    for (auto [m, c] : mail_commit_pairs)
        if (m < table.mail_count() && rep[sets.find(m)] == m)
            batch.emplace_back(m, c);
    if (batch.empty())
        return;
    std::vector<char> verdicts;
    judge(batch, verdicts);
    for (std::size_t k = 0; k < batch.size(); ++k)
        if (verdicts[k])
            sets.unite(batch[k].first, batch[k].second);
}

DisjointSets cluster_table(const PatchTable& table, const SimilarityConfig& cfg, int window_days)
{
    auto features = compute_features(table);
    auto judge = rating_judge(features, cfg);
    IndexRange mails { 0, table.mail_count() };
    IndexRange commits { table.mail_count(), table.size() };
    DisjointSets sets(table.size());
    merge_by_representatives(table, candidate_index_pairs(table, mails, mails, cfg.tf, window_days), judge, sets);
    attach_by_representatives(table, candidate_index_pairs(table, mails, commits, cfg.tf, window_days), judge, sets);
    return sets;
}

ClusterSet to_cluster_set(const PatchTable& table, DisjointSets& sets)
{
    // Table order is the canonical id order, which is also ClusterSet's index order.
    ClusterSet out(table.ids());
    for (std::size_t i = 0; i < table.size(); ++i)
        out.unite_index(i, sets.find(i));
    return out;
}

ClusterSet cluster_mails(std::span<const Patch> mails, const SimilarityConfig& cfg, int window_days)
{
    PatchTable table(mails, {});
    auto features = compute_features(table);
    IndexRange all { 0, table.size() };
    DisjointSets sets(table.size());
    merge_by_representatives(table, candidate_index_pairs(table, all, all, cfg.tf, window_days),
                             rating_judge(features, cfg), sets);
    return to_cluster_set(table, sets);
}

ClusterSet attach_commits(const ClusterSet& mail_clusters, std::span<const Patch> mails,
                          std::span<const Patch> commits, const SimilarityConfig& cfg, int window_days)
{
    PatchTable table(mails, commits);
    auto ids = table.ids();
    if (!std::equal(mail_clusters.universe().begin(), mail_clusters.universe().end(), ids.begin(),
                    ids.begin() + static_cast<std::ptrdiff_t>(table.mail_count()))
        || mail_clusters.size() != table.mail_count())
        throw ModelError("mail clustering does not cover exactly the given mails");
    // Both index spaces list the mails in id order, so indices carry over.
    DisjointSets sets(table.size());
    for (std::size_t i = 0; i < table.mail_count(); ++i)
        sets.unite(i, mail_clusters.find_index(mail_clusters.index_of(table[i].id)));

    auto features = compute_features(table);
    IndexRange mail_range { 0, table.mail_count() };
    IndexRange commit_range { table.mail_count(), table.size() };
    attach_by_representatives(table, candidate_index_pairs(table, mail_range, commit_range, cfg.tf, window_days),
                              rating_judge(features, cfg), sets);
    return to_cluster_set(table, sets);
}

ClusterSet analyze(const Corpus& corpus, const SimilarityConfig& cfg, int window_days)
{
    PatchTable table(corpus);
    auto sets = cluster_table(table, cfg, window_days);
    return to_cluster_set(table, sets);
}

PatchId representative(std::span<const PatchId> cluster, const Corpus& corpus)
{
    const Patch* best = nullptr;
    for (const auto& id : cluster) {
        if (!id.is_mail())
            continue;
        const Patch* p = corpus.find(id);
        if (!p)
            throw ModelError("unknown patch " + id.value());
        if (!best || p->submission_date > best->submission_date
            || (p->submission_date == best->submission_date && p->id < best->id))
            best = p;
    }
    if (!best)
        throw ModelError("cluster without a mail has no representative");
    return best->id;
}

ClusterSet exact_cluster(std::span<const Patch> patches, const SimilarityConfig& cfg)
{
    std::vector<Patch> mails, commits;
    for (const auto& p : patches)
        (p.id.is_mail() ? mails : commits).push_back(p);
    PatchTable table(mails, commits);
    auto features = compute_features(table);

    std::vector<IndexPair> all_pairs;
    for (std::uint32_t i = 0; i < table.size(); ++i)
        for (std::uint32_t j = i + 1; j < table.size(); ++j)
            all_pairs.emplace_back(i, j);
    std::vector<char> verdicts;
    rating_judge(features, cfg)(all_pairs, verdicts);

    DisjointSets sets(table.size());
    for (std::size_t k = 0; k < all_pairs.size(); ++k)
        if (verdicts[k])
            sets.unite(all_pairs[k].first, all_pairs[k].second);
    return to_cluster_set(table, sets);
}

} // namespace lineage
