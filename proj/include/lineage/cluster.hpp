#pragma once

#include <lineage/model.hpp>
#include <lineage/similarity.hpp>

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace lineage {

inline constexpr int default_window_days = 365;

using IndexPair = std::pair<std::uint32_t, std::uint32_t>;

/// Union-find over dense indices. Unlike ClusterSet it carries no ids, which
/// keeps it cheap enough to rebuild for every point of a parameter sweep.
class DisjointSets {
public:
    explicit DisjointSets(std::size_t n = 0);

    std::size_t size() const { return m_parent.size(); }
    std::size_t find(std::size_t i);
    bool unite(std::size_t a, std::size_t b);

    /// Label per element: the smallest index of its set.
    std::vector<std::uint32_t> labels();

private:
    std::vector<std::uint32_t> m_parent;
};

/// Patches in canonical order: mails sorted by id, then commits sorted by id.
/// Index order therefore equals canonical_order on the ids.
class PatchTable {
public:
    PatchTable() = default;
    PatchTable(std::span<const Patch> mails, std::span<const Patch> commits);
    explicit PatchTable(const Corpus& corpus);

    std::size_t size() const { return m_patches.size(); }
    std::size_t mail_count() const { return m_mail_count; }
    const Patch& operator[](std::size_t i) const { return *m_patches[i]; }
    Timestamp date(std::size_t i) const { return m_patches[i]->submission_date; }
    std::vector<PatchId> ids() const;

private:
    std::vector<const Patch*> m_patches;
    std::size_t m_mail_count = 0;
};

struct IndexRange {
    std::size_t begin = 0;
    std::size_t end = 0;

    friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

/// Pairs (i, j) with i from `left` and j from `right` whose submission dates
/// lie at most window_days apart and that touch at least one pair of files
/// with path similarity >= tf. When the ranges are equal, only i < j is
/// produced. Output is sorted and duplicate-free.
std::vector<IndexPair> candidate_index_pairs(const PatchTable& table, IndexRange left, IndexRange right,
                                             double tf, int window_days);

/// Same filter over every pair of the corpus universe, as ids in canonical pair order.
std::vector<std::pair<PatchId, PatchId>> candidate_pairs(const Corpus& corpus, double tf,
                                                         int window_days = default_window_days);

/// Decides a batch of pairs at once; verdicts[k] is set for pairs[k].
using PairJudge = std::function<void(std::span<const IndexPair> pairs, std::vector<char>& verdicts)>;

/// Judge backed by `is_similar` on precomputed features, evaluated in parallel.
PairJudge rating_judge(const std::vector<PatchFeatures>& features, const SimilarityConfig& cfg);

std::vector<PatchFeatures> compute_features(const PatchTable& table);

/// Index of the youngest mail among `members`; ties go to the smaller index.
std::size_t representative_index(const PatchTable& table, std::span<const std::size_t> members);

/// Mail phase: starting from the current sets, repeatedly compares the
/// representatives of every two clusters joined by a candidate pair and merges
/// on a positive verdict, until a full pass merges nothing. All verdicts of a
/// pass are taken against the representatives at the start of the pass, and
/// merges are applied in pair order, so the outcome is schedule-independent.
void merge_by_representatives(const PatchTable& table, std::span<const IndexPair> mail_pairs,
                              const PairJudge& judge, DisjointSets& sets);

/// Commit phase: compares each mail cluster's representative against the
/// commits it forms a candidate pair with and merges every positive match.
void attach_by_representatives(const PatchTable& table, std::span<const IndexPair> mail_commit_pairs,
                               const PairJudge& judge, DisjointSets& sets);

/// Both phases over a corpus table.
DisjointSets cluster_table(const PatchTable& table, const SimilarityConfig& cfg, int window_days);

ClusterSet cluster_mails(std::span<const Patch> mails, const SimilarityConfig& cfg,
                         int window_days = default_window_days);

/// Extends a mail clustering (as returned by cluster_mails) with commits.
ClusterSet attach_commits(const ClusterSet& mail_clusters, std::span<const Patch> mails,
                          std::span<const Patch> commits, const SimilarityConfig& cfg,
                          int window_days = default_window_days);

/// cluster_mails followed by attach_commits.
ClusterSet analyze(const Corpus& corpus, const SimilarityConfig& cfg, int window_days = default_window_days);

/// The youngest mail of the cluster; ties broken by canonical order.
PatchId representative(std::span<const PatchId> cluster, const Corpus& corpus);

/// Connected components of the is_similar graph over all pairs, with no
/// prefilter and no representatives. Quadratic; meant for small sets.
ClusterSet exact_cluster(std::span<const Patch> patches, const SimilarityConfig& cfg);

ClusterSet to_cluster_set(const PatchTable& table, DisjointSets& sets);

} // namespace lineage
