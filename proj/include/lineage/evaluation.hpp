#pragma once

#include <lineage/cluster.hpp>
#include <lineage/model.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lineage {

class EvaluationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UniverseMismatch : public EvaluationError {
public:
    using EvaluationError::EvaluationError;
};

class ShapeMismatch : public EvaluationError {
public:
    using EvaluationError::EvaluationError;
};

class EmptyGrid : public EvaluationError {
public:
    using EvaluationError::EvaluationError;
};

class GroundTruthError : public EvaluationError {
public:
    using EvaluationError::EvaluationError;
};

struct PairCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint64_t tn = 0;

    std::uint64_t total() const { return tp + fp + fn + tn; }
    friend bool operator==(const PairCounts&, const PairCounts&) = default;
};

/// Pair confusion counts between two clusterings of the same universe,
/// computed from contingency-table cell sizes.
PairCounts pair_counts(const ClusterSet& result, const ClusterSet& truth);

/// Same, for two label vectors over the same elements (label = cluster tag).
PairCounts pair_counts(std::span<const std::uint32_t> result_labels, std::span<const std::uint32_t> truth_labels);

/// sqrt(precision * recall) over element pairs; 0 when there is no true positive.
double fowlkes_mallows(const PairCounts& counts);

/// Fraction of elements that fall into the majority truth cluster of their result cluster.
double purity(const ClusterSet& result, const ClusterSet& truth);

std::vector<std::size_t> cluster_shape(const ClusterSet& clusters);

/// Uniformly random clustering with exactly the given cluster sizes.
/// Deterministic per seed.
ClusterSet random_clustering(std::span<const std::size_t> shape, std::vector<PatchId> universe, std::uint64_t seed);

// Ground-truth and cluster-result files share one text format: one cluster
// per line, whitespace-separated ids, '#' starts a comment line.
ClusterSet parse_ground_truth(std::string_view text);
std::string format_ground_truth(const ClusterSet& clusters);
ClusterSet load_ground_truth(const std::filesystem::path& path);
void save_ground_truth(const std::filesystem::path& path, const ClusterSet& clusters);

/// Restricts a clustering to the truth's universe; every truth id must be present.
ClusterSet restrict_to(const ClusterSet& result, const ClusterSet& truth);

struct ParamRange {
    double lo = 0.0;
    double hi = 0.0;
    double step = 1.0;

    /// floor((hi - lo) / step) + 1, tolerant to floating-point drift.
    std::size_t count() const;
    /// lo + k * step rounded to 1e-9.
    double value(std::size_t k) const;
    static ParamRange single(double v) { return { v, v, 1.0 }; }
};

struct SweepGrid {
    ParamRange tf, th, dlr, w, ta;

    std::size_t cardinality() const;
    void validate() const;

    /// tf [0.60, 1.00] / 0.05, th [0.15, 1.00] / 0.05, dlr [0, 1] / 0.1,
    /// w [0, 1] / 0.1, ta [0.60, 1.00] / 0.01.
    static SweepGrid reference();
    static SweepGrid single(const SimilarityConfig& cfg);
};

struct SweepRow {
    SimilarityConfig cfg;
    PairCounts counts;
    double fm = 0.0;
};

/// Runs the two-phase clustering for every grid point and scores it against
/// the truth. Component scores are computed once per (pair, tf, th) and the
/// dlr / w / ta axes only recombine and threshold them. Rows reach `sink` in
/// grid order (tf outermost, ta innermost).
void sweep(const SweepGrid& grid, const Corpus& corpus, const ClusterSet& truth, int window_days,
           const std::function<void(const SweepRow&)>& sink);

std::vector<SweepRow> sweep(const SweepGrid& grid, const Corpus& corpus, const ClusterSet& truth,
                            int window_days = default_window_days);

struct IntegrationDuration {
    PatchId cluster;
    std::int64_t seconds = 0;
};

struct DurationReport {
    std::vector<IntegrationDuration> durations; // by cluster id
    std::size_t negative = 0;
    std::vector<std::pair<double, std::int64_t>> quantiles;
    /// Empirical distribution function: (duration, fraction of durations <= it).
    std::vector<std::pair<std::int64_t, double>> ecdf;
};

/// For clusters holding at least one mail and one commit: earliest commit
/// date minus latest mail date. Quantiles use the nearest-rank definition.
DurationReport integration_durations(const ClusterSet& clusters, const Corpus& corpus,
                                     std::span<const double> quantiles = {});

struct Census {
    std::size_t clusters = 0; // clusters holding at least one mail
    std::size_t linked = 0; // ... of which hold at least one commit
    std::size_t mails_gt1 = 0;
    std::size_t mails_gt2 = 0;
    std::size_t mails_gt3 = 0;
    std::size_t single_mail_linked = 0;
};

Census census(const ClusterSet& clusters);
std::string format_census(const Census& census);

} // namespace lineage
