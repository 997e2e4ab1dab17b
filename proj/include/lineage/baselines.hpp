#pragma once

#include <lineage/cluster.hpp>
#include <lineage/model.hpp>

#include <span>
#include <string>
#include <vector>

namespace lineage {

enum class PlusMinusDenominator {
    smaller, // |A ∩ B| / min(|A|, |B|)
    jaccard, // |A ∩ B| / |A ∪ B|
};

/// Multiset of (file, sign, line) change tuples, encoded as sorted strings.
std::vector<std::string> change_tuples(const Patch& patch);

/// Shared-change fraction between two patches under the chosen denominator.
double plusminus_similarity(const Patch& a, const Patch& b,
                            PlusMinusDenominator denominator = PlusMinusDenominator::smaller);

/// Clusters by identical changed lines. Pair fractions are computed once, so
/// clustering at many thresholds is cheap.
class PlusMinusMatcher {
public:
    PlusMinusMatcher(std::span<const Patch> patches, PlusMinusDenominator denominator = PlusMinusDenominator::smaller,
                     int window_days = default_window_days);

    /// Connected components of {fraction >= threshold} over the candidate pairs.
    PlusMinusMatcher(const PlusMinusMatcher&) = delete;
    PlusMinusMatcher& operator=(const PlusMinusMatcher&) = delete;

    ClusterSet cluster(double threshold) const;

private:
    std::vector<Patch> m_mails;
    std::vector<Patch> m_commits;
    PatchTable m_table;
    std::vector<IndexPair> m_pairs;
    std::vector<double> m_fractions;
};

ClusterSet plusminus_cluster(std::span<const Patch> patches, double threshold,
                             PlusMinusDenominator denominator = PlusMinusDenominator::smaller,
                             int window_days = default_window_days);

/// Hex MD5 per hunk over its whitespace-free change lines; context is ignored.
std::vector<std::string> hunk_checksums(const Patch& patch);

/// Patches sharing at least one hunk checksum end up in one cluster.
ClusterSet checksum_cluster(std::span<const Patch> patches, int window_days = default_window_days);

} // namespace lineage
