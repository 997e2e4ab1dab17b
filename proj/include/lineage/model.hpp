#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lineage {

class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Declaration order defines the ordering: every mail sorts before every commit.
enum class PatchKind : std::uint8_t { mail, commit };

/// Identity of a patch in the universe of mails and commits.
///
/// Mail ids are RFC 5322 Message-IDs including the angle brackets. Commit ids
/// are 7 to 40 lowercase hex characters and are compared by full string
/// equality, never by prefix.
class PatchId {
public:
    PatchId() = default;
    PatchId(PatchKind kind, std::string value);

    static PatchId mail(std::string message_id) { return {PatchKind::mail, std::move(message_id)}; }
    static PatchId commit(std::string hash) { return {PatchKind::commit, std::move(hash)}; }

    /// Mail ids start with '<', everything else is read as a commit hash.
    static PatchId parse(std::string_view token);

    PatchKind kind() const { return m_kind; }
    const std::string& value() const { return m_value; }
    bool is_mail() const { return m_kind == PatchKind::mail; }
    bool is_commit() const { return m_kind == PatchKind::commit; }

    friend auto operator<=>(const PatchId&, const PatchId&) = default;
    friend bool operator==(const PatchId&, const PatchId&) = default;

private:
    PatchKind m_kind = PatchKind::mail;
    std::string m_value;
};

std::strong_ordering canonical_order(const PatchId& a, const PatchId& b);

bool is_commit_hash(std::string_view value);

struct PatchIdHash {
    std::size_t operator()(const PatchId& id) const noexcept
    {
        return std::hash<std::string>{}(id.value()) ^ static_cast<std::size_t>(id.kind());
    }
};

struct Hunk {
    std::string heading;
    std::uint32_t old_start = 0;
    std::uint32_t old_len = 0;
    std::uint32_t new_start = 0;
    std::uint32_t new_len = 0;
    std::vector<std::string> insertions;
    std::vector<std::string> deletions;
    std::vector<std::string> context;

    std::size_t changed_lines() const { return insertions.size() + deletions.size(); }

    friend auto operator<=>(const Hunk&, const Hunk&) = default;
    friend bool operator==(const Hunk&, const Hunk&) = default;
};

struct FileDiff {
    std::string old_path;
    std::string new_path;
    std::vector<Hunk> hunks;
    // Set for entries that carry no hunks: renames, mode changes, binary files.
    bool marker_only = false;

    /// The path a file is known by: the new path, or the old one for deletions.
    const std::string& path() const;

    friend auto operator<=>(const FileDiff&, const FileDiff&) = default;
    friend bool operator==(const FileDiff&, const FileDiff&) = default;
};

struct Diff {
    std::vector<FileDiff> files;

    std::size_t total_changed_lines() const;

    friend auto operator<=>(const Diff&, const Diff&) = default;
    friend bool operator==(const Diff&, const Diff&) = default;
};

struct Series {
    std::uint32_t revision = 1;
    std::optional<std::uint32_t> position;
    std::optional<std::uint32_t> total;

    friend bool operator==(const Series&, const Series&) = default;
};

/// Seconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;

struct Patch {
    PatchId id;
    std::string subject;
    std::vector<std::string> message;
    Diff diff;
    Timestamp submission_date = 0;
    std::optional<std::string> author;
    std::optional<Series> series;

    friend bool operator==(const Patch&, const Patch&) = default;
};

/// The five tuneables of the similarity rating. Construction validates that
/// every value lies in [0, 1].
struct SimilarityConfig {
    double tf = 1.0;
    double th = 1.0;
    double dlr = 0.4;
    double w = 0.3;
    double ta = 0.82;

    static SimilarityConfig make(double tf, double th, double dlr, double w, double ta);
    void validate() const;
};

struct SimilarityScore {
    double r_msg = 0.0;
    double r_diff = 0.0;
    double combined = 0.0;
    bool gated = false;
};

/// A partition of a fixed universe of patch ids, built by successive unions.
///
/// Read-only queries (`find`, `clusters`, `same`) never mutate and may be
/// shared across threads; `unite` must be confined to one thread.
class ClusterSet {
public:
    ClusterSet() = default;
    explicit ClusterSet(std::vector<PatchId> universe);

    std::size_t size() const { return m_ids.size(); }
    bool empty() const { return m_ids.empty(); }
    const std::vector<PatchId>& universe() const { return m_ids; }

    bool contains(const PatchId& id) const;
    std::size_t index_of(const PatchId& id) const;

    /// Merges the clusters of a and b. Returns true when they were distinct.
    bool unite(const PatchId& a, const PatchId& b);
    bool unite_index(std::size_t a, std::size_t b);

    std::size_t find_index(std::size_t i) const;
    bool same(const PatchId& a, const PatchId& b) const;

    /// Minimum member of the cluster containing id.
    const PatchId& canonical_id(const PatchId& id) const;

    /// All clusters, members sorted, clusters sorted by canonical id.
    std::vector<std::vector<PatchId>> clusters() const;
    std::size_t cluster_count() const;

    /// The same partition restricted to (or extended by singletons to) a new universe.
    ClusterSet with_universe(std::vector<PatchId> universe) const;

    static ClusterSet from_clusters(const std::vector<std::vector<PatchId>>& clusters);

private:
    std::vector<PatchId> m_ids; // sorted
    std::unordered_map<PatchId, std::size_t, PatchIdHash> m_index;
    std::vector<std::size_t> m_parent;
    std::vector<std::uint32_t> m_rank;
    // For each root, index of its smallest member; m_ids is sorted so that is the canonical id.
    std::vector<std::size_t> m_min;
};

bool operator==(const ClusterSet& a, const ClusterSet& b);

class Corpus {
public:
    Corpus() = default;
    Corpus(std::vector<Patch> mails, std::vector<Patch> commits);

    const std::vector<Patch>& mails() const { return m_mails; }
    const std::vector<Patch>& commits() const { return m_commits; }

    const Patch* find(const PatchId& id) const;
    std::vector<PatchId> universe() const;
    std::size_t size() const { return m_mails.size() + m_commits.size(); }

private:
    void build_index();

    std::vector<Patch> m_mails;
    std::vector<Patch> m_commits;
    // Position within m_mails or m_commits, selected by the id's kind.
    std::unordered_map<PatchId, std::size_t, PatchIdHash> m_by_id;
};

} // namespace lineage
