#pragma once

#include <lineage/cluster.hpp>
#include <lineage/model.hpp>

#include <json.hpp>

#include <filesystem>
#include <map>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace httplib {
class Server;
}

namespace lineage {

/// An API error carrying its HTTP status.
class ReviewError : public std::runtime_error {
public:
    ReviewError(int status, const std::string& message)
        : std::runtime_error(message)
        , m_status(status)
    {
    }
    int status() const { return m_status; }

private:
    int m_status;
};

struct ReviewCandidate {
    PatchId a, b; // a < b in canonical order
    SimilarityScore score;
};

/// State behind the review HTTP API: a corpus, its clustering and a
/// judgment log. Read queries may run concurrently; judgments are appended
/// one at a time and fsync'ed before they become visible.
class ReviewService {
public:
    ReviewService(Corpus corpus, ClusterSet result, const SimilarityConfig& cfg,
                  std::filesystem::path judgment_log, int window_days = default_window_days);
    ~ReviewService();

    ReviewService(const ReviewService&) = delete;
    ReviewService& operator=(const ReviewService&) = delete;

    nlohmann::json clusters(std::size_t page, std::size_t page_size, std::size_t min_mails,
                            std::optional<bool> has_commit) const;
    nlohmann::json cluster(const PatchId& member) const;
    nlohmann::json patch(const PatchId& id) const;
    nlohmann::json candidates(std::size_t limit) const;
    nlohmann::json judge(const nlohmann::json& body);
    nlohmann::json export_groundtruth() const;

    /// Unjudged pairs in queue order; skipped pairs come last, oldest skip first.
    std::vector<ReviewCandidate> queue() const;
    std::size_t replayed() const { return m_replayed; }

    /// Registers the /api routes.
    void mount(httplib::Server& server);

private:
    struct Verdict {
        std::string value;
        std::uint64_t seq = 0;
    };

    const Patch& lookup(const PatchId& id) const;
    nlohmann::json preview(const Patch& patch) const;
    void record(const PatchId& a, const PatchId& b, const std::string& verdict);

    Corpus m_corpus;
    ClusterSet m_result;
    SimilarityConfig m_cfg;
    std::vector<ReviewCandidate> m_borderline; // by descending score
    std::vector<std::vector<PatchId>> m_clusters;

    mutable std::shared_mutex m_mutex;
    std::map<std::pair<PatchId, PatchId>, Verdict> m_verdicts; // latest per pair
    std::uint64_t m_seq = 0;
    std::size_t m_replayed = 0;
    std::filesystem::path m_log_path;
    int m_log_fd = -1;
};

} // namespace lineage
