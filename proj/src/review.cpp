#include <lineage/diff_parse.hpp>
#include <lineage/evaluation.hpp>
#include <lineage/review.hpp>
#include <lineage/similarity.hpp>

#include <httplib.h>
#include <tbb/parallel_for.h>

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <mutex>

namespace lineage {

using nlohmann::json;

namespace {

constexpr double borderline_band = 0.2;
constexpr std::size_t max_page_size = 1000;

json series_json(const std::optional<Series>& s)
{
    if (!s)
        return nullptr;
    return json { { "revision", s->revision },
                  { "position", s->position ? json(*s->position) : json(nullptr) },
                  { "total", s->total ? json(*s->total) : json(nullptr) } };
}


std::string to_text(const json& j)
{
    return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

std::size_t parse_count(const httplib::Request& req, const char* name, std::size_t fallback)
{
    if (!req.has_param(name))
        return fallback;
    const std::string value = req.get_param_value(name);
    std::size_t used = 0;
    unsigned long long n = 0;
    try {
        n = std::stoull(value, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != value.size() || value.empty() || value.front() == '-')
        throw ReviewError(400, std::string("bad value for ") + name + ": " + value);
    return static_cast<std::size_t>(n);
}

PatchId parse_id(const std::string& token)
{
    try {
        return PatchId::parse(token);
    } catch (const std::exception& e) {
        throw ReviewError(400, std::string("bad patch id: ") + e.what());
    }
}

} // namespace

ReviewService::ReviewService(Corpus corpus, ClusterSet result, const SimilarityConfig& cfg,
                             std::filesystem::path judgment_log, int window_days)
    : m_corpus(std::move(corpus))
    , m_result(std::move(result))
    , m_cfg(cfg)
    , m_log_path(std::move(judgment_log))
{
    m_cfg.validate();
    m_result = m_result.with_universe(m_corpus.universe());
    m_clusters = m_result.clusters();

    std::vector<std::pair<PatchId, PatchId>> pairs;
    for (auto& p : candidate_pairs(m_corpus, m_cfg.tf, window_days))
        if (p.first.is_mail() || p.second.is_mail())
            pairs.push_back(std::move(p));
    std::vector<SimilarityScore> scores(pairs.size());
    tbb::parallel_for(std::size_t { 0 }, pairs.size(), [&](std::size_t k) {
        scores[k] = rate(*m_corpus.find(pairs[k].first), *m_corpus.find(pairs[k].second), m_cfg);
    });
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        double c = scores[k].combined;
        if (c >= m_cfg.ta - borderline_band && c <= m_cfg.ta + borderline_band)
            m_borderline.push_back({ pairs[k].first, pairs[k].second, scores[k] });
    }
    std::stable_sort(m_borderline.begin(), m_borderline.end(),
                     [](const ReviewCandidate& x, const ReviewCandidate& y) { return x.score.combined > y.score.combined; });

    // Replay. A torn final line from a crash is skipped.
    if (std::ifstream in { m_log_path }) {
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty())
                continue;
            json entry = json::parse(line, nullptr, false);
            if (entry.is_discarded() || !entry.is_object())
                continue;
            try {
                PatchId a = PatchId::parse(entry.at("a").get<std::string>());
                PatchId b = PatchId::parse(entry.at("b").get<std::string>());
                if (b < a)
                    std::swap(a, b);
                m_verdicts[{ a, b }] = { entry.at("verdict").get<std::string>(), ++m_seq };
                ++m_replayed;
            } catch (const std::exception&) {
            }
        }
    }
    m_log_fd = ::open(m_log_path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (m_log_fd < 0)
        throw std::runtime_error("cannot open judgment log " + m_log_path.string() + ": " + std::strerror(errno));
}

ReviewService::~ReviewService()
{
    if (m_log_fd >= 0)
        ::close(m_log_fd);
}

const Patch& ReviewService::lookup(const PatchId& id) const
{
    const Patch* p = m_corpus.find(id);
    if (!p)
        throw ReviewError(404, "unknown patch " + id.value());
    return *p;
}

json ReviewService::preview(const Patch& p) const
{
    return json { { "id", p.id.value() },
                  { "kind", p.id.is_mail() ? "mail" : "commit" },
                  { "subject", p.subject },
                  { "date", p.submission_date },
                  { "series", series_json(p.series) } };
}

json ReviewService::clusters(std::size_t page, std::size_t page_size, std::size_t min_mails,
                             std::optional<bool> has_commit) const
{
    if (page == 0)
        throw ReviewError(400, "page starts at 1");
    if (page_size == 0 || page_size > max_page_size)
        throw ReviewError(400, "page_size must be in [1, " + std::to_string(max_page_size) + "]");

    std::vector<const std::vector<PatchId>*> selected;
    for (const auto& c : m_clusters) {
        auto mails = static_cast<std::size_t>(std::count_if(c.begin(), c.end(), [](const PatchId& id) { return id.is_mail(); }));
        bool commit = mails < c.size();
        if (mails < min_mails || (has_commit && *has_commit != commit))
            continue;
        selected.push_back(&c);
    }
    json list = json::array();
    std::size_t first = (page - 1) * page_size;
    for (std::size_t k = first; k < selected.size() && k < first + page_size; ++k) {
        const auto& c = *selected[k];
        json members = json::array();
        std::size_t mails = 0;
        for (const auto& id : c) {
            mails += id.is_mail();
            members.push_back(preview(lookup(id)));
        }
        list.push_back({ { "id", c.front().value() },
                         { "size", c.size() },
                         { "mails", mails },
                         { "commits", c.size() - mails },
                         { "members", std::move(members) } });
    }
    return json { { "page", page }, { "page_size", page_size }, { "total", selected.size() }, { "clusters", std::move(list) } };
}

json ReviewService::cluster(const PatchId& member) const
{
    lookup(member);
    const PatchId& root = m_result.canonical_id(member);
    std::vector<PatchId> members;
    for (const auto& id : m_result.universe())
        if (m_result.same(id, root))
            members.push_back(id);
    json list = json::array();
    for (const auto& id : members)
        list.push_back(preview(lookup(id)));
    json rep = nullptr;
    if (std::any_of(members.begin(), members.end(), [](const PatchId& id) { return id.is_mail(); }))
        rep = representative(members, m_corpus).value();
    return json { { "id", root.value() }, { "representative", rep }, { "members", std::move(list) } };
}

json ReviewService::patch(const PatchId& id) const
{
    const Patch& p = lookup(id);
    json files = json::array();
    for (const auto& f : p.diff.files) {
        json hunks = json::array();
        for (const auto& h : f.hunks)
            hunks.push_back({ { "heading", h.heading },
                              { "old_start", h.old_start },
                              { "old_len", h.old_len },
                              { "new_start", h.new_start },
                              { "new_len", h.new_len },
                              { "insertions", h.insertions },
                              { "deletions", h.deletions },
                              { "context", h.context } });
        files.push_back({ { "old_path", f.old_path },
                          { "new_path", f.new_path },
                          { "path", f.path() },
                          { "marker_only", f.marker_only },
                          { "hunks", std::move(hunks) } });
    }
    json out = preview(p);
    out["author"] = p.author ? json(*p.author) : json(nullptr);
    out["message"] = p.message;
    out["files"] = std::move(files);
    out["diff"] = render_diff(p.diff);
    out["changed_lines"] = p.diff.total_changed_lines();
    out["cluster"] = m_result.canonical_id(p.id).value();
    return out;
}

std::vector<ReviewCandidate> ReviewService::queue() const
{
    std::shared_lock lock(m_mutex);
    std::vector<ReviewCandidate> fresh;
    std::vector<std::pair<std::uint64_t, ReviewCandidate>> skipped;
    for (const auto& c : m_borderline) {
        auto it = m_verdicts.find({ c.a, c.b });
        if (it == m_verdicts.end())
            fresh.push_back(c);
        else if (it->second.value == "skip")
            skipped.emplace_back(it->second.seq, c);
    }
    std::sort(skipped.begin(), skipped.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
    for (auto& [seq, c] : skipped)
        fresh.push_back(std::move(c));
    return fresh;
}

json ReviewService::candidates(std::size_t limit) const
{
    auto q = queue();
    json list = json::array();
    for (std::size_t k = 0; k < q.size() && k < limit; ++k)
        list.push_back({ { "a", q[k].a.value() },
                         { "b", q[k].b.value() },
                         { "r_msg", q[k].score.r_msg },
                         { "r_diff", q[k].score.r_diff },
                         { "combined", q[k].score.combined },
                         { "gated", q[k].score.gated } });
    return json { { "remaining", q.size() }, { "candidates", std::move(list) } };
}

void ReviewService::record(const PatchId& a, const PatchId& b, const std::string& verdict)
{
    std::unique_lock lock(m_mutex);
    std::string line = to_text(json { { "a", a.value() }, { "b", b.value() }, { "verdict", verdict } }) + "\n";
    const char* data = line.data();
    std::size_t left = line.size();
    while (left > 0) {
        ssize_t n = ::write(m_log_fd, data, left);
        if (n < 0) {
            if (errno == EINTR)
                continue;
            throw ReviewError(500, std::string("judgment log write failed: ") + std::strerror(errno));
        }
        data += n;
        left -= static_cast<std::size_t>(n);
    }
    if (::fsync(m_log_fd) != 0)
        throw ReviewError(500, std::string("judgment log fsync failed: ") + std::strerror(errno));
    m_verdicts[{ a, b }] = { verdict, ++m_seq };
}

json ReviewService::judge(const json& body)
{
    if (!body.is_object() || !body.contains("a") || !body.contains("b") || !body.contains("verdict")
        || !body["a"].is_string() || !body["b"].is_string() || !body["verdict"].is_string())
        throw ReviewError(400, "expected {a, b, verdict}");
    PatchId a = parse_id(body["a"].get<std::string>());
    PatchId b = parse_id(body["b"].get<std::string>());
    std::string verdict = body["verdict"].get<std::string>();
    if (verdict != "same" && verdict != "different" && verdict != "skip")
        throw ReviewError(400, "verdict must be same, different or skip");
    lookup(a);
    lookup(b);
    if (a == b)
        throw ReviewError(400, "a and b must differ");
    if (b < a)
        std::swap(a, b);
    record(a, b, verdict);
    return json { { "a", a.value() }, { "b", b.value() }, { "verdict", verdict } };
}

json ReviewService::export_groundtruth() const
{
    ClusterSet truth(m_corpus.universe());
    std::size_t same = 0;
    {
        std::shared_lock lock(m_mutex);
        for (const auto& [pair, verdict] : m_verdicts)
            if (verdict.value == "same") {
                truth.unite(pair.first, pair.second);
                ++same;
            }
    }
    json clusters = json::array();
    for (const auto& c : truth.clusters()) {
        json ids = json::array();
        for (const auto& id : c)
            ids.push_back(id.value());
        clusters.push_back(std::move(ids));
    }
    return json { { "groundtruth", format_ground_truth(truth) }, { "same_verdicts", same }, { "clusters", std::move(clusters) } };
}

void ReviewService::mount(httplib::Server& server)
{
    auto wrap = [](auto handler) {
        return [handler](const httplib::Request& req, httplib::Response& res) {
            json body;
            int status = 200;
            try {
                body = handler(req);
            } catch (const ReviewError& e) {
                status = e.status();
                body = { { "error", e.what() } };
            } catch (const std::exception& e) {
                status = 500;
                body = { { "error", e.what() } };
            }
            res.status = status;
            res.set_content(to_text(body), "application/json; charset=utf-8");
        };
    };

    server.Get("/api/clusters", wrap([this](const httplib::Request& req) {
        std::optional<bool> has_commit;
        if (req.has_param("has_commit")) {
            std::string v = req.get_param_value("has_commit");
            if (v != "true" && v != "false" && v != "1" && v != "0")
                throw ReviewError(400, "has_commit must be true or false");
            has_commit = v == "true" || v == "1";
        }
        return clusters(parse_count(req, "page", 1), parse_count(req, "page_size", 50), parse_count(req, "min_mails", 0),
                        has_commit);
    }));
    server.Get(R"(/api/cluster/(.+))", wrap([this](const httplib::Request& req) { return cluster(parse_id(req.matches[1])); }));
    server.Get(R"(/api/patch/(.+))", wrap([this](const httplib::Request& req) { return patch(parse_id(req.matches[1])); }));
    server.Get("/api/candidates",
               wrap([this](const httplib::Request& req) { return candidates(parse_count(req, "limit", 20)); }));
    server.Post("/api/judgment", wrap([this](const httplib::Request& req) {
        json body = json::parse(req.body, nullptr, false);
        if (body.is_discarded())
            throw ReviewError(400, "request body is not JSON");
        return judge(body);
    }));
    server.Get("/api/export/groundtruth", wrap([this](const httplib::Request&) { return export_groundtruth(); }));
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (res.body.empty())
            res.set_content(to_text(json { { "error", "status " + std::to_string(res.status) } }), "application/json; charset=utf-8");
    });
}

} // namespace lineage
