#include <lineage/model.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lineage {

bool is_commit_hash(std::string_view value)
{
    if (value.size() < 7 || value.size() > 40)
        return false;
    return std::all_of(value.begin(), value.end(), [](char c) {
        return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
    });
}

PatchId::PatchId(PatchKind kind, std::string value)
    : m_kind(kind)
    , m_value(std::move(value))
{
    if (m_value.empty())
        throw ModelError("empty patch id");
    if (m_kind == PatchKind::commit && !is_commit_hash(m_value))
        throw ModelError("not a commit hash: " + m_value);
}

PatchId PatchId::parse(std::string_view token)
{
    if (!token.empty() && token.front() == '<')
        return mail(std::string(token));
    return commit(std::string(token));
}

std::strong_ordering canonical_order(const PatchId& a, const PatchId& b)
{
    return a <=> b;
}

const std::string& FileDiff::path() const
{
    if (new_path.empty() || new_path == "/dev/null")
        return old_path;
    return new_path;
}

std::size_t Diff::total_changed_lines() const
{
    std::size_t total = 0;
    for (const auto& file : files)
        for (const auto& hunk : file.hunks)
            total += hunk.changed_lines();
    return total;
}

SimilarityConfig SimilarityConfig::make(double tf, double th, double dlr, double w, double ta)
{
    SimilarityConfig cfg { tf, th, dlr, w, ta };
    cfg.validate();
    return cfg;
}

void SimilarityConfig::validate() const
{
    auto check = [](double v, const char* name) {
        if (!(v >= 0.0 && v <= 1.0))
            throw ModelError(std::string("parameter ") + name + " outside [0,1]");
    };
    check(tf, "tf");
    check(th, "th");
    check(dlr, "dlr");
    check(w, "w");
    check(ta, "ta");
}

ClusterSet::ClusterSet(std::vector<PatchId> universe)
    : m_ids(std::move(universe))
{
    std::sort(m_ids.begin(), m_ids.end());
    m_ids.erase(std::unique(m_ids.begin(), m_ids.end()), m_ids.end());
    m_index.reserve(m_ids.size());
    for (std::size_t i = 0; i < m_ids.size(); ++i)
        m_index.emplace(m_ids[i], i);
    m_parent.resize(m_ids.size());
    std::iota(m_parent.begin(), m_parent.end(), std::size_t { 0 });
    m_rank.assign(m_ids.size(), 0);
    m_min = m_parent;
}

bool ClusterSet::contains(const PatchId& id) const
{
    return m_index.contains(id);
}

std::size_t ClusterSet::index_of(const PatchId& id) const
{
    auto it = m_index.find(id);
    if (it == m_index.end())
        throw ModelError("id not in universe: " + id.value());
    return it->second;
}

std::size_t ClusterSet::find_index(std::size_t i) const
{
    while (m_parent[i] != i)
        i = m_parent[i];
    return i;
}

bool ClusterSet::unite_index(std::size_t a, std::size_t b)
{
    auto compress = [this](std::size_t i) {
        std::size_t root = find_index(i);
        while (m_parent[i] != root) {
            std::size_t next = m_parent[i];
            m_parent[i] = root;
            i = next;
        }
        return root;
    };
    std::size_t ra = compress(a);
    std::size_t rb = compress(b);
    if (ra == rb)
        return false;
    if (m_rank[ra] < m_rank[rb])
        std::swap(ra, rb);
    m_parent[rb] = ra;
    if (m_rank[ra] == m_rank[rb])
        ++m_rank[ra];
    m_min[ra] = std::min(m_min[ra], m_min[rb]);
    return true;
}

bool ClusterSet::unite(const PatchId& a, const PatchId& b)
{
    return unite_index(index_of(a), index_of(b));
}

bool ClusterSet::same(const PatchId& a, const PatchId& b) const
{
    return find_index(index_of(a)) == find_index(index_of(b));
}

const PatchId& ClusterSet::canonical_id(const PatchId& id) const
{
    return m_ids[m_min[find_index(index_of(id))]];
}

std::vector<std::vector<PatchId>> ClusterSet::clusters() const
{
    // Iterating the sorted universe visits each cluster first at its minimum,
    // so clusters come out in canonical order with sorted members.
    std::vector<std::vector<PatchId>> out;
    std::vector<std::size_t> slot(m_ids.size(), SIZE_MAX);
    for (std::size_t i = 0; i < m_ids.size(); ++i) {
        std::size_t root = find_index(i);
        if (slot[root] == SIZE_MAX) {
            slot[root] = out.size();
            out.emplace_back();
        }
        out[slot[root]].push_back(m_ids[i]);
    }
    return out;
}

std::size_t ClusterSet::cluster_count() const
{
    std::size_t n = 0;
    for (std::size_t i = 0; i < m_parent.size(); ++i)
        n += m_parent[i] == i;
    return n;
}

ClusterSet ClusterSet::with_universe(std::vector<PatchId> universe) const
{
    ClusterSet out(std::move(universe));
    std::vector<std::size_t> first_of_root(m_ids.size(), SIZE_MAX);
    for (std::size_t i = 0; i < out.m_ids.size(); ++i) {
        auto it = m_index.find(out.m_ids[i]);
        if (it == m_index.end())
            continue;
        std::size_t root = find_index(it->second);
        if (first_of_root[root] == SIZE_MAX)
            first_of_root[root] = i;
        else
            out.unite_index(first_of_root[root], i);
    }
    return out;
}

ClusterSet ClusterSet::from_clusters(const std::vector<std::vector<PatchId>>& clusters)
{
    std::vector<PatchId> universe;
    for (const auto& cluster : clusters)
        universe.insert(universe.end(), cluster.begin(), cluster.end());
    std::size_t declared = universe.size();
    ClusterSet out(std::move(universe));
    if (out.size() != declared)
        throw ModelError("id listed in more than one cluster");
    for (const auto& cluster : clusters)
        for (std::size_t i = 1; i < cluster.size(); ++i)
            out.unite(cluster[0], cluster[i]);
    return out;
}

bool operator==(const ClusterSet& a, const ClusterSet& b)
{
    return a.universe() == b.universe() && a.clusters() == b.clusters();
}

Corpus::Corpus(std::vector<Patch> mails, std::vector<Patch> commits)
    : m_mails(std::move(mails))
    , m_commits(std::move(commits))
{
    build_index();
}

void Corpus::build_index()
{
    m_by_id.reserve(size());
    auto add = [this](const std::vector<Patch>& patches, PatchKind kind) {
        for (std::size_t i = 0; i < patches.size(); ++i) {
            if (patches[i].id.kind() != kind)
                throw ModelError("patch " + patches[i].id.value() + " filed under the wrong kind");
            if (!m_by_id.emplace(patches[i].id, i).second)
                throw ModelError("duplicate patch id " + patches[i].id.value());
        }
    };
    add(m_mails, PatchKind::mail);
    add(m_commits, PatchKind::commit);
}

const Patch* Corpus::find(const PatchId& id) const
{
    auto it = m_by_id.find(id);
    if (it == m_by_id.end())
        return nullptr;
    return id.is_mail() ? &m_mails[it->second] : &m_commits[it->second];
}

std::vector<PatchId> Corpus::universe() const
{
    std::vector<PatchId> ids;
    ids.reserve(size());
    for (const auto& p : m_mails)
        ids.push_back(p.id);
    for (const auto& p : m_commits)
        ids.push_back(p.id);
    std::sort(ids.begin(), ids.end());
    return ids;
}

} // namespace lineage
