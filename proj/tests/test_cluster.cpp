#include <lineage/cluster.hpp>

#include "synthetic.hpp"

#include <doctest.h>

#include <algorithm>
#include <deque>
#include <map>
#include <random>
#include <set>

using namespace lineage;
using lineage::testing::sized_patch;

namespace {

constexpr Timestamp day = 86400;
constexpr Timestamp t0 = 1335830400;

Patch on_file(const std::string& id, const std::string& path, Timestamp date)
{
    Patch p = sized_patch(id, 3, date);
    p.diff.files[0].old_path = p.diff.files[0].new_path = path;
    return p;
}

// A judge that answers from a fixed set of index pairs and logs what it was asked.
struct StubJudge {
    std::set<IndexPair> yes;
    std::vector<IndexPair> asked;

    PairJudge judge()
    {
        return [this](std::span<const IndexPair> pairs, std::vector<char>& verdicts) {
            verdicts.assign(pairs.size(), 0);
            for (std::size_t k = 0; k < pairs.size(); ++k) {
                asked.push_back(pairs[k]);
                verdicts[k] = yes.contains(pairs[k]) ? 1 : 0;
            }
        };
    }
};

std::vector<std::pair<PatchId, PatchId>> naive_candidates(std::vector<Patch> patches, double tf, int window_days)
{
    std::sort(patches.begin(), patches.end(), [](const Patch& a, const Patch& b) { return canonical_order(a.id, b.id) < 0; });
    std::vector<std::pair<PatchId, PatchId>> out;
    for (std::size_t i = 0; i < patches.size(); ++i) {
        for (std::size_t j = i + 1; j < patches.size(); ++j) {
            Timestamp gap = patches[i].submission_date - patches[j].submission_date;
            if (gap < 0)
                gap = -gap;
            if (gap > static_cast<Timestamp>(window_days) * day)
                continue;
            bool shared = false;
            for (const auto& fa : patches[i].diff.files)
                for (const auto& fb : patches[j].diff.files)
                    shared |= tf >= 1.0 ? fa.path() == fb.path() : string_similarity(fa.path(), fb.path()) >= tf;
            if (shared)
                out.emplace_back(patches[i].id, patches[j].id);
        }
    }
    return out;
}

ClusterSet bfs_oracle(const std::vector<Patch>& patches, const SimilarityConfig& cfg)
{
    std::size_t n = patches.size();
    std::vector<std::vector<std::size_t>> adj(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (rate(patches[i], patches[j], cfg).combined >= cfg.ta) {
                adj[i].push_back(j);
                adj[j].push_back(i);
            }
    std::vector<bool> seen(n);
    std::vector<std::vector<PatchId>> clusters;
    for (std::size_t s = 0; s < n; ++s) {
        if (seen[s])
            continue;
        std::vector<PatchId> cluster;
        std::deque<std::size_t> queue { s };
        seen[s] = true;
        while (!queue.empty()) {
            std::size_t u = queue.front();
            queue.pop_front();
            cluster.push_back(patches[u].id);
            for (std::size_t v : adj[u])
                if (!seen[v]) {
                    seen[v] = true;
                    queue.push_back(v);
                }
        }
        clusters.push_back(cluster);
    }
    return ClusterSet::from_clusters(clusters);
}

std::vector<Patch> all_of(const Corpus& c)
{
    std::vector<Patch> out = c.mails();
    out.insert(out.end(), c.commits().begin(), c.commits().end());
    return out;
}

const std::string c1 = "c000000000000000000000000000000000000001";
const std::string c2 = "c000000000000000000000000000000000000002";

} // namespace

TEST_SUITE("cluster")
{
    TEST_CASE("disjoint sets labels")
    {
        DisjointSets s(5);
        CHECK(s.unite(3, 1));
        CHECK(s.unite(4, 3));
        CHECK_FALSE(s.unite(1, 4));
        CHECK(s.labels() == std::vector<std::uint32_t> { 0, 1, 2, 1, 1 });
    }

    TEST_CASE("candidate pairs: same file, dates inside and outside the window")
    {
        Patch a = on_file("<a@x>", "kernel/sched.c", t0);
        Patch b = on_file("<b@x>", "kernel/sched.c", t0 + 10 * day);
        Patch c = on_file("<c@x>", "kernel/sched.c", t0 + 400 * day);
        Patch d = on_file("<d@x>", "mm/slab.c", t0 + 1 * day);
        Corpus corpus({ a, b, c, d }, {});
        auto pairs = candidate_pairs(corpus, 1.0, 365);
        REQUIRE(pairs.size() == 1);
        CHECK(pairs[0] == std::make_pair(a.id, b.id));
        CHECK(candidate_pairs(corpus, 1.0, 400).size() == 3);
        CHECK(candidate_pairs(corpus, 1.0, 9).empty());
        CHECK(candidate_pairs(corpus, 1.0, 10).size() == 1);
    }

    TEST_CASE("candidate pairs under fuzzy path matching")
    {
        Patch a = on_file("<a@x>", "drivers/net/e1000.c", t0);
        Patch b = on_file("<b@x>", "drivers/net/e1001.c", t0);
        Corpus corpus({ a, b }, {});
        CHECK(candidate_pairs(corpus, 1.0).empty());
        CHECK(candidate_pairs(corpus, 0.9).size() == 1);
    }

    TEST_CASE("candidate pairs match the naive oracle")
    {
        std::mt19937_64 rng(4);
        for (int round = 0; round < 6; ++round) {
            std::vector<Patch> mails, commits;
            for (std::size_t i = 0; i < 40; ++i) {
                Patch p = lineage::testing::random_patch(rng, i % 4 == 3 ? PatchKind::commit : PatchKind::mail, i);
                p.submission_date = t0 + static_cast<Timestamp>(rng() % (900 * day));
                (p.id.is_mail() ? mails : commits).push_back(p);
            }
            Corpus corpus(mails, commits);
            for (double tf : { 1.0, 0.9, 0.7 }) {
                auto expected = naive_candidates(all_of(corpus), tf, 365);
                CHECK(candidate_pairs(corpus, tf, 365) == expected);
            }
        }
    }

    TEST_CASE("three revisions of one change form one cluster")
    {
        lineage::testing::SyntheticOptions o;
        o.changes = 1;
        o.min_revisions = o.max_revisions = 3;
        o.seed = 8;
        auto s = lineage::testing::make_synthetic(o);
        REQUIRE(s.mails.size() == 3);
        REQUIRE(s.commits.size() == 1);
        ClusterSet result = analyze(s.corpus(), SimilarityConfig {});
        CHECK(result.cluster_count() == 1);
        CHECK(result == s.truth);
    }

    TEST_CASE("representative is the youngest mail")
    {
        Patch a = on_file("<a@x>", "f", t0);
        Patch b = on_file("<b@x>", "f", t0 + 5 * day);
        Patch c = on_file("<c@x>", "f", t0 + 5 * day);
        Patch k = on_file(c1, "f", t0 + 30 * day);
        Corpus corpus({ a, b, c }, { k });
        CHECK(representative(std::vector<PatchId> { a.id, b.id }, corpus) == b.id);
        CHECK(representative(std::vector<PatchId> { c.id, b.id, a.id }, corpus) == b.id); // tie: smaller id
        CHECK(representative(std::vector<PatchId> { a.id, k.id }, corpus) == a.id); // commits never represent
        CHECK_THROWS_AS(representative(std::vector<PatchId> { k.id }, corpus), ModelError);

        PatchTable table(corpus);
        std::vector<std::size_t> members { 0, 1, 2, 3 };
        CHECK(representative_index(table, members) == 1);
    }

    TEST_CASE("merged clusters are re-compared through their new representative")
    {
        // dates ascend with the index, so the youngest member has the largest index
        std::vector<Patch> mails { on_file("<m0@x>", "f", t0), on_file("<m1@x>", "f", t0 + day), on_file("<m2@x>", "f", t0 + 2 * day) };
        PatchTable table(mails, {});
        std::vector<IndexPair> pairs { { 0, 1 }, { 0, 2 } };
        StubJudge stub;
        stub.yes = { { 0, 1 }, { 1, 2 } };
        DisjointSets sets(3);
        merge_by_representatives(table, pairs, stub.judge(), sets);
        CHECK(sets.find(0) == sets.find(2));
        // first pass asks (0,1) and (0,2); the second asks (1,2) for the pair (0,2)
        CHECK(stub.asked == std::vector<IndexPair> { { 0, 1 }, { 0, 2 }, { 1, 2 } });
    }

    TEST_CASE("rejected representative pairs are not asked again")
    {
        std::vector<Patch> mails { on_file("<m0@x>", "f", t0), on_file("<m1@x>", "f", t0 + day), on_file("<m2@x>", "f", t0 + 2 * day) };
        PatchTable table(mails, {});
        std::vector<IndexPair> pairs { { 0, 1 }, { 0, 2 }, { 1, 2 } };
        StubJudge stub;
        DisjointSets sets(3);
        merge_by_representatives(table, pairs, stub.judge(), sets);
        CHECK(stub.asked.size() == 3);
        CHECK(sets.labels() == std::vector<std::uint32_t> { 0, 1, 2 });
    }

    TEST_CASE("commits attach through the representative only")
    {
        // v1, v2, v3 of one change; the commit resembles v3 alone
        std::vector<Patch> mails { on_file("<v1@x>", "f", t0), on_file("<v2@x>", "f", t0 + day), on_file("<v3@x>", "f", t0 + 2 * day) };
        std::vector<Patch> commits { on_file(c1, "f", t0 + 20 * day) };
        PatchTable table(mails, commits);
        DisjointSets sets(4);
        sets.unite(0, 1);
        sets.unite(1, 2);
        std::vector<IndexPair> pairs { { 0, 3 }, { 1, 3 }, { 2, 3 } };

        StubJudge to_v3;
        to_v3.yes = { { 2, 3 } };
        DisjointSets a = sets;
        attach_by_representatives(table, pairs, to_v3.judge(), a);
        CHECK(a.find(3) == a.find(0));
        CHECK(to_v3.asked == std::vector<IndexPair> { { 2, 3 } });

        StubJudge to_v1;
        to_v1.yes = { { 0, 3 } };
        DisjointSets b = sets;
        attach_by_representatives(table, pairs, to_v1.judge(), b);
        CHECK(b.find(3) == 3); // stays a singleton
    }

    TEST_CASE("two commits may join one cluster")
    {
        std::vector<Patch> mails { on_file("<v1@x>", "f", t0) };
        std::vector<Patch> commits { on_file(c1, "f", t0 + 3 * day), on_file(c2, "f", t0 + 9 * day) };
        PatchTable table(mails, commits);
        StubJudge stub;
        stub.yes = { { 0, 1 }, { 0, 2 } };
        DisjointSets sets(3);
        std::vector<IndexPair> pairs { { 0, 1 }, { 0, 2 } };
        attach_by_representatives(table, pairs, stub.judge(), sets);
        CHECK(sets.labels() == std::vector<std::uint32_t> { 0, 0, 0 });
    }

    TEST_CASE("commits are never merged with each other")
    {
        Patch m = on_file("<other@x>", "g", t0);
        Patch k1 = on_file(c1, "f", t0);
        Patch k2 = on_file(c2, "f", t0 + day);
        ClusterSet result = analyze(Corpus({ m }, { k1, k2 }), SimilarityConfig {});
        CHECK(result.cluster_count() == 3);
    }

    TEST_CASE("analyze equals cluster_mails followed by attach_commits")
    {
        lineage::testing::SyntheticOptions o;
        o.changes = 30;
        o.min_revisions = 1;
        o.max_revisions = 3;
        o.evolve = 0.2;
        o.seed = 12;
        auto s = lineage::testing::make_synthetic(o);
        SimilarityConfig cfg;
        auto mails_only = cluster_mails(s.mails, cfg);
        CHECK(attach_commits(mails_only, s.mails, s.commits, cfg) == analyze(s.corpus(), cfg));
        CHECK_THROWS_AS(attach_commits(mails_only, std::span<const Patch>(s.mails).subspan(1), s.commits, cfg), ModelError);
    }

    TEST_CASE("exact clustering edge cases")
    {
        CHECK(exact_cluster({}, SimilarityConfig {}).cluster_count() == 0);
        std::mt19937_64 rng(6);
        std::vector<Patch> ps;
        for (std::size_t i = 0; i < 12; ++i)
            ps.push_back(lineage::testing::random_patch(rng, PatchKind::mail, i));
        SimilarityConfig anything = SimilarityConfig::make(1, 1, 0.4, 0.3, 0.0);
        CHECK(exact_cluster(ps, anything).cluster_count() == 1);
    }

    TEST_CASE("exact clustering matches a BFS over all pairs")
    {
        std::mt19937_64 rng(13);
        for (int round = 0; round < 8; ++round) {
            std::vector<Patch> ps;
            std::size_t n = 10 + rng() % 41;
            for (std::size_t i = 0; ps.size() < n; ++i) {
                if (!ps.empty() && rng() % 2)
                    ps.push_back(lineage::testing::mutate_patch(rng, ps[rng() % ps.size()], 0.2, i));
                else
                    ps.push_back(lineage::testing::random_patch(rng, PatchKind::mail, i));
            }
            SimilarityConfig cfg = SimilarityConfig::make(0.9, 0.8, 0.3, 0.3, 0.6 + 0.05 * round);
            CHECK(exact_cluster(ps, cfg) == bfs_oracle(ps, cfg));
        }
    }

    TEST_CASE("input order does not matter")
    {
        lineage::testing::SyntheticOptions o;
        o.changes = 40;
        o.max_revisions = 3;
        o.evolve = 0.3;
        o.seed = 5;
        auto s = lineage::testing::make_synthetic(o);
        SimilarityConfig cfg = SimilarityConfig::make(1, 1, 0.4, 0.3, 0.7);
        ClusterSet expected = analyze(s.corpus(), cfg);
        std::mt19937_64 rng(1);
        for (int k = 0; k < 5; ++k) {
            auto mails = s.mails;
            auto commits = s.commits;
            std::shuffle(mails.begin(), mails.end(), rng);
            std::shuffle(commits.begin(), commits.end(), rng);
            CHECK(analyze(Corpus(mails, commits), cfg) == expected);
        }
    }
}
