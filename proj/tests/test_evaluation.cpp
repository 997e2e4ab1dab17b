#include <lineage/evaluation.hpp>

#include "synthetic.hpp"

#include <doctest.h>

#include <filesystem>
#include <random>

using namespace lineage;

namespace {

std::vector<PatchId> ids(std::size_t n)
{
    std::vector<PatchId> out;
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(PatchId::mail("<e" + std::to_string(i) + "@x>"));
    return out;
}

PairCounts enumerate(const ClusterSet& result, const ClusterSet& truth)
{
    PairCounts c;
    const auto& u = truth.universe();
    for (std::size_t i = 0; i < u.size(); ++i)
        for (std::size_t j = i + 1; j < u.size(); ++j) {
            bool r = result.same(u[i], u[j]), t = truth.same(u[i], u[j]);
            (r && t ? c.tp : r ? c.fp : t ? c.fn : c.tn)++;
        }
    return c;
}

ClusterSet random_partition(std::mt19937_64& rng, const std::vector<PatchId>& universe, std::size_t max_label)
{
    ClusterSet cs(universe);
    std::vector<std::size_t> label(universe.size());
    for (auto& l : label)
        l = rng() % max_label;
    for (std::size_t i = 0; i < universe.size(); ++i)
        for (std::size_t j = i + 1; j < universe.size(); ++j)
            if (label[i] == label[j])
                cs.unite(universe[i], universe[j]);
    return cs;
}

} // namespace

TEST_SUITE("evaluation")
{
    TEST_CASE("pair counts examples")
    {
        auto u = ids(3);
        auto truth = ClusterSet::from_clusters({ { u[0], u[1] }, { u[2] } });
        auto result = ClusterSet::from_clusters({ { u[0], u[1], u[2] } });
        PairCounts c = pair_counts(result, truth);
        CHECK(c == PairCounts { 1, 2, 0, 0 });

        auto big = ids(10);
        ClusterSet one(big);
        for (std::size_t i = 1; i < big.size(); ++i)
            one.unite(big[0], big[i]);
        CHECK(pair_counts(one, one) == PairCounts { 45, 0, 0, 0 });
        ClusterSet singles(big);
        CHECK(pair_counts(singles, singles) == PairCounts { 0, 0, 0, 45 });
    }

    TEST_CASE("pair counts equal pair enumeration")
    {
        std::mt19937_64 rng(7);
        for (int round = 0; round < 40; ++round) {
            auto u = ids(1 + rng() % 200);
            auto a = random_partition(rng, u, 1 + rng() % 30);
            auto b = random_partition(rng, u, 1 + rng() % 30);
            PairCounts c = pair_counts(a, b);
            CHECK(c == enumerate(a, b));
            CHECK(c.total() == u.size() * (u.size() - 1) / 2);
        }
    }

    TEST_CASE("universes must match")
    {
        auto u = ids(3);
        ClusterSet a(u), b(std::vector<PatchId>(u.begin(), u.begin() + 2));
        CHECK_THROWS_AS(pair_counts(a, b), UniverseMismatch);
        CHECK_THROWS_AS(purity(a, b), UniverseMismatch);
    }

    TEST_CASE("fowlkes mallows")
    {
        CHECK(fowlkes_mallows({ 1086, 18, 9, 0 }) == doctest::Approx(0.9877).epsilon(0.0005));
        CHECK(fowlkes_mallows({ 5, 0, 0, 3 }) == 1.0);
        CHECK(fowlkes_mallows({ 0, 5, 5, 3 }) == 0.0);

        std::mt19937_64 rng(2);
        auto u = ids(60);
        for (int round = 0; round < 20; ++round) {
            auto a = random_partition(rng, u, 10), b = random_partition(rng, u, 10);
            CHECK(fowlkes_mallows(pair_counts(a, b)) == doctest::Approx(fowlkes_mallows(pair_counts(b, a))).epsilon(1e-12));
            CHECK(fowlkes_mallows(pair_counts(a, a)) == 1.0);
        }
    }

    TEST_CASE("purity")
    {
        auto u = ids(3);
        auto truth = ClusterSet::from_clusters({ { u[0], u[1] }, { u[2] } });
        auto result = ClusterSet::from_clusters({ { u[0], u[1], u[2] } });
        CHECK(purity(result, truth) == doctest::Approx(2.0 / 3.0));
        CHECK(purity(truth, truth) == 1.0);
        CHECK(purity(ClusterSet(u), truth) == 1.0);
        CHECK(purity(ClusterSet(u), result) == 1.0);
    }

    TEST_CASE("random clustering keeps the shape and the seed")
    {
        auto u = ids(20);
        std::vector<std::size_t> shape { 5, 1, 7, 2, 5 };
        auto a = random_clustering(shape, u, 42);
        auto b = random_clustering(shape, u, 42);
        CHECK(a == b);
        auto got = cluster_shape(a);
        std::sort(got.begin(), got.end());
        CHECK(got == std::vector<std::size_t> { 1, 2, 5, 5, 7 });
        CHECK(random_clustering(std::vector<std::size_t> { 20 }, u, 1).cluster_count() == 1);
        CHECK(random_clustering(std::vector<std::size_t>(20, 1), u, 1) == ClusterSet(u));
        std::vector<std::size_t> wrong { 3, 3 };
        CHECK_THROWS_AS(random_clustering(wrong, u, 1), ShapeMismatch);
    }

    TEST_CASE("ground truth file round trip")
    {
        const char* text = "# comment\n<a@x> 0123456789abcdef0123456789abcdef01234567\n\n  <b@x>  \n";
        ClusterSet cs = parse_ground_truth(text);
        CHECK(cs.cluster_count() == 2);
        CHECK(cs.same(PatchId::mail("<a@x>"), PatchId::commit("0123456789abcdef0123456789abcdef01234567")));
        CHECK(parse_ground_truth(format_ground_truth(cs)) == cs);
        CHECK_THROWS_AS(parse_ground_truth("<a@x> xyz\n"), GroundTruthError);
        CHECK_THROWS_AS(parse_ground_truth("<a@x>\n<a@x>\n"), GroundTruthError);

        auto path = std::filesystem::temp_directory_path() / "lineage-gt-test.txt";
        save_ground_truth(path, cs);
        CHECK(load_ground_truth(path) == cs);
        std::filesystem::remove(path);
        CHECK_THROWS_AS(load_ground_truth(path), GroundTruthError);
    }

    TEST_CASE("restrict_to")
    {
        auto u = ids(4);
        auto result = ClusterSet::from_clusters({ { u[0], u[1], u[3] }, { u[2] } });
        auto truth = ClusterSet::from_clusters({ { u[0] }, { u[1] } });
        auto r = restrict_to(result, truth);
        CHECK(r.universe() == truth.universe());
        CHECK(r.same(u[0], u[1]));
        auto wider = ClusterSet::from_clusters({ { u[0], PatchId::mail("<zz@x>") } });
        CHECK_THROWS_AS(restrict_to(result, wider), UniverseMismatch);
    }

    TEST_CASE("grid cardinality")
    {
        SweepGrid g = SweepGrid::reference();
        CHECK(g.tf.count() == 9);
        CHECK(g.th.count() == 18);
        CHECK(g.dlr.count() == 11);
        CHECK(g.w.count() == 11);
        CHECK(g.ta.count() == 41);
        CHECK(g.cardinality() == 803682);
        CHECK(SweepGrid::single(SimilarityConfig {}).cardinality() == 1);
        CHECK(ParamRange { 0.6, 1.0, 0.05 }.value(8) == 1.0);
        CHECK(ParamRange { 0.6, 1.0, 0.01 }.value(22) == 0.82);

        SweepGrid bad = SweepGrid::single(SimilarityConfig {});
        bad.ta = { 0.9, 0.8, 0.01 };
        CHECK_THROWS_AS(bad.validate(), EmptyGrid);
        bad.ta = { 0.8, 0.9, 0.0 };
        CHECK_THROWS_AS(bad.validate(), EmptyGrid);
    }

    TEST_CASE("sweep rows equal direct analysis")
    {
        lineage::testing::SyntheticOptions o;
        o.changes = 8;
        o.max_revisions = 3;
        o.evolve = 0.3;
        o.seed = 31;
        auto s = lineage::testing::make_synthetic(o);
        Corpus corpus = s.corpus();

        SweepGrid g;
        g.tf = { 0.8, 1.0, 0.2 };
        g.th = { 0.5, 1.0, 0.5 };
        g.dlr = { 0.0, 0.8, 0.4 };
        g.w = { 0.0, 1.0, 0.5 };
        g.ta = { 0.5, 0.95, 0.15 };
        auto rows = sweep(g, corpus, s.truth);
        REQUIRE(rows.size() == g.cardinality());
        CHECK(rows.size() == 2 * 2 * 3 * 3 * 4);
        // grid order: tf outermost, ta innermost
        CHECK(rows[0].cfg.ta == 0.5);
        CHECK(rows[1].cfg.ta == doctest::Approx(0.65));
        CHECK(rows.back().cfg.tf == 1.0);
        for (const auto& row : rows) {
            ClusterSet direct = restrict_to(analyze(corpus, row.cfg), s.truth);
            PairCounts expected = pair_counts(direct, s.truth);
            CHECK(row.counts == expected);
            CHECK(row.fm == fowlkes_mallows(expected));
        }
    }

    TEST_CASE("integration durations")
    {
        using lineage::testing::sized_patch;
        const Timestamp t = 1335830400;
        Patch m1 = sized_patch("<m1@x>", 2, t);
        Patch m2 = sized_patch("<m2@x>", 2, t - 86400);
        Patch m3 = sized_patch("<m3@x>", 2, t);
        Patch c1 = sized_patch("c000000000000000000000000000000000000001", 2, t + 7 * 86400);
        Patch c2 = sized_patch("c000000000000000000000000000000000000002", 2, t + 9 * 86400);
        Patch c3 = sized_patch("c000000000000000000000000000000000000003", 2, t - 100);
        Patch lone = sized_patch("<lone@x>", 2, t);
        Corpus corpus({ m1, m2, m3, lone }, { c1, c2, c3 });
        auto cs = ClusterSet::from_clusters({ { m1.id, m2.id, c1.id, c2.id }, { m3.id, c3.id }, { lone.id } });
        std::vector<double> qs { 0.5, 1.0 };
        auto report = integration_durations(cs, corpus, qs);
        REQUIRE(report.durations.size() == 2);
        CHECK(report.durations[0].cluster == m1.id);
        CHECK(report.durations[0].seconds == 604800);
        CHECK(report.durations[1].seconds == -100);
        CHECK(report.negative == 1);
        REQUIRE(report.quantiles.size() == 2);
        CHECK(report.quantiles[0].second == -100);
        CHECK(report.quantiles[1].second == 604800);
        REQUIRE(report.ecdf.size() == 2);
        CHECK(report.ecdf[0] == std::make_pair(std::int64_t { -100 }, 0.5));
        CHECK(report.ecdf[1] == std::make_pair(std::int64_t { 604800 }, 1.0));
    }

    TEST_CASE("census")
    {
        auto m = ids(8);
        PatchId c1 = PatchId::commit("c000000000000000000000000000000000000001");
        PatchId c2 = PatchId::commit("c000000000000000000000000000000000000002");
        PatchId c3 = PatchId::commit("c000000000000000000000000000000000000003");
        auto cs = ClusterSet::from_clusters({ { m[0], m[1], m[2], m[3], c1 }, { m[4], m[5] }, { m[6], c2 }, { m[7] }, { c3 } });
        Census c = census(cs);
        CHECK(c.clusters == 4);
        CHECK(c.linked == 2);
        CHECK(c.mails_gt1 == 2);
        CHECK(c.mails_gt2 == 1);
        CHECK(c.mails_gt3 == 1);
        CHECK(c.single_mail_linked == 1);
        CHECK(format_census(c) == "clusters=4 linked=2 mails_gt1=2 mails_gt2=1 mails_gt3=1 single_mail_linked=1");
    }
}
