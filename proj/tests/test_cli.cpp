#include <lineage/evaluation.hpp>
#include <lineage/repo_ingest.hpp>
#include <lineage/store.hpp>

#include "synthetic.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <unistd.h>

using namespace lineage;
namespace fs = std::filesystem;

namespace {

ProcessResult cli(std::vector<std::string> args)
{
    args.insert(args.begin(), LINEAGE_CLI);
    return run_process(args);
}

struct TempDir {
    fs::path path;
    explicit TempDir(const char* tag)
        : path(fs::temp_directory_path() / (std::string("lineage-cli-") + tag + "-" + std::to_string(::getpid())))
    {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

// Three changes with three revisions each, every one integrated once.
lineage::testing::SyntheticCorpus chains()
{
    lineage::testing::SyntheticOptions o;
    o.changes = 3;
    o.min_revisions = o.max_revisions = 3;
    o.seed = 4;
    o.file_pool = 3;
    return lineage::testing::make_synthetic(o);
}

} // namespace

TEST_SUITE("cli")
{
    TEST_CASE("ingest-mbox on the mixed fixture")
    {
        TempDir dir("mbox");
        auto r = cli({ "ingest-mbox", "--store", (dir.path / "store").string(), std::string(LINEAGE_FIXTURES) + "/mixed.mbox" });
        CHECK(r.status == 0);
        CHECK(r.out == "mails=10 patches=4 warnings=1\n");
        CHECK(read_patches(dir.path / "store", PatchKind::mail).size() == 4);

        std::ofstream(dir.path / "empty.mbox");
        r = cli({ "ingest-mbox", "--store", (dir.path / "store2").string(), (dir.path / "empty.mbox").string() });
        CHECK(r.status == 0);
        CHECK(r.out == "mails=0 patches=0 warnings=0\n");
    }

    TEST_CASE("sweep --count-only")
    {
        auto r = cli({ "sweep", "--count-only" });
        CHECK(r.status == 0);
        CHECK(r.out == "803682\n");
        r = cli({ "sweep", "--count-only", "--ta", "0.8", "--tf", "1" });
        CHECK(r.out == "2178\n");
        r = cli({ "sweep", "--count-only", "--ta", "0.9:0.8:0.01" });
        CHECK(r.status == 1);
    }

    TEST_CASE("analyze, evaluate, stats and sweep on three revision chains")
    {
        TempDir dir("analyze");
        auto s = chains();
        fs::path store = dir.path / "store";
        write_patches(store, PatchKind::mail, s.mails);
        write_patches(store, PatchKind::commit, s.commits);
        fs::path truth = dir.path / "truth.txt";
        save_ground_truth(truth, s.truth);
        fs::path out = dir.path / "result.txt";

        auto r = cli({ "analyze", "--store", store.string(), "--out", out.string() });
        REQUIRE(r.status == 0);
        CHECK(r.out == "clusters=3 linked=3 mails_gt1=3 mails_gt2=3 mails_gt3=0 single_mail_linked=0\n");
        CHECK(load_ground_truth(out) == s.truth);

        r = cli({ "evaluate", "--result", out.string(), "--truth", truth.string() });
        CHECK(r.status == 0);
        CHECK(r.out.find("fm=1.000000") != std::string::npos);
        CHECK(r.out.rfind("tp=18 fp=0 fn=0 tn=48 ", 0) == 0);

        r = cli({ "stats", "--store", store.string(), "--result", out.string(), "--quantiles", "0.5,1", "--ecdf" });
        CHECK(r.status == 0);
        CHECK(r.out.find("linked_clusters=3 negative=0\nquantile,seconds,days\n0.500,") != std::string::npos);
        CHECK(r.out.find("seconds,fraction\n") != std::string::npos);

        r = cli({ "sweep", "--store", store.string(), "--truth", truth.string(), "--tf", "1", "--th", "1", "--dlr", "0.4",
                  "--w", "0.3", "--ta", "0.80:0.82:0.01" });
        CHECK(r.status == 0);
        CHECK(r.out.rfind("tf,th,dlr,w,ta,tp,fp,fn,fm\n1.00,1.00,0.40,0.30,0.80,18,0,0,1.000000\n", 0) == 0);

        r = cli({ "analyze", "--store", store.string(), "--out", out.string(), "--engine", "checksum" });
        CHECK(r.status == 0);
    }

    TEST_CASE("config files and flag precedence")
    {
        TempDir dir("config");
        auto s = chains();
        fs::path store = dir.path / "store";
        write_patches(store, PatchKind::mail, s.mails);
        fs::path out = dir.path / "result.txt";
        std::ofstream(dir.path / "strict.conf") << "# accept nothing short of identity\nta = 1.0\n";
        auto r = cli({ "analyze", "--store", store.string(), "--out", out.string(), "--config", (dir.path / "strict.conf").string() });
        CHECK(r.status == 0);
        std::size_t strict_clusters = load_ground_truth(out).cluster_count();
        r = cli({ "analyze", "--store", store.string(), "--out", out.string(), "--config", (dir.path / "strict.conf").string(),
                  "--ta", "0.82" });
        CHECK(r.status == 0);
        CHECK(load_ground_truth(out).cluster_count() == 3);
        CHECK(strict_clusters >= 3);

        std::ofstream(dir.path / "bad.conf") << "colour = blue\n";
        r = cli({ "analyze", "--store", store.string(), "--out", out.string(), "--config", (dir.path / "bad.conf").string() });
        CHECK(r.status == 1);
    }

    TEST_CASE("exit codes")
    {
        TempDir dir("codes");
        CHECK(cli({}).status == 1);
        CHECK(cli({ "no-such-command" }).status == 1);
        CHECK(cli({ "analyze", "--store", dir.path.string() }).status == 1); // --out missing
        CHECK(cli({ "analyze", "--store", dir.path.string(), "--out", "x", "--ta", "1.5" }).status == 1);
        CHECK(cli({ "ingest-mbox", "--store", dir.path.string(), (dir.path / "missing.mbox").string() }).status == 2);
        CHECK(cli({ "ingest-repo", "--store", dir.path.string(), "--repo", dir.path.string() }).status == 2);
        CHECK(cli({ "ingest-repo", "--store", dir.path.string() }).status == 1);
        CHECK(cli({ "evaluate", "--result", (dir.path / "nope").string(), "--truth", (dir.path / "nope").string() }).status == 2);
    }
}
