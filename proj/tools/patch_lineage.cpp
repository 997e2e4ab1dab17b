#include <lineage/baselines.hpp>
#include <lineage/cluster.hpp>
#include <lineage/evaluation.hpp>
#include <lineage/mail_ingest.hpp>
#include <lineage/repo_ingest.hpp>
#include <lineage/review.hpp>
#include <lineage/store.hpp>
#include <lineage/text.hpp>

#include <CLI11.hpp>
#include <httplib.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace lineage;

namespace {

constexpr int exit_usage = 1;
constexpr int exit_data = 2;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Settings {
    std::optional<double> tf, th, dlr, w, ta, threshold;
    std::optional<int> window_days;
    std::optional<std::string> engine;
    std::string config_file;
};

double to_double(const std::string& key, const std::string& value)
{
    try {
        std::size_t used = 0;
        double v = std::stod(value, &used);
        if (used == value.size())
            return v;
    } catch (const std::exception&) {
    }
    throw UsageError("bad number for " + key + ": " + value);
}

// key=value lines; '#' comments; flags given on the command line win.
void apply_config_file(Settings& s)
{
    if (s.config_file.empty())
        return;
    std::ifstream in(s.config_file);
    if (!in)
        throw UsageError("cannot read config " + s.config_file);
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        std::string_view v = text::trim(line);
        if (v.empty() || v.front() == '#')
            continue;
        auto eq = v.find('=');
        if (eq == std::string_view::npos)
            throw UsageError(s.config_file + ":" + std::to_string(number) + ": expected key=value");
        std::string key(text::trim(v.substr(0, eq)));
        std::string value(text::trim(v.substr(eq + 1)));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
            value = value.substr(1, value.size() - 2);
        std::replace(key.begin(), key.end(), '_', '-');
        auto set = [&](std::optional<double>& slot) {
            if (!slot)
                slot = to_double(key, value);
        };
        if (key == "tf")
            set(s.tf);
        else if (key == "th")
            set(s.th);
        else if (key == "dlr")
            set(s.dlr);
        else if (key == "w")
            set(s.w);
        else if (key == "ta")
            set(s.ta);
        else if (key == "threshold")
            set(s.threshold);
        else if (key == "window-days") {
            if (!s.window_days)
                s.window_days = static_cast<int>(to_double(key, value));
        } else if (key == "engine") {
            if (!s.engine)
                s.engine = value;
        } else {
            throw UsageError(s.config_file + ":" + std::to_string(number) + ": unknown key " + key);
        }
    }
}

SimilarityConfig similarity_config(const Settings& s)
{
    SimilarityConfig d;
    try {
        return SimilarityConfig::make(s.tf.value_or(d.tf), s.th.value_or(d.th), s.dlr.value_or(d.dlr), s.w.value_or(d.w),
                                      s.ta.value_or(d.ta));
    } catch (const ModelError& e) {
        throw UsageError(e.what());
    }
}

int window_days(const Settings& s)
{
    int days = s.window_days.value_or(default_window_days);
    if (days < 0)
        throw UsageError("--window-days must not be negative");
    return days;
}

void add_settings(CLI::App* cmd, Settings& s, bool with_engine)
{
    cmd->add_option("--config", s.config_file, "key=value file with defaults for the flags below");
    cmd->add_option("--tf", s.tf, "file-name similarity threshold");
    cmd->add_option("--th", s.th, "hunk-heading similarity threshold");
    cmd->add_option("--dlr", s.dlr, "diff-length ratio gate");
    cmd->add_option("--w", s.w, "message weight");
    cmd->add_option("--ta", s.ta, "auto-accept threshold");
    cmd->add_option("--window-days", s.window_days, "candidate time window in days");
    if (with_engine) {
        cmd->add_option("--engine", s.engine, "rate, plusminus or checksum");
        cmd->add_option("--threshold", s.threshold, "plus-minus threshold");
    }
}

std::vector<Patch> all_patches(const Corpus& corpus)
{
    std::vector<Patch> all = corpus.mails();
    all.insert(all.end(), corpus.commits().begin(), corpus.commits().end());
    return all;
}

ParamRange parse_range(const std::string& flag, const std::string& value)
{
    std::vector<std::string> parts;
    std::stringstream in(value);
    for (std::string part; std::getline(in, part, ':');)
        parts.push_back(part);
    if (parts.size() == 1)
        return ParamRange::single(to_double(flag, parts[0]));
    if (parts.size() != 3)
        throw UsageError(flag + " expects lo:hi:step or a single value");
    return { to_double(flag, parts[0]), to_double(flag, parts[1]), to_double(flag, parts[2]) };
}

std::string fixed(double v, int digits)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

int cmd_ingest_mbox(const std::vector<std::string>& paths, const fs::path& store)
{
    std::vector<RawMail> mails;
    for (const auto& path : paths) {
        auto parsed = parse_mbox(read_archive(path));
        for (auto& m : parsed) {
            m.position = mails.size();
            mails.push_back(std::move(m));
        }
    }
    auto result = ingest_mails(mails);
    write_patches(store, PatchKind::mail, result.patches);
    const auto& st = result.stats;
    std::cout << "mails=" << st.mails << " patches=" << st.patches << " warnings=" << st.warnings << "\n";
    if (st.warnings > 0)
        std::cerr << "parse_warnings=" << st.parse_warnings << " missing_id=" << st.missing_id
                  << " bad_date=" << st.bad_date << " duplicates=" << st.duplicates << "\n";
    return 0;
}

int cmd_ingest_repo(const std::string& repo, const std::string& range, const std::string& patch_dir, const fs::path& store)
{
    if (repo.empty() == patch_dir.empty())
        throw UsageError("give exactly one of --repo and --patch-dir");
    auto result = repo.empty() ? load_patch_directory(patch_dir) : load_commits(repo, range);
    write_patches(store, PatchKind::commit, result.commits);
    std::cout << "commits=" << result.commits.size() << " merges_excluded=" << result.merges_excluded
              << " empty_excluded=" << result.empty_excluded << "\n";
    return 0;
}

int cmd_analyze(const fs::path& store, const fs::path& out, Settings s)
{
    apply_config_file(s);
    SimilarityConfig cfg = similarity_config(s);
    int days = window_days(s);
    std::string engine = s.engine.value_or("rate");
    double threshold = s.threshold.value_or(0.26);
    if (engine != "rate" && engine != "plusminus" && engine != "checksum")
        throw UsageError("unknown engine " + engine);
    if (!(threshold >= 0.0 && threshold <= 1.0))
        throw UsageError("--threshold must lie in [0, 1]");

    Corpus corpus = load_corpus(store);
    ClusterSet result;
    if (engine == "rate") {
        result = analyze(corpus, cfg, days);
    } else {
        auto patches = all_patches(corpus);
        result = engine == "plusminus" ? plusminus_cluster(patches, threshold, PlusMinusDenominator::smaller, days)
                                       : checksum_cluster(patches, days);
    }
    save_ground_truth(out, result);
    std::cout << format_census(census(result)) << "\n";
    return 0;
}

int cmd_sweep(const fs::path& store, const fs::path& truth_path, const std::map<std::string, std::string>& ranges,
              bool count_only, const std::string& out_path, std::optional<int> days)
{
    SweepGrid grid = SweepGrid::reference();
    std::map<std::string, ParamRange*> axes { { "tf", &grid.tf }, { "th", &grid.th }, { "dlr", &grid.dlr }, { "w", &grid.w }, { "ta", &grid.ta } };
    for (const auto& [name, value] : ranges)
        if (!value.empty())
            *axes.at(name) = parse_range("--" + name, value);
    try {
        grid.validate();
    } catch (const EmptyGrid& e) {
        throw UsageError(e.what());
    }
    if (count_only) {
        std::cout << grid.cardinality() << "\n";
        return 0;
    }
    if (store.empty() || truth_path.empty())
        throw UsageError("sweep needs --store and --truth");

    Corpus corpus = load_corpus(store);
    ClusterSet truth = load_ground_truth(truth_path);
    std::ofstream file;
    if (!out_path.empty()) {
        file.open(out_path);
        if (!file)
            throw std::runtime_error("cannot write " + out_path);
    }
    std::ostream& out = out_path.empty() ? std::cout : file;
    out << "tf,th,dlr,w,ta,tp,fp,fn,fm\n";
    sweep(grid, corpus, truth, days.value_or(default_window_days), [&](const SweepRow& row) {
        out << fixed(row.cfg.tf, 2) << ',' << fixed(row.cfg.th, 2) << ',' << fixed(row.cfg.dlr, 2) << ','
            << fixed(row.cfg.w, 2) << ',' << fixed(row.cfg.ta, 2) << ',' << row.counts.tp << ',' << row.counts.fp << ','
            << row.counts.fn << ',' << fixed(row.fm, 6) << '\n';
    });
    return 0;
}

int cmd_evaluate(const fs::path& result_path, const fs::path& truth_path)
{
    ClusterSet truth = load_ground_truth(truth_path);
    ClusterSet result = restrict_to(load_ground_truth(result_path), truth);
    PairCounts c = pair_counts(result, truth);
    std::cout << "tp=" << c.tp << " fp=" << c.fp << " fn=" << c.fn << " tn=" << c.tn
              << " fm=" << fixed(fowlkes_mallows(c), 6) << " purity=" << fixed(purity(result, truth), 6) << "\n";
    return 0;
}

int cmd_stats(const fs::path& store, const fs::path& result_path, const std::vector<double>& quantiles, bool ecdf)
{
    Corpus corpus = load_corpus(store);
    ClusterSet result = load_ground_truth(result_path);
    std::cout << format_census(census(result)) << "\n";
    DurationReport report = integration_durations(result, corpus, quantiles);
    std::cout << "linked_clusters=" << report.durations.size() << " negative=" << report.negative << "\n";
    std::cout << "quantile,seconds,days\n";
    for (const auto& [q, seconds] : report.quantiles)
        std::cout << fixed(q, 3) << ',' << seconds << ',' << fixed(static_cast<double>(seconds) / 86400.0, 2) << '\n';
    if (ecdf) {
        std::cout << "seconds,fraction\n";
        for (const auto& [seconds, fraction] : report.ecdf)
            std::cout << seconds << ',' << fixed(fraction, 6) << '\n';
    }
    return 0;
}

int cmd_serve(const fs::path& store, const fs::path& result_path, const std::string& host, int port, fs::path log, Settings s)
{
    apply_config_file(s);
    SimilarityConfig cfg = similarity_config(s);
    if (log.empty())
        log = store / "judgments.jsonl";
    Corpus corpus = load_corpus(store);
    ClusterSet result = load_ground_truth(result_path);
    ReviewService service(std::move(corpus), std::move(result), cfg, log, window_days(s));
    httplib::Server server;
    service.mount(server);
    if (!server.bind_to_port(host, port)) {
        std::cerr << "error: cannot listen on " << host << ":" << port << "\n";
        return exit_data;
    }
    std::cerr << "serving on http://" << host << ":" << port << " (" << service.replayed() << " judgments replayed)\n";
    server.listen_after_bind();
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app { "Tracks mailing-list patches and the commits they became." };
    app.require_subcommand(1);

    std::string store, out, result_path, truth_path, repo, range = "HEAD", patch_dir, csv_out, log_path;
    std::string host = "127.0.0.1";
    int port = 8080;
    std::vector<std::string> mbox_paths;
    std::vector<double> quantiles { 0.5, 0.8, 0.995 };
    bool count_only = false, ecdf = false;
    std::optional<int> sweep_days;
    std::map<std::string, std::string> ranges { { "tf", "" }, { "th", "" }, { "dlr", "" }, { "w", "" }, { "ta", "" } };
    Settings analyze_settings, serve_settings;

    auto* ingest_mbox = app.add_subcommand("ingest-mbox", "extract mail patches from mbox archives (.gz allowed)");
    ingest_mbox->add_option("--store", store, "corpus store directory")->required();
    ingest_mbox->add_option("paths", mbox_paths, "mbox files")->required();

    auto* ingest_repo = app.add_subcommand("ingest-repo", "extract commits from a git repository");
    ingest_repo->add_option("--store", store, "corpus store directory")->required();
    ingest_repo->add_option("--repo", repo, "git repository");
    ingest_repo->add_option("--range", range, "revision range")->capture_default_str();
    ingest_repo->add_option("--patch-dir", patch_dir, "directory of <hash>.patch files");

    auto* analyze_cmd = app.add_subcommand("analyze", "cluster mails and link commits");
    analyze_cmd->add_option("--store", store, "corpus store directory")->required();
    analyze_cmd->add_option("--out", out, "result file")->required();
    add_settings(analyze_cmd, analyze_settings, true);

    auto* sweep_cmd = app.add_subcommand("sweep", "score every grid point against a ground truth (CSV)");
    sweep_cmd->add_option("--store", store, "corpus store directory");
    sweep_cmd->add_option("--truth", truth_path, "ground-truth file");
    for (auto& [name, value] : ranges)
        sweep_cmd->add_option("--" + name, value, "lo:hi:step or a single value");
    sweep_cmd->add_option("--window-days", sweep_days, "candidate time window in days");
    sweep_cmd->add_flag("--count-only", count_only, "print the number of grid points and stop");
    sweep_cmd->add_option("--out", csv_out, "CSV file (default stdout)");

    auto* evaluate_cmd = app.add_subcommand("evaluate", "compare a result file with a ground truth");
    evaluate_cmd->add_option("--result", result_path, "result file")->required();
    evaluate_cmd->add_option("--truth", truth_path, "ground-truth file")->required();

    auto* stats_cmd = app.add_subcommand("stats", "cluster census and integration durations");
    stats_cmd->add_option("--store", store, "corpus store directory")->required();
    stats_cmd->add_option("--result", result_path, "result file")->required();
    stats_cmd->add_option("--quantiles", quantiles, "quantiles in (0, 1]")->delimiter(',');
    stats_cmd->add_flag("--ecdf", ecdf, "also print the empirical distribution");

    auto* serve_cmd = app.add_subcommand("serve", "HTTP JSON API for reviewing candidate pairs");
    serve_cmd->add_option("--store", store, "corpus store directory")->required();
    serve_cmd->add_option("--result", result_path, "result file")->required();
    serve_cmd->add_option("--host", host, "listen address")->capture_default_str();
    serve_cmd->add_option("--port", port, "listen port")->capture_default_str();
    serve_cmd->add_option("--log", log_path, "judgment log (default <store>/judgments.jsonl)");
    add_settings(serve_cmd, serve_settings, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : exit_usage;
    }

    try {
        if (*ingest_mbox)
            return cmd_ingest_mbox(mbox_paths, store);
        if (*ingest_repo)
            return cmd_ingest_repo(repo, range, patch_dir, store);
        if (*analyze_cmd)
            return cmd_analyze(store, out, analyze_settings);
        if (*sweep_cmd)
            return cmd_sweep(store, truth_path, ranges, count_only, csv_out, sweep_days);
        if (*evaluate_cmd)
            return cmd_evaluate(result_path, truth_path);
        if (*stats_cmd)
            return cmd_stats(store, result_path, quantiles, ecdf);
        if (*serve_cmd)
            return cmd_serve(store, result_path, host, port, log_path, serve_settings);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_data;
    }
    return exit_usage;
}
