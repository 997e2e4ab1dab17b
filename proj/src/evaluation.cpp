#include <lineage/evaluation.hpp>

#include <lineage/diff_parse.hpp>
#include <lineage/text.hpp>

#include <tbb/parallel_for.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_map>

namespace lineage {

namespace {

std::uint64_t choose2(std::uint64_t n)
{
    return n < 2 ? 0 : n * (n - 1) / 2;
}

std::vector<std::uint32_t> labels_of(const ClusterSet& clusters)
{
    std::vector<std::uint32_t> labels(clusters.size());
    for (std::size_t i = 0; i < labels.size(); ++i)
        labels[i] = static_cast<std::uint32_t>(clusters.find_index(i));
    return labels;
}

void require_same_universe(const ClusterSet& a, const ClusterSet& b)
{
    if (a.universe() != b.universe())
        throw UniverseMismatch("clusterings cover different element sets");
}

// Sorted (result label, truth label) cells.
std::vector<std::pair<std::uint32_t, std::uint32_t>> cells(std::span<const std::uint32_t> result,
                                                           std::span<const std::uint32_t> truth)
{
    std::vector<std::pair<std::uint32_t, std::uint32_t>> out(result.size());
    for (std::size_t i = 0; i < result.size(); ++i)
        out[i] = { result[i], truth[i] };
    std::sort(out.begin(), out.end());
    return out;
}

std::uint64_t sum_choose2_of_runs(std::vector<std::uint32_t> labels)
{
    std::sort(labels.begin(), labels.end());
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < labels.size();) {
        std::size_t j = i;
        while (j < labels.size() && labels[j] == labels[i])
            ++j;
        sum += choose2(j - i);
        i = j;
    }
    return sum;
}

} // namespace

PairCounts pair_counts(std::span<const std::uint32_t> result_labels, std::span<const std::uint32_t> truth_labels)
{
    if (result_labels.size() != truth_labels.size())
        throw UniverseMismatch("label vectors differ in length");
    auto table = cells(result_labels, truth_labels);
    std::uint64_t both = 0;
    for (std::size_t i = 0; i < table.size();) {
        std::size_t j = i;
        while (j < table.size() && table[j] == table[i])
            ++j;
        both += choose2(j - i);
        i = j;
    }
    std::uint64_t in_result = sum_choose2_of_runs({ result_labels.begin(), result_labels.end() });
    std::uint64_t in_truth = sum_choose2_of_runs({ truth_labels.begin(), truth_labels.end() });

    PairCounts counts;
    counts.tp = both;
    counts.fp = in_result - both;
    counts.fn = in_truth - both;
    counts.tn = choose2(result_labels.size()) - counts.tp - counts.fp - counts.fn;
    return counts;
}

PairCounts pair_counts(const ClusterSet& result, const ClusterSet& truth)
{
    require_same_universe(result, truth);
    auto r = labels_of(result);
    auto t = labels_of(truth);
    return pair_counts(r, t);
}

double fowlkes_mallows(const PairCounts& c)
{
    if (c.tp == 0)
        return 0.0;
    double tp = static_cast<double>(c.tp);
    double precision = tp / (tp + static_cast<double>(c.fp));
    double recall = tp / (tp + static_cast<double>(c.fn));
    return std::sqrt(precision * recall);
}

double purity(const ClusterSet& result, const ClusterSet& truth)
{
    require_same_universe(result, truth);
    if (result.empty())
        return 1.0;
    auto table = cells(labels_of(result), labels_of(truth));
    std::uint64_t majority_sum = 0;
    for (std::size_t i = 0; i < table.size();) {
        std::uint64_t best = 0;
        std::size_t j = i;
        while (j < table.size() && table[j].first == table[i].first) {
            std::size_t k = j;
            while (k < table.size() && table[k] == table[j])
                ++k;
            best = std::max<std::uint64_t>(best, k - j);
            j = k;
        }
        majority_sum += best;
        i = j;
    }
    return static_cast<double>(majority_sum) / static_cast<double>(result.size());
}

std::vector<std::size_t> cluster_shape(const ClusterSet& clusters)
{
    std::vector<std::size_t> shape;
    for (const auto& c : clusters.clusters())
        shape.push_back(c.size());
    return shape;
}

ClusterSet random_clustering(std::span<const std::size_t> shape, std::vector<PatchId> universe, std::uint64_t seed)
{
    std::sort(universe.begin(), universe.end());
    std::size_t total = 0;
    for (std::size_t s : shape)
        total += s;
    if (total != universe.size())
        throw ShapeMismatch("cluster sizes sum to " + std::to_string(total) + ", universe has "
                            + std::to_string(universe.size()));
    std::mt19937_64 rng(seed);
    std::shuffle(universe.begin(), universe.end(), rng);

    std::vector<std::vector<PatchId>> clusters;
    auto it = universe.begin();
    for (std::size_t s : shape) {
        if (s == 0)
            continue;
        clusters.emplace_back(it, it + static_cast<std::ptrdiff_t>(s));
        it += static_cast<std::ptrdiff_t>(s);
    }
    return ClusterSet::from_clusters(clusters);
}

ClusterSet parse_ground_truth(std::string_view content)
{
    std::vector<std::vector<PatchId>> clusters;
    std::size_t line_no = 0;
    for (std::string_view line : split_lines(content)) {
        ++line_no;
        line = text::trim(line);
        if (line.empty() || line.front() == '#')
            continue;
        std::vector<PatchId> cluster;
        std::istringstream tokens { std::string(line) };
        std::string token;
        while (tokens >> token) {
            try {
                cluster.push_back(PatchId::parse(token));
            } catch (const ModelError& e) {
                throw GroundTruthError("line " + std::to_string(line_no) + ": " + e.what());
            }
        }
        clusters.push_back(std::move(cluster));
    }
    try {
        return ClusterSet::from_clusters(clusters);
    } catch (const ModelError& e) {
        throw GroundTruthError(e.what());
    }
}

std::string format_ground_truth(const ClusterSet& clusters)
{
    std::string out;
    for (const auto& cluster : clusters.clusters()) {
        for (std::size_t i = 0; i < cluster.size(); ++i) {
            if (i)
                out += ' ';
            out += cluster[i].value();
        }
        out += '\n';
    }
    return out;
}

ClusterSet load_ground_truth(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw GroundTruthError("cannot read " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_ground_truth(buffer.str());
}

void save_ground_truth(const std::filesystem::path& path, const ClusterSet& clusters)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw GroundTruthError("cannot write " + path.string());
    out << format_ground_truth(clusters);
}

ClusterSet restrict_to(const ClusterSet& result, const ClusterSet& truth)
{
    for (const auto& id : truth.universe())
        if (!result.contains(id))
            throw UniverseMismatch("truth id missing from result: " + id.value());
    return result.with_universe(truth.universe());
}

std::size_t ParamRange::count() const
{
    if (!(step > 0.0) || hi < lo)
        return 0;
    return static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
}

double ParamRange::value(std::size_t k) const
{
    return std::round((lo + static_cast<double>(k) * step) * 1e9) / 1e9;
}

std::size_t SweepGrid::cardinality() const
{
    return tf.count() * th.count() * dlr.count() * w.count() * ta.count();
}

void SweepGrid::validate() const
{
    for (const ParamRange* r : { &tf, &th, &dlr, &w, &ta }) {
        if (!(r->step > 0.0) || r->lo < 0.0 || r->hi > 1.0 || r->hi < r->lo)
            throw EmptyGrid("grid range must satisfy 0 <= lo <= hi <= 1 and step > 0");
    }
}

SweepGrid SweepGrid::reference()
{
    return {
        { 0.60, 1.00, 0.05 },
        { 0.15, 1.00, 0.05 },
        { 0.00, 1.00, 0.10 },
        { 0.00, 1.00, 0.10 },
        { 0.60, 1.00, 0.01 },
    };
}

SweepGrid SweepGrid::single(const SimilarityConfig& cfg)
{
    return { ParamRange::single(cfg.tf), ParamRange::single(cfg.th), ParamRange::single(cfg.dlr),
             ParamRange::single(cfg.w), ParamRange::single(cfg.ta) };
}

namespace {

std::uint64_t key_of(std::size_t a, std::size_t b)
{
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(b);
}

// Every pair the two-phase clustering can ask about for one tf: mail pairs
// inside a connected component of the candidate graph (clusters only grow
// along candidate edges, so representatives of two candidate clusters share a
// component) plus the mail/commit candidates.
std::vector<IndexPair> reachable_queries(std::size_t mail_count, std::span<const IndexPair> mail_pairs,
                                         std::span<const IndexPair> mail_commit_pairs)
{
    DisjointSets components(mail_count);
    for (auto [i, j] : mail_pairs)
        components.unite(i, j);
    std::unordered_map<std::size_t, std::vector<std::uint32_t>> groups;
    for (std::size_t i = 0; i < mail_count; ++i)
        groups[components.find(i)].push_back(static_cast<std::uint32_t>(i));

    std::vector<IndexPair> queries(mail_commit_pairs.begin(), mail_commit_pairs.end());
    for (const auto& [root, members] : groups)
        for (std::size_t a = 0; a < members.size(); ++a)
            for (std::size_t b = a + 1; b < members.size(); ++b)
                queries.emplace_back(members[a], members[b]);
    std::sort(queries.begin(), queries.end());
    return queries;
}

} // namespace

void sweep(const SweepGrid& grid, const Corpus& corpus, const ClusterSet& truth, int window_days,
           const std::function<void(const SweepRow&)>& sink)
{
    grid.validate();
    if (grid.cardinality() == 0)
        throw EmptyGrid("grid has no points");

    PatchTable table(corpus);
    const auto ids = table.ids();
    std::vector<std::uint32_t> selection;
    selection.reserve(truth.size());
    for (const auto& id : truth.universe()) {
        auto it = std::lower_bound(ids.begin(), ids.end(), id);
        if (it == ids.end() || *it != id)
            throw UniverseMismatch("truth id missing from corpus: " + id.value());
        selection.push_back(static_cast<std::uint32_t>(it - ids.begin()));
    }
    const auto truth_labels = labels_of(truth);
    const auto features = compute_features(table);

    const IndexRange mails { 0, table.mail_count() };
    const IndexRange commits { table.mail_count(), table.size() };
    const std::size_t n_dlr = grid.dlr.count(), n_w = grid.w.count(), n_ta = grid.ta.count();

    std::unordered_map<std::uint64_t, double> message_scores;

    for (std::size_t tf_i = 0; tf_i < grid.tf.count(); ++tf_i) {
        const double tf = grid.tf.value(tf_i);
        const auto mail_pairs = candidate_index_pairs(table, mails, mails, tf, window_days);
        const auto mail_commit_pairs = candidate_index_pairs(table, mails, commits, tf, window_days);
        const auto queries = reachable_queries(table.mail_count(), mail_pairs, mail_commit_pairs);

        std::unordered_map<std::uint64_t, std::uint32_t> query_slot;
        query_slot.reserve(queries.size());
        for (std::size_t k = 0; k < queries.size(); ++k)
            query_slot.emplace(key_of(queries[k].first, queries[k].second), static_cast<std::uint32_t>(k));

        std::vector<IndexPair> missing;
        for (auto q : queries)
            if (!message_scores.contains(key_of(q.first, q.second)))
                missing.push_back(q);
        std::vector<double> fresh(missing.size());
        tbb::parallel_for(std::size_t { 0 }, missing.size(), [&](std::size_t k) {
            fresh[k] = bag_score(features[missing[k].first].message, features[missing[k].second].message);
        });
        for (std::size_t k = 0; k < missing.size(); ++k)
            message_scores.emplace(key_of(missing[k].first, missing[k].second), fresh[k]);
        std::vector<double> r_msg(queries.size());
        for (std::size_t k = 0; k < queries.size(); ++k)
            r_msg[k] = message_scores.at(key_of(queries[k].first, queries[k].second));

        for (std::size_t th_i = 0; th_i < grid.th.count(); ++th_i) {
            const double th = grid.th.value(th_i);
            std::vector<double> r_diff(queries.size());
            tbb::parallel_for(std::size_t { 0 }, queries.size(), [&](std::size_t k) {
                r_diff[k] = diff_similarity(features[queries[k].first], features[queries[k].second], tf, th);
            });

            std::vector<SweepRow> block(n_dlr * n_w * n_ta);
            tbb::parallel_for(std::size_t { 0 }, n_dlr * n_w, [&](std::size_t dw) {
                const double dlr = grid.dlr.value(dw / n_w);
                const double w = grid.w.value(dw % n_w);
                std::vector<double> combined(queries.size());
                for (std::size_t k = 0; k < queries.size(); ++k) {
                    const auto [a, b] = queries[k];
                    combined[k] = combine_scores(r_msg[k], r_diff[k], features[a].changed_lines,
                                                 features[b].changed_lines, dlr, w)
                                      .combined;
                }
                std::vector<std::uint32_t> result_labels(selection.size());
                for (std::size_t ta_i = 0; ta_i < n_ta; ++ta_i) {
                    const double ta = grid.ta.value(ta_i);
                    PairJudge judge = [&](std::span<const IndexPair> pairs, std::vector<char>& verdicts) {
                        verdicts.resize(pairs.size());
                        for (std::size_t k = 0; k < pairs.size(); ++k)
                            verdicts[k] = combined[query_slot.at(key_of(pairs[k].first, pairs[k].second))] >= ta;
                    };
                    DisjointSets sets(table.size());
                    merge_by_representatives(table, mail_pairs, judge, sets);
                    attach_by_representatives(table, mail_commit_pairs, judge, sets);
                    for (std::size_t s = 0; s < selection.size(); ++s)
                        result_labels[s] = static_cast<std::uint32_t>(sets.find(selection[s]));

                    SweepRow& row = block[dw * n_ta + ta_i];
                    row.cfg = { tf, th, dlr, w, ta };
                    row.counts = pair_counts(result_labels, truth_labels);
                    row.fm = fowlkes_mallows(row.counts);
                }
            });
            for (const auto& row : block)
                sink(row);
        }
    }
}

std::vector<SweepRow> sweep(const SweepGrid& grid, const Corpus& corpus, const ClusterSet& truth, int window_days)
{
    std::vector<SweepRow> rows;
    rows.reserve(grid.cardinality());
    sweep(grid, corpus, truth, window_days, [&](const SweepRow& row) { rows.push_back(row); });
    return rows;
}

DurationReport integration_durations(const ClusterSet& clusters, const Corpus& corpus,
                                     std::span<const double> quantiles)
{
    static constexpr double default_quantiles[] = { 0.5, 0.8, 0.995 };
    if (quantiles.empty())
        quantiles = default_quantiles;

    DurationReport report;
    for (const auto& cluster : clusters.clusters()) {
        std::optional<Timestamp> latest_mail, earliest_commit;
        for (const auto& id : cluster) {
            const Patch* p = corpus.find(id);
            if (!p)
                throw UniverseMismatch("clustered id missing from corpus: " + id.value());
            if (id.is_mail())
                latest_mail = std::max(latest_mail.value_or(p->submission_date), p->submission_date);
            else
                earliest_commit = std::min(earliest_commit.value_or(p->submission_date), p->submission_date);
        }
        if (!latest_mail || !earliest_commit)
            continue;
        std::int64_t seconds = *earliest_commit - *latest_mail;
        report.negative += seconds < 0;
        report.durations.push_back({ cluster.front(), seconds });
    }

    std::vector<std::int64_t> sorted;
    for (const auto& d : report.durations)
        sorted.push_back(d.seconds);
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    if (!sorted.empty()) {
        for (double q : quantiles) {
            auto rank = static_cast<std::size_t>(std::ceil(q * n));
            rank = std::clamp<std::size_t>(rank, 1, sorted.size());
            report.quantiles.emplace_back(q, sorted[rank - 1]);
        }
        for (std::size_t i = 0; i < sorted.size(); ++i)
            if (i + 1 == sorted.size() || sorted[i + 1] != sorted[i])
                report.ecdf.emplace_back(sorted[i], static_cast<double>(i + 1) / n);
    }
    return report;
}

Census census(const ClusterSet& clusters)
{
    Census c;
    for (const auto& cluster : clusters.clusters()) {
        std::size_t mails = 0, commits = 0;
        for (const auto& id : cluster)
            (id.is_mail() ? mails : commits)++;
        if (mails == 0)
            continue;
        ++c.clusters;
        c.linked += commits > 0;
        c.mails_gt1 += mails > 1;
        c.mails_gt2 += mails > 2;
        c.mails_gt3 += mails > 3;
        c.single_mail_linked += mails == 1 && commits > 0;
    }
    return c;
}

std::string format_census(const Census& c)
{
    return "clusters=" + std::to_string(c.clusters) + " linked=" + std::to_string(c.linked)
        + " mails_gt1=" + std::to_string(c.mails_gt1) + " mails_gt2=" + std::to_string(c.mails_gt2)
        + " mails_gt3=" + std::to_string(c.mails_gt3) + " single_mail_linked=" + std::to_string(c.single_mail_linked);
}

} // namespace lineage
