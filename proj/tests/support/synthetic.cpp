#include "synthetic.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <sstream>

namespace lineage::testing {

namespace {

using Rng = std::mt19937_64;

constexpr std::array syllables { "ka", "lo", "mi", "ru", "sen", "tor", "vex", "qua", "dri", "pel", "zon", "fi",
                                 "gar", "hul", "ip", "jet", "nor", "osk", "bre", "wil", "cyl", "dax", "emu", "yor" };
constexpr std::array subsystems { "net", "mm", "fs", "sched", "usb", "drm", "sound", "block", "crypto", "x86", "arm", "pci" };
constexpr std::array verbs { "fix", "add", "remove", "rework", "simplify", "avoid", "handle", "convert", "drop", "use" };
constexpr std::array filler { "the", "a", "in", "of", "to", "when", "this", "is", "for", "and", "on", "with", "not", "be" };
constexpr std::array boilerplate { "}", "return 0;", "break;", "return -EINVAL;", "goto out;", "} else {", "return ret;" };
constexpr std::array people { "Alice Rowe <alice@example.org>", "Bogdan Ilic <bogdan@example.net>",
                              "Chen Wei <chen@example.com>", "Dana Fox <dana@example.org>" };

std::size_t pick(Rng& rng, std::size_t n)
{
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

bool chance(Rng& rng, double p)
{
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

std::string word(Rng& rng, std::size_t min_syl = 2, std::size_t max_syl = 3)
{
    std::size_t n = min_syl + pick(rng, max_syl - min_syl + 1);
    std::string w;
    for (std::size_t i = 0; i < n; ++i)
        w += syllables[pick(rng, syllables.size())];
    return w;
}

std::string identifier(Rng& rng)
{
    return word(rng) + "_" + word(rng, 1, 2);
}

std::string text_upper(std::string s)
{
    for (char& c : s)
        if (c >= 'a' && c <= 'z')
            c = static_cast<char>(c - 'a' + 'A');
    return s;
}

std::string code_line(Rng& rng)
{
    if (chance(rng, 0.2))
        return boilerplate[pick(rng, boilerplate.size())];
    char num[16];
    std::snprintf(num, sizeof num, "0x%02zx", pick(rng, 256));
    switch (pick(rng, 5)) {
    case 0:
        return "\t" + identifier(rng) + " = " + identifier(rng) + "(" + identifier(rng) + ", " + num + ");";
    case 1:
        return "\tif (" + identifier(rng) + "->" + word(rng) + " & " + num + ")";
    case 2:
        return "#define " + text_upper(identifier(rng)) + " " + num;
    case 3:
        return "\t" + identifier(rng) + "(" + identifier(rng) + "->" + word(rng) + ");";
    default:
        return "\tstruct " + word(rng) + " *" + word(rng) + " = " + identifier(rng) + ";";
    }
}

std::string hex_id(Rng& rng)
{
    static constexpr char digits[] = "0123456789abcdef";
    std::string s;
    for (int i = 0; i < 40; ++i)
        s += digits[pick(rng, 16)];
    return s;
}

std::string sentence(Rng& rng, const std::vector<std::string>& topic)
{
    std::size_t n = 6 + pick(rng, 8);
    std::string s;
    for (std::size_t i = 0; i < n; ++i) {
        if (!s.empty())
            s += ' ';
        s += chance(rng, 0.45) ? std::string(filler[pick(rng, filler.size())])
            : chance(rng, 0.6) ? topic[pick(rng, topic.size())]
                               : word(rng);
    }
    s += '.';
    return s;
}

// Edits one token: swaps an identifier part or a number.
std::string edit_line(Rng& rng, const std::string& line)
{
    std::istringstream in(line);
    std::vector<std::string> tokens;
    for (std::string t; in >> t;)
        tokens.push_back(t);
    if (tokens.size() < 2)
        return line + " /* " + word(rng) + " */";
    std::size_t k = pick(rng, tokens.size());
    tokens[k] = chance(rng, 0.5) ? tokens[k] + "_" + word(rng, 1, 1) : word(rng) + tokens[k].substr(tokens[k].size() / 2);
    std::string out = line.substr(0, line.find_first_not_of(" \t"));
    for (std::size_t i = 0; i < tokens.size(); ++i)
        out += (i ? " " : "") + tokens[i];
    return out;
}

struct FileModel {
    std::string path;
    std::vector<std::string> functions;
};

std::vector<FileModel> file_pool(Rng& rng, std::size_t n)
{
    std::vector<FileModel> files;
    for (std::size_t i = 0; i < n; ++i) {
        FileModel f;
        f.path = std::string(subsystems[i % subsystems.size()]) + "/" + word(rng) + "/" + word(rng) + ".c";
        for (int k = 0; k < 6; ++k)
            f.functions.push_back("static int " + identifier(rng) + "(struct " + word(rng) + " *" + word(rng, 1, 1) + ")");
        files.push_back(std::move(f));
    }
    return files;
}

Hunk make_hunk(Rng& rng, const FileModel& file)
{
    Hunk h;
    h.heading = file.functions[pick(rng, file.functions.size())];
    std::size_t ins = 2 + pick(rng, 7);
    for (std::size_t i = 0; i < ins; ++i)
        h.insertions.push_back(code_line(rng));
    if (chance(rng, 0.5)) {
        std::size_t del = 1 + pick(rng, 4);
        for (std::size_t i = 0; i < del; ++i)
            h.deletions.push_back(code_line(rng));
    }
    for (int i = 0; i < 6; ++i)
        h.context.push_back(code_line(rng));
    h.old_start = static_cast<std::uint32_t>(10 + pick(rng, 900));
    h.new_start = h.old_start;
    h.old_len = static_cast<std::uint32_t>(h.context.size() + h.deletions.size());
    h.new_len = static_cast<std::uint32_t>(h.context.size() + h.insertions.size());
    return h;
}

Diff make_diff(Rng& rng, const std::vector<FileModel>& files)
{
    Diff d;
    std::size_t n = 1 + pick(rng, 3);
    std::vector<std::size_t> chosen;
    while (chosen.size() < n) {
        std::size_t k = pick(rng, files.size());
        if (std::find(chosen.begin(), chosen.end(), k) == chosen.end())
            chosen.push_back(k);
    }
    std::sort(chosen.begin(), chosen.end(), [&](std::size_t a, std::size_t b) { return files[a].path < files[b].path; });
    for (std::size_t k : chosen) {
        FileDiff f;
        f.old_path = f.new_path = files[k].path;
        std::size_t hunks = 1 + pick(rng, 2);
        for (std::size_t i = 0; i < hunks; ++i)
            f.hunks.push_back(make_hunk(rng, files[k]));
        std::sort(f.hunks.begin(), f.hunks.end(), [](const Hunk& a, const Hunk& b) { return a.old_start < b.old_start; });
        d.files.push_back(std::move(f));
    }
    return d;
}

void fix_lengths(Hunk& h)
{
    h.old_len = static_cast<std::uint32_t>(h.context.size() + h.deletions.size());
    h.new_len = static_cast<std::uint32_t>(h.context.size() + h.insertions.size());
}

Diff evolve_diff(Rng& rng, Diff d, double p)
{
    for (auto& f : d.files)
        for (auto& h : f.hunks) {
            for (auto& line : h.insertions)
                if (chance(rng, p))
                    line = edit_line(rng, line);
            for (auto& line : h.deletions)
                if (chance(rng, p / 2))
                    line = edit_line(rng, line);
            fix_lengths(h);
        }
    return d;
}

// Drops k leading context lines and adds k new trailing ones; the heading stays.
Diff shift_context(Rng& rng, Diff d, std::size_t max_shift)
{
    for (auto& f : d.files)
        for (auto& h : f.hunks) {
            std::size_t k = std::min(pick(rng, max_shift + 1), h.context.size());
            h.context.erase(h.context.begin(), h.context.begin() + static_cast<std::ptrdiff_t>(k));
            for (std::size_t i = 0; i < k; ++i)
                h.context.push_back(code_line(rng));
            h.old_start += static_cast<std::uint32_t>(k);
            h.new_start += static_cast<std::uint32_t>(k);
            fix_lengths(h);
        }
    return d;
}

std::vector<std::string> reword(Rng& rng, const std::vector<std::string>& message, double fraction)
{
    std::vector<std::string> out;
    for (const auto& line : message) {
        if (line.find(':') != std::string::npos && line.find("-by:") != std::string::npos) {
            out.push_back(line);
            continue;
        }
        std::istringstream in(line);
        std::string rebuilt;
        for (std::string t; in >> t;) {
            if (chance(rng, fraction))
                t = word(rng);
            rebuilt += (rebuilt.empty() ? "" : " ") + t;
        }
        out.push_back(rebuilt);
    }
    return out;
}

std::vector<std::string> make_message(Rng& rng, const std::vector<std::string>& topic, const std::string& author)
{
    std::vector<std::string> lines;
    std::size_t paragraphs = 1 + pick(rng, 2);
    for (std::size_t p = 0; p < paragraphs; ++p) {
        if (p)
            lines.emplace_back();
        std::size_t n = 1 + pick(rng, 3);
        for (std::size_t i = 0; i < n; ++i)
            lines.push_back(sentence(rng, topic));
    }
    lines.emplace_back();
    lines.push_back("Signed-off-by: " + author);
    return lines;
}

} // namespace

std::vector<Patch> SyntheticCorpus::all() const
{
    std::vector<Patch> out = mails;
    out.insert(out.end(), commits.begin(), commits.end());
    return out;
}

SyntheticCorpus make_synthetic(const SyntheticOptions& o)
{
    Rng rng(o.seed);
    auto files = file_pool(rng, o.file_pool);
    SyntheticCorpus out;
    std::vector<std::vector<PatchId>> clusters;

    for (std::size_t c = 0; c < o.changes; ++c) {
        std::vector<std::string> topic;
        for (int i = 0; i < 4; ++i)
            topic.push_back(word(rng));
        std::string author = people[pick(rng, people.size())];
        std::string subject = std::string(subsystems[pick(rng, subsystems.size())]) + ": " + verbs[pick(rng, verbs.size())] + " "
            + topic[0] + " " + topic[1];
        Diff diff = make_diff(rng, files);
        std::vector<std::string> message = make_message(rng, topic, author);

        Timestamp date = o.start + static_cast<Timestamp>(pick(rng, static_cast<std::size_t>(o.spread_days) * 86400));
        std::size_t revisions = o.min_revisions + pick(rng, o.max_revisions - o.min_revisions + 1);
        std::vector<PatchId> cluster;
        for (std::size_t r = 0; r < revisions; ++r) {
            if (r > 0) {
                date += static_cast<Timestamp>(86400 * (1 + pick(rng, 10)));
                diff = evolve_diff(rng, diff, o.evolve);
                message = reword(rng, message, o.evolve / 3);
            }
            char id[64];
            std::snprintf(id, sizeof id, "<synth-%04zu.v%zu@example.org>", c, r + 1);
            Patch mail;
            mail.id = PatchId::mail(id);
            mail.subject = subject;
            mail.message = message;
            mail.diff = diff;
            mail.submission_date = date;
            mail.author = author;
            mail.series = Series { static_cast<std::uint32_t>(r + 1), std::nullopt, std::nullopt };
            cluster.push_back(mail.id);
            out.mails.push_back(std::move(mail));
        }

        Patch commit;
        commit.id = PatchId::commit(hex_id(rng));
        commit.subject = subject;
        commit.message = o.reword ? reword(rng, message, 0.05) : message;
        commit.message.push_back("Signed-off-by: Max Tainer <maint@example.org>");
        commit.diff = shift_context(rng, diff, o.max_context_shift);
        commit.submission_date = date + static_cast<Timestamp>(86400 * (2 + pick(rng, 40)));
        commit.author = author;
        cluster.push_back(commit.id);
        out.commits.push_back(std::move(commit));
        clusters.push_back(std::move(cluster));
    }
    out.truth = ClusterSet::from_clusters(clusters);
    return out;
}

Patch random_patch(Rng& rng, PatchKind kind, std::size_t serial)
{
    static thread_local std::vector<FileModel> files;
    if (files.empty()) {
        Rng fixed(7);
        files = file_pool(fixed, 8);
    }
    Patch p;
    char id[64];
    std::snprintf(id, sizeof id, "<rand-%zu@example.org>", serial);
    p.id = kind == PatchKind::mail ? PatchId::mail(id) : PatchId::commit(hex_id(rng));
    std::vector<std::string> topic { word(rng), word(rng) };
    p.subject = "sub: " + topic[0] + " " + topic[1];
    p.message = make_message(rng, topic, people[pick(rng, people.size())]);
    p.diff = make_diff(rng, files);
    if (chance(rng, 0.3)) {
        // Uneven sizes exercise the length gate.
        auto& h = p.diff.files.front().hunks.front();
        std::size_t extra = 5 + pick(rng, 30);
        for (std::size_t i = 0; i < extra; ++i)
            h.insertions.push_back(code_line(rng));
        fix_lengths(h);
    }
    p.submission_date = 1335830400 + static_cast<Timestamp>(pick(rng, 86400 * 30));
    return p;
}

Patch mutate_patch(Rng& rng, const Patch& base, double p, std::size_t serial)
{
    Patch out = base;
    char id[64];
    std::snprintf(id, sizeof id, "<mut-%zu@example.org>", serial);
    out.id = PatchId::mail(id);
    out.diff = evolve_diff(rng, base.diff, p);
    out.message = reword(rng, base.message, p);
    return out;
}

Patch sized_patch(const std::string& id, std::size_t lines, Timestamp date)
{
    Patch p;
    p.id = PatchId::parse(id);
    p.subject = "drivers: adjust limits";
    p.message = { "Adjust the limits." };
    FileDiff f;
    f.old_path = f.new_path = "drivers/limits.c";
    Hunk h;
    h.heading = "static int limits_init(void)";
    for (std::size_t i = 0; i < lines; ++i)
        h.insertions.push_back("\tlimit[" + std::to_string(i) + "] = " + std::to_string(i * 7) + ";");
    h.old_start = h.new_start = 10;
    fix_lengths(h);
    f.hunks.push_back(std::move(h));
    p.diff.files.push_back(std::move(f));
    p.submission_date = date;
    return p;
}

} // namespace lineage::testing
