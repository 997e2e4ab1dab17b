#include <lineage/diff_parse.hpp>
#include <lineage/store.hpp>

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace lineage {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* manifest_name(PatchKind kind)
{
    return kind == PatchKind::mail ? "mails.jsonl" : "commits.jsonl";
}

const char* subdir_name(PatchKind kind)
{
    return kind == PatchKind::mail ? "mails" : "commits";
}

std::string file_name(PatchKind kind, const Patch& patch, std::size_t k)
{
    if (kind == PatchKind::commit)
        return patch.id.value() + ".patch";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06zu.patch", k);
    return buf;
}

json series_json(const std::optional<Series>& series)
{
    if (!series)
        return nullptr;
    json s { { "revision", series->revision } };
    s["position"] = series->position ? json(*series->position) : json(nullptr);
    s["total"] = series->total ? json(*series->total) : json(nullptr);
    return s;
}

std::optional<Series> series_from(const json& j)
{
    if (j.is_null())
        return std::nullopt;
    Series s;
    s.revision = j.at("revision").get<std::uint32_t>();
    if (!j.at("position").is_null())
        s.position = j.at("position").get<std::uint32_t>();
    if (!j.at("total").is_null())
        s.total = j.at("total").get<std::uint32_t>();
    return s;
}

void write_file(const fs::path& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out)
        throw StoreError("cannot write " + path.string());
}

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw StoreError("cannot read " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

} // namespace

void write_patches(const fs::path& store, PatchKind kind, std::span<const Patch> patches)
{
    std::set<PatchId> seen;
    for (const auto& p : patches) {
        if (p.id.kind() != kind)
            throw StoreError("patch " + p.id.value() + " has the wrong kind for this manifest");
        if (!seen.insert(p.id).second)
            throw StoreError("duplicate patch id " + p.id.value());
    }

    fs::create_directories(store);
    const fs::path dir = store / subdir_name(kind);
    fs::remove_all(dir);
    fs::create_directories(dir);

    std::string manifest;
    for (std::size_t k = 0; k < patches.size(); ++k) {
        const Patch& p = patches[k];
        std::string name = file_name(kind, p, k);
        std::string content;
        for (const auto& line : p.message) {
            content += line;
            content += '\n';
        }
        content += render_diff(p.diff);
        write_file(dir / name, content);

        std::vector<std::string> files;
        for (const auto& f : p.diff.files)
            files.push_back(f.path());
        json entry {
            { "id", p.id.value() },
            { "file", std::string(subdir_name(kind)) + "/" + name },
            { "date", p.submission_date },
            { "subject", p.subject },
            { "author", p.author ? json(*p.author) : json(nullptr) },
            { "series", series_json(p.series) },
            { "files", files },
            { "message_lines", p.message.size() },
        };
        manifest += entry.dump(-1, ' ', false, json::error_handler_t::replace);
        manifest += '\n';
    }
    write_file(store / manifest_name(kind), manifest);
}

std::vector<Patch> read_patches(const fs::path& store, PatchKind kind)
{
    const fs::path manifest = store / manifest_name(kind);
    std::vector<Patch> patches;
    if (!fs::exists(manifest))
        return patches;
    std::istringstream lines(read_file(manifest));
    std::string line;
    std::size_t number = 0;
    while (std::getline(lines, line)) {
        ++number;
        if (line.empty())
            continue;
        try {
            json entry = json::parse(line);
            Patch p;
            p.id = PatchId(kind, entry.at("id").get<std::string>());
            p.submission_date = entry.at("date").get<Timestamp>();
            p.subject = entry.at("subject").get<std::string>();
            if (!entry.at("author").is_null())
                p.author = entry.at("author").get<std::string>();
            p.series = series_from(entry.at("series"));

            std::string content = read_file(store / entry.at("file").get<std::string>());
            auto content_lines = split_lines(content);
            auto count = entry.at("message_lines").get<std::size_t>();
            if (count > content_lines.size())
                throw StoreError("message longer than its file");
            p.message.assign(content_lines.begin(), content_lines.begin() + static_cast<std::ptrdiff_t>(count));
            std::size_t offset = 0;
            for (std::size_t i = 0; i < count; ++i)
                offset += content_lines[i].size() + 1;
            p.diff = parse_unified_diff(std::string_view(content).substr(std::min(offset, content.size())));
            patches.push_back(std::move(p));
        } catch (const StoreError& e) {
            throw StoreError(manifest.string() + ":" + std::to_string(number) + ": " + e.what());
        } catch (const std::exception& e) {
            throw StoreError(manifest.string() + ":" + std::to_string(number) + ": " + e.what());
        }
    }
    return patches;
}

Corpus load_corpus(const fs::path& store)
{
    return Corpus(read_patches(store, PatchKind::mail), read_patches(store, PatchKind::commit));
}

} // namespace lineage
