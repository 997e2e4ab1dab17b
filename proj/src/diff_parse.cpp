#include <lineage/diff_parse.hpp>
#include <lineage/text.hpp>

#include <algorithm>
#include <charconv>
#include <optional>

namespace lineage {

namespace {

bool starts_with(std::string_view s, std::string_view prefix)
{
    return s.substr(0, prefix.size()) == prefix;
}

bool is_hunk_header(std::string_view line)
{
    return starts_with(line, "@@ -");
}

bool is_file_pair_start(const std::vector<std::string_view>& lines, std::size_t i)
{
    return starts_with(lines[i], "--- ") && i + 1 < lines.size() && starts_with(lines[i + 1], "+++ ");
}

std::string strip_side_prefix(std::string_view path)
{
    if (starts_with(path, "a/") || starts_with(path, "b/"))
        path.remove_prefix(2);
    return std::string(path);
}

// "--- a/foo.c\t2012-05-01 10:00:00" → "foo.c"
std::string header_path(std::string_view line)
{
    std::string_view rest = line.substr(4);
    if (auto tab = rest.find('\t'); tab != std::string_view::npos)
        rest = rest.substr(0, tab);
    rest = text::trim(rest);
    if (rest == "/dev/null")
        return std::string(rest);
    return strip_side_prefix(rest);
}

// "diff --git a/x b/y": when both names are equal the split is unambiguous
// even if the path itself contains " b/".
std::pair<std::string, std::string> git_header_paths(std::string_view line)
{
    std::string_view rest = text::trim(line.substr(std::string_view("diff --git ").size()));
    std::size_t best = std::string_view::npos;
    for (std::size_t pos = rest.find(" b/"); pos != std::string_view::npos; pos = rest.find(" b/", pos + 1)) {
        if (best == std::string_view::npos)
            best = pos;
        if (strip_side_prefix(rest.substr(0, pos)) == strip_side_prefix(rest.substr(pos + 1))) {
            best = pos;
            break;
        }
    }
    if (best == std::string_view::npos)
        return { strip_side_prefix(rest), strip_side_prefix(rest) };
    return { strip_side_prefix(rest.substr(0, best)), strip_side_prefix(rest.substr(best + 1)) };
}

bool parse_number(std::string_view& s, std::uint32_t& out)
{
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc {} || ptr == s.data())
        return false;
    s.remove_prefix(static_cast<std::size_t>(ptr - s.data()));
    return true;
}

bool parse_range(std::string_view& s, char sign, std::uint32_t& start, std::uint32_t& len)
{
    if (s.empty() || s.front() != sign)
        return false;
    s.remove_prefix(1);
    if (!parse_number(s, start))
        return false;
    len = 1;
    if (!s.empty() && s.front() == ',') {
        s.remove_prefix(1);
        if (!parse_number(s, len))
            return false;
    }
    return true;
}

Hunk parse_hunk_header(std::string_view line)
{
    Hunk hunk;
    std::string_view s = line.substr(3);
    std::uint32_t old_len = 0, new_len = 0;
    bool ok = parse_range(s, '-', hunk.old_start, old_len);
    if (ok) {
        while (!s.empty() && s.front() == ' ')
            s.remove_prefix(1);
        ok = parse_range(s, '+', hunk.new_start, new_len);
    }
    if (!ok)
        throw MalformedDiff("bad hunk header: " + std::string(line));
    auto close = s.find("@@");
    if (close == std::string_view::npos)
        throw MalformedDiff("unterminated hunk header: " + std::string(line));
    hunk.heading = std::string(text::trim(s.substr(close + 2)));
    // Declared lengths only steer where the hunk ends; see finish_hunk.
    hunk.old_len = old_len;
    hunk.new_len = new_len;
    return hunk;
}

bool is_file_metadata(std::string_view line)
{
    static constexpr std::string_view prefixes[] = {
        "index ", "old mode ", "new mode ", "new file mode ", "deleted file mode ",
        "similarity index ", "dissimilarity index ", "rename from ", "rename to ",
        "copy from ", "copy to ", "Binary files ", "GIT binary patch",
    };
    return std::any_of(std::begin(prefixes), std::end(prefixes),
                       [&](std::string_view p) { return starts_with(line, p); });
}

class DiffBuilder {
public:
    void start_file(std::string old_path, std::string new_path, bool from_git_header)
    {
        finish_file();
        m_file = FileDiff { std::move(old_path), std::move(new_path), {}, false };
        m_git_header = from_git_header;
        m_seen_pair = false;
    }

    void set_pair_paths(std::string old_path, std::string new_path)
    {
        m_file->old_path = std::move(old_path);
        m_file->new_path = std::move(new_path);
        m_seen_pair = true;
    }

    // A "---"/"+++" pair belongs to the current git header until one was seen.
    bool pair_opens_new_file() const
    {
        return !m_file || !m_git_header || m_seen_pair || !m_file->hunks.empty();
    }

    bool has_file() const { return m_file.has_value(); }
    bool file_has_hunks() const { return m_file && (m_hunk || !m_file->hunks.empty()); }

    void start_hunk(Hunk hunk)
    {
        finish_hunk();
        m_remaining_old = hunk.old_len;
        m_remaining_new = hunk.new_len;
        m_hunk = std::move(hunk);
    }

    bool in_hunk() const { return m_hunk && (m_remaining_old > 0 || m_remaining_new > 0); }

    // Returns false when the line cannot belong to the open hunk.
    bool add_hunk_line(std::string_view line)
    {
        char marker = line.empty() ? ' ' : line.front();
        std::string content(line.empty() ? line : line.substr(1));
        switch (marker) {
        case ' ':
            m_hunk->context.push_back(std::move(content));
            decrement(m_remaining_old);
            decrement(m_remaining_new);
            return true;
        case '-':
            m_hunk->deletions.push_back(std::move(content));
            decrement(m_remaining_old);
            return true;
        case '+':
            m_hunk->insertions.push_back(std::move(content));
            decrement(m_remaining_new);
            return true;
        case '\\':
            return true;
        default:
            return false;
        }
    }

    void finish_hunk()
    {
        if (!m_hunk)
            return;
        m_hunk->old_len = static_cast<std::uint32_t>(m_hunk->deletions.size() + m_hunk->context.size());
        m_hunk->new_len = static_cast<std::uint32_t>(m_hunk->insertions.size() + m_hunk->context.size());
        m_file->hunks.push_back(std::move(*m_hunk));
        m_hunk.reset();
        m_remaining_old = m_remaining_new = 0;
    }

    void finish_file()
    {
        finish_hunk();
        if (!m_file)
            return;
        m_file->marker_only = m_file->hunks.empty();
        auto same_path = [&](const FileDiff& f) { return f.path() == m_file->path(); };
        auto existing = std::find_if(m_diff.files.begin(), m_diff.files.end(), same_path);
        if (existing == m_diff.files.end()) {
            m_diff.files.push_back(std::move(*m_file));
        } else if (!m_file->hunks.empty()) {
            existing->hunks.insert(existing->hunks.end(),
                                   std::make_move_iterator(m_file->hunks.begin()),
                                   std::make_move_iterator(m_file->hunks.end()));
            existing->marker_only = false;
        }
        m_file.reset();
    }

    Diff take()
    {
        finish_file();
        return std::move(m_diff);
    }

private:
    static void decrement(std::uint32_t& v)
    {
        if (v > 0)
            --v;
    }

    Diff m_diff;
    std::optional<FileDiff> m_file;
    std::optional<Hunk> m_hunk;
    std::uint32_t m_remaining_old = 0;
    std::uint32_t m_remaining_new = 0;
    bool m_git_header = false;
    bool m_seen_pair = false;
};

} // namespace

std::vector<std::string_view> split_lines(std::string_view text)
{
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos)
            end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);
        lines.push_back(line);
        pos = end + 1;
    }
    return lines;
}

Diff parse_unified_diff(std::string_view input)
{
    const auto lines = split_lines(input);
    DiffBuilder builder;

    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::string_view line = lines[i];

        if (builder.in_hunk()) {
            if (builder.add_hunk_line(line))
                continue;
            builder.finish_hunk();
        }

        if (starts_with(line, "diff --git ")) {
            auto [old_path, new_path] = git_header_paths(line);
            builder.start_file(std::move(old_path), std::move(new_path), true);
        } else if (is_file_pair_start(lines, i)) {
            std::string old_path = header_path(lines[i]);
            std::string new_path = header_path(lines[i + 1]);
            if (builder.pair_opens_new_file())
                builder.start_file(old_path, new_path, false);
            builder.set_pair_paths(std::move(old_path), std::move(new_path));
            ++i;
        } else if (is_hunk_header(line)) {
            if (!builder.has_file())
                throw MalformedDiff("hunk header before any file header");
            builder.start_hunk(parse_hunk_header(line));
        } else if (builder.has_file() && !builder.file_has_hunks()) {
            if (is_file_metadata(line))
                continue;
            if (!line.empty() && (line.front() == '+' || line.front() == '-'))
                throw MalformedDiff("change line outside any hunk: " + std::string(line));
        }
        // Anything else is prose before the first file or trailing material
        // after a file's last hunk.
    }
    return builder.take();
}

std::string render_diff(const Diff& diff)
{
    std::string out;
    auto side = [](const char* prefix, const std::string& path) {
        return path == "/dev/null" ? path : prefix + path;
    };
    for (const auto& file : diff.files) {
        const std::string& old_name = file.old_path == "/dev/null" ? file.new_path : file.old_path;
        const std::string& new_name = file.new_path == "/dev/null" ? file.old_path : file.new_path;
        out += "diff --git a/" + old_name + " b/" + new_name + "\n";
        bool dev_null = file.old_path == "/dev/null" || file.new_path == "/dev/null";
        if (!file.hunks.empty() || dev_null) {
            out += "--- " + side("a/", file.old_path) + "\n";
            out += "+++ " + side("b/", file.new_path) + "\n";
        }
        for (const auto& hunk : file.hunks) {
            out += "@@ -" + std::to_string(hunk.old_start) + "," + std::to_string(hunk.context.size() + hunk.deletions.size())
                + " +" + std::to_string(hunk.new_start) + "," + std::to_string(hunk.context.size() + hunk.insertions.size())
                + " @@";
            if (!hunk.heading.empty())
                out += " " + hunk.heading;
            out += "\n";
            for (const auto& l : hunk.context)
                out += " " + l + "\n";
            for (const auto& l : hunk.deletions)
                out += "-" + l + "\n";
            for (const auto& l : hunk.insertions)
                out += "+" + l + "\n";
        }
    }
    return out;
}

std::size_t changed_line_count(const Diff& diff)
{
    return diff.total_changed_lines();
}

const std::vector<std::string>& default_tag_set()
{
    static const std::vector<std::string> tags {
        "Signed-off-by", "Acked-by", "Tested-by", "Reviewed-by", "Reported-by",
        "Suggested-by", "Cc", "Fixes", "Link",
    };
    return tags;
}

std::vector<std::string> strip_tags(const std::vector<std::string>& message)
{
    return strip_tags(message, default_tag_set());
}

std::vector<std::string> strip_tags(const std::vector<std::string>& message,
                                    const std::vector<std::string>& tags)
{
    std::vector<std::string> out;
    out.reserve(message.size());
    for (const auto& line : message) {
        auto colon = line.find(':');
        bool is_tag = false;
        if (colon != std::string::npos) {
            std::string_view prefix = text::trim(std::string_view(line).substr(0, colon));
            is_tag = std::any_of(tags.begin(), tags.end(),
                                 [&](const std::string& t) { return text::iequals(prefix, t); });
        }
        if (!is_tag)
            out.push_back(line);
    }
    return out;
}

} // namespace lineage
