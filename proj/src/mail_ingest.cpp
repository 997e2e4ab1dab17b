#include <lineage/diff_parse.hpp>
#include <lineage/mail_ingest.hpp>
#include <lineage/text.hpp>

#include <iconv.h>
#include <openssl/evp.h>
#include <tbb/parallel_for.h>
#include <zlib.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <chrono>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

namespace lineage {

namespace {

using Headers = std::vector<std::pair<std::string, std::string>>;

constexpr std::string_view replacement_char = "\xEF\xBF\xBD";
constexpr int max_mime_depth = 16;

std::optional<std::string> find_header(const Headers& headers, std::string_view name)
{
    for (const auto& [key, value] : headers)
        if (text::iequals(key, name))
            return value;
    return std::nullopt;
}

bool starts_with(std::string_view s, std::string_view prefix)
{
    return s.substr(0, prefix.size()) == prefix;
}

bool ends_with_ci(std::string_view s, std::string_view suffix)
{
    return s.size() >= suffix.size() && text::iequals(s.substr(s.size() - suffix.size()), suffix);
}

// Lines including their '\n', so chunks can be re-sliced from the original.
std::vector<std::string_view> raw_lines(std::string_view data)
{
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos < data.size()) {
        std::size_t end = data.find('\n', pos);
        end = end == std::string_view::npos ? data.size() : end + 1;
        lines.push_back(data.substr(pos, end - pos));
        pos = end;
    }
    return lines;
}

std::string_view chomp(std::string_view line)
{
    if (!line.empty() && line.back() == '\n')
        line.remove_suffix(1);
    if (!line.empty() && line.back() == '\r')
        line.remove_suffix(1);
    return line;
}

bool is_header_name(std::string_view name)
{
    if (name.empty())
        return false;
    return std::all_of(name.begin(), name.end(), [](char c) { return c > 32 && c < 127 && c != ':'; });
}

// Splits an entity into unfolded headers and body. Returns false on malformed headers.
bool split_entity(std::string_view entity, Headers& headers, std::string_view& body)
{
    bool ok = true;
    std::size_t pos = 0;
    body = {};
    while (pos < entity.size()) {
        std::size_t end = entity.find('\n', pos);
        std::size_t next = end == std::string_view::npos ? entity.size() : end + 1;
        std::string_view line = chomp(entity.substr(pos, next - pos));
        pos = next;
        if (line.empty()) {
            body = entity.substr(pos);
            return ok;
        }
        if (line.front() == ' ' || line.front() == '\t') {
            if (headers.empty()) {
                ok = false;
                continue;
            }
            auto& value = headers.back().second;
            std::string_view more = text::trim(line);
            if (!more.empty()) {
                if (!value.empty())
                    value += ' ';
                value += more;
            }
            continue;
        }
        auto colon = line.find(':');
        if (colon == std::string_view::npos || !is_header_name(line.substr(0, colon))) {
            ok = false;
            continue;
        }
        headers.emplace_back(std::string(line.substr(0, colon)), std::string(text::trim(line.substr(colon + 1))));
    }
    return ok;
}

struct ContentType {
    std::string type = "text/plain";
    std::vector<std::pair<std::string, std::string>> params;

    std::string param(std::string_view name) const
    {
        for (const auto& [k, v] : params)
            if (text::iequals(k, name))
                return v;
        return {};
    }
};

ContentType parse_content_type(std::string_view value)
{
    ContentType ct;
    std::size_t semi = value.find(';');
    std::string_view type = text::trim(value.substr(0, semi));
    if (!type.empty())
        ct.type = text::to_lower(type);
    while (semi != std::string_view::npos) {
        value = value.substr(semi + 1);
        // Quoted values may contain ';'.
        std::size_t eq = value.find('=');
        if (eq == std::string_view::npos)
            break;
        std::string key(text::trim(value.substr(0, eq)));
        std::string_view rest = text::trim(value.substr(eq + 1));
        std::string val;
        if (!rest.empty() && rest.front() == '"') {
            std::size_t close = rest.find('"', 1);
            val = std::string(rest.substr(1, close == std::string_view::npos ? std::string_view::npos : close - 1));
            std::size_t consumed = close == std::string_view::npos ? rest.size() : close + 1;
            std::size_t offset = static_cast<std::size_t>(rest.data() - value.data()) + consumed;
            value = value.substr(std::min(offset, value.size()));
            semi = value.find(';');
        } else {
            semi = rest.find(';');
            val = std::string(text::trim(rest.substr(0, semi)));
            if (semi != std::string_view::npos) {
                std::size_t offset = static_cast<std::size_t>(rest.data() - value.data()) + semi;
                value = value.substr(offset);
                semi = 0;
            }
        }
        ct.params.emplace_back(std::move(key), std::move(val));
    }
    return ct;
}

int hex_value(char c)
{
    if (c >= '0' && c <= '9')
        return c - '0';
    if (c >= 'a' && c <= 'f')
        return c - 'a' + 10;
    if (c >= 'A' && c <= 'F')
        return c - 'A' + 10;
    return -1;
}

std::string decode_quoted_printable(std::string_view in, bool header_mode = false)
{
    std::string out;
    out.reserve(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) {
        char c = in[i];
        if (header_mode && c == '_') {
            out += ' ';
        } else if (c == '=') {
            if (i + 1 < in.size() && (in[i + 1] == '\n' || in[i + 1] == '\r')) {
                ++i;
                if (in[i] == '\r' && i + 1 < in.size() && in[i + 1] == '\n')
                    ++i;
                continue;
            }
            if (i + 2 < in.size() + 0 && hex_value(in[i + 1]) >= 0 && hex_value(in[i + 2]) >= 0) {
                out += static_cast<char>(hex_value(in[i + 1]) * 16 + hex_value(in[i + 2]));
                i += 2;
            } else {
                out += c;
            }
        } else {
            out += c;
        }
    }
    return out;
}

std::optional<std::string> decode_base64(std::string_view in)
{
    std::unique_ptr<EVP_ENCODE_CTX, decltype(&EVP_ENCODE_CTX_free)> ctx(EVP_ENCODE_CTX_new(), EVP_ENCODE_CTX_free);
    if (!ctx)
        return std::nullopt;
    EVP_DecodeInit(ctx.get());
    std::string out(in.size() / 4 * 3 + 64, '\0');
    int written = 0;
    int total = 0;
    auto* dst = reinterpret_cast<unsigned char*>(out.data());
    if (EVP_DecodeUpdate(ctx.get(), dst, &written, reinterpret_cast<const unsigned char*>(in.data()),
                         static_cast<int>(in.size()))
        < 0)
        return std::nullopt;
    total = written;
    if (EVP_DecodeFinal(ctx.get(), dst + total, &written) < 0)
        return std::nullopt;
    total += written;
    out.resize(static_cast<std::size_t>(total));
    return out;
}

// Replaces invalid UTF-8 sequences by U+FFFD.
std::string sanitize_utf8(std::string_view in)
{
    std::string out;
    out.reserve(in.size());
    std::size_t i = 0;
    while (i < in.size()) {
        auto c = static_cast<unsigned char>(in[i]);
        std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xe ? 3 : (c >> 3) == 0x1e ? 4 : 0;
        bool valid = len > 0 && i + len <= in.size();
        for (std::size_t k = 1; valid && k < len; ++k)
            valid = (static_cast<unsigned char>(in[i + k]) >> 6) == 0x2;
        if (valid && len == 2 && c < 0xc2)
            valid = false;
        if (valid) {
            out.append(in.substr(i, len));
            i += len;
        } else {
            out.append(replacement_char);
            ++i;
        }
    }
    return out;
}

std::string to_utf8(std::string_view in, std::string charset)
{
    charset = text::to_lower(text::trim(charset));
    if (charset.empty() || charset == "utf-8" || charset == "utf8" || charset == "us-ascii" || charset == "ascii")
        return sanitize_utf8(in);
    iconv_t cd = iconv_open("UTF-8", charset.c_str());
    if (cd == reinterpret_cast<iconv_t>(-1))
        return sanitize_utf8(in);
    std::string out;
    std::string buffer(4096, '\0');
    std::string input(in);
    char* src = input.data();
    std::size_t src_left = input.size();
    while (src_left > 0) {
        char* dst = buffer.data();
        std::size_t dst_left = buffer.size();
        std::size_t rc = iconv(cd, &src, &src_left, &dst, &dst_left);
        out.append(buffer.data(), buffer.size() - dst_left);
        if (rc == static_cast<std::size_t>(-1)) {
            if (errno == E2BIG)
                continue;
            // EILSEQ / EINVAL: replace one byte and resynchronize.
            out.append(replacement_char);
            ++src;
            --src_left;
        }
    }
    iconv_close(cd);
    return out;
}

bool is_textual(const std::string& type, const std::string& filename)
{
    if (starts_with(type, "text/"))
        return true;
    if (type == "application/x-patch" || type == "application/x-diff" || type == "application/patch")
        return true;
    return ends_with_ci(filename, ".patch") || ends_with_ci(filename, ".diff") || ends_with_ci(filename, ".txt");
}

bool is_patch_carrier(const MailPart& part)
{
    return part.content_type == "text/plain" || part.content_type == "text/x-patch"
        || part.content_type == "text/x-diff" || part.content_type == "application/x-patch"
        || part.content_type == "application/x-diff" || part.content_type == "application/patch"
        || ends_with_ci(part.filename, ".patch") || ends_with_ci(part.filename, ".diff");
}

void parse_entity(const Headers& headers, std::string_view body, RawMail& out, int depth)
{
    if (depth > max_mime_depth) {
        out.parse_warning = true;
        return;
    }
    ContentType ct = parse_content_type(find_header(headers, "Content-Type").value_or("text/plain"));
    std::string disposition = find_header(headers, "Content-Disposition").value_or("");
    ContentType disp = parse_content_type(disposition);

    if (starts_with(ct.type, "multipart/")) {
        std::string boundary = ct.param("boundary");
        if (boundary.empty()) {
            out.parse_warning = true;
            return;
        }
        const std::string delimiter = "--" + boundary;
        std::vector<std::string_view> parts;
        std::optional<std::size_t> part_start;
        std::size_t pos = 0;
        bool closed = false;
        while (pos < body.size() && !closed) {
            std::size_t end = body.find('\n', pos);
            std::size_t next = end == std::string_view::npos ? body.size() : end + 1;
            std::string_view line = text::trim(body.substr(pos, next - pos));
            if (starts_with(line, delimiter)) {
                std::string_view tail = line.substr(delimiter.size());
                if (tail.empty() || tail == "--") {
                    if (part_start)
                        parts.push_back(body.substr(*part_start, pos - *part_start));
                    part_start = next;
                    closed = tail == "--";
                }
            }
            pos = next;
        }
        if (part_start && !closed) {
            parts.push_back(body.substr(*part_start));
            out.parse_warning = true; // missing closing delimiter
        }
        for (std::string_view part : parts) {
            Headers part_headers;
            std::string_view part_body;
            if (!split_entity(part, part_headers, part_body))
                out.parse_warning = true;
            parse_entity(part_headers, part_body, out, depth + 1);
        }
        return;
    }

    if (ct.type == "message/rfc822") {
        Headers inner_headers;
        std::string_view inner_body;
        if (!split_entity(body, inner_headers, inner_body))
            out.parse_warning = true;
        parse_entity(inner_headers, inner_body, out, depth + 1);
        return;
    }

    MailPart part;
    part.content_type = ct.type;
    part.filename = disp.param("filename");
    if (part.filename.empty())
        part.filename = ct.param("name");
    part.attachment = text::istarts_with(text::trim(disposition), "attachment");
    if (!is_textual(part.content_type, part.filename))
        return;

    std::string encoding = text::to_lower(text::trim(find_header(headers, "Content-Transfer-Encoding").value_or("")));
    std::string raw;
    if (encoding == "base64") {
        auto decoded = decode_base64(body);
        if (!decoded) {
            out.parse_warning = true;
            return;
        }
        raw = std::move(*decoded);
    } else if (encoding == "quoted-printable") {
        raw = decode_quoted_printable(body);
    } else {
        raw = std::string(body);
    }
    part.text = to_utf8(raw, ct.param("charset"));
    out.parts.push_back(std::move(part));
}

bool is_mbox_separator(std::string_view line, bool after_blank)
{
    return after_blank && starts_with(line, "From ");
}

// mboxrd: ">From ", ">>From " ... lose one '>'.
std::string unescape_from_lines(std::string_view chunk)
{
    std::string out;
    out.reserve(chunk.size());
    for (std::string_view line : raw_lines(chunk)) {
        std::size_t quotes = 0;
        while (quotes < line.size() && line[quotes] == '>')
            ++quotes;
        if (quotes > 0 && starts_with(line.substr(quotes), "From "))
            line.remove_prefix(1);
        out.append(line);
    }
    return out;
}

std::vector<std::string> to_strings(const std::vector<std::string_view>& lines, std::size_t begin, std::size_t end)
{
    return { lines.begin() + static_cast<std::ptrdiff_t>(begin), lines.begin() + static_cast<std::ptrdiff_t>(end) };
}

void trim_blank_edges(std::vector<std::string>& lines)
{
    auto blank = [](const std::string& l) { return text::trim(l).empty(); };
    while (!lines.empty() && blank(lines.back()))
        lines.pop_back();
    auto first = std::find_if_not(lines.begin(), lines.end(), blank);
    lines.erase(lines.begin(), first);
}

bool looks_like_header_line(std::string_view line)
{
    auto colon = line.find(':');
    return colon != std::string_view::npos && colon > 0 && is_header_name(line.substr(0, colon));
}

// Drops a leading header block, as found in format-patch attachments.
std::vector<std::string> without_leading_headers(std::vector<std::string> lines)
{
    if (lines.empty() || !(starts_with(lines.front(), "From ") || looks_like_header_line(lines.front())))
        return lines;
    auto blank = std::find_if(lines.begin(), lines.end(), [](const std::string& l) { return text::trim(l).empty(); });
    bool all_headers = std::all_of(lines.begin(), blank, [](const std::string& l) {
        return starts_with(l, "From ") || looks_like_header_line(l) || (!l.empty() && (l[0] == ' ' || l[0] == '\t'));
    });
    if (!all_headers)
        return lines;
    lines.erase(lines.begin(), blank);
    return lines;
}

std::string normalize_message_id(std::string_view value)
{
    value = text::trim(value);
    auto open = value.find('<');
    auto close = value.find('>', open == std::string_view::npos ? 0 : open);
    if (open != std::string_view::npos && close != std::string_view::npos)
        return std::string(value.substr(open, close - open + 1));
    if (value.empty())
        return {};
    std::string_view bare = value.substr(0, value.find_first_of(" \t"));
    return "<" + std::string(bare) + ">";
}

std::optional<int> month_index(std::string_view token)
{
    static constexpr std::string_view months[] = { "jan", "feb", "mar", "apr", "may", "jun",
                                                   "jul", "aug", "sep", "oct", "nov", "dec" };
    if (token.size() < 3)
        return std::nullopt;
    for (int i = 0; i < 12; ++i)
        if (text::iequals(token.substr(0, 3), months[i]))
            return i + 1;
    return std::nullopt;
}

std::optional<int> zone_offset_seconds(std::string_view token)
{
    if ((token.front() == '+' || token.front() == '-') && token.size() == 5) {
        int value = 0;
        auto [ptr, ec] = std::from_chars(token.data() + 1, token.data() + 5, value);
        if (ec != std::errc {} || ptr != token.data() + 5)
            return std::nullopt;
        int seconds = (value / 100) * 3600 + (value % 100) * 60;
        return token.front() == '-' ? -seconds : seconds;
    }
    static constexpr std::pair<std::string_view, int> named[] = {
        { "UT", 0 }, { "UTC", 0 }, { "GMT", 0 }, { "Z", 0 }, { "EST", -5 }, { "EDT", -4 },
        { "CST", -6 }, { "CDT", -5 }, { "MST", -7 }, { "MDT", -6 }, { "PST", -8 }, { "PDT", -7 },
    };
    for (const auto& [name, hours] : named)
        if (text::iequals(token, name))
            return hours * 3600;
    return std::nullopt;
}

bool parse_int(std::string_view s, int& out)
{
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc {} && ptr == s.data() + s.size();
}

} // namespace

std::optional<std::string> RawMail::header(std::string_view name) const
{
    return find_header(headers, name);
}

RawMail parse_mail(std::string_view message)
{
    RawMail mail;
    std::string_view body;
    if (!split_entity(message, mail.headers, body))
        mail.parse_warning = true;
    parse_entity(mail.headers, body, mail, 0);
    return mail;
}

std::vector<RawMail> parse_mbox(std::string_view data)
{
    std::vector<RawMail> mails;
    if (text::trim(data).empty())
        return mails;

    auto lines = raw_lines(data);
    if (!starts_with(lines.front(), "From ")) {
        mails.push_back(parse_mail(unescape_from_lines(data)));
        return mails;
    }

    std::vector<std::size_t> starts;
    bool after_blank = true;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (is_mbox_separator(lines[i], after_blank))
            starts.push_back(i);
        after_blank = chomp(lines[i]).empty();
    }

    auto offset_of = [&](std::size_t line) {
        return line < lines.size() ? static_cast<std::size_t>(lines[line].data() - data.data()) : data.size();
    };
    for (std::size_t k = 0; k < starts.size(); ++k) {
        std::size_t begin = offset_of(starts[k] + 1);
        std::size_t end = k + 1 < starts.size() ? offset_of(starts[k + 1]) : data.size();
        RawMail mail = parse_mail(unescape_from_lines(data.substr(begin, end - begin)));
        mail.position = k;
        mails.push_back(std::move(mail));
    }
    return mails;
}

std::string read_archive(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IngestError("cannot read " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    std::string raw = buffer.str();
    if (raw.size() < 2 || static_cast<unsigned char>(raw[0]) != 0x1f || static_cast<unsigned char>(raw[1]) != 0x8b)
        return raw;

    z_stream zs {};
    if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK)
        throw IngestError("zlib init failed");
    std::string out;
    char chunk[1 << 15];
    zs.next_in = reinterpret_cast<Bytef*>(raw.data());
    zs.avail_in = static_cast<uInt>(raw.size());
    int rc = Z_OK;
    while (rc != Z_STREAM_END || zs.avail_in > 0) {
        if (rc == Z_STREAM_END)
            inflateReset(&zs); // concatenated gzip members
        zs.next_out = reinterpret_cast<Bytef*>(chunk);
        zs.avail_out = sizeof chunk;
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            throw IngestError("corrupt gzip data in " + path.string());
        }
        out.append(chunk, sizeof chunk - zs.avail_out);
        if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0)
            break;
    }
    inflateEnd(&zs);
    return out;
}

SubjectTags parse_subject_tags(std::string_view subject)
{
    SubjectTags tags;
    std::string_view rest = text::trim(subject);
    while (!rest.empty() && rest.front() == '[') {
        auto close = rest.find(']');
        if (close == std::string_view::npos)
            break;
        std::string group(rest.substr(1, close - 1));
        std::replace(group.begin(), group.end(), ',', ' ');
        std::istringstream tokens(group);
        std::string token;
        while (tokens >> token) {
            std::string lower = text::to_lower(token);
            if (starts_with(lower, "patch") && lower.size() > 5)
                lower = lower.substr(5);
            int value = 0;
            if (lower.size() > 1 && lower[0] == 'v' && parse_int(std::string_view(lower).substr(1), value) && value > 0) {
                tags.revision = static_cast<std::uint32_t>(value);
                continue;
            }
            auto slash = lower.find('/');
            int position = 0, total = 0;
            if (slash != std::string::npos && parse_int(std::string_view(lower).substr(0, slash), position)
                && parse_int(std::string_view(lower).substr(slash + 1), total) && position >= 0 && total > 0) {
                tags.position = static_cast<std::uint32_t>(position);
                tags.total = static_cast<std::uint32_t>(total);
            }
        }
        rest = text::trim(rest.substr(close + 1));
    }
    tags.cleaned_subject = std::string(rest);
    return tags;
}

std::string decode_header_words(std::string_view value)
{
    std::string out;
    std::size_t pos = 0;
    bool last_was_word = false;
    std::string pending_space;
    while (pos < value.size()) {
        std::size_t start = value.find("=?", pos);
        if (start == std::string_view::npos) {
            out += pending_space;
            out.append(value.substr(pos));
            break;
        }
        std::string_view between = value.substr(pos, start - pos);
        std::size_t q1 = value.find('?', start + 2);
        std::size_t q2 = q1 == std::string_view::npos ? q1 : value.find('?', q1 + 1);
        std::size_t end = q2 == std::string_view::npos ? q2 : value.find("?=", q2 + 1);
        if (end == std::string_view::npos) {
            out += pending_space;
            out.append(value.substr(pos));
            break;
        }
        // Whitespace between two adjacent encoded words is dropped.
        if (!(last_was_word && text::trim(between).empty()))
            out.append(between);
        std::string charset(value.substr(start + 2, q1 - start - 2));
        if (auto star = charset.find('*'); star != std::string::npos)
            charset.resize(star);
        char encoding = text::ascii_lower(q1 + 1 < value.size() ? value[q1 + 1] : ' ');
        std::string_view payload = value.substr(q2 + 1, end - q2 - 1);
        std::optional<std::string> decoded;
        if (encoding == 'b')
            decoded = decode_base64(payload);
        else if (encoding == 'q')
            decoded = decode_quoted_printable(payload, true);
        if (decoded)
            out += to_utf8(*decoded, charset);
        else
            out.append(value.substr(start, end + 2 - start));
        last_was_word = true;
        pos = end + 2;
    }
    return sanitize_utf8(out);
}

std::optional<Timestamp> parse_mail_date(std::string_view value)
{
    std::string cleaned;
    int depth = 0;
    for (char c : value) {
        if (c == '(')
            ++depth;
        else if (c == ')')
            depth = std::max(0, depth - 1);
        else if (depth == 0)
            cleaned += c == ',' ? ' ' : c;
    }
    std::istringstream in(cleaned);
    std::vector<std::string> tokens;
    for (std::string t; in >> t;)
        tokens.push_back(t);

    std::optional<int> day, month, year, zone;
    int hh = -1, mm = 0, ss = 0;
    for (const auto& token : tokens) {
        int number = 0;
        if (token.find(':') != std::string::npos && hh < 0) {
            std::istringstream t(token);
            char sep = 0;
            t >> hh >> sep >> mm;
            if (!t)
                return std::nullopt;
            if (t.peek() == ':')
                t >> sep >> ss;
        } else if (token.front() == '+' || token.front() == '-') {
            // "-0000" would otherwise read as a number
            if (zone)
                return std::nullopt;
            zone = zone_offset_seconds(token);
        } else if (!month && month_index(token) && !parse_int(token, number)) {
            month = month_index(token);
        } else if (parse_int(token, number)) {
            if (!day && !year && number >= 1 && number <= 31 && !month)
                day = number;
            else if (!year && month)
                year = number;
            else if (!day && number >= 1 && number <= 31)
                day = number;
            else
                return std::nullopt;
        } else if (!zone && std::isalpha(static_cast<unsigned char>(token.front()))) {
            zone = zone_offset_seconds(token);
        }
    }
    if (!day || !month || !year || hh < 0 || hh > 23 || mm < 0 || mm > 59 || ss < 0 || ss > 60)
        return std::nullopt;
    int y = *year;
    if (y < 50)
        y += 2000;
    else if (y < 100)
        y += 1900;

    using namespace std::chrono;
    year_month_day ymd { std::chrono::year { y }, std::chrono::month { static_cast<unsigned>(*month) },
                         std::chrono::day { static_cast<unsigned>(*day) } };
    if (!ymd.ok())
        return std::nullopt;
    Timestamp seconds = sys_days { ymd }.time_since_epoch().count() * Timestamp { 86400 } + hh * 3600 + mm * 60 + ss;
    return seconds - zone.value_or(0);
}

std::optional<DiffLocation> locate_diff(std::string_view body)
{
    auto lines = split_lines(body);
    std::size_t start = lines.size();
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (starts_with(lines[i], "diff --git ")
            || (starts_with(lines[i], "--- ") && i + 1 < lines.size() && starts_with(lines[i + 1], "+++ "))) {
            start = i;
            break;
        }
    }
    if (start == lines.size())
        return std::nullopt;

    std::size_t message_end = start;
    for (std::size_t i = 0; i < start; ++i) {
        if (text::trim(lines[i]) == "---") {
            message_end = i;
            break;
        }
    }
    DiffLocation loc;
    loc.message = to_strings(lines, 0, message_end);
    trim_blank_edges(loc.message);
    std::size_t offset = static_cast<std::size_t>(lines[start].data() - body.data());
    loc.diff_text = std::string(body.substr(offset));
    return loc;
}

std::vector<Patch> extract_patches(const RawMail& mail)
{
    if (mail.parse_warning)
        return {};
    SubjectTags tags = parse_subject_tags(decode_header_words(mail.header("Subject").value_or("")));
    if (tags.position && *tags.position == 0)
        return {};

    struct Found {
        std::vector<std::string> message;
        Diff diff;
    };
    std::vector<Found> found;
    auto try_part = [&](const MailPart& part) -> std::optional<Found> {
        auto loc = locate_diff(part.text);
        if (!loc)
            return std::nullopt;
        try {
            Diff diff = parse_unified_diff(loc->diff_text);
            if (diff.total_changed_lines() == 0)
                return std::nullopt;
            return Found { std::move(loc->message), std::move(diff) };
        } catch (const MalformedDiff&) {
            return std::nullopt;
        }
    };

    const MailPart* inline_text = nullptr;
    for (const auto& part : mail.parts) {
        if (part.attachment || !is_patch_carrier(part))
            continue;
        if (!inline_text && part.content_type == "text/plain")
            inline_text = &part;
        if (auto f = try_part(part)) {
            found.push_back(std::move(*f));
            break;
        }
    }
    if (found.empty()) {
        std::vector<std::string> cover;
        if (inline_text) {
            auto lines = split_lines(inline_text->text);
            auto signature = std::find(lines.begin(), lines.end(), std::string_view("-- "));
            cover.assign(lines.begin(), signature);
            trim_blank_edges(cover);
        }
        for (const auto& part : mail.parts) {
            if (&part == inline_text || !is_patch_carrier(part))
                continue;
            if (auto f = try_part(part)) {
                std::vector<std::string> message = cover;
                auto own = without_leading_headers(std::move(f->message));
                trim_blank_edges(own);
                if (!message.empty() && !own.empty())
                    message.emplace_back();
                message.insert(message.end(), own.begin(), own.end());
                found.push_back({ std::move(message), std::move(f->diff) });
            }
        }
    }
    if (found.empty())
        return {};

    std::string message_id = normalize_message_id(mail.header("Message-ID").value_or(""));
    if (message_id.empty())
        throw MissingMessageId("mail with a diff but no Message-ID");
    auto date = parse_mail_date(mail.header("Date").value_or(""));
    if (!date)
        throw IngestError("unreadable Date header in " + message_id);

    std::optional<Series> series;
    if (tags.revision > 1 || tags.position)
        series = Series { tags.revision, tags.position, tags.total };
    std::optional<std::string> author;
    if (auto from = mail.header("From"))
        author = decode_header_words(*from);

    std::vector<Patch> patches;
    for (std::size_t k = 0; k < found.size(); ++k) {
        std::string id = found.size() == 1 ? message_id : message_id + "#" + std::to_string(k + 1);
        patches.push_back(Patch { PatchId::mail(std::move(id)), tags.cleaned_subject, std::move(found[k].message),
                                  std::move(found[k].diff), *date, author, series });
    }
    return patches;
}

std::optional<Patch> extract_patch(const RawMail& mail)
{
    auto patches = extract_patches(mail);
    if (patches.empty())
        return std::nullopt;
    return std::move(patches.front());
}

MailIngestResult ingest_mails(const std::vector<RawMail>& mails)
{
    enum class Outcome { ok, parse_warning, missing_id, bad_date, cover_letter };
    struct Extracted {
        Outcome outcome = Outcome::ok;
        std::vector<Patch> patches;
    };
    std::vector<Extracted> extracted(mails.size());
    tbb::parallel_for(std::size_t { 0 }, mails.size(), [&](std::size_t i) {
        const RawMail& mail = mails[i];
        auto& slot = extracted[i];
        if (mail.parse_warning) {
            slot.outcome = Outcome::parse_warning;
            return;
        }
        auto tags = parse_subject_tags(decode_header_words(mail.header("Subject").value_or("")));
        if (tags.position && *tags.position == 0) {
            slot.outcome = Outcome::cover_letter;
            return;
        }
        try {
            slot.patches = extract_patches(mail);
        } catch (const MissingMessageId&) {
            slot.outcome = Outcome::missing_id;
        } catch (const IngestError&) {
            slot.outcome = Outcome::bad_date;
        }
    });

    MailIngestResult result;
    result.stats.mails = mails.size();
    std::set<PatchId> seen;
    for (auto& e : extracted) {
        switch (e.outcome) {
        case Outcome::parse_warning:
            ++result.stats.parse_warnings;
            break;
        case Outcome::missing_id:
            ++result.stats.missing_id;
            break;
        case Outcome::bad_date:
            ++result.stats.bad_date;
            break;
        case Outcome::cover_letter:
            ++result.stats.cover_letters;
            break;
        case Outcome::ok:
            break;
        }
        for (auto& patch : e.patches) {
            if (!seen.insert(patch.id).second) {
                ++result.stats.duplicates;
                continue;
            }
            result.patches.push_back(std::move(patch));
        }
    }
    result.stats.patches = result.patches.size();
    result.stats.warnings = result.stats.parse_warnings + result.stats.missing_id + result.stats.bad_date
        + result.stats.duplicates;
    return result;
}

} // namespace lineage
