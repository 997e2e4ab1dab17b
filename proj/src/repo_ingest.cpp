#include <lineage/diff_parse.hpp>
#include <lineage/mail_ingest.hpp>
#include <lineage/repo_ingest.hpp>
#include <lineage/text.hpp>

#include <fcntl.h>
#include <poll.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cerrno>
#include <cstring>
#include <tuple>

extern char** environ;

namespace lineage {

namespace {

constexpr char record_sep = '\x1e';
constexpr char field_sep = '\x1f';

struct Pipe {
    int fd[2] = { -1, -1 };
    Pipe()
    {
        if (::pipe(fd) != 0)
            throw std::runtime_error(std::string("pipe: ") + std::strerror(errno));
    }
    ~Pipe()
    {
        for (int f : fd)
            if (f >= 0)
                ::close(f);
    }
    void close_end(int k)
    {
        ::close(fd[k]);
        fd[k] = -1;
    }
};

std::vector<std::string> split_fields(std::string_view record, char sep, std::size_t max_fields)
{
    std::vector<std::string> fields;
    while (fields.size() + 1 < max_fields) {
        auto pos = record.find(sep);
        if (pos == std::string_view::npos)
            break;
        fields.emplace_back(record.substr(0, pos));
        record.remove_prefix(pos + 1);
    }
    fields.emplace_back(record);
    return fields;
}

void trim_blank_edges(std::vector<std::string>& lines)
{
    auto blank = [](const std::string& l) { return text::trim(l).empty(); };
    while (!lines.empty() && blank(lines.back()))
        lines.pop_back();
    lines.erase(lines.begin(), std::find_if_not(lines.begin(), lines.end(), blank));
}

// Subject is the first paragraph joined by spaces, like git's %s.
void split_commit_message(std::string_view body, std::string& subject, std::vector<std::string>& message)
{
    auto lines = split_lines(body);
    std::size_t i = 0;
    while (i < lines.size() && text::trim(lines[i]).empty())
        ++i;
    for (; i < lines.size() && !text::trim(lines[i]).empty(); ++i) {
        if (!subject.empty())
            subject += ' ';
        subject += text::trim(lines[i]);
    }
    message.assign(lines.begin() + static_cast<std::ptrdiff_t>(i), lines.end());
    trim_blank_edges(message);
}

void require_repo(const std::filesystem::path& repo)
{
    std::error_code ec;
    if (!std::filesystem::is_directory(repo, ec))
        throw RepoUnavailable("not a directory: " + repo.string());
    auto probe = run_process({ "git", "-C", repo.string(), "rev-parse", "--git-dir" });
    if (probe.status != 0)
        throw RepoUnavailable("not a git repository: " + repo.string());
}

} // namespace

ProcessResult run_process(const std::vector<std::string>& argv)
{
    if (argv.empty())
        throw std::invalid_argument("run_process: empty argv");
    Pipe out, err;
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, out.fd[1], STDOUT_FILENO);
    posix_spawn_file_actions_adddup2(&actions, err.fd[1], STDERR_FILENO);
    posix_spawn_file_actions_addclose(&actions, out.fd[0]);
    posix_spawn_file_actions_addclose(&actions, err.fd[0]);
    posix_spawn_file_actions_addclose(&actions, out.fd[1]);
    posix_spawn_file_actions_addclose(&actions, err.fd[1]);
    posix_spawn_file_actions_addopen(&actions, STDIN_FILENO, "/dev/null", O_RDONLY, 0);

    std::vector<char*> args;
    for (const auto& a : argv)
        args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);

    pid_t pid = 0;
    int rc = posix_spawnp(&pid, args[0], &actions, nullptr, args.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    if (rc != 0)
        throw std::runtime_error("cannot run " + argv[0] + ": " + std::strerror(rc));
    out.close_end(1);
    err.close_end(1);

    ProcessResult result;
    std::array<pollfd, 2> fds { pollfd { out.fd[0], POLLIN, 0 }, pollfd { err.fd[0], POLLIN, 0 } };
    std::array<std::string*, 2> sinks { &result.out, &result.err };
    std::array<char, 1 << 16> buffer {};
    int open_fds = 2;
    while (open_fds > 0) {
        if (::poll(fds.data(), fds.size(), -1) < 0) {
            if (errno == EINTR)
                continue;
            break;
        }
        for (std::size_t k = 0; k < fds.size(); ++k) {
            if (fds[k].fd < 0 || !(fds[k].revents & (POLLIN | POLLHUP | POLLERR)))
                continue;
            ssize_t n = ::read(fds[k].fd, buffer.data(), buffer.size());
            if (n > 0) {
                sinks[k]->append(buffer.data(), static_cast<std::size_t>(n));
            } else if (n == 0 || errno != EINTR) {
                fds[k].fd = -1;
                --open_fds;
            }
        }
    }
    int status = 0;
    while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) { }
    result.status = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

RepoIngestResult load_commits(const std::filesystem::path& repo, const std::string& range)
{
    if (range.empty() || range.front() == '-')
        throw BadRange("invalid revision range: '" + range + "'");
    require_repo(repo);

    auto log = run_process({ "git", "-C", repo.string(), "-c", "core.quotepath=off", "log", "--topo-order",
                             "--reverse", "--no-color", "--no-ext-diff", "--no-textconv", "--find-renames",
                             "--diff-algorithm=myers", "--encoding=UTF-8", "-p",
                             "--format=%x1e%H%x1f%P%x1f%ct%x1f%an <%ae>%x1f%B%x1f", range, "--" });
    if (log.status != 0)
        throw BadRange("cannot resolve range '" + range + "': " + std::string(text::trim(log.err)));

    RepoIngestResult result;
    std::string_view all = log.out;
    std::size_t pos = all.find(record_sep);
    while (pos != std::string_view::npos) {
        std::size_t next = all.find(record_sep, pos + 1);
        std::string_view record = all.substr(pos + 1, next == std::string_view::npos ? all.npos : next - pos - 1);
        pos = next;

        auto fields = split_fields(record, field_sep, 6);
        if (fields.size() < 6)
            throw RepoUnavailable("unexpected git log output");
        std::string_view parents = text::trim(fields[1]);
        if (parents.find(' ') != std::string_view::npos) {
            ++result.merges_excluded;
            continue;
        }
        Patch patch;
        patch.id = PatchId::commit(fields[0]);
        patch.submission_date = std::stoll(fields[2]);
        patch.author = fields[3];
        split_commit_message(fields[4], patch.subject, patch.message);
        patch.diff = parse_unified_diff(fields[5]);
        if (patch.diff.total_changed_lines() == 0) {
            ++result.empty_excluded;
            continue;
        }
        result.commits.push_back(std::move(patch));
    }
    return result;
}

RepoIngestResult load_patch_directory(const std::filesystem::path& dir)
{
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec))
        throw RepoUnavailable("not a directory: " + dir.string());

    RepoIngestResult result;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".patch")
            continue;
        std::string hash = text::to_lower(entry.path().stem().string());
        if (!is_commit_hash(hash))
            continue;
        auto mails = parse_mbox(read_archive(entry.path()));
        if (mails.empty())
            continue;
        const RawMail& mail = mails.front();
        auto date = parse_mail_date(mail.header("Date").value_or(""));
        if (!date)
            throw IngestError("no readable Date header in " + entry.path().string());

        Patch patch;
        patch.id = PatchId::commit(hash);
        patch.submission_date = *date;
        patch.subject = parse_subject_tags(decode_header_words(mail.header("Subject").value_or(""))).cleaned_subject;
        if (auto from = mail.header("From"))
            patch.author = decode_header_words(*from);
        for (const auto& part : mail.parts) {
            auto loc = locate_diff(part.text);
            if (!loc)
                continue;
            patch.message = std::move(loc->message);
            patch.diff = parse_unified_diff(loc->diff_text);
            break;
        }
        if (patch.diff.total_changed_lines() == 0) {
            ++result.empty_excluded;
            continue;
        }
        result.commits.push_back(std::move(patch));
    }
    std::sort(result.commits.begin(), result.commits.end(), [](const Patch& a, const Patch& b) {
        return std::tie(a.submission_date, a.id) < std::tie(b.submission_date, b.id);
    });
    return result;
}

} // namespace lineage
