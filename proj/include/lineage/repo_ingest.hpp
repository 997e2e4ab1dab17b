#pragma once

#include <lineage/model.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace lineage {

class RepoUnavailable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class BadRange : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RepoIngestResult {
    std::vector<Patch> commits; // topological order, oldest first
    std::size_t merges_excluded = 0;
    std::size_t empty_excluded = 0;
};

/// Reads the commits of a revision range with `git log`. Merge commits and
/// commits without changed lines are counted but left out. Commit dates are
/// committer dates; ids are full hashes.
RepoIngestResult load_commits(const std::filesystem::path& repo, const std::string& range);

/// Reads a directory of <hash>.patch files (git format-patch output or plain
/// mails). Ids come from the file names, dates from the Date header. Sorted
/// by date, then id.
RepoIngestResult load_patch_directory(const std::filesystem::path& dir);

struct ProcessResult {
    int status = -1; // exit status, or -1 when the process did not exit normally
    std::string out;
    std::string err;
};

/// Runs a program found on PATH without a shell and collects its output.
ProcessResult run_process(const std::vector<std::string>& argv);

} // namespace lineage
