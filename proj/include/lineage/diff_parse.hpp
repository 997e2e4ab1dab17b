#pragma once

#include <lineage/model.hpp>

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lineage {

class MalformedDiff : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Parses unified-diff text into a Diff.
///
/// Anything before the first file header ("diff --git", or a "--- " line
/// directly followed by "+++ ") is skipped, so commit-message material may
/// precede the diff. Hunk lengths from the "@@" header decide where a hunk
/// ends; lines after the last hunk of a file that are not headers (mail
/// signatures, trailing prose) are dropped. Stored hunk lengths always match
/// the classified lines.
///
/// Throws MalformedDiff when a hunk header precedes every file header or a
/// change line shows up in a file header before its first hunk.
Diff parse_unified_diff(std::string_view text);

/// Serializes a Diff back to unified-diff text. Context lines are emitted
/// ahead of deletions and insertions, so the result re-parses to an equal Diff
/// but is not a faithful patch.
std::string render_diff(const Diff& diff);

/// Number of inserted plus deleted lines over all hunks.
std::size_t changed_line_count(const Diff& diff);

const std::vector<std::string>& default_tag_set();

/// Removes maintainer tag lines such as "Signed-off-by:". A tag line is one
/// whose text up to the first ':' matches a tag name case-insensitively.
std::vector<std::string> strip_tags(const std::vector<std::string>& message);
std::vector<std::string> strip_tags(const std::vector<std::string>& message,
                                    const std::vector<std::string>& tags);

/// Splits on '\n', dropping a trailing '\r' from each line.
std::vector<std::string_view> split_lines(std::string_view text);

} // namespace lineage
