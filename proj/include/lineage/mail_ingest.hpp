#pragma once

#include <lineage/model.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace lineage {

class IngestError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class MissingMessageId : public IngestError {
public:
    using IngestError::IngestError;
};

struct MailPart {
    std::string content_type; // lowercased "type/subtype"
    std::string filename;
    bool attachment = false;
    std::string text; // decoded, UTF-8
};

struct RawMail {
    std::vector<std::pair<std::string, std::string>> headers; // unfolded, in order
    std::vector<MailPart> parts;
    bool parse_warning = false;
    std::size_t position = 0; // index within its archive

    /// First header with that name (case-insensitive).
    std::optional<std::string> header(std::string_view name) const;
};

/// Splits an mbox (mboxo or mboxrd, "From " separated) into mails and decodes
/// their MIME structure. Input without a leading "From " line is read as a
/// single mail. Problems never abort parsing; they set parse_warning.
std::vector<RawMail> parse_mbox(std::string_view data);

/// Parses one RFC 5322 message (headers, blank line, body).
RawMail parse_mail(std::string_view message);

/// Reads a file, transparently inflating gzip content (detected by magic bytes).
std::string read_archive(const std::filesystem::path& path);

struct SubjectTags {
    std::uint32_t revision = 1;
    std::optional<std::uint32_t> position;
    std::optional<std::uint32_t> total;
    std::string cleaned_subject;
};

/// Reads "[PATCH v3 2/6]"-style leading bracket groups. Tokens are matched
/// case-insensitively: "v<N>" is the revision, "M/K" is position/total, and
/// anything else (RFC, RESEND, tree names) is ignored.
SubjectTags parse_subject_tags(std::string_view subject);

/// Decodes RFC 2047 encoded words ("=?utf-8?q?...?=").
std::string decode_header_words(std::string_view value);

/// RFC 5322 date to UTC seconds; nullopt when unparseable.
std::optional<Timestamp> parse_mail_date(std::string_view value);

struct DiffLocation {
    std::vector<std::string> message; // text above the diff, cut at a "---" separator line
    std::string diff_text;            // from the first file header to the end
};

/// Finds the first unified diff in a text body. Quoted lines ('>') never
/// start a diff.
std::optional<DiffLocation> locate_diff(std::string_view body);

/// The patches carried by a mail: the inline diff if there is one, otherwise
/// one patch per attachment holding a diff. Several attachment patches get
/// ids "<message-id>#k" (k from 1). Mails with parse warnings and cover
/// letters (position 0) yield nothing.
///
/// Throws MissingMessageId when a diff is present but the mail has no
/// Message-ID, IngestError when its Date header cannot be read.
std::vector<Patch> extract_patches(const RawMail& mail);

/// First element of extract_patches, if any.
std::optional<Patch> extract_patch(const RawMail& mail);

struct MailIngestStats {
    std::size_t mails = 0;
    std::size_t patches = 0;
    std::size_t warnings = 0;
    std::size_t parse_warnings = 0;
    std::size_t missing_id = 0;
    std::size_t bad_date = 0;
    std::size_t duplicates = 0;
    std::size_t cover_letters = 0;
};

struct MailIngestResult {
    std::vector<Patch> patches;
    MailIngestStats stats;
};

/// Extracts patches from many mails (in parallel) and resolves duplicate
/// Message-IDs in archive order, keeping the first.
MailIngestResult ingest_mails(const std::vector<RawMail>& mails);

} // namespace lineage
