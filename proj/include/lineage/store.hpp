#pragma once

#include <lineage/model.hpp>

#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

namespace lineage {

class StoreError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A corpus store is a directory with one manifest per kind (mails.jsonl,
// commits.jsonl) and one UTF-8 patch file per patch under mails/ and commits/.

/// Replaces all patches of the given kind in the store.
void write_patches(const std::filesystem::path& store, PatchKind kind, std::span<const Patch> patches);

/// Patches of one kind in manifest order; empty when the store has none.
std::vector<Patch> read_patches(const std::filesystem::path& store, PatchKind kind);

Corpus load_corpus(const std::filesystem::path& store);

} // namespace lineage
