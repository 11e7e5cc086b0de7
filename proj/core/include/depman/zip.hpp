#pragma once

#include <map>
#include <string>
#include <string_view>

namespace depman::zip {

/// Archive contents keyed by entry path. std::map keeps paths in the
/// lexicographic order the writer emits them in.
using Entries = std::map<std::string, std::string>;

/// Reads a ZIP stream (stored or deflated entries, no encryption, no
/// ZIP64). Directory entries are skipped. Throws Error{NotAnArchive}.
Entries read(std::string_view archive);

/// Writes entries as stored (uncompressed) members in path order with a
/// fixed timestamp, so equal inputs produce byte-identical archives.
std::string write(const Entries& entries);

/// True when `data` starts with a local file header or is an empty archive.
bool looks_like_zip(std::string_view data) noexcept;

} // namespace depman::zip
