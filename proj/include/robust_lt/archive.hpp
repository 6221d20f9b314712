#pragma once

// Append-only solution archive: one JSON object per line, schema-versioned,
// each carrying a SHA-256 of its own canonical payload.

#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <vector>

#include "robust_lt/solver.hpp"

namespace robust_lt {

inline constexpr int kArchiveSchema = 1;

/// Single-line JSON for one record, hash included.
std::string serialize_record(const SolveRecord& record);

/// Parse one archive line and verify its schema and hash. Throws Archive on
/// malformed lines, unknown schemas and hash mismatches.
SolveRecord parse_record(const std::string& line);

/// SHA-256 hex digest of the canonical payload with the wall-clock field
/// removed; equal for reruns that differ only in timing.
std::string payload_digest(const SolveRecord& record);

/// SHA-256 over the payload digests of all records in order.
std::string archive_digest(const std::vector<SolveRecord>& records);

std::string sha256_hex(const std::string& data);

struct ArchiveContents {
    std::vector<SolveRecord> records;
    std::vector<std::string> warnings;  // one per skipped line
    int total_lines = 0;                // non-blank lines
    int corrupt_lines = 0;
};

/// Read every parseable record, skipping corrupt lines with a warning.
/// Throws Archive when the file cannot be opened.
ArchiveContents read_archive(const std::filesystem::path& path);

/// Serialized appends from any number of threads; each record becomes one
/// complete line, flushed before append returns.
class ArchiveWriter {
public:
    explicit ArchiveWriter(const std::filesystem::path& path);

    void append(const SolveRecord& record);
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::ofstream out_;
    std::mutex mutex_;
};

}  // namespace robust_lt
