#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace logokit::cli {

struct ArtifactRef {
    std::string path;
    std::string hash;  // fnv-64 of the file bytes, hex

    bool operator==(const ArtifactRef&) const = default;
};

struct LedgerRecord {
    std::string stage;
    std::string config_hash;
    std::vector<ArtifactRef> inputs;
    std::vector<ArtifactRef> outputs;
    std::string timestamp;  // UTC, informational only
};

/// Append-only record of pipeline stages. The DAG rule: an input that is some
/// stage's output must have been produced by an earlier record.
struct RunLedger {
    std::vector<LedgerRecord> records;

    /// Missing file loads as an empty ledger.
    static RunLedger load(const std::filesystem::path& path);
    void validate() const;  // throws IntegrityError on a DAG violation
};

void append_ledger(const std::filesystem::path& path, const LedgerRecord& record);

std::string file_hash(const std::filesystem::path& path);

/// Stale-free rendering of everything the ledger references: metric tables,
/// loss and scheduler-history plots, attention overlays. Deterministic: two
/// runs over the same artifacts produce byte-identical directories.
void render_report(const std::filesystem::path& workdir, const std::filesystem::path& out_dir);

/// Entry point behind main(). Returns the process exit status: 0 success,
/// 1 stage failure, 2 usage error, 3 config validation failure. Failures
/// print a machine-readable JSON error record to stderr.
int dispatch(int argc, const char* const* argv);

}  // namespace logokit::cli
