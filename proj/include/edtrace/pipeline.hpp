#pragma once

// End-to-end stages behind the command line: run (pcap to XML trace),
// analyze (trace to reports), verify (outputs against generator truth).

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "edtrace/analyze.hpp"
#include "edtrace/anonymize.hpp"
#include "edtrace/generate.hpp"
#include "edtrace/ingest.hpp"

namespace edtrace::pipeline {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::filesystem::path input;
    std::uint16_t server_port = ingest::kDefaultServerPort;
    std::filesystem::path output;  // ".gz" suffix compresses
    IndexBytes index_bytes{};
    unsigned client_bits = ClientTable::kDefaultKeyBits;
    std::optional<std::filesystem::path> reports;  // run.json, losses.tsv, buckets.tsv, table snapshots
    std::optional<std::filesystem::path> drops;    // defaults to <input>.drops when that file exists
    std::optional<std::filesystem::path> resume_clients, resume_files;
    std::int64_t loss_bucket_seconds = 60;
    bool anonymize = true;  // test hook, see AnonymizerOptions::enabled

    void validate() const;  // throws ConfigError
};

struct RunReport {
    ingest::IngestStats ingest;
    std::uint64_t decoded = 0;
    std::uint64_t undecoded = 0;
    std::array<std::uint64_t, wire::kDecodeErrorKinds> undecoded_by_kind{};
    std::array<std::uint64_t, wire::kVariantCount> per_type{};
    std::uint64_t distinct_clients = 0;
    std::uint64_t distinct_files = 0;
    std::uint64_t client_overflow = 0;  // clientIDs wider than the table
    std::uint64_t skewed_timestamps = 0;
    unsigned client_bits = 0;
    IndexBytes index_bytes{};
    double elapsed_seconds = 0;

    double undecoded_percent() const;
    double messages_per_second() const;

    std::string to_json() const;
    static RunReport from_json(const std::string& text);
};

inline constexpr const char* kRunReportFile = "run.json";
inline constexpr const char* kLossFile = "losses.tsv";
inline constexpr const char* kBucketFile = "buckets.tsv";
inline constexpr const char* kClientSnapshot = "clients.dktb";
inline constexpr const char* kFileSnapshot = "files.dktb";

// Streams the capture once. Decode failures are counted, never fatal.
// Throws ingest::IngestError / std::runtime_error on I/O failure.
RunReport run_pipeline(const RunConfig& cfg);

struct FitResult {
    analyze::ReportKind kind{};
    std::optional<analyze::PowerLawFit> fit;
    std::string error;
};

struct AnalyzeResult {
    analyze::Summary summary;
    std::array<analyze::DistributionReport, analyze::kReportKinds> reports;
    std::vector<FitResult> fits;
    std::vector<std::pair<analyze::ReportKind, analyze::Point>> peaks;
    bool truncated = false;
    std::uint64_t events = 0;
};

// Reads a trace and, when report_dir is set, writes <report>.tsv for the
// five reports plus fits.tsv, peaks.tsv and summary.json. A truncated trace
// still yields reports over the recovered events (truncated = true).
// Parse errors propagate as trace::TraceParseError.
AnalyzeResult analyze_trace(const std::filesystem::path& trace,
                            const std::optional<std::filesystem::path>& report_dir,
                            analyze::PeakOptions peaks = {});

std::string summary_json(const analyze::Summary& s);

// --- leak scanning ---------------------------------------------------------------

struct Leak {
    generate::Secret::Kind kind{};
    std::string value;
    std::uint64_t line = 0;
};

// Looks for secrets in XML text. IPs match whole attribute-value tokens in
// decimal or dotted form; fileIDs match as hex (any case) or as raw 16-byte
// patterns; strings match as raw substrings anywhere in the stream.
class LeakScanner {
public:
    explicit LeakScanner(const std::vector<generate::Secret>& secrets);
    ~LeakScanner();
    LeakScanner(const LeakScanner&) = delete;
    LeakScanner& operator=(const LeakScanner&) = delete;

    // Lines must be fed in order; matches may span line breaks.
    void scan_line(std::string_view line, std::uint64_t lineno);
    const std::vector<Leak>& leaks() const;  // first 100 hits
    std::uint64_t total() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

std::vector<Leak> scan_for_leaks(std::istream& xml, const std::vector<generate::Secret>& secrets,
                                 std::uint64_t* total = nullptr);

// --- verification ----------------------------------------------------------------

struct Check {
    enum class Status : std::uint8_t { Pass, Fail, Missing };
    std::string name;
    Status status = Status::Fail;
    std::string detail;
};

std::string_view to_string(Check::Status s);

struct VerifyInputs {
    std::filesystem::path pcap;
    std::optional<std::filesystem::path> truth;  // defaults to generate::truth_path(pcap)
    std::filesystem::path trace;
    std::filesystem::path reports;
};

struct VerifyReport {
    std::vector<Check> checks;
    bool passed() const;
};

// (a) decode counts, (b) anonymizer tables, (c) analyzer reports,
// (d) secret leaks, (e) loss curve; each against the generator truth.
VerifyReport verify_pipeline(const VerifyInputs& in);

// Re-indexes a file table under other index bytes, preserving the assigned
// integers; used to compare bucket skew across byte choices.
FileTable rebucket(const FileTable& t, IndexBytes index_bytes);

} // namespace edtrace::pipeline
