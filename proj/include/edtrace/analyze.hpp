#pragma once

// Streaming statistics over a trace: the four client/file relation
// distributions, the file-size histogram, log-log power-law fits and peak
// detection.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "edtrace/trace.hpp"

namespace edtrace::analyze {

enum class ReportKind : std::uint8_t {
    ProvidersPerFile,     // x clients provide the file
    AskersPerFile,        // x clients ask for sources of the file
    FilesPerProvider,     // client provides x distinct files
    FilesAskedPerClient,  // client asks for x distinct files
    FileSizeKB,           // file has size x kilobytes
};
inline constexpr std::size_t kReportKinds = 5;
inline constexpr std::array<ReportKind, kReportKinds> kAllReportKinds = {
    ReportKind::ProvidersPerFile, ReportKind::AskersPerFile, ReportKind::FilesPerProvider,
    ReportKind::FilesAskedPerClient, ReportKind::FileSizeKB};

std::string_view report_name(ReportKind k);

struct Point {
    std::uint64_t x = 0;
    std::uint64_t y = 0;
    friend bool operator==(const Point&, const Point&) = default;
};

// Histogram: points sorted by strictly increasing x, every y >= 1, and the
// y values sum to total_entities.
struct DistributionReport {
    ReportKind kind = ReportKind::ProvidersPerFile;
    std::vector<Point> points;
    std::uint64_t total_entities = 0;

    // Builds the histogram of the given per-entity values; zeros are skipped.
    static DistributionReport from_values(ReportKind kind, std::span<const std::uint64_t> values);

    friend bool operator==(const DistributionReport&, const DistributionReport&) = default;
};

DistributionReport merge(const DistributionReport& a, const DistributionReport& b);

// Sum of x*y: for the relation reports, the number of distinct pairs.
std::uint64_t pair_mass(const DistributionReport& r);

struct Summary {
    std::uint64_t messages = 0;
    std::uint64_t distinct_clients = 0;
    std::uint64_t distinct_files = 0;
    double span_seconds = 0;
    std::uint64_t file_search_queries = 0;
    std::array<std::uint64_t, wire::kVariantCount> per_type{};

    friend bool operator==(const Summary&, const Summary&) = default;
};

// Counts per anonymized integer. Identifiers are dense, so a vector backs
// the common range; anything larger (raw test traces) spills to a map.
class IdCounter {
public:
    static constexpr std::uint64_t kDenseLimit = 1ull << 26;

    std::uint32_t increment(std::uint64_t id);  // returns the new count
    std::uint32_t get(std::uint64_t id) const;
    std::vector<std::uint64_t> values() const;  // non-zero counts
    std::uint64_t nonzero() const { return nonzero_; }

private:
    std::vector<std::uint32_t> dense_;
    std::unordered_map<std::uint64_t, std::uint32_t> sparse_;
    std::uint64_t nonzero_ = 0;
};

// Single-pass accumulator. A client "provides" a file if any of its
// Announce messages lists it and "asks" for it if any SourceSearchQuery it
// sends lists it; repeats are not double counted. File sizes come from the
// first Size tag seen for a file in Announce or FileSearchAnswer bodies.
class DistributionBuilder {
public:
    void add(const trace::TraceEvent& e);

    DistributionReport report(ReportKind kind) const;
    std::array<DistributionReport, kReportKinds> reports() const;
    Summary summary() const;

private:
    void see_client(std::uint64_t c) { clients_seen_.increment(c); }
    void see_file(std::uint64_t f) { files_seen_.increment(f); }
    void note_size(FileIndex f, const std::vector<anon::Tag>& tags);

    std::unordered_set<std::uint64_t> provide_pairs_;
    std::unordered_set<std::uint64_t> ask_pairs_;
    IdCounter providers_per_file_, files_per_provider_;
    IdCounter askers_per_file_, files_per_asker_;
    std::unordered_map<FileIndex, std::uint64_t> size_kb_;
    IdCounter clients_seen_, files_seen_;
    Summary summary_;
    std::int64_t first_us_ = 0, last_us_ = 0;
};

std::array<DistributionReport, kReportKinds> build_distributions(std::span<const trace::TraceEvent> events);
Summary summarize(std::span<const trace::TraceEvent> events);

class FitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct FitRange {
    std::uint64_t x_min = 1;
    std::uint64_t x_max = UINT64_MAX;
};

// y ~ prefactor * x^exponent, so a decreasing law has a negative exponent.
struct PowerLawFit {
    double exponent = 0;
    double prefactor = 0;
    FitRange fit_range;
    double residual = 0;  // RMS of log(y) residuals
    std::size_t points = 0;
};

// Ordinary least squares on (ln x, ln y) for points with x in range, y > 0.
// Throws FitError when fewer than two points remain.
PowerLawFit fit_power_law(const DistributionReport& report, FitRange range = {});

struct PeakOptions {
    std::size_t window = 10;   // neighbouring report points on each side
    double prominence = 3.0;   // y must exceed prominence * local median
};

// A peak is a point whose y exceeds every neighbour among the `window`
// adjacent report points on each side (at least one on each side) and
// exceeds `prominence` times the median y of those neighbours.
std::vector<Point> find_peaks(const DistributionReport& report, PeakOptions options = {});

// TSV "x<TAB>y" per line.
void write_report_tsv(const DistributionReport& r, const std::filesystem::path& path);
DistributionReport read_report_tsv(ReportKind kind, const std::filesystem::path& path);

} // namespace edtrace::analyze
