#pragma once

// Synthetic eDonkey server workload: a client population, its provide/ask
// relations and query stream, written as a pcap plus ground-truth and drop
// sidecars so every pipeline stage can be checked end to end.

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "edtrace/analyze.hpp"
#include "edtrace/ingest.hpp"
#include "edtrace/wire.hpp"

namespace edtrace::generate {

// Truncated Zipf on {1..n}, P(k) proportional to k^-exponent, sampled by
// rejection-inversion (constant expected time for any n).
class ZipfSampler {
public:
    ZipfSampler(std::uint64_t n, double exponent);
    std::uint64_t operator()(std::mt19937_64& rng) const;
    std::uint64_t n() const { return n_; }
    double exponent() const { return exponent_; }

private:
    double h(double x) const;
    double h_integral(double x) const;
    double h_integral_inverse(double x) const;

    std::uint64_t n_;
    double exponent_;
    double h_integral_x1_;
    double h_integral_n_;
    double s_;
};

struct SizePeak {
    std::uint64_t kb = 0;
    double weight = 0;  // fraction of files given exactly this size
};

struct DropEvent {
    double time = 0;  // seconds after the workload start
    std::uint64_t count = 0;
};

struct WorkloadConfig {
    std::uint64_t seed = 1;
    std::uint32_t num_clients = 2'000;
    std::uint32_t num_files = 5'000;
    double provide_exponent = 2.0;  // providers-per-file ~ Zipf
    double ask_exponent = 2.0;      // askers-per-file ~ Zipf
    double ask_fraction = 0.5;      // share of files anyone asks for
    double forged_fraction = 0.0;
    std::vector<std::uint16_t> forged_prefixes{0x0000, 0x0100};
    double malformed_rate = 0.0;
    double truncate_share = 1.0;  // of malformed datagrams; the rest get junk appended
    double fragment_rate = 0.0;
    std::vector<DropEvent> drop_schedule;
    std::uint64_t drops_total = 0;  // spread over the run when drop_schedule is empty
    double duration = 3'600.0;
    std::uint32_t cohort_52 = 0;
    std::vector<SizePeak> size_peaks;
    double low_id_fraction = 0.2;
    double reannounce_rate = 0.1;
    bool background = true;  // server-list, status and keyword-search traffic
    std::uint64_t target_messages = 0;  // keyword-search filler up to this count
    std::uint32_t broken_frames = 0;
    std::uint32_t orphan_fragments = 0;
    std::uint16_t server_port = ingest::kDefaultServerPort;
    std::int64_t start_time = 1'188'000'000;  // epoch seconds

    void validate() const;  // throws std::invalid_argument
};

struct Secret {
    enum class Kind : std::uint8_t { Ip, FileId, String };
    Kind kind = Kind::String;
    std::string value;  // decimal address, lowercase hex, or raw bytes
    friend bool operator==(const Secret&, const Secret&) = default;
};

struct GroundTruth {
    // What ingest and decode must report.
    std::uint64_t frames = 0;
    std::uint64_t datagrams = 0;
    std::uint64_t decoded = 0;
    std::uint64_t undecoded = 0;
    std::array<std::uint64_t, wire::kDecodeErrorKinds> undecoded_by_kind{};
    std::uint64_t fragments = 0;
    std::uint64_t fragment_groups = 0;
    std::uint64_t reassembled = 0;
    std::uint64_t malformed = 0;
    std::uint64_t drops_total = 0;

    // What the anonymizer must assign, in appearance order.
    std::vector<std::pair<std::uint32_t, ClientIndex>> clients;
    std::vector<std::pair<wire::FileId, FileIndex>> files;

    // Delivered relations, raw identifiers.
    std::vector<std::pair<std::uint32_t, wire::FileId>> provides;
    std::vector<std::pair<std::uint32_t, wire::FileId>> asks;

    std::array<analyze::DistributionReport, analyze::kReportKinds> distributions;
    analyze::Summary summary;
    std::int64_t span_us = 0;

    std::vector<Secret> secrets;

    void write(const std::filesystem::path& path) const;
    static GroundTruth read(const std::filesystem::path& path);
};

struct Workload {
    GroundTruth truth;
    std::vector<ingest::DropRecord> drops;
};

std::filesystem::path truth_path(const std::filesystem::path& pcap);
std::filesystem::path drops_path(const std::filesystem::path& pcap);

// Writes `pcap`, truth_path(pcap) and drops_path(pcap). Deterministic in
// cfg.seed.
Workload generate_workload(const WorkloadConfig& cfg, const std::filesystem::path& pcap);

// Recomputes the five distributions from the provide/ask sets and the
// per-file sizes; used to check the truth file's internal consistency.
std::array<analyze::DistributionReport, analyze::kReportKinds> distributions_from_relations(
    const std::vector<std::pair<std::uint32_t, wire::FileId>>& provides,
    const std::vector<std::pair<std::uint32_t, wire::FileId>>& asks,
    const analyze::DistributionReport& sizes);

} // namespace edtrace::generate
