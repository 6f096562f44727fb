#pragma once

// Classic-pcap ingestion: Ethernet/IPv4/UDP extraction, fragment
// reassembly, malformed-packet and capture-loss accounting.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace edtrace::ingest {

using Micros = std::int64_t;  // microseconds since the Unix epoch
inline constexpr Micros kMicrosPerSecond = 1'000'000;
inline constexpr std::size_t kMaxUdpPayload = 65'507;
inline constexpr std::uint16_t kDefaultServerPort = 4661;

class IngestError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Datagram {
    Micros timestamp = 0;
    std::uint32_t src_ip = 0;
    std::uint16_t src_port = 0;
    std::uint32_t dst_ip = 0;
    std::uint16_t dst_port = 0;
    std::vector<std::uint8_t> payload;

    friend bool operator==(const Datagram&, const Datagram&) = default;
};

struct DropRecord {
    std::int64_t epoch_seconds = 0;
    std::uint64_t drops = 0;
    friend bool operator==(const DropRecord&, const DropRecord&) = default;
};

struct IngestStats {
    std::uint64_t packets_seen = 0;     // pcap records
    std::uint64_t fragments = 0;        // UDP records carrying an IPv4 fragment
    std::uint64_t fragment_groups = 0;  // distinct reassembly groups opened
    std::uint64_t malformed = 0;        // bad records plus failed fragment groups
    std::uint64_t failed_groups = 0;    // subset of malformed: timed out or conflicting groups
    std::uint64_t reassembled = 0;      // datagrams rebuilt from fragments
    std::uint64_t filtered = 0;         // well-formed but not server UDP traffic
    std::uint64_t datagrams = 0;        // emitted
    Micros first_timestamp = 0;
    Micros last_timestamp = 0;
    std::vector<DropRecord> drops_reported;

    std::uint64_t total_drops() const;
};

// Drop sidecar: one `<epoch_seconds> <drops>` pair per line; '#' comments.
std::vector<DropRecord> read_drop_sidecar(const std::filesystem::path& path);
void write_drop_sidecar(const std::filesystem::path& path, std::span<const DropRecord> drops);

struct IpFragment {
    Micros timestamp = 0;
    std::uint32_t src_ip = 0;
    std::uint32_t dst_ip = 0;
    std::uint16_t id = 0;
    std::uint8_t protocol = 17;
    std::uint32_t offset = 0;  // bytes
    bool more_fragments = false;
    std::vector<std::uint8_t> data;  // IP payload slice
};

struct ReassembledPacket {
    Micros timestamp = 0;  // of the first fragment received
    std::uint32_t src_ip = 0;
    std::uint32_t dst_ip = 0;
    std::uint8_t protocol = 0;
    std::vector<std::uint8_t> data;  // full IP payload (transport header included)
};

// Groups fragments by (src, dst, id, protocol). A group completes once the
// last fragment is seen and every byte below its end is covered. Groups
// older than the horizon, and groups with conflicting overlaps, fail.
class Reassembler {
public:
    explicit Reassembler(Micros horizon = 30 * kMicrosPerSecond) : horizon_(horizon) {}

    struct Outcome {
        std::optional<ReassembledPacket> packet;
        bool opened_group = false;
        bool failed_group = false;
    };

    Outcome add(IpFragment frag);
    std::size_t expire(Micros now);  // returns groups failed by timeout
    std::size_t flush();             // fails every pending group
    std::size_t pending() const { return groups_.size(); }

private:
    struct Group {
        Micros first_seen = 0;
        std::vector<std::uint8_t> data;
        std::vector<bool> have;
        std::optional<std::uint32_t> total;
        bool failed = false;
    };
    using Key = std::tuple<std::uint32_t, std::uint32_t, std::uint16_t, std::uint8_t>;

    Micros horizon_;
    std::map<Key, Group> groups_;
};

// Reassembles a fragment stream and decodes the UDP datagrams it carries;
// no port filtering. Incomplete groups count as malformed in `stats`.
std::vector<Datagram> reassemble(std::vector<IpFragment> fragments, IngestStats& stats,
                                 Micros horizon = 30 * kMicrosPerSecond);

struct ReaderOptions {
    std::uint16_t server_port = kDefaultServerPort;
    Micros reassembly_horizon = 30 * kMicrosPerSecond;
    std::optional<std::filesystem::path> drop_sidecar;
};

// Streams UDP datagrams to or from the server port, in file order.
// Throws IngestError when the file cannot be opened or its global header
// is not classic pcap with Ethernet link type.
class PcapReader {
public:
    PcapReader(const std::filesystem::path& path, ReaderOptions options = {});

    std::optional<Datagram> next();
    const IngestStats& stats() const { return stats_; }

private:
    bool read_record();
    void handle_frame(Micros ts, std::span<const std::uint8_t> frame);
    void handle_udp(Micros ts, std::uint32_t src, std::uint32_t dst, std::span<const std::uint8_t> ip_payload);
    void note_time(Micros ts);

    std::ifstream in_;
    ReaderOptions options_;
    bool swapped_ = false;
    bool nanos_ = false;
    bool eof_ = false;
    IngestStats stats_;
    Reassembler reassembler_;
    Micros last_expiry_check_ = 0;
    std::vector<std::uint8_t> record_;
    std::vector<Datagram> ready_;  // FIFO of datagrams from the current record
    std::size_t ready_pos_ = 0;
};

std::pair<std::vector<Datagram>, IngestStats> read_pcap(const std::filesystem::path& path,
                                                        ReaderOptions options = {});

struct LossBucket {
    std::int64_t start = 0;  // seconds since the start of the capture span
    std::uint64_t losses = 0;
    std::uint64_t cumulative = 0;
};

// Buckets partition [span start, span end] where the span covers both the
// captured packets and the reported drops. Throws on bucket == 0.
std::vector<LossBucket> loss_timeseries(const IngestStats& stats, std::int64_t bucket_seconds);

// --- writing -------------------------------------------------------------

struct Endpoint {
    std::uint32_t ip = 0;
    std::uint16_t port = 0;
};

// Ethernet frames carrying one UDP datagram. With fragment_size > 0 the IP
// payload is split into fragments of that many bytes (rounded down to a
// multiple of 8); otherwise a single frame is produced.
std::vector<std::vector<std::uint8_t>> build_udp_frames(Endpoint src, Endpoint dst, std::uint16_t ip_id,
                                                        std::span<const std::uint8_t> payload,
                                                        std::size_t fragment_size = 0);

// Writes classic microsecond pcap, native byte order, Ethernet link type.
class PcapWriter {
public:
    explicit PcapWriter(const std::filesystem::path& path);
    void write(Micros ts, std::span<const std::uint8_t> frame);
    void write_raw_record(std::uint32_t sec, std::uint32_t usec, std::uint32_t incl_len, std::uint32_t orig_len,
                          std::span<const std::uint8_t> bytes);
    std::uint64_t records() const { return records_; }

private:
    std::ofstream out_;
    std::uint64_t records_ = 0;
};

} // namespace edtrace::ingest
