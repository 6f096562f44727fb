#pragma once

// Order-of-appearance anonymization. The first clientID (fileID) seen is
// encoded as 0, the next new one as 1, and so on. Strings become MD5 hex
// digests, sizes are truncated to kilobytes, times are rebased.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "edtrace/ingest.hpp"
#include "edtrace/wire.hpp"

namespace edtrace {

using ClientIndex = std::uint32_t;
using FileIndex = std::uint32_t;

// Zero-filled array of 32-bit cells backed by an anonymous mapping; pages
// are only committed when first written.
class DenseCells {
public:
    explicit DenseCells(std::size_t count);
    ~DenseCells();
    DenseCells(DenseCells&& other) noexcept;
    DenseCells& operator=(DenseCells&& other) noexcept;
    DenseCells(const DenseCells&) = delete;
    DenseCells& operator=(const DenseCells&) = delete;

    std::uint32_t& operator[](std::size_t i) { return data_[i]; }
    std::uint32_t operator[](std::size_t i) const { return data_[i]; }
    std::size_t size() const { return count_; }
    std::span<const std::uint32_t> view() const { return {data_, count_}; }

private:
    void release() noexcept;

    std::uint32_t* data_ = nullptr;
    std::size_t count_ = 0;
    bool mapped_ = false;
};

// Direct-indexed encoder over clientIDs below 2^key_bits. Cell value 0 means
// unseen, otherwise index + 1. Wider keys go to an overflow map. Snapshots
// dump the cells for widths up to 2^28 and occupied cells only above that.
class ClientTable {
public:
    static constexpr unsigned kDefaultKeyBits = 24;
    static constexpr unsigned kMaxSnapshotKeyBits = 28;

    explicit ClientTable(unsigned key_bits = kDefaultKeyBits);

    ClientIndex encode(wire::ClientId c);
    std::optional<ClientIndex> lookup(wire::ClientId c) const;

    unsigned key_bits() const { return key_bits_; }
    std::uint64_t size() const { return next_index_; }
    std::size_t overflow_size() const { return overflow_.size(); }
    std::size_t cell_bytes() const { return cells_.size() * sizeof(std::uint32_t); }

    void save(const std::filesystem::path& path) const;
    static ClientTable load(const std::filesystem::path& path);

private:
    unsigned key_bits_;
    DenseCells cells_;
    std::unordered_map<std::uint32_t, ClientIndex> overflow_;
    std::vector<std::uint32_t> dense_keys_;  // only kept above kMaxSnapshotKeyBits
    std::uint64_t next_index_ = 0;
};

struct IndexBytes {
    unsigned first = 2;
    unsigned second = 3;

    void validate() const;  // 0 <= first < second <= 15, throws otherwise
    friend bool operator==(const IndexBytes&, const IndexBytes&) = default;
};

// 65,536 sorted arrays selected by two bytes of the fileID. Lookup is a
// binary search in one bucket; a miss is a shifted sorted insert.
class FileTable {
public:
    static constexpr std::size_t kBuckets = 65'536;

    struct Entry {
        wire::FileId file;
        FileIndex index = 0;
    };

    explicit FileTable(IndexBytes index_bytes = {});

    FileIndex encode(const wire::FileId& f);
    std::optional<FileIndex> lookup(const wire::FileId& f) const;
    std::size_t bucket_of(const wire::FileId& f) const {
        return (std::size_t{f.bytes[index_bytes_.first]} << 8) | f.bytes[index_bytes_.second];
    }

    IndexBytes index_bytes() const { return index_bytes_; }
    std::uint64_t size() const { return next_index_; }
    std::span<const Entry> bucket(std::size_t b) const { return buckets_[b]; }

    void save(const std::filesystem::path& path) const;
    static FileTable load(const std::filesystem::path& path);

private:
    IndexBytes index_bytes_;
    std::vector<std::vector<Entry>> buckets_;
    std::uint64_t next_index_ = 0;
};

// (occupancy, number of buckets with that occupancy), ascending occupancy.
std::vector<std::pair<std::size_t, std::size_t>> bucket_size_distribution(const FileTable& t);

struct BucketSkew {
    double mean = 0;
    std::size_t max = 0;
    std::size_t argmax = 0;
    double ratio() const { return mean > 0 ? static_cast<double>(max) / mean : 0.0; }
};
BucketSkew bucket_skew(const FileTable& t);

std::string anon_string(std::string_view s);
std::uint64_t anon_size(std::uint64_t bytes);

namespace anon {

struct Tag {
    wire::TagKind kind = wire::TagKind::Name;
    std::uint8_t code = 0;
    std::variant<std::string, std::uint64_t> value;  // digest, or kilobytes for Size
    friend bool operator==(const Tag&, const Tag&) = default;
};

struct FileEntry {
    FileIndex file = 0;
    std::vector<Tag> tags;
    friend bool operator==(const FileEntry&, const FileEntry&) = default;
};

struct Source {
    ClientIndex client = 0;
    std::uint16_t port = 0;
    friend bool operator==(const Source&, const Source&) = default;
};

struct ServerListQuery {
    friend bool operator==(const ServerListQuery&, const ServerListQuery&) = default;
};
struct ServerListAnswer {
    std::vector<wire::ServerEntry> servers;
    friend bool operator==(const ServerListAnswer&, const ServerListAnswer&) = default;
};
struct ServerStatus {
    std::uint32_t users = 0;
    std::uint32_t files = 0;
    std::string description;
    friend bool operator==(const ServerStatus&, const ServerStatus&) = default;
};
struct FileSearchQuery {
    std::string pattern;
    std::vector<Tag> filters;
    friend bool operator==(const FileSearchQuery&, const FileSearchQuery&) = default;
};
struct FileSearchAnswer {
    std::vector<FileEntry> results;
    friend bool operator==(const FileSearchAnswer&, const FileSearchAnswer&) = default;
};
struct SourceSearchQuery {
    std::vector<FileIndex> files;
    friend bool operator==(const SourceSearchQuery&, const SourceSearchQuery&) = default;
};
struct SourceSearchAnswer {
    FileIndex file = 0;
    std::vector<Source> sources;
    friend bool operator==(const SourceSearchAnswer&, const SourceSearchAnswer&) = default;
};
struct Announce {
    ClientIndex client = 0;
    std::uint16_t port = 0;
    std::vector<FileEntry> files;
    friend bool operator==(const Announce&, const Announce&) = default;
};

// Same alternative order as wire::EdonkeyMessage.
using Body = std::variant<ServerListQuery, ServerListAnswer, ServerStatus, FileSearchQuery, FileSearchAnswer,
                          SourceSearchQuery, SourceSearchAnswer, Announce>;

} // namespace anon

enum class Direction : std::uint8_t { ToServer, FromServer };

struct AnonMessage {
    Direction direction = Direction::ToServer;
    ClientIndex peer = 0;        // the client end of the datagram
    std::int64_t rebased_us = 0;  // microseconds since capture start
    anon::Body body;

    wire::Opcode opcode() const;
    friend bool operator==(const AnonMessage&, const AnonMessage&) = default;
};

struct AnonymizerOptions {
    unsigned client_key_bits = ClientTable::kDefaultKeyBits;
    IndexBytes index_bytes{};
    // Test hook: when false, clientIDs are emitted raw, strings are not
    // hashed and sizes stay in bytes. fileIDs are always encoded.
    bool enabled = true;
};

// Strictly sequential: output depends on the order messages are fed in.
// Within a message the peer is encoded first, then body fields in wire order.
class Anonymizer {
public:
    explicit Anonymizer(AnonymizerOptions options = {});
    Anonymizer(AnonymizerOptions options, ClientTable clients, FileTable files);

    void set_capture_start(ingest::Micros t0) { t0_ = t0; }
    ingest::Micros capture_start() const { return t0_; }

    std::int64_t rebase_timestamp(ingest::Micros t);
    ClientIndex anon_client(wire::ClientId c);
    FileIndex anon_file(const wire::FileId& f) { return files_.encode(f); }

    AnonMessage anonymize(const wire::EdonkeyMessage& m, ingest::Micros timestamp, wire::ClientId peer,
                          Direction direction);

    const ClientTable& clients() const { return clients_; }
    const FileTable& files() const { return files_; }
    std::uint64_t skewed_timestamps() const { return skewed_; }

private:
    anon::Tag tag(const wire::MetaTag& t) const;
    std::vector<anon::Tag> tags(const std::vector<wire::MetaTag>& ts) const;
    std::string text(const std::string& s) const;

    AnonymizerOptions options_;
    ClientTable clients_;
    FileTable files_;
    ingest::Micros t0_ = 0;
    std::uint64_t skewed_ = 0;
};

} // namespace edtrace
