#pragma once

// eDonkey server message model and its byte-exact UDP codec.
//
// Layout: byte 0 is the magic 0xE3, byte 1 the opcode, integers are
// little-endian, lists carry a 16-bit count, strings a 16-bit length.
// SourceSearchQuery is the one exception: its fileID count is one byte.

#include <array>
#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "edtrace/expected.hpp"

namespace edtrace::wire {

inline constexpr std::uint8_t kMagic = 0xE3;
inline constexpr std::size_t kMaxListLength = 0xFFFF;
inline constexpr std::size_t kMaxSourceQueryFiles = 0xFF;

enum class Opcode : std::uint8_t {
    ServerListQuery = 0x14,
    ServerListAnswer = 0x15,
    ServerStatus = 0x16,
    FileSearchQuery = 0x98,
    FileSearchAnswer = 0x99,
    SourceSearchQuery = 0x9A,
    SourceSearchAnswer = 0x9B,
    Announce = 0x9C,
};

bool is_known_opcode(std::uint8_t raw);
std::string_view opcode_name(Opcode op);

struct FileId {
    std::array<std::uint8_t, 16> bytes{};

    std::string hex() const;
    static FileId from_hex(std::string_view hex);  // throws std::invalid_argument

    friend auto operator<=>(const FileId&, const FileId&) = default;
    friend bool operator==(const FileId&, const FileId&) = default;
};

struct FileIdHash {
    std::size_t operator()(const FileId& f) const noexcept;
};

// Values below 2^24 are "low IDs" (clients behind NAT); the rest are IPv4
// addresses in host order.
struct ClientId {
    std::uint32_t value = 0;

    bool is_low_id() const { return value < (1u << 24); }

    friend auto operator<=>(const ClientId&, const ClientId&) = default;
    friend bool operator==(const ClientId&, const ClientId&) = default;
};

enum class TagKind : std::uint8_t { Name = 0x01, Size = 0x02, Type = 0x03, Other = 0xFF };

struct MetaTag {
    TagKind kind = TagKind::Name;
    std::uint8_t code = 0;  // only meaningful for Other
    std::variant<std::string, std::uint32_t> value;

    static MetaTag name(std::string s) { return {TagKind::Name, 0, std::move(s)}; }
    static MetaTag size(std::uint32_t bytes) { return {TagKind::Size, 0, bytes}; }
    static MetaTag type(std::string s) { return {TagKind::Type, 0, std::move(s)}; }
    static MetaTag other(std::uint8_t code, std::string s) { return {TagKind::Other, code, std::move(s)}; }

    friend bool operator==(const MetaTag&, const MetaTag&) = default;
};

struct ServerEntry {
    std::uint32_t ip = 0;
    std::uint16_t port = 0;
    friend bool operator==(const ServerEntry&, const ServerEntry&) = default;
};

struct FileEntry {
    FileId file;
    std::vector<MetaTag> tags;
    friend bool operator==(const FileEntry&, const FileEntry&) = default;
};

struct SourceEntry {
    ClientId client;
    std::uint16_t port = 0;
    friend bool operator==(const SourceEntry&, const SourceEntry&) = default;
};

struct ServerListQuery {
    friend bool operator==(const ServerListQuery&, const ServerListQuery&) = default;
};
struct ServerListAnswer {
    std::vector<ServerEntry> servers;
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
    std::vector<MetaTag> filters;
    friend bool operator==(const FileSearchQuery&, const FileSearchQuery&) = default;
};
struct FileSearchAnswer {
    std::vector<FileEntry> results;
    friend bool operator==(const FileSearchAnswer&, const FileSearchAnswer&) = default;
};
struct SourceSearchQuery {
    std::vector<FileId> files;
    friend bool operator==(const SourceSearchQuery&, const SourceSearchQuery&) = default;
};
struct SourceSearchAnswer {
    FileId file;
    std::vector<SourceEntry> sources;
    friend bool operator==(const SourceSearchAnswer&, const SourceSearchAnswer&) = default;
};
struct Announce {
    ClientId client;
    std::uint16_t port = 0;
    std::vector<FileEntry> files;
    friend bool operator==(const Announce&, const Announce&) = default;
};

// Alternative order is fixed; opcode_of() maps each to its opcode.
using EdonkeyMessage = std::variant<ServerListQuery, ServerListAnswer, ServerStatus, FileSearchQuery,
                                    FileSearchAnswer, SourceSearchQuery, SourceSearchAnswer, Announce>;

inline constexpr std::size_t kVariantCount = std::variant_size_v<EdonkeyMessage>;

Opcode opcode_of(const EdonkeyMessage& m);

enum class DecodeError : std::uint8_t { StructurallyInvalid, UnknownOpcode, BadMagic, TrailingBytes };
inline constexpr std::size_t kDecodeErrorKinds = 4;

std::string_view to_string(DecodeError e);

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

// Step one: magic, opcode and length consistency only.
Expected<Opcode, DecodeError> validate_structure(ByteView payload);

// Step two: full decode; runs validate_structure first.
Expected<EdonkeyMessage, DecodeError> decode_message(ByteView payload);

// Throws std::invalid_argument for messages whose lists or strings exceed
// their length fields, or Announce entries without Name and Size tags.
Bytes encode_message(const EdonkeyMessage& m);

} // namespace edtrace::wire
