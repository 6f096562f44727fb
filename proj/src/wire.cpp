#include "edtrace/wire.hpp"

#include <cstring>
#include <stdexcept>

namespace edtrace::wire {

namespace {

constexpr char kHexDigits[] = "0123456789abcdef";

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

// Bounds-checked little-endian cursor. Every read reports whether the
// requested bytes were present; nothing is read past the end.
class Cursor {
public:
    explicit Cursor(ByteView data) : data_(data) {}

    std::size_t remaining() const { return data_.size() - pos_; }

    bool skip(std::size_t n) {
        if (remaining() < n) return false;
        pos_ += n;
        return true;
    }

    bool u8(std::uint8_t& out) {
        if (remaining() < 1) return false;
        out = data_[pos_++];
        return true;
    }

    bool u16(std::uint16_t& out) {
        if (remaining() < 2) return false;
        out = static_cast<std::uint16_t>(data_[pos_] | (data_[pos_ + 1] << 8));
        pos_ += 2;
        return true;
    }

    bool u32(std::uint32_t& out) {
        if (remaining() < 4) return false;
        out = static_cast<std::uint32_t>(data_[pos_]) | (static_cast<std::uint32_t>(data_[pos_ + 1]) << 8) |
              (static_cast<std::uint32_t>(data_[pos_ + 2]) << 16) |
              (static_cast<std::uint32_t>(data_[pos_ + 3]) << 24);
        pos_ += 4;
        return true;
    }

    bool file_id(FileId& out) {
        if (remaining() < 16) return false;
        std::memcpy(out.bytes.data(), data_.data() + pos_, 16);
        pos_ += 16;
        return true;
    }

    bool string(std::string& out) {
        std::uint16_t len = 0;
        if (!u16(len) || remaining() < len) return false;
        out.assign(reinterpret_cast<const char*>(data_.data() + pos_), len);
        pos_ += len;
        return true;
    }

    bool skip_string() {
        std::uint16_t len = 0;
        return u16(len) && skip(len);
    }

private:
    ByteView data_;
    std::size_t pos_ = 0;
};

class Writer {
public:
    explicit Writer(Bytes& out) : out_(out) {}

    void u8(std::uint8_t v) { out_.push_back(v); }
    void u16(std::uint16_t v) {
        out_.push_back(static_cast<std::uint8_t>(v));
        out_.push_back(static_cast<std::uint8_t>(v >> 8));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void file_id(const FileId& f) { out_.insert(out_.end(), f.bytes.begin(), f.bytes.end()); }
    void string(const std::string& s) {
        if (s.size() > kMaxListLength) throw std::invalid_argument("string longer than 65535 bytes");
        u16(static_cast<std::uint16_t>(s.size()));
        out_.insert(out_.end(), s.begin(), s.end());
    }
    void count(std::size_t n) {
        if (n > kMaxListLength) throw std::invalid_argument("list longer than 65535 entries");
        u16(static_cast<std::uint16_t>(n));
    }

private:
    Bytes& out_;
};

// --- structural walk (no materialization) ---------------------------------

bool skip_tag(Cursor& c) {
    std::uint8_t kind = 0;
    if (!c.u8(kind)) return false;
    switch (static_cast<TagKind>(kind)) {
    case TagKind::Name:
    case TagKind::Type:
        return c.skip_string();
    case TagKind::Size:
        return c.skip(4);
    case TagKind::Other:
        return c.skip(1) && c.skip_string();
    }
    return false;  // unknown kind: the value length cannot be known
}

bool skip_tags(Cursor& c) {
    std::uint16_t n = 0;
    if (!c.u16(n)) return false;
    for (std::uint16_t i = 0; i < n; ++i)
        if (!skip_tag(c)) return false;
    return true;
}

bool skip_file_entries(Cursor& c) {
    std::uint16_t n = 0;
    if (!c.u16(n)) return false;
    for (std::uint16_t i = 0; i < n; ++i)
        if (!c.skip(16) || !skip_tags(c)) return false;
    return true;
}

bool skip_body(Opcode op, Cursor& c) {
    std::uint16_t n16 = 0;
    std::uint8_t n8 = 0;
    switch (op) {
    case Opcode::ServerListQuery:
        return true;
    case Opcode::ServerListAnswer:
        return c.u16(n16) && c.skip(std::size_t{n16} * 6);
    case Opcode::ServerStatus:
        return c.skip(8) && c.skip_string();
    case Opcode::FileSearchQuery:
        return c.skip_string() && skip_tags(c);
    case Opcode::FileSearchAnswer:
        return skip_file_entries(c);
    case Opcode::SourceSearchQuery:
        return c.u8(n8) && c.skip(std::size_t{n8} * 16);
    case Opcode::SourceSearchAnswer:
        return c.skip(16) && c.u16(n16) && c.skip(std::size_t{n16} * 6);
    case Opcode::Announce:
        return c.skip(6) && skip_file_entries(c);
    }
    return false;
}

// --- materializing decode (only called on structurally valid input) ------

bool read_tag(Cursor& c, MetaTag& tag) {
    std::uint8_t kind = 0;
    if (!c.u8(kind)) return false;
    tag.kind = static_cast<TagKind>(kind);
    tag.code = 0;
    switch (tag.kind) {
    case TagKind::Name:
    case TagKind::Type: {
        std::string s;
        if (!c.string(s)) return false;
        tag.value = std::move(s);
        return true;
    }
    case TagKind::Size: {
        std::uint32_t v = 0;
        if (!c.u32(v)) return false;
        tag.value = v;
        return true;
    }
    case TagKind::Other: {
        std::string s;
        if (!c.u8(tag.code) || !c.string(s)) return false;
        tag.value = std::move(s);
        return true;
    }
    }
    return false;
}

bool read_tags(Cursor& c, std::vector<MetaTag>& tags) {
    std::uint16_t n = 0;
    if (!c.u16(n)) return false;
    tags.resize(n);
    for (auto& t : tags)
        if (!read_tag(c, t)) return false;
    return true;
}

bool read_file_entries(Cursor& c, std::vector<FileEntry>& entries) {
    std::uint16_t n = 0;
    if (!c.u16(n)) return false;
    entries.resize(n);
    for (auto& e : entries)
        if (!c.file_id(e.file) || !read_tags(c, e.tags)) return false;
    return true;
}

bool has_name_and_size(const std::vector<MetaTag>& tags) {
    bool name = false, size = false;
    for (const auto& t : tags) {
        name |= t.kind == TagKind::Name;
        size |= t.kind == TagKind::Size;
    }
    return name && size;
}

bool read_body(Opcode op, Cursor& c, EdonkeyMessage& out) {
    switch (op) {
    case Opcode::ServerListQuery:
        out = ServerListQuery{};
        return true;
    case Opcode::ServerListAnswer: {
        ServerListAnswer m;
        std::uint16_t n = 0;
        if (!c.u16(n)) return false;
        m.servers.resize(n);
        for (auto& s : m.servers)
            if (!c.u32(s.ip) || !c.u16(s.port)) return false;
        out = std::move(m);
        return true;
    }
    case Opcode::ServerStatus: {
        ServerStatus m;
        if (!c.u32(m.users) || !c.u32(m.files) || !c.string(m.description)) return false;
        out = std::move(m);
        return true;
    }
    case Opcode::FileSearchQuery: {
        FileSearchQuery m;
        if (!c.string(m.pattern) || !read_tags(c, m.filters)) return false;
        out = std::move(m);
        return true;
    }
    case Opcode::FileSearchAnswer: {
        FileSearchAnswer m;
        if (!read_file_entries(c, m.results)) return false;
        out = std::move(m);
        return true;
    }
    case Opcode::SourceSearchQuery: {
        SourceSearchQuery m;
        std::uint8_t n = 0;
        if (!c.u8(n)) return false;
        m.files.resize(n);
        for (auto& f : m.files)
            if (!c.file_id(f)) return false;
        out = std::move(m);
        return true;
    }
    case Opcode::SourceSearchAnswer: {
        SourceSearchAnswer m;
        std::uint16_t n = 0;
        if (!c.file_id(m.file) || !c.u16(n)) return false;
        m.sources.resize(n);
        for (auto& s : m.sources)
            if (!c.u32(s.client.value) || !c.u16(s.port)) return false;
        out = std::move(m);
        return true;
    }
    case Opcode::Announce: {
        Announce m;
        if (!c.u32(m.client.value) || !c.u16(m.port) || !read_file_entries(c, m.files)) return false;
        out = std::move(m);
        return true;
    }
    }
    return false;
}

void write_tag(Writer& w, const MetaTag& t) {
    w.u8(static_cast<std::uint8_t>(t.kind));
    if (t.kind == TagKind::Other) w.u8(t.code);
    if (t.kind == TagKind::Size) {
        const auto* v = std::get_if<std::uint32_t>(&t.value);
        if (!v) throw std::invalid_argument("Size tag must carry an integer");
        w.u32(*v);
    } else {
        const auto* s = std::get_if<std::string>(&t.value);
        if (!s) throw std::invalid_argument("string tag must carry a byte-string");
        w.string(*s);
    }
}

void write_tags(Writer& w, const std::vector<MetaTag>& tags) {
    w.count(tags.size());
    for (const auto& t : tags) write_tag(w, t);
}

void write_file_entries(Writer& w, const std::vector<FileEntry>& entries) {
    w.count(entries.size());
    for (const auto& e : entries) {
        w.file_id(e.file);
        write_tags(w, e.tags);
    }
}

} // namespace

bool is_known_opcode(std::uint8_t raw) {
    switch (static_cast<Opcode>(raw)) {
    case Opcode::ServerListQuery:
    case Opcode::ServerListAnswer:
    case Opcode::ServerStatus:
    case Opcode::FileSearchQuery:
    case Opcode::FileSearchAnswer:
    case Opcode::SourceSearchQuery:
    case Opcode::SourceSearchAnswer:
    case Opcode::Announce:
        return true;
    }
    return false;
}

std::string_view opcode_name(Opcode op) {
    switch (op) {
    case Opcode::ServerListQuery: return "server-list-query";
    case Opcode::ServerListAnswer: return "server-list-answer";
    case Opcode::ServerStatus: return "server-status";
    case Opcode::FileSearchQuery: return "file-search-query";
    case Opcode::FileSearchAnswer: return "file-search-answer";
    case Opcode::SourceSearchQuery: return "source-search-query";
    case Opcode::SourceSearchAnswer: return "source-search-answer";
    case Opcode::Announce: return "announce";
    }
    return "unknown";
}

std::string_view to_string(DecodeError e) {
    switch (e) {
    case DecodeError::StructurallyInvalid: return "structurally-invalid";
    case DecodeError::UnknownOpcode: return "unknown-opcode";
    case DecodeError::BadMagic: return "bad-magic";
    case DecodeError::TrailingBytes: return "trailing-bytes";
    }
    return "unknown";
}

std::string FileId::hex() const {
    std::string s(32, '0');
    for (std::size_t i = 0; i < 16; ++i) {
        s[2 * i] = kHexDigits[bytes[i] >> 4];
        s[2 * i + 1] = kHexDigits[bytes[i] & 0xF];
    }
    return s;
}

FileId FileId::from_hex(std::string_view hex) {
    if (hex.size() != 32) throw std::invalid_argument("fileID hex must be 32 characters");
    FileId f;
    for (std::size_t i = 0; i < 16; ++i) {
        int hi = hex_value(hex[2 * i]);
        int lo = hex_value(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) throw std::invalid_argument("fileID hex has a non-hex character");
        f.bytes[i] = static_cast<std::uint8_t>((hi << 4) | lo);
    }
    return f;
}

std::size_t FileIdHash::operator()(const FileId& f) const noexcept {
    std::uint64_t a = 0, b = 0;
    std::memcpy(&a, f.bytes.data(), 8);
    std::memcpy(&b, f.bytes.data() + 8, 8);
    return static_cast<std::size_t>(a ^ (b * 0x9E3779B97F4A7C15ull));
}

Opcode opcode_of(const EdonkeyMessage& m) {
    static constexpr Opcode table[] = {
        Opcode::ServerListQuery,   Opcode::ServerListAnswer,  Opcode::ServerStatus,
        Opcode::FileSearchQuery,   Opcode::FileSearchAnswer,  Opcode::SourceSearchQuery,
        Opcode::SourceSearchAnswer, Opcode::Announce,
    };
    return table[m.index()];
}

Expected<Opcode, DecodeError> validate_structure(ByteView payload) {
    if (payload.empty()) return unexpected(DecodeError::StructurallyInvalid);
    if (payload[0] != kMagic) return unexpected(DecodeError::BadMagic);
    if (payload.size() < 2) return unexpected(DecodeError::StructurallyInvalid);
    if (!is_known_opcode(payload[1])) return unexpected(DecodeError::UnknownOpcode);
    const auto op = static_cast<Opcode>(payload[1]);
    Cursor c(payload.subspan(2));
    if (!skip_body(op, c)) return unexpected(DecodeError::StructurallyInvalid);
    return op;
}

Expected<EdonkeyMessage, DecodeError> decode_message(ByteView payload) {
    auto verdict = validate_structure(payload);
    if (!verdict) return unexpected(verdict.error());

    Cursor c(payload.subspan(2));
    EdonkeyMessage m;
    if (!read_body(*verdict, c, m)) return unexpected(DecodeError::StructurallyInvalid);
    if (c.remaining() != 0) return unexpected(DecodeError::TrailingBytes);
    if (const auto* a = std::get_if<Announce>(&m)) {
        for (const auto& f : a->files)
            if (!has_name_and_size(f.tags)) return unexpected(DecodeError::StructurallyInvalid);
    }
    return m;
}

Bytes encode_message(const EdonkeyMessage& m) {
    Bytes out;
    out.reserve(64);
    Writer w(out);
    w.u8(kMagic);
    w.u8(static_cast<std::uint8_t>(opcode_of(m)));

    std::visit(
        [&w](const auto& msg) {
            using T = std::decay_t<decltype(msg)>;
            if constexpr (std::is_same_v<T, ServerListQuery>) {
            } else if constexpr (std::is_same_v<T, ServerListAnswer>) {
                w.count(msg.servers.size());
                for (const auto& s : msg.servers) {
                    w.u32(s.ip);
                    w.u16(s.port);
                }
            } else if constexpr (std::is_same_v<T, ServerStatus>) {
                w.u32(msg.users);
                w.u32(msg.files);
                w.string(msg.description);
            } else if constexpr (std::is_same_v<T, FileSearchQuery>) {
                w.string(msg.pattern);
                write_tags(w, msg.filters);
            } else if constexpr (std::is_same_v<T, FileSearchAnswer>) {
                write_file_entries(w, msg.results);
            } else if constexpr (std::is_same_v<T, SourceSearchQuery>) {
                if (msg.files.size() > kMaxSourceQueryFiles)
                    throw std::invalid_argument("source search query holds at most 255 fileIDs");
                w.u8(static_cast<std::uint8_t>(msg.files.size()));
                for (const auto& f : msg.files) w.file_id(f);
            } else if constexpr (std::is_same_v<T, SourceSearchAnswer>) {
                w.file_id(msg.file);
                w.count(msg.sources.size());
                for (const auto& s : msg.sources) {
                    w.u32(s.client.value);
                    w.u16(s.port);
                }
            } else if constexpr (std::is_same_v<T, Announce>) {
                for (const auto& f : msg.files)
                    if (!has_name_and_size(f.tags))
                        throw std::invalid_argument("announced file lacks a Name or Size tag");
                w.u32(msg.client.value);
                w.u16(msg.port);
                write_file_entries(w, msg.files);
            }
        },
        m);
    return out;
}

} // namespace edtrace::wire
