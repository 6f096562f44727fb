#include "edtrace/trace.hpp"

#include <zlib.h>

#include <cctype>
#include <charconv>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <streambuf>

namespace edtrace::trace {

namespace {

constexpr std::string_view kHeader = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<trace version=\"1\">\n";
constexpr std::string_view kFooter = "</trace>\n";

std::string_view tag_kind_name(wire::TagKind k) {
    switch (k) {
    case wire::TagKind::Name: return "name";
    case wire::TagKind::Size: return "size";
    case wire::TagKind::Type: return "type";
    case wire::TagKind::Other: return "other";
    }
    return "other";
}

// --- writing helpers ----------------------------------------------------------

void append_uint(std::string& s, std::uint64_t v) {
    char buf[24];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    s.append(buf, end);
}

void append_escaped(std::string& s, std::string_view v) {
    static constexpr char digits[] = "0123456789ABCDEF";
    for (char ch : v) {
        const auto c = static_cast<unsigned char>(ch);
        switch (c) {
        case '&': s += "&amp;"; break;
        case '<': s += "&lt;"; break;
        case '>': s += "&gt;"; break;
        case '"': s += "&quot;"; break;
        default:
            if (c < 0x20 || c >= 0x7F) {
                s += "&#x";
                s += digits[c >> 4];
                s += digits[c & 0xF];
                s += ';';
            } else {
                s += static_cast<char>(c);
            }
        }
    }
}

void attr(std::string& s, std::string_view name, std::uint64_t v) {
    s += ' ';
    s += name;
    s += "=\"";
    append_uint(s, v);
    s += '"';
}

void attr(std::string& s, std::string_view name, std::string_view v) {
    s += ' ';
    s += name;
    s += "=\"";
    append_escaped(s, v);
    s += '"';
}

std::string dotted(std::uint32_t ip) {
    std::string s;
    for (int i = 3; i >= 0; --i) {
        append_uint(s, (ip >> (8 * i)) & 0xFF);
        if (i) s += '.';
    }
    return s;
}

void write_tags(std::string& s, const std::vector<anon::Tag>& tags) {
    for (const auto& t : tags) {
        s += "<tag";
        attr(s, "kind", tag_kind_name(t.kind));
        if (t.kind == wire::TagKind::Other) attr(s, "code", t.code);
        if (const auto* n = std::get_if<std::uint64_t>(&t.value))
            attr(s, "value", *n);
        else
            attr(s, "value", std::get<std::string>(t.value));
        s += "/>";
    }
}

void write_file_entry(std::string& s, std::string_view element, const anon::FileEntry& e) {
    s += '<';
    s += element;
    attr(s, "fid", e.file);
    if (e.tags.empty()) {
        s += "/>";
        return;
    }
    s += '>';
    write_tags(s, e.tags);
    s += "</";
    s += element;
    s += '>';
}

// --- zlib stream buffers --------------------------------------------------------

class GzOutBuf : public std::streambuf {
public:
    explicit GzOutBuf(const std::filesystem::path& path) : file_(gzopen(path.c_str(), "wb6")) {
        setp(buf_, buf_ + sizeof buf_);
    }
    ~GzOutBuf() override {
        if (file_) {
            sync();
            gzclose(file_);
        }
    }
    bool is_open() const { return file_ != nullptr; }

protected:
    int_type overflow(int_type c) override {
        if (drain() != 0) return traits_type::eof();
        if (!traits_type::eq_int_type(c, traits_type::eof())) {
            *pptr() = traits_type::to_char_type(c);
            pbump(1);
        }
        return traits_type::not_eof(c);
    }
    int sync() override { return drain(); }

private:
    int drain() {
        const auto n = static_cast<unsigned>(pptr() - pbase());
        if (n > 0 && gzwrite(file_, pbase(), n) != static_cast<int>(n)) return -1;
        setp(buf_, buf_ + sizeof buf_);
        return 0;
    }

    gzFile file_;
    char buf_[1 << 16];
};

class GzInBuf : public std::streambuf {
public:
    explicit GzInBuf(const std::filesystem::path& path) : file_(gzopen(path.c_str(), "rb")) {
        if (file_) gzbuffer(file_, 1 << 17);
        setg(buf_, buf_, buf_);
    }
    ~GzInBuf() override {
        if (file_) gzclose(file_);
    }
    bool is_open() const { return file_ != nullptr; }

protected:
    int_type underflow() override {
        if (gptr() < egptr()) return traits_type::to_int_type(*gptr());
        const int n = gzread(file_, buf_, sizeof buf_);
        if (n <= 0) return traits_type::eof();
        setg(buf_, buf_, buf_ + n);
        return traits_type::to_int_type(*gptr());
    }

private:
    gzFile file_;
    char buf_[1 << 16];
};

class GzOStream : public std::ostream {
public:
    explicit GzOStream(const std::filesystem::path& path) : std::ostream(nullptr), buf_(path) {
        rdbuf(&buf_);
        if (!buf_.is_open()) setstate(std::ios::badbit);
    }

private:
    GzOutBuf buf_;
};

class GzIStream : public std::istream {
public:
    explicit GzIStream(const std::filesystem::path& path) : std::istream(nullptr), buf_(path) {
        rdbuf(&buf_);
        if (!buf_.is_open()) setstate(std::ios::badbit);
    }

private:
    GzInBuf buf_;
};

} // namespace

// --- errors -----------------------------------------------------------------------

TraceParseError::TraceParseError(std::size_t line, std::size_t column, const std::string& what, std::uint64_t recovered)
    : TraceError("trace:" + std::to_string(line) + ":" + std::to_string(column) + ": " + what), line_(line),
      column_(column), recovered_(recovered) {}

TraceTruncated::TraceTruncated(std::uint64_t recovered)
    : TraceError("trace truncated after " + std::to_string(recovered) + " complete events"), recovered_(recovered) {}

std::string format_time(std::int64_t micros) {
    std::string s;
    append_uint(s, static_cast<std::uint64_t>(micros / 1'000'000));
    s += '.';
    char frac[7];
    auto rem = static_cast<unsigned>(micros % 1'000'000);
    for (int i = 5; i >= 0; --i) {
        frac[i] = static_cast<char>('0' + rem % 10);
        rem /= 10;
    }
    s.append(frac, 6);
    return s;
}

// --- writer -----------------------------------------------------------------------

TraceWriter::TraceWriter(std::ostream& out) : out_(out) {
    out_.write(kHeader.data(), static_cast<std::streamsize>(kHeader.size()));
    if (!out_) throw TraceError("trace sink write failed");
    line_.reserve(1024);
}

void TraceWriter::flush_line() {
    out_.write(line_.data(), static_cast<std::streamsize>(line_.size()));
    if (!out_) throw TraceError("trace sink write failed");
}

void TraceWriter::write(const TraceEvent& e) {
    if (finished_) throw std::logic_error("trace already finished");
    if (last_seq_ && e.seq <= *last_seq_) throw std::invalid_argument("trace seq must increase strictly");
    if (e.message.rebased_us < 0) throw std::invalid_argument("trace time must be non-negative");
    last_seq_ = e.seq;

    const AnonMessage& m = e.message;
    std::string& s = line_;
    s.clear();
    s += "<msg";
    attr(s, "seq", e.seq);
    s += " t=\"";
    s += format_time(m.rebased_us);
    s += '"';
    attr(s, "type", wire::opcode_name(m.opcode()));
    s += '>';
    s += m.direction == Direction::ToServer ? "<src" : "<dst";
    attr(s, "cid", m.peer);
    s += "/>";

    std::visit(
        [&s](const auto& body) {
            using T = std::decay_t<decltype(body)>;
            if constexpr (std::is_same_v<T, anon::ServerListQuery>) {
            } else if constexpr (std::is_same_v<T, anon::ServerListAnswer>) {
                for (const auto& srv : body.servers) {
                    s += "<server";
                    attr(s, "ip", dotted(srv.ip));
                    attr(s, "port", srv.port);
                    s += "/>";
                }
            } else if constexpr (std::is_same_v<T, anon::ServerStatus>) {
                s += "<status";
                attr(s, "users", body.users);
                attr(s, "files", body.files);
                attr(s, "desc", body.description);
                s += "/>";
            } else if constexpr (std::is_same_v<T, anon::FileSearchQuery>) {
                s += "<query";
                attr(s, "pattern", body.pattern);
                s += "/>";
                write_tags(s, body.filters);
            } else if constexpr (std::is_same_v<T, anon::FileSearchAnswer>) {
                for (const auto& r : body.results) write_file_entry(s, "result", r);
            } else if constexpr (std::is_same_v<T, anon::SourceSearchQuery>) {
                for (auto f : body.files) {
                    s += "<file";
                    attr(s, "fid", f);
                    s += "/>";
                }
            } else if constexpr (std::is_same_v<T, anon::SourceSearchAnswer>) {
                s += "<file";
                attr(s, "fid", body.file);
                s += "/>";
                for (const auto& src : body.sources) {
                    s += "<source";
                    attr(s, "cid", src.client);
                    attr(s, "port", src.port);
                    s += "/>";
                }
            } else if constexpr (std::is_same_v<T, anon::Announce>) {
                s += "<client";
                attr(s, "cid", body.client);
                attr(s, "port", body.port);
                s += "/>";
                for (const auto& f : body.files) write_file_entry(s, "file", f);
            }
        },
        m.body);
    s += "</msg>\n";
    flush_line();
    ++count_;
}

void TraceWriter::finish() {
    if (finished_) return;
    finished_ = true;
    out_.write(kFooter.data(), static_cast<std::streamsize>(kFooter.size()));
    out_.flush();
    if (!out_) throw TraceError("trace sink write failed");
}

std::uint64_t write_trace(std::span<const TraceEvent> events, std::ostream& out) {
    TraceWriter w(out);
    for (const auto& e : events) w.write(e);
    w.finish();
    return w.count();
}

// --- reader -----------------------------------------------------------------------

namespace {

struct EndOfInput {};

struct Element {
    std::string name;
    std::vector<std::pair<std::string, std::string>> attrs;
    bool end = false;           // </name>
    bool self_closing = false;  // <name .../>
    bool eof = false;           // clean end of input between elements
    std::size_t line = 0, column = 0;
};

bool is_name_char(int c) { return std::isalnum(c) || c == '-' || c == '_' || c == ':' || c == '.'; }

} // namespace

struct TraceReader::Parser {
    explicit Parser(std::istream& in) : buf(in.rdbuf()) {}

    std::streambuf* buf;
    std::size_t line = 1;
    std::size_t column = 1;
    std::uint64_t* recovered = nullptr;

    int peek() { return buf ? buf->sgetc() : EOF; }

    int get() {
        const int c = buf ? buf->sbumpc() : EOF;
        if (c == '\n') {
            ++line;
            column = 1;
        } else if (c != EOF) {
            ++column;
        }
        return c;
    }

    int need() {
        const int c = get();
        if (c == EOF) throw EndOfInput{};
        return c;
    }

    [[noreturn]] void fail(const std::string& what) { throw TraceParseError(line, column, what, *recovered); }
    [[noreturn]] void fail_at(const Element& el, const std::string& what) {
        throw TraceParseError(el.line, el.column, what, *recovered);
    }

    void expect(char want) {
        if (need() != want) fail(std::string("expected '") + want + "'");
    }

    void skip_ws() {
        while (std::isspace(peek())) get();
    }

    std::string read_name() {
        std::string s;
        while (peek() != EOF && is_name_char(peek())) s += static_cast<char>(get());
        if (peek() == EOF) throw EndOfInput{};
        if (s.empty()) fail("expected a name");
        return s;
    }

    void append_codepoint(std::string& out, unsigned long cp) {
        if (cp <= 0xFF) {
            out += static_cast<char>(cp);  // byte escapes written by the trace writer
        } else if (cp <= 0x7FF) {
            out += static_cast<char>(0xC0 | (cp >> 6));
            out += static_cast<char>(0x80 | (cp & 0x3F));
        } else if (cp <= 0xFFFF) {
            out += static_cast<char>(0xE0 | (cp >> 12));
            out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
            out += static_cast<char>(0x80 | (cp & 0x3F));
        } else if (cp <= 0x10FFFF) {
            out += static_cast<char>(0xF0 | (cp >> 18));
            out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
            out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
            out += static_cast<char>(0x80 | (cp & 0x3F));
        } else {
            fail("character reference out of range");
        }
    }

    std::string read_value() {
        const int quote = need();
        if (quote != '"' && quote != '\'') fail("expected a quoted attribute value");
        std::string v;
        while (true) {
            const int c = need();
            if (c == quote) return v;
            if (c == '<') fail("'<' inside attribute value");
            if (c != '&') {
                v += static_cast<char>(c);
                continue;
            }
            std::string ref;
            for (int r = need(); r != ';'; r = need()) {
                ref += static_cast<char>(r);
                if (ref.size() > 10) fail("unterminated entity reference");
            }
            if (ref == "amp") v += '&';
            else if (ref == "lt") v += '<';
            else if (ref == "gt") v += '>';
            else if (ref == "quot") v += '"';
            else if (ref == "apos") v += '\'';
            else if (ref.size() > 1 && ref[0] == '#') {
                const bool hex = ref[1] == 'x' || ref[1] == 'X';
                const char* first = ref.data() + (hex ? 2 : 1);
                const char* last = ref.data() + ref.size();
                unsigned long cp = 0;
                auto [p, ec] = std::from_chars(first, last, cp, hex ? 16 : 10);
                if (ec != std::errc{} || p != last || first == last) fail("bad character reference");
                append_codepoint(v, cp);
            } else {
                fail("unknown entity &" + ref + ";");
            }
        }
    }

    // Next element boundary; skips the XML declaration, comments, whitespace.
    Element next() {
        while (true) {
            skip_ws();
            Element el;
            el.line = line;
            el.column = column;
            const int c = get();
            if (c == EOF) {
                el.eof = true;
                return el;
            }
            if (c != '<') fail("unexpected character data");
            const int k = peek();
            if (k == '?') {
                int prev = 0;
                for (int x = need(); !(prev == '?' && x == '>'); x = need()) prev = x;
                continue;
            }
            if (k == '!') {
                get();
                if (need() != '-' || need() != '-') fail("unsupported markup declaration");
                int a = 0, b = 0;
                for (int x = need(); !(a == '-' && b == '-' && x == '>'); x = need()) {
                    a = b;
                    b = x;
                }
                continue;
            }
            if (k == '/') {
                get();
                el.end = true;
                el.name = read_name();
                skip_ws();
                expect('>');
                return el;
            }
            el.name = read_name();
            while (true) {
                skip_ws();
                const int n = peek();
                if (n == EOF) throw EndOfInput{};
                if (n == '/') {
                    get();
                    expect('>');
                    el.self_closing = true;
                    return el;
                }
                if (n == '>') {
                    get();
                    return el;
                }
                std::string key = read_name();
                skip_ws();
                expect('=');
                skip_ws();
                el.attrs.emplace_back(std::move(key), read_value());
            }
        }
    }

    Element next_content() {
        Element el = next();
        if (el.eof) throw EndOfInput{};
        return el;
    }

    const std::string& attr(const Element& el, std::string_view key) {
        for (const auto& [k, v] : el.attrs)
            if (k == key) return v;
        fail_at(el, "<" + el.name + "> lacks attribute '" + std::string(key) + "'");
    }

    template <typename T>
    T number(const Element& el, std::string_view key) {
        const std::string& v = attr(el, key);
        T out{};
        auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc{} || p != v.data() + v.size() || v.empty())
            fail_at(el, "attribute '" + std::string(key) + "' is not a valid integer: \"" + v + "\"");
        return out;
    }

    std::int64_t time(const Element& el) {
        const std::string& v = attr(el, "t");
        const auto dot = v.find('.');
        if (dot == std::string::npos || dot == 0 || v.size() - dot - 1 != 6)
            fail_at(el, "time must have exactly six decimals: \"" + v + "\"");
        std::int64_t sec = 0, frac = 0;
        auto r1 = std::from_chars(v.data(), v.data() + dot, sec);
        auto r2 = std::from_chars(v.data() + dot + 1, v.data() + v.size(), frac);
        if (r1.ec != std::errc{} || r1.ptr != v.data() + dot || r2.ec != std::errc{} ||
            r2.ptr != v.data() + v.size() || sec < 0 || v[dot + 1] == '-')
            fail_at(el, "bad time \"" + v + "\"");
        return sec * 1'000'000 + frac;
    }

    std::uint32_t ip(const Element& el) {
        const std::string& v = attr(el, "ip");
        std::uint32_t out = 0;
        const char* p = v.data();
        const char* end = v.data() + v.size();
        for (int i = 0; i < 4; ++i) {
            unsigned octet = 0;
            auto r = std::from_chars(p, end, octet);
            if (r.ec != std::errc{} || octet > 255 || r.ptr == p) fail_at(el, "bad dotted address \"" + v + "\"");
            out = (out << 8) | octet;
            p = r.ptr;
            if (i < 3) {
                if (p == end || *p != '.') fail_at(el, "bad dotted address \"" + v + "\"");
                ++p;
            }
        }
        if (p != end) fail_at(el, "bad dotted address \"" + v + "\"");
        return out;
    }

    void expect_start(const Element& el, std::string_view name) {
        if (el.end || el.name != name) fail_at(el, "expected <" + std::string(name) + ">, found " + describe(el));
    }

    // An element that carries no children: "<x/>" or "<x></x>".
    void close_empty(const Element& el) {
        if (el.self_closing) return;
        Element closing = next_content();
        if (!closing.end || closing.name != el.name) fail_at(closing, "<" + el.name + "> must be empty");
    }

    static std::string describe(const Element& el) {
        return (el.end ? "</" : "<") + el.name + ">";
    }

    anon::Tag tag(const Element& el) {
        close_empty(el);
        anon::Tag t;
        const std::string& kind = attr(el, "kind");
        if (kind == "name") t.kind = wire::TagKind::Name;
        else if (kind == "size") t.kind = wire::TagKind::Size;
        else if (kind == "type") t.kind = wire::TagKind::Type;
        else if (kind == "other") t.kind = wire::TagKind::Other;
        else fail_at(el, "unknown tag kind \"" + kind + "\"");
        if (t.kind == wire::TagKind::Other) t.code = number<std::uint8_t>(el, "code");
        if (t.kind == wire::TagKind::Size)
            t.value = number<std::uint64_t>(el, "value");
        else
            t.value = attr(el, "value");
        return t;
    }

    // Tags until the closing element named `closer`.
    std::vector<anon::Tag> tags_until(std::string_view closer) {
        std::vector<anon::Tag> out;
        while (true) {
            Element el = next_content();
            if (el.end && el.name == closer) return out;
            expect_start(el, "tag");
            out.push_back(tag(el));
        }
    }

    anon::FileEntry file_entry(const Element& el) {
        anon::FileEntry e;
        e.file = number<FileIndex>(el, "fid");
        if (!el.self_closing) e.tags = tags_until(el.name);
        return e;
    }

    TraceEvent message(const Element& start) {
        TraceEvent ev;
        ev.seq = number<std::uint64_t>(start, "seq");
        ev.message.rebased_us = time(start);
        const std::string type = attr(start, "type");
        if (start.self_closing) fail_at(start, "<msg> must carry a peer element");

        Element peer = next_content();
        if (peer.end || (peer.name != "src" && peer.name != "dst"))
            fail_at(peer, "expected <src> or <dst>, found " + describe(peer));
        ev.message.direction = peer.name == "src" ? Direction::ToServer : Direction::FromServer;
        ev.message.peer = number<ClientIndex>(peer, "cid");
        close_empty(peer);

        const auto is_msg_end = [](const Element& el) { return el.end && el.name == "msg"; };

        if (type == "server-list-query") {
            Element el = next_content();
            if (!is_msg_end(el)) fail_at(el, "server-list-query has no body");
            ev.message.body = anon::ServerListQuery{};
        } else if (type == "server-list-answer") {
            anon::ServerListAnswer body;
            for (Element el = next_content(); !is_msg_end(el); el = next_content()) {
                expect_start(el, "server");
                close_empty(el);
                body.servers.push_back({ip(el), number<std::uint16_t>(el, "port")});
            }
            ev.message.body = std::move(body);
        } else if (type == "server-status") {
            Element el = next_content();
            expect_start(el, "status");
            close_empty(el);
            ev.message.body = anon::ServerStatus{number<std::uint32_t>(el, "users"), number<std::uint32_t>(el, "files"),
                                                 attr(el, "desc")};
            Element end = next_content();
            if (!is_msg_end(end)) fail_at(end, "unexpected " + describe(end) + " in server-status");
        } else if (type == "file-search-query") {
            Element el = next_content();
            expect_start(el, "query");
            close_empty(el);
            anon::FileSearchQuery body;
            body.pattern = attr(el, "pattern");
            body.filters = tags_until("msg");
            ev.message.body = std::move(body);
        } else if (type == "file-search-answer") {
            anon::FileSearchAnswer body;
            for (Element el = next_content(); !is_msg_end(el); el = next_content()) {
                expect_start(el, "result");
                body.results.push_back(file_entry(el));
            }
            ev.message.body = std::move(body);
        } else if (type == "source-search-query") {
            anon::SourceSearchQuery body;
            for (Element el = next_content(); !is_msg_end(el); el = next_content()) {
                expect_start(el, "file");
                close_empty(el);
                body.files.push_back(number<FileIndex>(el, "fid"));
            }
            ev.message.body = std::move(body);
        } else if (type == "source-search-answer") {
            anon::SourceSearchAnswer body;
            Element el = next_content();
            expect_start(el, "file");
            close_empty(el);
            body.file = number<FileIndex>(el, "fid");
            for (el = next_content(); !is_msg_end(el); el = next_content()) {
                expect_start(el, "source");
                close_empty(el);
                body.sources.push_back({number<ClientIndex>(el, "cid"), number<std::uint16_t>(el, "port")});
            }
            ev.message.body = std::move(body);
        } else if (type == "announce") {
            anon::Announce body;
            Element el = next_content();
            expect_start(el, "client");
            close_empty(el);
            body.client = number<ClientIndex>(el, "cid");
            body.port = number<std::uint16_t>(el, "port");
            for (el = next_content(); !is_msg_end(el); el = next_content()) {
                expect_start(el, "file");
                body.files.push_back(file_entry(el));
            }
            ev.message.body = std::move(body);
        } else {
            fail_at(start, "unknown message type \"" + type + "\"");
        }
        return ev;
    }
};

TraceReader::TraceReader(std::istream& in) : parser_(std::make_unique<Parser>(in)) {
    parser_->recovered = &recovered_;
}

TraceReader::~TraceReader() = default;

std::optional<TraceEvent> TraceReader::next() {
    if (done_) return std::nullopt;
    Parser& p = *parser_;
    try {
        if (!started_) {
            Element root = p.next_content();
            p.expect_start(root, "trace");
            if (root.self_closing) {
                done_ = true;
                return std::nullopt;
            }
            const std::string& version = p.attr(root, "version");
            if (version != "1") p.fail_at(root, "unsupported trace version \"" + version + "\"");
            started_ = true;
        }
        Element el = p.next_content();
        if (el.end && el.name == "trace") {
            done_ = true;
            Element tail = p.next();
            if (!tail.eof) p.fail_at(tail, "content after </trace>");
            return std::nullopt;
        }
        p.expect_start(el, "msg");
        TraceEvent ev = p.message(el);
        ++recovered_;
        return ev;
    } catch (const EndOfInput&) {
        done_ = true;
        throw TraceTruncated(recovered_);
    } catch (...) {
        done_ = true;
        throw;
    }
}

std::vector<TraceEvent> read_trace(std::istream& in) {
    TraceReader r(in);
    std::vector<TraceEvent> out;
    while (auto e = r.next()) out.push_back(std::move(*e));
    return out;
}

std::unique_ptr<std::ostream> open_output(const std::filesystem::path& path) {
    std::unique_ptr<std::ostream> out;
    if (path.extension() == ".gz")
        out = std::make_unique<GzOStream>(path);
    else
        out = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
    if (!*out) throw TraceError("cannot write " + path.string());
    return out;
}

std::unique_ptr<std::istream> open_input(const std::filesystem::path& path) {
    if (!std::filesystem::is_regular_file(path)) throw TraceError("cannot open " + path.string());
    auto in = std::make_unique<GzIStream>(path);
    if (!*in) throw TraceError("cannot open " + path.string());
    return in;
}

} // namespace edtrace::trace
