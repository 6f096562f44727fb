#pragma once

// Line-oriented XML trace of anonymized messages.
//
//   <?xml version="1.0" encoding="UTF-8"?>
//   <trace version="1">
//   <msg seq="0" t="0.000000" type="announce"><src cid="0"/>...</msg>
//   ...
//   </trace>
//
// One <msg> per line. The first child is <src cid> for client-to-server
// messages and <dst cid> for server answers. A file without the closing
// </trace> is truncated.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "edtrace/anonymize.hpp"

namespace edtrace::trace {

struct TraceEvent {
    std::uint64_t seq = 0;
    AnonMessage message;

    std::int64_t rebased_us() const { return message.rebased_us; }
    friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

class TraceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TraceParseError : public TraceError {
public:
    TraceParseError(std::size_t line, std::size_t column, const std::string& what, std::uint64_t recovered);
    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }
    std::uint64_t recovered() const { return recovered_; }

private:
    std::size_t line_;
    std::size_t column_;
    std::uint64_t recovered_;
};

// Input ended before </trace>; every complete <msg> before that point was
// already returned.
class TraceTruncated : public TraceError {
public:
    explicit TraceTruncated(std::uint64_t recovered);
    std::uint64_t recovered() const { return recovered_; }

private:
    std::uint64_t recovered_;
};

// "12.000345" for 12,000,345 microseconds.
std::string format_time(std::int64_t micros);

class TraceWriter {
public:
    explicit TraceWriter(std::ostream& out);

    // Throws std::invalid_argument if seq does not increase or the time is
    // negative, TraceError if the sink fails.
    void write(const TraceEvent& e);
    void finish();
    std::uint64_t count() const { return count_; }

private:
    void flush_line();

    std::ostream& out_;
    std::string line_;
    std::uint64_t count_ = 0;
    std::optional<std::uint64_t> last_seq_;
    bool finished_ = false;
};

std::uint64_t write_trace(std::span<const TraceEvent> events, std::ostream& out);

class TraceReader {
public:
    explicit TraceReader(std::istream& in);
    ~TraceReader();
    TraceReader(const TraceReader&) = delete;
    TraceReader& operator=(const TraceReader&) = delete;

    // nullopt after </trace>. Throws TraceParseError or TraceTruncated.
    std::optional<TraceEvent> next();
    std::uint64_t recovered() const { return recovered_; }

private:
    struct Parser;
    std::unique_ptr<Parser> parser_;
    std::uint64_t recovered_ = 0;
    bool started_ = false;
    bool done_ = false;
};

std::vector<TraceEvent> read_trace(std::istream& in);

// Files ending in ".gz" are written through zlib; inputs are decompressed
// transparently whether or not they are gzip streams.
std::unique_ptr<std::ostream> open_output(const std::filesystem::path& path);
std::unique_ptr<std::istream> open_input(const std::filesystem::path& path);

} // namespace edtrace::trace
