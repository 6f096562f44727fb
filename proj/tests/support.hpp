#pragma once

// Random message builders and scratch directories shared by the tests.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "edtrace/anonymize.hpp"
#include "edtrace/trace.hpp"
#include "edtrace/wire.hpp"

namespace testsupport {

using Rng = std::mt19937_64;

inline std::uint64_t uniform(Rng& rng, std::uint64_t lo, std::uint64_t hi) {
    return std::uniform_int_distribution<std::uint64_t>(lo, hi)(rng);
}

inline std::string random_bytes(Rng& rng, std::size_t max_len) {
    std::string s(uniform(rng, 0, max_len), '\0');
    for (auto& c : s) c = static_cast<char>(uniform(rng, 0, 255));
    return s;
}

inline edtrace::wire::FileId random_file(Rng& rng) {
    edtrace::wire::FileId f;
    for (auto& b : f.bytes) b = static_cast<std::uint8_t>(uniform(rng, 0, 255));
    return f;
}

inline edtrace::wire::MetaTag random_tag(Rng& rng) {
    using edtrace::wire::MetaTag;
    switch (uniform(rng, 0, 3)) {
    case 0: return MetaTag::name(random_bytes(rng, 40));
    case 1: return MetaTag::size(static_cast<std::uint32_t>(rng()));
    case 2: return MetaTag::type(random_bytes(rng, 8));
    default: return MetaTag::other(static_cast<std::uint8_t>(uniform(rng, 0, 255)), random_bytes(rng, 20));
    }
}

inline std::vector<edtrace::wire::MetaTag> random_tags(Rng& rng, std::size_t max_n) {
    std::vector<edtrace::wire::MetaTag> v(uniform(rng, 0, max_n));
    for (auto& t : v) t = random_tag(rng);
    return v;
}

inline edtrace::wire::FileEntry random_announced_file(Rng& rng) {
    using edtrace::wire::MetaTag;
    edtrace::wire::FileEntry e{random_file(rng), random_tags(rng, 3)};
    e.tags.push_back(MetaTag::name(random_bytes(rng, 40)));
    e.tags.push_back(MetaTag::size(static_cast<std::uint32_t>(rng())));
    std::shuffle(e.tags.begin(), e.tags.end(), rng);
    return e;
}

// Every variant with equal probability unless `variant` pins one.
inline edtrace::wire::EdonkeyMessage random_message(Rng& rng, int variant = -1) {
    namespace w = edtrace::wire;
    if (variant < 0) variant = static_cast<int>(uniform(rng, 0, w::kVariantCount - 1));
    switch (variant) {
    case 0: return w::ServerListQuery{};
    case 1: {
        w::ServerListAnswer m;
        m.servers.resize(uniform(rng, 0, 6));
        for (auto& s : m.servers) s = {static_cast<std::uint32_t>(rng()), static_cast<std::uint16_t>(rng())};
        return m;
    }
    case 2:
        return w::ServerStatus{static_cast<std::uint32_t>(rng()), static_cast<std::uint32_t>(rng()),
                               random_bytes(rng, 30)};
    case 3: return w::FileSearchQuery{random_bytes(rng, 30), random_tags(rng, 3)};
    case 4: {
        w::FileSearchAnswer m;
        m.results.resize(uniform(rng, 0, 5));
        for (auto& r : m.results) r = {random_file(rng), random_tags(rng, 4)};
        return m;
    }
    case 5: {
        w::SourceSearchQuery m;
        m.files.resize(uniform(rng, 0, 8));
        for (auto& f : m.files) f = random_file(rng);
        return m;
    }
    case 6: {
        w::SourceSearchAnswer m{random_file(rng), {}};
        m.sources.resize(uniform(rng, 0, 8));
        for (auto& s : m.sources) s = {{static_cast<std::uint32_t>(rng())}, static_cast<std::uint16_t>(rng())};
        return m;
    }
    default: {
        w::Announce m{{static_cast<std::uint32_t>(rng())}, static_cast<std::uint16_t>(rng()), {}};
        m.files.resize(uniform(rng, 0, 5));
        for (auto& f : m.files) f = random_announced_file(rng);
        return m;
    }
    }
}

// --- anonymized side ----------------------------------------------------------

inline edtrace::anon::Tag random_anon_tag(Rng& rng) {
    using edtrace::wire::TagKind;
    switch (uniform(rng, 0, 3)) {
    case 0: return {TagKind::Name, 0, random_bytes(rng, 32)};
    case 1: return {TagKind::Size, 0, std::uint64_t{rng() >> uniform(rng, 0, 63)}};
    case 2: return {TagKind::Type, 0, random_bytes(rng, 32)};
    default: return {TagKind::Other, static_cast<std::uint8_t>(uniform(rng, 0, 255)), random_bytes(rng, 32)};
    }
}

inline std::vector<edtrace::anon::Tag> random_anon_tags(Rng& rng, std::size_t max_n) {
    std::vector<edtrace::anon::Tag> v(uniform(rng, 0, max_n));
    for (auto& t : v) t = random_anon_tag(rng);
    return v;
}

inline std::uint32_t small_id(Rng& rng) { return static_cast<std::uint32_t>(rng() >> uniform(rng, 32, 63)); }

inline edtrace::anon::Body random_anon_body(Rng& rng) {
    namespace a = edtrace::anon;
    switch (uniform(rng, 0, 7)) {
    case 0: return a::ServerListQuery{};
    case 1: {
        a::ServerListAnswer m;
        m.servers.resize(uniform(rng, 0, 4));
        for (auto& s : m.servers) s = {static_cast<std::uint32_t>(rng()), static_cast<std::uint16_t>(rng())};
        return m;
    }
    case 2:
        return a::ServerStatus{static_cast<std::uint32_t>(rng()), static_cast<std::uint32_t>(rng()),
                               random_bytes(rng, 32)};
    case 3: return a::FileSearchQuery{random_bytes(rng, 32), random_anon_tags(rng, 3)};
    case 4: {
        a::FileSearchAnswer m;
        m.results.resize(uniform(rng, 0, 4));
        for (auto& r : m.results) r = {small_id(rng), random_anon_tags(rng, 4)};
        return m;
    }
    case 5: {
        a::SourceSearchQuery m;
        m.files.resize(uniform(rng, 0, 6));
        for (auto& f : m.files) f = small_id(rng);
        return m;
    }
    case 6: {
        a::SourceSearchAnswer m{small_id(rng), {}};
        m.sources.resize(uniform(rng, 0, 6));
        for (auto& s : m.sources) s = {small_id(rng), static_cast<std::uint16_t>(rng())};
        return m;
    }
    default: {
        a::Announce m{small_id(rng), static_cast<std::uint16_t>(rng()), {}};
        m.files.resize(uniform(rng, 0, 4));
        for (auto& f : m.files) f = {small_id(rng), random_anon_tags(rng, 4)};
        return m;
    }
    }
}

inline std::vector<edtrace::trace::TraceEvent> random_events(Rng& rng, std::size_t n) {
    std::vector<edtrace::trace::TraceEvent> events(n);
    std::uint64_t seq = 0;
    std::int64_t t = 0;
    for (auto& e : events) {
        seq += uniform(rng, 1, 3);
        t += static_cast<std::int64_t>(uniform(rng, 0, 2'000'000));
        e.seq = seq;
        e.message.direction = uniform(rng, 0, 1) ? edtrace::Direction::ToServer : edtrace::Direction::FromServer;
        e.message.peer = small_id(rng);
        e.message.rebased_us = t;
        e.message.body = random_anon_body(rng);
    }
    return events;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("edtrace_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

} // namespace testsupport
