#include <catch_amalgamated.hpp>

#include "edtrace/wire.hpp"
#include "support.hpp"

using namespace edtrace::wire;
using testsupport::Rng;

namespace {

Bytes bytes(std::initializer_list<int> v) {
    Bytes b;
    for (int x : v) b.push_back(static_cast<std::uint8_t>(x));
    return b;
}

Bytes source_query_with_tail(std::size_t tail) {
    Bytes b = bytes({0xE3, 0x9A, 0x01});
    b.resize(b.size() + tail, 0);
    return b;
}

} // namespace

TEST_CASE("minimal source search query validates and decodes") {
    const Bytes p = source_query_with_tail(16);
    auto v = validate_structure(p);
    REQUIRE(v);
    CHECK(*v == Opcode::SourceSearchQuery);
    CHECK(static_cast<int>(*v) == 0x9A);

    auto m = decode_message(p);
    REQUIRE(m);
    REQUIRE(std::holds_alternative<SourceSearchQuery>(*m));
    const auto& q = std::get<SourceSearchQuery>(*m);
    REQUIRE(q.files.size() == 1);
    CHECK(q.files[0] == FileId{});
}

TEST_CASE("declared fileID with only five bytes is structurally invalid") {
    const Bytes p = source_query_with_tail(5);
    auto v = validate_structure(p);
    REQUIRE_FALSE(v);
    CHECK(v.error() == DecodeError::StructurallyInvalid);
    auto m = decode_message(p);
    REQUIRE_FALSE(m);
    CHECK(m.error() == DecodeError::StructurallyInvalid);
}

TEST_CASE("wrong magic byte") {
    auto v = validate_structure(bytes({0x42, 0x9A, 0x01}));
    REQUIRE_FALSE(v);
    CHECK(v.error() == DecodeError::BadMagic);
    CHECK(decode_message(bytes({0x42})).error() == DecodeError::BadMagic);
}

TEST_CASE("unknown opcode and short payloads") {
    CHECK(validate_structure(bytes({0xE3, 0x77})).error() == DecodeError::UnknownOpcode);
    CHECK(validate_structure(bytes({})).error() == DecodeError::StructurallyInvalid);
    CHECK(validate_structure(bytes({0xE3})).error() == DecodeError::StructurallyInvalid);
    for (int op : {0x14, 0x15, 0x16, 0x98, 0x99, 0x9A, 0x9B, 0x9C}) CHECK(is_known_opcode(op));
    CHECK_FALSE(is_known_opcode(0x00));
}

TEST_CASE("trailing bytes after a well-formed message") {
    Bytes p = source_query_with_tail(16);
    p.push_back(0x00);
    CHECK(validate_structure(p));  // lengths fit, the extra byte is only caught by decode
    auto m = decode_message(p);
    REQUIRE_FALSE(m);
    CHECK(m.error() == DecodeError::TrailingBytes);

    Bytes q = bytes({0xE3, 0x14, 0xFF});
    CHECK(decode_message(q).error() == DecodeError::TrailingBytes);
}

TEST_CASE("server list query encodes as magic plus opcode") {
    CHECK(encode_message(ServerListQuery{}) == bytes({0xE3, 0x14}));
}

TEST_CASE("source search query length is 3 + 16k") {
    Rng rng(11);
    for (std::size_t k : {0u, 1u, 2u, 7u, 100u, 255u}) {
        SourceSearchQuery q;
        for (std::size_t i = 0; i < k; ++i) q.files.push_back(testsupport::random_file(rng));
        const Bytes b = encode_message(q);
        CHECK(b.size() == 3 + 16 * k);
        CHECK(b[0] == 0xE3);
        CHECK(b[1] == 0x9A);
        CHECK(b[2] == k);
    }
    SourceSearchQuery big;
    big.files.resize(256);
    CHECK_THROWS_AS(encode_message(big), std::invalid_argument);
}

TEST_CASE("byte layout of a status message") {
    ServerStatus s{0x01020304, 0x0A0B0C0D, "ab"};
    CHECK(encode_message(s) == bytes({0xE3, 0x16, 0x04, 0x03, 0x02, 0x01, 0x0D, 0x0C, 0x0B, 0x0A, 0x02, 0x00, 'a', 'b'}));
}

TEST_CASE("byte layout of tags") {
    FileSearchQuery q{"x", {MetaTag::size(0x100), MetaTag::other(0xD5, "")}};
    CHECK(encode_message(q) ==
          bytes({0xE3, 0x98, 0x01, 0x00, 'x', 0x02, 0x00, 0x02, 0x00, 0x01, 0x00, 0x00, 0xFF, 0xD5, 0x00, 0x00}));
}

TEST_CASE("encoder rejects invalid messages") {
    Announce a{{0x0A000001}, 4662, {FileEntry{FileId{}, {MetaTag::name("only a name")}}}};
    CHECK_THROWS_AS(encode_message(a), std::invalid_argument);

    ServerStatus s{1, 2, std::string(70'000, 'a')};
    CHECK_THROWS_AS(encode_message(s), std::invalid_argument);

    ServerListAnswer l;
    l.servers.resize(70'000);
    CHECK_THROWS_AS(encode_message(l), std::invalid_argument);

    FileSearchQuery bad{"", {MetaTag{TagKind::Size, 0, std::string("not a number")}}};
    CHECK_THROWS_AS(encode_message(bad), std::invalid_argument);
}

TEST_CASE("announce without a size tag fails to decode") {
    // 9C, client, port, 1 file, fileID, 1 tag: Name "a"
    Bytes p = bytes({0xE3, 0x9C, 1, 0, 0, 10, 0x36, 0x12, 1, 0});
    p.resize(p.size() + 16, 0);
    for (int x : {1, 0, 0x01, 1, 0, int('a')}) p.push_back(static_cast<std::uint8_t>(x));
    CHECK(validate_structure(p));
    auto m = decode_message(p);
    REQUIRE_FALSE(m);
    CHECK(m.error() == DecodeError::StructurallyInvalid);
}

TEST_CASE("random three-file announce round trips") {
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
        Announce a{{static_cast<std::uint32_t>(rng())}, static_cast<std::uint16_t>(rng()), {}};
        for (int k = 0; k < 3; ++k) a.files.push_back(testsupport::random_announced_file(rng));
        const EdonkeyMessage m = a;
        auto back = decode_message(encode_message(m));
        REQUIRE(back);
        CHECK(*back == m);
    }
}

TEST_CASE("round trip over every variant") {
    Rng rng(12345);
    std::array<int, kVariantCount> seen{};
    for (int i = 0; i < 20'000; ++i) {
        const EdonkeyMessage m = testsupport::random_message(rng);
        ++seen[m.index()];
        const Bytes b = encode_message(m);
        REQUIRE(b.size() >= 2);
        CHECK(b[0] == kMagic);
        CHECK(b[1] == static_cast<std::uint8_t>(opcode_of(m)));
        auto v = validate_structure(b);
        REQUIRE(v);
        CHECK(*v == opcode_of(m));
        auto back = decode_message(b);
        REQUIRE(back);
        REQUIRE(*back == m);
    }
    for (int n : seen) CHECK(n > 0);
}

TEST_CASE("fuzz: decode is total and agrees with validation") {
    Rng rng(777);
    std::array<std::uint64_t, kDecodeErrorKinds> kinds{};
    std::uint64_t ok = 0;
    for (int i = 0; i < 100'000; ++i) {
        Bytes b(testsupport::uniform(rng, 0, 64));
        for (auto& x : b) x = static_cast<std::uint8_t>(rng());
        // bias half the inputs towards a valid header so the body parsers get exercised
        if (i % 2 && b.size() >= 2) {
            b[0] = kMagic;
            static constexpr std::uint8_t ops[] = {0x14, 0x15, 0x16, 0x98, 0x99, 0x9A, 0x9B, 0x9C};
            b[1] = ops[rng() % 8];
        }
        auto v = validate_structure(b);
        auto m = decode_message(b);
        if (!v) {
            REQUIRE_FALSE(m);
            REQUIRE(m.error() == v.error());
        }
        if (m) {
            REQUIRE(v);
            ++ok;
        } else {
            ++kinds[static_cast<std::size_t>(m.error())];
        }
    }
    CHECK(ok > 0);
    for (auto n : kinds) CHECK(n > 0);
}

TEST_CASE("mutating valid messages never breaks the decoder") {
    Rng rng(99);
    for (int i = 0; i < 20'000; ++i) {
        Bytes b = encode_message(testsupport::random_message(rng));
        switch (rng() % 3) {
        case 0: b.resize(testsupport::uniform(rng, 0, b.size())); break;
        case 1: b[rng() % b.size()] ^= static_cast<std::uint8_t>(1 + rng() % 255); break;
        default: b.push_back(static_cast<std::uint8_t>(rng())); break;
        }
        auto v = validate_structure(b);
        auto m = decode_message(b);
        if (!v) REQUIRE(m.error() == v.error());
        if (m) REQUIRE(v);
    }
}

TEST_CASE("fileID hex") {
    FileId f;
    for (std::size_t i = 0; i < 16; ++i) f.bytes[i] = static_cast<std::uint8_t>(i * 17);
    CHECK(f.hex() == "00112233445566778899aabbccddeeff");
    CHECK(FileId::from_hex("00112233445566778899AABBCCDDEEFF") == f);
    CHECK_THROWS_AS(FileId::from_hex("0011"), std::invalid_argument);
    CHECK_THROWS_AS(FileId::from_hex("zz112233445566778899aabbccddeeff"), std::invalid_argument);
}

TEST_CASE("low ID boundary") {
    CHECK(ClientId{0x00FFFFFF}.is_low_id());
    CHECK_FALSE(ClientId{0x01000000}.is_low_id());
}
