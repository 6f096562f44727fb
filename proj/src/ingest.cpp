#include "edtrace/ingest.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>
#include <sstream>

namespace edtrace::ingest {

namespace {

constexpr std::uint32_t kPcapMagicMicros = 0xA1B2C3D4;
constexpr std::uint32_t kPcapMagicNanos = 0xA1B23C4D;
constexpr std::uint32_t kLinkEthernet = 1;
constexpr std::uint32_t kMaxRecordLength = 262'144;
constexpr std::size_t kEthernetHeader = 14;
constexpr std::uint16_t kEtherTypeIpv4 = 0x0800;
constexpr std::uint8_t kProtoUdp = 17;

std::uint32_t bswap32(std::uint32_t v) {
    return (v >> 24) | ((v >> 8) & 0xFF00) | ((v << 8) & 0xFF0000) | (v << 24);
}

std::uint32_t load_le32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t load_be16(const std::uint8_t* p) { return static_cast<std::uint16_t>((p[0] << 8) | p[1]); }

std::uint32_t load_be32(const std::uint8_t* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

void store_be16(std::uint8_t* p, std::uint16_t v) {
    p[0] = static_cast<std::uint8_t>(v >> 8);
    p[1] = static_cast<std::uint8_t>(v);
}

void store_be32(std::uint8_t* p, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) p[i] = static_cast<std::uint8_t>(v >> (24 - 8 * i));
}

void store_le32(std::uint8_t* p, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

std::uint16_t ipv4_checksum(const std::uint8_t* header, std::size_t len) {
    std::uint32_t sum = 0;
    for (std::size_t i = 0; i + 1 < len; i += 2) sum += load_be16(header + i);
    while (sum >> 16) sum = (sum & 0xFFFF) + (sum >> 16);
    return static_cast<std::uint16_t>(~sum);
}

// UDP header + payload -> Datagram, or nullopt when the header is inconsistent.
std::optional<Datagram> parse_udp(Micros ts, std::uint32_t src, std::uint32_t dst,
                                  std::span<const std::uint8_t> ip_payload) {
    if (ip_payload.size() < 8) return std::nullopt;
    const std::uint16_t udp_len = load_be16(ip_payload.data() + 4);
    if (udp_len < 8 || udp_len > ip_payload.size()) return std::nullopt;
    Datagram d;
    d.timestamp = ts;
    d.src_ip = src;
    d.dst_ip = dst;
    d.src_port = load_be16(ip_payload.data());
    d.dst_port = load_be16(ip_payload.data() + 2);
    d.payload.assign(ip_payload.begin() + 8, ip_payload.begin() + udp_len);
    return d;
}

} // namespace

std::uint64_t IngestStats::total_drops() const {
    return std::accumulate(drops_reported.begin(), drops_reported.end(), std::uint64_t{0},
                           [](std::uint64_t acc, const DropRecord& r) { return acc + r.drops; });
}

std::vector<DropRecord> read_drop_sidecar(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open drop sidecar " + path.string());
    std::vector<DropRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        DropRecord r;
        if (!(ls >> r.epoch_seconds >> r.drops))
            throw IngestError(path.string() + ":" + std::to_string(lineno) + ": expected `<epoch_seconds> <drops>`");
        out.push_back(r);
    }
    return out;
}

void write_drop_sidecar(const std::filesystem::path& path, std::span<const DropRecord> drops) {
    std::ofstream out(path);
    if (!out) throw IngestError("cannot write drop sidecar " + path.string());
    for (const auto& r : drops) out << r.epoch_seconds << ' ' << r.drops << '\n';
    if (!out) throw IngestError("write failed for " + path.string());
}

// --- reassembly ------------------------------------------------------------

Reassembler::Outcome Reassembler::add(IpFragment frag) {
    Outcome outcome;
    const Key key{frag.src_ip, frag.dst_ip, frag.id, frag.protocol};
    auto [it, inserted] = groups_.try_emplace(key);
    Group& g = it->second;
    if (inserted) {
        g.first_seen = frag.timestamp;
        outcome.opened_group = true;
    }
    if (g.failed) return outcome;

    const auto fail = [&] {
        g.failed = true;
        outcome.failed_group = true;
        g.data.clear();
        g.have.clear();
    };

    const std::uint32_t end = frag.offset + static_cast<std::uint32_t>(frag.data.size());
    if (end > 65'535 || (g.total && end > *g.total) || (!frag.more_fragments && g.total && *g.total != end)) {
        fail();
        return outcome;
    }
    if (!frag.more_fragments) {
        if (std::any_of(g.have.begin() + std::min<std::size_t>(end, g.have.size()), g.have.end(),
                        [](bool b) { return b; })) {
            fail();
            return outcome;
        }
        g.total = end;
    }
    if (g.data.size() < end) {
        g.data.resize(end);
        g.have.resize(end, false);
    }
    for (std::size_t i = 0; i < frag.data.size(); ++i) {
        const std::size_t pos = frag.offset + i;
        if (g.have[pos] && g.data[pos] != frag.data[i]) {
            fail();
            return outcome;
        }
        g.data[pos] = frag.data[i];
        g.have[pos] = true;
    }

    if (g.total && std::all_of(g.have.begin(), g.have.begin() + *g.total, [](bool b) { return b; })) {
        ReassembledPacket p;
        p.timestamp = g.first_seen;
        p.src_ip = frag.src_ip;
        p.dst_ip = frag.dst_ip;
        p.protocol = frag.protocol;
        g.data.resize(*g.total);
        p.data = std::move(g.data);
        groups_.erase(it);
        outcome.packet = std::move(p);
    }
    return outcome;
}

std::size_t Reassembler::expire(Micros now) {
    std::size_t failed = 0;
    for (auto it = groups_.begin(); it != groups_.end();) {
        if (now - it->second.first_seen > horizon_) {
            failed += it->second.failed ? 0 : 1;
            it = groups_.erase(it);
        } else {
            ++it;
        }
    }
    return failed;
}

std::size_t Reassembler::flush() {
    std::size_t failed = 0;
    for (const auto& [key, g] : groups_) failed += g.failed ? 0 : 1;
    groups_.clear();
    return failed;
}

std::vector<Datagram> reassemble(std::vector<IpFragment> fragments, IngestStats& stats, Micros horizon) {
    Reassembler r(horizon);
    std::vector<Datagram> out;
    std::uint64_t failed = 0;
    for (auto& f : fragments) {
        const Micros ts = f.timestamp;
        const std::uint32_t src = f.src_ip, dst = f.dst_ip;
        const bool unfragmented = f.offset == 0 && !f.more_fragments;
        if (!unfragmented) ++stats.fragments;
        failed += r.expire(ts);
        auto outcome = r.add(std::move(f));
        if (!unfragmented && outcome.opened_group) ++stats.fragment_groups;
        if (outcome.failed_group) ++failed;
        if (!outcome.packet) continue;
        if (!unfragmented) ++stats.reassembled;
        if (auto d = parse_udp(ts, src, dst, outcome.packet->data)) {
            d->timestamp = outcome.packet->timestamp;
            out.push_back(std::move(*d));
            ++stats.datagrams;
        } else {
            ++stats.malformed;
        }
    }
    failed += r.flush();
    stats.failed_groups += failed;
    stats.malformed += failed;
    return out;
}

// --- reader ----------------------------------------------------------------

PcapReader::PcapReader(const std::filesystem::path& path, ReaderOptions options)
    : in_(path, std::ios::binary), options_(std::move(options)), reassembler_(options_.reassembly_horizon) {
    if (!in_) throw IngestError("cannot open " + path.string());
    std::uint8_t header[24];
    if (!in_.read(reinterpret_cast<char*>(header), sizeof header))
        throw IngestError(path.string() + ": truncated pcap global header");
    const std::uint32_t magic = load_le32(header);
    if (magic == kPcapMagicMicros || magic == kPcapMagicNanos) {
        swapped_ = false;
    } else if (bswap32(magic) == kPcapMagicMicros || bswap32(magic) == kPcapMagicNanos) {
        swapped_ = true;
    } else {
        throw IngestError(path.string() + ": not a classic pcap file");
    }
    nanos_ = (swapped_ ? bswap32(magic) : magic) == kPcapMagicNanos;
    std::uint32_t linktype = load_le32(header + 20);
    if (swapped_) linktype = bswap32(linktype);
    if (linktype != kLinkEthernet)
        throw IngestError(path.string() + ": unsupported link type " + std::to_string(linktype));
    if (options_.drop_sidecar) stats_.drops_reported = read_drop_sidecar(*options_.drop_sidecar);
}

void PcapReader::note_time(Micros ts) {
    if (stats_.packets_seen == 1) {
        stats_.first_timestamp = ts;
        stats_.last_timestamp = ts;
    } else {
        stats_.first_timestamp = std::min(stats_.first_timestamp, ts);
        stats_.last_timestamp = std::max(stats_.last_timestamp, ts);
    }
}

bool PcapReader::read_record() {
    if (eof_) return false;
    std::uint8_t rh[16];
    in_.read(reinterpret_cast<char*>(rh), sizeof rh);
    const auto got = in_.gcount();
    if (got == 0) {
        eof_ = true;
        return false;
    }
    ++stats_.packets_seen;
    if (got < static_cast<std::streamsize>(sizeof rh)) {
        ++stats_.malformed;
        eof_ = true;
        return false;
    }
    auto field = [&](int i) {
        const std::uint32_t v = load_le32(rh + 4 * i);
        return swapped_ ? bswap32(v) : v;
    };
    const std::uint32_t sec = field(0), frac = field(1), incl = field(2);
    const Micros ts = static_cast<Micros>(sec) * kMicrosPerSecond + (nanos_ ? frac / 1000 : frac);
    if (incl > kMaxRecordLength) {
        // The record boundary is lost; nothing after it can be trusted.
        ++stats_.malformed;
        eof_ = true;
        return false;
    }
    record_.resize(incl);
    in_.read(reinterpret_cast<char*>(record_.data()), incl);
    if (in_.gcount() != static_cast<std::streamsize>(incl)) {
        ++stats_.malformed;
        eof_ = true;
        return false;
    }
    note_time(ts);
    if (ts - last_expiry_check_ > kMicrosPerSecond || ts < last_expiry_check_) {
        const auto failed = reassembler_.expire(ts);
        stats_.failed_groups += failed;
        stats_.malformed += failed;
        last_expiry_check_ = ts;
    }
    handle_frame(ts, record_);
    return true;
}

void PcapReader::handle_frame(Micros ts, std::span<const std::uint8_t> frame) {
    if (frame.size() < kEthernetHeader) {
        ++stats_.malformed;
        return;
    }
    if (load_be16(frame.data() + 12) != kEtherTypeIpv4) {
        ++stats_.filtered;
        return;
    }
    const auto ip = frame.subspan(kEthernetHeader);
    if (ip.size() < 20 || (ip[0] >> 4) != 4) {
        ++stats_.malformed;
        return;
    }
    const std::size_t ihl = std::size_t{ip[0] & 0x0Fu} * 4;
    const std::uint16_t total = load_be16(ip.data() + 2);
    if (ihl < 20 || total < ihl || total > ip.size()) {
        ++stats_.malformed;
        return;
    }
    if (ip[9] != kProtoUdp) {
        ++stats_.filtered;
        return;
    }
    const std::uint32_t src = load_be32(ip.data() + 12);
    const std::uint32_t dst = load_be32(ip.data() + 16);
    const std::uint16_t flags_off = load_be16(ip.data() + 6);
    const bool more = (flags_off & 0x2000) != 0;
    const std::uint32_t offset = std::uint32_t{flags_off & 0x1FFFu} * 8;
    const auto payload = ip.subspan(ihl, total - ihl);

    if (!more && offset == 0) {
        handle_udp(ts, src, dst, payload);
        return;
    }

    ++stats_.fragments;
    IpFragment frag;
    frag.timestamp = ts;
    frag.src_ip = src;
    frag.dst_ip = dst;
    frag.id = load_be16(ip.data() + 4);
    frag.protocol = ip[9];
    frag.offset = offset;
    frag.more_fragments = more;
    frag.data.assign(payload.begin(), payload.end());
    auto outcome = reassembler_.add(std::move(frag));
    if (outcome.opened_group) ++stats_.fragment_groups;
    if (outcome.failed_group) {
        ++stats_.failed_groups;
        ++stats_.malformed;
    }
    if (outcome.packet) {
        ++stats_.reassembled;
        handle_udp(outcome.packet->timestamp, src, dst, outcome.packet->data);
    }
}

void PcapReader::handle_udp(Micros ts, std::uint32_t src, std::uint32_t dst, std::span<const std::uint8_t> ip_payload) {
    auto d = parse_udp(ts, src, dst, ip_payload);
    if (!d || d->payload.size() > kMaxUdpPayload) {
        ++stats_.malformed;
        return;
    }
    if (d->dst_port != options_.server_port && d->src_port != options_.server_port) {
        ++stats_.filtered;
        return;
    }
    ++stats_.datagrams;
    ready_.push_back(std::move(*d));
}

std::optional<Datagram> PcapReader::next() {
    while (true) {
        if (ready_pos_ < ready_.size()) return std::move(ready_[ready_pos_++]);
        ready_.clear();
        ready_pos_ = 0;
        if (!read_record()) {
            if (eof_ && reassembler_.pending() > 0) {
                const auto failed = reassembler_.flush();
                stats_.failed_groups += failed;
                stats_.malformed += failed;
            }
            return std::nullopt;
        }
    }
}

std::pair<std::vector<Datagram>, IngestStats> read_pcap(const std::filesystem::path& path, ReaderOptions options) {
    PcapReader reader(path, std::move(options));
    std::vector<Datagram> out;
    while (auto d = reader.next()) out.push_back(std::move(*d));
    return {std::move(out), reader.stats()};
}

std::vector<LossBucket> loss_timeseries(const IngestStats& stats, std::int64_t bucket_seconds) {
    if (bucket_seconds <= 0) throw std::invalid_argument("loss bucket width must be positive");
    const bool have_packets = stats.packets_seen > 0;
    if (!have_packets && stats.drops_reported.empty()) return {};

    std::int64_t start = 0, end = 0;
    bool init = false;
    const auto extend = [&](std::int64_t s) {
        if (!init) {
            start = end = s;
            init = true;
        }
        start = std::min(start, s);
        end = std::max(end, s);
    };
    if (have_packets) {
        extend(stats.first_timestamp / kMicrosPerSecond);
        extend(stats.last_timestamp / kMicrosPerSecond);
    }
    for (const auto& d : stats.drops_reported) extend(d.epoch_seconds);

    const std::size_t n = static_cast<std::size_t>((end - start) / bucket_seconds) + 1;
    std::vector<LossBucket> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i].start = static_cast<std::int64_t>(i) * bucket_seconds;
    for (const auto& d : stats.drops_reported) out[(d.epoch_seconds - start) / bucket_seconds].losses += d.drops;
    std::uint64_t running = 0;
    for (auto& b : out) {
        running += b.losses;
        b.cumulative = running;
    }
    return out;
}

// --- writing ---------------------------------------------------------------

std::vector<std::vector<std::uint8_t>> build_udp_frames(Endpoint src, Endpoint dst, std::uint16_t ip_id,
                                                        std::span<const std::uint8_t> payload,
                                                        std::size_t fragment_size) {
    std::vector<std::uint8_t> udp(8 + payload.size());
    store_be16(udp.data(), src.port);
    store_be16(udp.data() + 2, dst.port);
    store_be16(udp.data() + 4, static_cast<std::uint16_t>(udp.size()));
    std::copy(payload.begin(), payload.end(), udp.begin() + 8);

    std::size_t chunk = udp.size();
    if (fragment_size > 0) chunk = std::max<std::size_t>(8, fragment_size / 8 * 8);

    std::vector<std::vector<std::uint8_t>> frames;
    for (std::size_t off = 0; off < udp.size() || (off == 0 && udp.empty()); off += chunk) {
        const std::size_t len = std::min(chunk, udp.size() - off);
        const bool more = off + len < udp.size();
        std::vector<std::uint8_t> f(kEthernetHeader + 20 + len, 0);
        // Locally administered MACs; content is irrelevant to the reader.
        const std::uint8_t dst_mac[6] = {0x02, 0, 0, 0, 0, 0x01};
        const std::uint8_t src_mac[6] = {0x02, 0, 0, 0, 0, 0x02};
        std::copy(dst_mac, dst_mac + 6, f.begin());
        std::copy(src_mac, src_mac + 6, f.begin() + 6);
        store_be16(f.data() + 12, kEtherTypeIpv4);
        std::uint8_t* ip = f.data() + kEthernetHeader;
        ip[0] = 0x45;
        store_be16(ip + 2, static_cast<std::uint16_t>(20 + len));
        store_be16(ip + 4, ip_id);
        store_be16(ip + 6, static_cast<std::uint16_t>((more ? 0x2000 : 0) | (off / 8)));
        ip[8] = 64;
        ip[9] = kProtoUdp;
        store_be32(ip + 12, src.ip);
        store_be32(ip + 16, dst.ip);
        store_be16(ip + 10, ipv4_checksum(ip, 20));
        std::copy(udp.begin() + static_cast<std::ptrdiff_t>(off),
                  udp.begin() + static_cast<std::ptrdiff_t>(off + len), f.begin() + kEthernetHeader + 20);
        frames.push_back(std::move(f));
    }
    return frames;
}

PcapWriter::PcapWriter(const std::filesystem::path& path) : out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw IngestError("cannot write " + path.string());
    std::uint8_t header[24] = {};
    store_le32(header, kPcapMagicMicros);
    header[4] = 2;  // version 2.4
    header[6] = 4;
    store_le32(header + 16, 65'535);
    store_le32(header + 20, kLinkEthernet);
    // Written little-endian: readers detect the order from the magic.
    out_.write(reinterpret_cast<const char*>(header), sizeof header);
}

void PcapWriter::write(Micros ts, std::span<const std::uint8_t> frame) {
    const auto len = static_cast<std::uint32_t>(frame.size());
    write_raw_record(static_cast<std::uint32_t>(ts / kMicrosPerSecond),
                     static_cast<std::uint32_t>(ts % kMicrosPerSecond), len, len, frame);
}

void PcapWriter::write_raw_record(std::uint32_t sec, std::uint32_t usec, std::uint32_t incl_len,
                                  std::uint32_t orig_len, std::span<const std::uint8_t> bytes) {
    std::uint8_t rh[16];
    store_le32(rh, sec);
    store_le32(rh + 4, usec);
    store_le32(rh + 8, incl_len);
    store_le32(rh + 12, orig_len);
    out_.write(reinterpret_cast<const char*>(rh), sizeof rh);
    out_.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out_) throw IngestError("pcap write failed");
    ++records_;
}

} // namespace edtrace::ingest
