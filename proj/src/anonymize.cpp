#include "edtrace/anonymize.hpp"

#include <sys/mman.h>

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <utility>

#include "edtrace/md5.hpp"

namespace edtrace {

namespace {

constexpr char kSnapshotMagic[4] = {'D', 'K', 'T', 'B'};
constexpr std::uint8_t kSnapshotVersion = 1;
constexpr std::uint8_t kKindClients = 1;
constexpr std::uint8_t kKindFiles = 2;

template <typename T>
void put(std::ofstream& out, T v) {
    std::uint8_t buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<std::uint8_t>(static_cast<std::uint64_t>(v) >> (8 * i));
    out.write(reinterpret_cast<const char*>(buf), sizeof buf);
}

template <typename T>
T get(std::ifstream& in, const std::filesystem::path& path) {
    std::uint8_t buf[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(buf), sizeof buf))
        throw std::runtime_error(path.string() + ": truncated table snapshot");
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return static_cast<T>(v);
}

void write_header(std::ofstream& out, std::uint8_t kind) {
    out.write(kSnapshotMagic, 4);
    put<std::uint8_t>(out, kSnapshotVersion);
    put<std::uint8_t>(out, kind);
}

void read_header(std::ifstream& in, std::uint8_t kind, const std::filesystem::path& path) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kSnapshotMagic, 4) != 0)
        throw std::runtime_error(path.string() + ": not a table snapshot");
    if (get<std::uint8_t>(in, path) != kSnapshotVersion)
        throw std::runtime_error(path.string() + ": unsupported snapshot version");
    if (get<std::uint8_t>(in, path) != kind)
        throw std::runtime_error(path.string() + ": snapshot holds a different table kind");
}

} // namespace

// --- DenseCells --------------------------------------------------------------

DenseCells::DenseCells(std::size_t count) : count_(count) {
    if (count == 0) return;
    void* p = ::mmap(nullptr, count * sizeof(std::uint32_t), PROT_READ | PROT_WRITE,
                     MAP_PRIVATE | MAP_ANONYMOUS | MAP_NORESERVE, -1, 0);
    if (p != MAP_FAILED) {
        data_ = static_cast<std::uint32_t*>(p);
        mapped_ = true;
        return;
    }
    data_ = static_cast<std::uint32_t*>(std::calloc(count, sizeof(std::uint32_t)));
    if (!data_) throw std::bad_alloc();
}

DenseCells::~DenseCells() { release(); }

DenseCells::DenseCells(DenseCells&& other) noexcept
    : data_(std::exchange(other.data_, nullptr)), count_(std::exchange(other.count_, 0)),
      mapped_(std::exchange(other.mapped_, false)) {}

DenseCells& DenseCells::operator=(DenseCells&& other) noexcept {
    if (this != &other) {
        release();
        data_ = std::exchange(other.data_, nullptr);
        count_ = std::exchange(other.count_, 0);
        mapped_ = std::exchange(other.mapped_, false);
    }
    return *this;
}

void DenseCells::release() noexcept {
    if (!data_) return;
    if (mapped_)
        ::munmap(data_, count_ * sizeof(std::uint32_t));
    else
        std::free(data_);
    data_ = nullptr;
}

// --- ClientTable -------------------------------------------------------------

namespace {
unsigned checked_key_bits(unsigned bits) {
    if (bits == 0 || bits > 32) throw std::invalid_argument("client key bits must be in 1..32");
    return bits;
}
} // namespace

ClientTable::ClientTable(unsigned key_bits)
    : key_bits_(checked_key_bits(key_bits)), cells_(std::size_t{1} << key_bits) {}

ClientIndex ClientTable::encode(wire::ClientId c) {
    if (key_bits_ == 32 || c.value < (std::uint64_t{1} << key_bits_)) {
        std::uint32_t& cell = cells_[c.value];
        if (cell == 0) {
            cell = static_cast<std::uint32_t>(++next_index_);
            if (key_bits_ > kMaxSnapshotKeyBits) dense_keys_.push_back(c.value);
        }
        return cell - 1;
    }
    auto [it, inserted] = overflow_.try_emplace(c.value, static_cast<ClientIndex>(next_index_));
    if (inserted) ++next_index_;
    return it->second;
}

std::optional<ClientIndex> ClientTable::lookup(wire::ClientId c) const {
    if (key_bits_ == 32 || c.value < (std::uint64_t{1} << key_bits_)) {
        const std::uint32_t cell = cells_[c.value];
        if (cell == 0) return std::nullopt;
        return cell - 1;
    }
    auto it = overflow_.find(c.value);
    if (it == overflow_.end()) return std::nullopt;
    return it->second;
}

void ClientTable::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_header(out, kKindClients);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(key_bits_));
    put<std::uint64_t>(out, next_index_);
    if (key_bits_ > kMaxSnapshotKeyBits) {
        // Too wide to dump: occupied cells only, in assignment order.
        put<std::uint64_t>(out, dense_keys_.size());
        for (auto key : dense_keys_) {
            put<std::uint32_t>(out, key);
            put<std::uint32_t>(out, cells_[key]);
        }
    } else {
        // Dense cells, little-endian. Chunked to bound the staging buffer.
        std::vector<std::uint8_t> chunk;
        const auto cells = cells_.view();
        constexpr std::size_t kChunk = 1 << 16;
        for (std::size_t base = 0; base < cells.size(); base += kChunk) {
            const std::size_t n = std::min(kChunk, cells.size() - base);
            chunk.resize(n * 4);
            for (std::size_t i = 0; i < n; ++i)
                for (int b = 0; b < 4; ++b) chunk[4 * i + b] = static_cast<std::uint8_t>(cells[base + i] >> (8 * b));
            out.write(reinterpret_cast<const char*>(chunk.data()), static_cast<std::streamsize>(chunk.size()));
        }
    }
    std::vector<std::pair<std::uint32_t, ClientIndex>> extra(overflow_.begin(), overflow_.end());
    std::sort(extra.begin(), extra.end());
    put<std::uint64_t>(out, extra.size());
    for (const auto& [key, index] : extra) {
        put<std::uint32_t>(out, key);
        put<std::uint32_t>(out, index);
    }
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

ClientTable ClientTable::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    read_header(in, kKindClients, path);
    const auto bits = get<std::uint8_t>(in, path);
    if (bits == 0 || bits > 32) throw std::runtime_error(path.string() + ": bad key width");
    ClientTable t(bits);
    t.next_index_ = get<std::uint64_t>(in, path);
    if (bits > kMaxSnapshotKeyBits) {
        const auto n = get<std::uint64_t>(in, path);
        for (std::uint64_t i = 0; i < n; ++i) {
            const auto key = get<std::uint32_t>(in, path);
            const auto cell = get<std::uint32_t>(in, path);
            if (cell == 0 || cell > t.next_index_) throw std::runtime_error(path.string() + ": bad cell");
            t.cells_[key] = cell;
            t.dense_keys_.push_back(key);
        }
    } else {
        std::vector<std::uint8_t> chunk;
        constexpr std::size_t kChunk = 1 << 16;
        for (std::size_t base = 0; base < t.cells_.size(); base += kChunk) {
            const std::size_t n = std::min(kChunk, t.cells_.size() - base);
            chunk.resize(n * 4);
            if (!in.read(reinterpret_cast<char*>(chunk.data()), static_cast<std::streamsize>(chunk.size())))
                throw std::runtime_error(path.string() + ": truncated table snapshot");
            for (std::size_t i = 0; i < n; ++i) {
                std::uint32_t v = 0;
                for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(chunk[4 * i + b]) << (8 * b);
                if (v != 0) t.cells_[base + i] = v;  // leave untouched pages uncommitted
            }
        }
    }
    const auto extra = get<std::uint64_t>(in, path);
    for (std::uint64_t i = 0; i < extra; ++i) {
        const auto key = get<std::uint32_t>(in, path);
        t.overflow_[key] = get<std::uint32_t>(in, path);
    }
    return t;
}

// --- FileTable ---------------------------------------------------------------

void IndexBytes::validate() const {
    if (!(first < second && second <= 15))
        throw std::invalid_argument("index bytes must satisfy 0 <= i < j <= 15");
}

FileTable::FileTable(IndexBytes index_bytes) : index_bytes_(index_bytes), buckets_(kBuckets) {
    index_bytes_.validate();
}

FileIndex FileTable::encode(const wire::FileId& f) {
    auto& b = buckets_[bucket_of(f)];
    auto it = std::lower_bound(b.begin(), b.end(), f, [](const Entry& e, const wire::FileId& k) { return e.file < k; });
    if (it != b.end() && it->file == f) return it->index;
    const auto index = static_cast<FileIndex>(next_index_++);
    b.insert(it, Entry{f, index});
    return index;
}

std::optional<FileIndex> FileTable::lookup(const wire::FileId& f) const {
    const auto& b = buckets_[bucket_of(f)];
    auto it = std::lower_bound(b.begin(), b.end(), f, [](const Entry& e, const wire::FileId& k) { return e.file < k; });
    if (it != b.end() && it->file == f) return it->index;
    return std::nullopt;
}

void FileTable::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_header(out, kKindFiles);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(index_bytes_.first));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(index_bytes_.second));
    put<std::uint64_t>(out, next_index_);
    for (const auto& b : buckets_) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(b.size()));
        for (const auto& e : b) {
            out.write(reinterpret_cast<const char*>(e.file.bytes.data()), 16);
            put<std::uint32_t>(out, e.index);
        }
    }
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

FileTable FileTable::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    read_header(in, kKindFiles, path);
    IndexBytes ib;
    ib.first = get<std::uint8_t>(in, path);
    ib.second = get<std::uint8_t>(in, path);
    FileTable t(ib);
    t.next_index_ = get<std::uint64_t>(in, path);
    std::uint64_t total = 0;
    for (auto& b : t.buckets_) {
        b.resize(get<std::uint32_t>(in, path));
        for (auto& e : b) {
            if (!in.read(reinterpret_cast<char*>(e.file.bytes.data()), 16))
                throw std::runtime_error(path.string() + ": truncated table snapshot");
            e.index = get<std::uint32_t>(in, path);
        }
        total += b.size();
    }
    if (total != t.next_index_) throw std::runtime_error(path.string() + ": bucket sizes disagree with count");
    return t;
}

std::vector<std::pair<std::size_t, std::size_t>> bucket_size_distribution(const FileTable& t) {
    std::map<std::size_t, std::size_t> hist;
    for (std::size_t b = 0; b < FileTable::kBuckets; ++b) ++hist[t.bucket(b).size()];
    return {hist.begin(), hist.end()};
}

BucketSkew bucket_skew(const FileTable& t) {
    BucketSkew s;
    for (std::size_t b = 0; b < FileTable::kBuckets; ++b) {
        if (t.bucket(b).size() > s.max) {
            s.max = t.bucket(b).size();
            s.argmax = b;
        }
    }
    s.mean = static_cast<double>(t.size()) / static_cast<double>(FileTable::kBuckets);
    return s;
}

std::string anon_string(std::string_view s) { return Md5::hex_of(s); }

std::uint64_t anon_size(std::uint64_t bytes) { return bytes / 1024; }

// --- Anonymizer --------------------------------------------------------------

wire::Opcode AnonMessage::opcode() const {
    static constexpr wire::Opcode table[] = {
        wire::Opcode::ServerListQuery,   wire::Opcode::ServerListAnswer,   wire::Opcode::ServerStatus,
        wire::Opcode::FileSearchQuery,   wire::Opcode::FileSearchAnswer,   wire::Opcode::SourceSearchQuery,
        wire::Opcode::SourceSearchAnswer, wire::Opcode::Announce,
    };
    return table[body.index()];
}

Anonymizer::Anonymizer(AnonymizerOptions options)
    : options_(options), clients_(options.client_key_bits), files_(options.index_bytes) {}

Anonymizer::Anonymizer(AnonymizerOptions options, ClientTable clients, FileTable files)
    : options_(options), clients_(std::move(clients)), files_(std::move(files)) {
    options_.client_key_bits = clients_.key_bits();
    options_.index_bytes = files_.index_bytes();
}

std::int64_t Anonymizer::rebase_timestamp(ingest::Micros t) {
    if (t < t0_) {
        ++skewed_;
        return 0;
    }
    return t - t0_;
}

ClientIndex Anonymizer::anon_client(wire::ClientId c) {
    return options_.enabled ? clients_.encode(c) : c.value;
}

std::string Anonymizer::text(const std::string& s) const { return options_.enabled ? anon_string(s) : s; }

anon::Tag Anonymizer::tag(const wire::MetaTag& t) const {
    anon::Tag out{t.kind, t.code, std::string{}};
    if (const auto* n = std::get_if<std::uint32_t>(&t.value))
        out.value = options_.enabled ? anon_size(*n) : std::uint64_t{*n};
    else
        out.value = text(std::get<std::string>(t.value));
    return out;
}

std::vector<anon::Tag> Anonymizer::tags(const std::vector<wire::MetaTag>& ts) const {
    std::vector<anon::Tag> out;
    out.reserve(ts.size());
    for (const auto& t : ts) out.push_back(tag(t));
    return out;
}

AnonMessage Anonymizer::anonymize(const wire::EdonkeyMessage& m, ingest::Micros timestamp, wire::ClientId peer,
                                  Direction direction) {
    AnonMessage out;
    out.direction = direction;
    out.rebased_us = rebase_timestamp(timestamp);
    out.peer = anon_client(peer);

    const auto entries = [this](const std::vector<wire::FileEntry>& in) {
        std::vector<anon::FileEntry> res;
        res.reserve(in.size());
        for (const auto& e : in) res.push_back({anon_file(e.file), tags(e.tags)});
        return res;
    };

    out.body = std::visit(
        [&](const auto& msg) -> anon::Body {
            using T = std::decay_t<decltype(msg)>;
            if constexpr (std::is_same_v<T, wire::ServerListQuery>) {
                return anon::ServerListQuery{};
            } else if constexpr (std::is_same_v<T, wire::ServerListAnswer>) {
                return anon::ServerListAnswer{msg.servers};
            } else if constexpr (std::is_same_v<T, wire::ServerStatus>) {
                return anon::ServerStatus{msg.users, msg.files, text(msg.description)};
            } else if constexpr (std::is_same_v<T, wire::FileSearchQuery>) {
                return anon::FileSearchQuery{text(msg.pattern), tags(msg.filters)};
            } else if constexpr (std::is_same_v<T, wire::FileSearchAnswer>) {
                return anon::FileSearchAnswer{entries(msg.results)};
            } else if constexpr (std::is_same_v<T, wire::SourceSearchQuery>) {
                anon::SourceSearchQuery q;
                q.files.reserve(msg.files.size());
                for (const auto& f : msg.files) q.files.push_back(anon_file(f));
                return q;
            } else if constexpr (std::is_same_v<T, wire::SourceSearchAnswer>) {
                anon::SourceSearchAnswer a;
                a.file = anon_file(msg.file);
                a.sources.reserve(msg.sources.size());
                for (const auto& s : msg.sources) a.sources.push_back({anon_client(s.client), s.port});
                return a;
            } else {
                anon::Announce a;
                a.client = anon_client(msg.client);
                a.port = msg.port;
                a.files = entries(msg.files);
                return a;
            }
        },
        m);
    return out;
}

} // namespace edtrace
