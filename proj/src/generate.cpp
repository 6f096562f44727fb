#include "edtrace/generate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace edtrace::generate {

// --- ZipfSampler -----------------------------------------------------------------

namespace {

double helper1(double x) {  // log1p(x) / x
    return std::abs(x) > 1e-8 ? std::log1p(x) / x : 1.0 - x * (0.5 - x * (1.0 / 3.0 - 0.25 * x));
}

double helper2(double x) {  // expm1(x) / x
    return std::abs(x) > 1e-8 ? std::expm1(x) / x : 1.0 + x * 0.5 * (1.0 + x / 3.0 * (1.0 + 0.25 * x));
}

double uniform01(std::mt19937_64& rng) { return std::generate_canonical<double, 53>(rng); }

std::uint64_t uniform_int(std::mt19937_64& rng, std::uint64_t lo, std::uint64_t hi) {
    return std::uniform_int_distribution<std::uint64_t>(lo, hi)(rng);
}

} // namespace

ZipfSampler::ZipfSampler(std::uint64_t n, double exponent) : n_(n), exponent_(exponent) {
    if (n == 0) throw std::invalid_argument("zipf support must be non-empty");
    if (!(exponent > 0)) throw std::invalid_argument("zipf exponent must be positive");
    h_integral_x1_ = h_integral(1.5) - 1.0;
    h_integral_n_ = h_integral(static_cast<double>(n) + 0.5);
    s_ = 2.0 - h_integral_inverse(h_integral(2.5) - h(2.0));
}

double ZipfSampler::h(double x) const { return std::exp(-exponent_ * std::log(x)); }

double ZipfSampler::h_integral(double x) const {
    const double lx = std::log(x);
    return helper2((1.0 - exponent_) * lx) * lx;
}

double ZipfSampler::h_integral_inverse(double x) const {
    double t = x * (1.0 - exponent_);
    if (t < -1.0) t = -1.0;
    return std::exp(helper1(t) * x);
}

std::uint64_t ZipfSampler::operator()(std::mt19937_64& rng) const {
    while (true) {
        const double u = h_integral_n_ + uniform01(rng) * (h_integral_x1_ - h_integral_n_);
        const double x = h_integral_inverse(u);
        double kd = std::floor(x + 0.5);
        if (kd < 1.0) kd = 1.0;
        if (kd > static_cast<double>(n_)) kd = static_cast<double>(n_);
        if (kd - x <= s_ || u >= h_integral(kd + 0.5) - h(kd)) return static_cast<std::uint64_t>(kd);
    }
}

// --- config ----------------------------------------------------------------------

void WorkloadConfig::validate() const {
    const auto rate = [](double v, const char* what) {
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument(std::string(what) + " must be in [0,1]");
    };
    rate(ask_fraction, "ask_fraction");
    rate(forged_fraction, "forged_fraction");
    rate(malformed_rate, "malformed_rate");
    rate(truncate_share, "truncate_share");
    rate(fragment_rate, "fragment_rate");
    rate(low_id_fraction, "low_id_fraction");
    rate(reannounce_rate, "reannounce_rate");
    if (!(provide_exponent > 0) || !(ask_exponent > 0)) throw std::invalid_argument("exponents must be positive");
    if (num_clients == 0 || num_clients > 4'000'000) throw std::invalid_argument("num_clients must be in [1, 4000000]");
    if (num_files == 0) throw std::invalid_argument("num_files must be positive");
    if (!(duration > 0)) throw std::invalid_argument("duration must be positive");
    if (forged_fraction > 0 && forged_prefixes.empty()) throw std::invalid_argument("forged_prefixes is empty");
    if (cohort_52 > num_clients) throw std::invalid_argument("cohort_52 exceeds num_clients");
    if (cohort_52 > 0 && num_files < 52) throw std::invalid_argument("cohort_52 needs at least 52 files");
    double w = 0;
    for (const auto& p : size_peaks) {
        if (!(p.weight >= 0)) throw std::invalid_argument("size peak weight must be non-negative");
        if (p.kb == 0 || p.kb > 0xFFFFFFFFull / 1024) throw std::invalid_argument("size peak out of range");
        w += p.weight;
    }
    if (w > 1.0 + 1e-12) throw std::invalid_argument("size peak weights sum above 1");
    for (const auto& d : drop_schedule)
        if (!(d.time >= 0)) throw std::invalid_argument("drop times must be non-negative");
    if (start_time < 0 || start_time > 0xFFFFFFFFll - 2 * static_cast<std::int64_t>(duration) - 60)
        throw std::invalid_argument("start_time outside the pcap timestamp range");
}

std::filesystem::path truth_path(const std::filesystem::path& pcap) { return pcap.string() + ".truth"; }
std::filesystem::path drops_path(const std::filesystem::path& pcap) { return pcap.string() + ".drops"; }

// --- relation oracle -----------------------------------------------------------

namespace {

analyze::DistributionReport histogram(analyze::ReportKind kind, const std::map<std::uint64_t, std::uint64_t>& per_entity,
                                      bool keep_zero) {
    std::map<std::uint64_t, std::uint64_t> h;
    for (const auto& [e, v] : per_entity)
        if (keep_zero || v > 0) ++h[v];
    analyze::DistributionReport r;
    r.kind = kind;
    for (const auto& [x, y] : h) {
        r.points.push_back({x, y});
        r.total_entities += y;
    }
    return r;
}

std::uint64_t file_key(const wire::FileId& f, std::map<wire::FileId, std::uint64_t>& ids) {
    return ids.try_emplace(f, ids.size()).first->second;
}

} // namespace

std::array<analyze::DistributionReport, analyze::kReportKinds> distributions_from_relations(
    const std::vector<std::pair<std::uint32_t, wire::FileId>>& provides,
    const std::vector<std::pair<std::uint32_t, wire::FileId>>& asks, const analyze::DistributionReport& sizes) {
    using analyze::ReportKind;
    std::map<wire::FileId, std::uint64_t> ids;
    std::map<std::uint64_t, std::uint64_t> ppf, fpp, apf, fpa;
    std::set<std::pair<std::uint32_t, wire::FileId>> seen;
    for (const auto& pr : provides) {
        if (!seen.insert(pr).second) continue;
        ++ppf[file_key(pr.second, ids)];
        ++fpp[pr.first];
    }
    seen.clear();
    for (const auto& pr : asks) {
        if (!seen.insert(pr).second) continue;
        ++apf[file_key(pr.second, ids)];
        ++fpa[pr.first];
    }
    std::array<analyze::DistributionReport, analyze::kReportKinds> out;
    out[0] = histogram(ReportKind::ProvidersPerFile, ppf, false);
    out[1] = histogram(ReportKind::AskersPerFile, apf, false);
    out[2] = histogram(ReportKind::FilesPerProvider, fpp, false);
    out[3] = histogram(ReportKind::FilesAskedPerClient, fpa, false);
    out[4] = sizes;
    out[4].kind = ReportKind::FileSizeKB;
    return out;
}

// --- population ----------------------------------------------------------------

namespace {

constexpr std::uint32_t kServerIp = 0xC6336407;        // 198.51.100.7
constexpr std::uint32_t kServerListBase = 0xCB007100;  // 203.0.113.0
constexpr std::uint32_t kOrphanBase = 0x64400000;      // 100.64.0.0
constexpr std::size_t kAnnounceChunk = 16;
constexpr std::size_t kQueryChunk = 20;
constexpr std::size_t kMaxSources = 12;
constexpr std::uint64_t kMaxSizeKb = 0xFFFFFFFFull / 1024;
constexpr std::size_t kCohortFiles = 52;

constexpr std::array<const char*, 5> kTypes = {"AUDIO", "VIDEO", "PRO", "DOC", "IMAGE"};
constexpr std::array<const char*, 5> kExtensions = {".MP3", ".AVI", ".ZIP", ".PDF", ".JPG"};

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Upper-case first letter, then [A-Z0-9_]: never a hex digest, never a
// number, never an XML name used by the trace format.
std::string token(std::mt19937_64& rng, std::size_t len) {
    static constexpr char head[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZ";
    static constexpr char tail[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_";
    std::string s(len, 'A');
    s[0] = head[uniform_int(rng, 0, sizeof head - 2)];
    for (std::size_t i = 1; i < len; ++i) s[i] = tail[uniform_int(rng, 0, sizeof tail - 2)];
    return s;
}

struct Client {
    std::uint32_t ip = 0;
    wire::ClientId id;
    std::uint16_t port = 0;
    double weight = 1.0;
    bool cohort = false;
};

struct File {
    wire::FileId id;
    std::uint32_t size_bytes = 0;
    std::uint8_t type = 0;
    std::string name;
};

// Draws distinct indices with probability proportional to weight.
class WeightedPicker {
public:
    explicit WeightedPicker(std::vector<double> weights)
        : weights_(std::move(weights)), dist_(weights_.begin(), weights_.end()) {}

    std::uint32_t one(std::mt19937_64& rng) { return dist_(rng); }

    std::vector<std::uint32_t> distinct(std::size_t k, std::mt19937_64& rng) {
        const std::size_t n = weights_.size();
        k = std::min(k, n);
        std::vector<std::uint32_t> out;
        out.reserve(k);
        if (k * 4 <= n) {
            std::unordered_set<std::uint32_t> taken;
            while (out.size() < k) {
                const auto i = dist_(rng);
                if (taken.insert(i).second) out.push_back(i);
            }
            return out;
        }
        // Efraimidis-Spirakis: keep the k largest log(u)/w.
        std::vector<std::pair<double, std::uint32_t>> keys(n);
        for (std::size_t i = 0; i < n; ++i)
            keys[i] = {std::log(uniform01(rng)) / weights_[i], static_cast<std::uint32_t>(i)};
        std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(k), keys.end(),
                          [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
        for (std::size_t i = 0; i < k; ++i) out.push_back(keys[i].second);
        return out;
    }

private:
    std::vector<double> weights_;
    std::discrete_distribution<std::uint32_t> dist_;
};

enum PlanType : std::uint8_t {
    kServerListQuery,
    kServerListAnswer,
    kServerStatus,
    kFileSearchQuery,
    kFileSearchAnswer,
    kSourceSearchQuery,
    kSourceSearchAnswer,
    kAnnounce,
};

// One datagram to emit. Contents are rebuilt at write time from the
// population plus an RNG seeded from `order`, so plans stay small.
struct Plan {
    std::int64_t ts = 0;
    std::uint32_t order = 0;
    std::uint32_t client = 0;
    std::uint32_t a = 0;  // list offset, or file index for source answers
    std::uint32_t b = 0;  // list length
    std::uint8_t type = 0;
};

bool from_server(std::uint8_t type) {
    return type == kServerListAnswer || type == kServerStatus || type == kFileSearchAnswer ||
           type == kSourceSearchAnswer;
}

class Generator {
public:
    explicit Generator(const WorkloadConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {}

    Workload run(const std::filesystem::path& pcap);

private:
    void build_clients();
    void build_files();
    void build_relations();
    void build_plans();
    std::vector<ingest::DropRecord> build_drops();
    std::int64_t draw_time() {
        return cfg_.start_time * ingest::kMicrosPerSecond +
               static_cast<std::int64_t>(uniform01(rng_) * cfg_.duration * 1e6);
    }
    std::int64_t answer_delay() { return static_cast<std::int64_t>(uniform_int(rng_, 1'000, 50'000)); }
    void add(std::uint8_t type, std::uint32_t client, std::uint32_t a, std::uint32_t b, std::int64_t ts) {
        Plan p;
        p.ts = ts;
        p.order = static_cast<std::uint32_t>(plans_.size());
        p.client = client;
        p.a = a;
        p.b = b;
        p.type = type;
        plans_.push_back(p);
    }

    std::vector<wire::MetaTag> file_tags(const File& f, std::mt19937_64& local) const;
    wire::EdonkeyMessage materialize(const Plan& p, std::mt19937_64& local);
    void observe(const Plan& p, const wire::EdonkeyMessage& m);
    void emit_noise(ingest::PcapWriter& w, std::int64_t ts, bool orphan);
    void finish_truth();

    const WorkloadConfig& cfg_;
    std::mt19937_64 rng_;
    std::vector<Client> clients_;
    std::vector<File> files_;
    std::vector<std::string> vocabulary_;
    std::vector<std::string> descriptions_;
    std::vector<std::vector<std::uint32_t>> provides_, asks_, providers_;
    std::unique_ptr<WeightedPicker> activity_;
    std::vector<Plan> plans_;
    std::uint16_t ip_id_ = 0;
    std::uint32_t orphan_host_ = 0;

    GroundTruth truth_;
    std::unordered_map<std::uint32_t, ClientIndex> client_map_;
    std::unordered_map<std::uint32_t, FileIndex> file_map_;  // keyed by generator file number
    std::unordered_map<wire::FileId, std::uint32_t, wire::FileIdHash> number_of_;
    std::unordered_map<std::uint64_t, std::uint64_t> size_kb_;
    std::unordered_set<std::uint64_t> provide_seen_, ask_seen_;
    std::int64_t first_ts_ = 0, last_ts_ = 0;
};

void Generator::build_clients() {
    const std::uint32_t n = cfg_.num_clients;
    // One /16 per ~16k clients keeps addresses sparse inside each subnet.
    const std::size_t subnets = std::max<std::size_t>(1, (std::size_t{n} * 4 + 65'535) / 65'536);
    std::vector<std::uint32_t> prefixes;
    std::unordered_set<std::uint32_t> used_prefix;
    while (prefixes.size() < subnets) {
        const auto p = static_cast<std::uint32_t>((uniform_int(rng_, 11, 99) << 8) | uniform_int(rng_, 0, 255));
        if (used_prefix.insert(p).second) prefixes.push_back(p);
    }
    std::unordered_set<std::uint32_t> ips, low_ids;
    clients_.resize(n);
    for (auto& c : clients_) {
        do {
            c.ip = (prefixes[uniform_int(rng_, 0, prefixes.size() - 1)] << 16) |
                   static_cast<std::uint32_t>(uniform_int(rng_, 1, 0xFFFE));
        } while (!ips.insert(c.ip).second);
        if (uniform01(rng_) < cfg_.low_id_fraction) {
            std::uint32_t low;
            do {
                low = static_cast<std::uint32_t>(uniform_int(rng_, 1, (1u << 24) - 1));
            } while (!low_ids.insert(low).second);
            c.id = wire::ClientId{low};
        } else {
            c.id = wire::ClientId{c.ip};
        }
        do {
            c.port = static_cast<std::uint16_t>(uniform_int(rng_, 1024, 65'535));
        } while (c.port == cfg_.server_port);
        c.weight = std::pow(1.0 - uniform01(rng_), -1.0 / 1.5);  // Pareto, shape 1.5
    }
    for (std::uint32_t i = n - cfg_.cohort_52; i < n; ++i) clients_[i].cohort = true;

    std::vector<double> w;
    w.reserve(n);
    for (const auto& c : clients_) w.push_back(c.weight);
    activity_ = std::make_unique<WeightedPicker>(std::move(w));
}

void Generator::build_files() {
    const std::uint32_t n = cfg_.num_files;
    files_.resize(n);
    std::vector<std::uint32_t> order(n);
    for (std::uint32_t i = 0; i < n; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng_);
    const auto forged = static_cast<std::size_t>(std::llround(cfg_.forged_fraction * n));
    std::vector<bool> is_forged(n, false);
    for (std::size_t i = 0; i < forged; ++i) is_forged[order[i]] = true;

    std::unordered_set<wire::FileId, wire::FileIdHash> ids;
    std::lognormal_distribution<double> audio(std::log(4'500.0), 0.5), video(std::log(350'000.0), 0.8),
        other(std::log(2'000.0), 1.5);
    for (std::uint32_t i = 0; i < n; ++i) {
        File& f = files_[i];
        do {
            for (auto& b : f.id.bytes) b = static_cast<std::uint8_t>(rng_());
            if (is_forged[i]) {
                const auto p = cfg_.forged_prefixes[uniform_int(rng_, 0, cfg_.forged_prefixes.size() - 1)];
                f.id.bytes[0] = static_cast<std::uint8_t>(p >> 8);
                f.id.bytes[1] = static_cast<std::uint8_t>(p);
            }
        } while (!ids.insert(f.id).second);
        number_of_.emplace(f.id, i);
        f.type = static_cast<std::uint8_t>(uniform_int(rng_, 0, kTypes.size() - 1));
        f.name = token(rng_, uniform_int(rng_, 6, 14)) + "_" + token(rng_, uniform_int(rng_, 3, 6)) + kExtensions[f.type];

        std::uint64_t kb = 0;
        double u = uniform01(rng_);
        for (const auto& p : cfg_.size_peaks) {
            if (u < p.weight) {
                kb = p.kb;
                break;
            }
            u -= p.weight;
        }
        if (kb == 0) {
            double v = f.type == 0 ? audio(rng_) : f.type == 1 ? video(rng_) : other(rng_);
            v = std::clamp(v, 1.0, static_cast<double>(kMaxSizeKb));
            kb = static_cast<std::uint64_t>(v);
            // Keep background mass off the configured peaks.
            for (const auto& p : cfg_.size_peaks)
                if (kb == p.kb) kb = kb > 1 ? kb - 1 : kb + 1;
        }
        f.size_bytes = static_cast<std::uint32_t>(std::min<std::uint64_t>(kb * 1024 + uniform_int(rng_, 0, 1023),
                                                                          0xFFFFFFFFull));
    }

    const std::size_t words = std::clamp<std::size_t>(n / 4, 64, 5'000);
    for (std::size_t i = 0; i < words; ++i) vocabulary_.push_back(token(rng_, uniform_int(rng_, 4, 10)));
    for (int i = 0; i < 8; ++i) descriptions_.push_back("SRV_" + token(rng_, 12));
}

void Generator::build_relations() {
    const std::uint32_t nc = cfg_.num_clients, nf = cfg_.num_files;
    provides_.assign(nc, {});
    asks_.assign(nc, {});
    providers_.assign(nf, {});

    const ZipfSampler provide_count(nc, cfg_.provide_exponent);
    for (std::uint32_t f = 0; f < nf; ++f) {
        for (auto c : activity_->distinct(provide_count(rng_), rng_)) {
            provides_[c].push_back(f);
            providers_[f].push_back(c);
        }
    }

    std::vector<std::uint32_t> pool;
    std::vector<double> pool_w;
    for (std::uint32_t c = 0; c < nc; ++c)
        if (!clients_[c].cohort) {
            pool.push_back(c);
            pool_w.push_back(clients_[c].weight);
        }
    if (!pool.empty() && cfg_.ask_fraction > 0) {
        WeightedPicker askers(std::move(pool_w));
        const ZipfSampler ask_count(pool.size(), cfg_.ask_exponent);
        for (std::uint32_t f = 0; f < nf; ++f) {
            if (uniform01(rng_) >= cfg_.ask_fraction) continue;
            for (auto i : askers.distinct(ask_count(rng_), rng_)) asks_[pool[i]].push_back(f);
        }
    }
    for (std::uint32_t c = 0; c < nc; ++c) {
        if (!clients_[c].cohort) continue;
        std::unordered_set<std::uint32_t> picked;
        while (picked.size() < kCohortFiles) {
            const auto f = static_cast<std::uint32_t>(uniform_int(rng_, 0, nf - 1));
            if (picked.insert(f).second) asks_[c].push_back(f);
        }
    }
}

void Generator::build_plans() {
    const auto nc = static_cast<std::uint32_t>(clients_.size());
    for (std::uint32_t c = 0; c < nc; ++c) {
        const auto& list = provides_[c];
        for (std::size_t off = 0; off < list.size(); off += kAnnounceChunk) {
            const auto len = static_cast<std::uint32_t>(std::min(kAnnounceChunk, list.size() - off));
            add(kAnnounce, c, static_cast<std::uint32_t>(off), len, draw_time());
            if (uniform01(rng_) < cfg_.reannounce_rate)
                add(kAnnounce, c, static_cast<std::uint32_t>(off), len, draw_time());
        }
    }
    for (std::uint32_t c = 0; c < nc; ++c) {
        const auto& list = asks_[c];
        for (std::size_t off = 0; off < list.size(); off += kQueryChunk) {
            const auto len = static_cast<std::uint32_t>(std::min(kQueryChunk, list.size() - off));
            const int rounds = uniform01(rng_) < cfg_.reannounce_rate ? 2 : 1;
            for (int r = 0; r < rounds; ++r) {
                const auto t = draw_time();
                add(kSourceSearchQuery, c, static_cast<std::uint32_t>(off), len, t);
                for (std::uint32_t i = 0; i < len; ++i)
                    add(kSourceSearchAnswer, c, list[off + i], 0, t + answer_delay());
            }
        }
    }
    if (cfg_.background) {
        const std::uint32_t list_queries = std::max<std::uint32_t>(1, nc / 20);
        for (std::uint32_t i = 0; i < list_queries; ++i) {
            const auto c = activity_->one(rng_);
            const auto t = draw_time();
            add(kServerListQuery, c, 0, 0, t);
            add(kServerListAnswer, c, 0, 0, t + answer_delay());
        }
        const std::uint32_t statuses = std::max<std::uint32_t>(1, nc / 50);
        for (std::uint32_t i = 0; i < statuses; ++i) add(kServerStatus, activity_->one(rng_), 0, 0, draw_time());
        const std::uint32_t searches = std::max<std::uint32_t>(1, nc / 5);
        for (std::uint32_t i = 0; i < searches; ++i) {
            const auto c = activity_->one(rng_);
            const auto t = draw_time();
            add(kFileSearchQuery, c, 0, 0, t);
            add(kFileSearchAnswer, c, 0, 0, t + answer_delay());
        }
    }
    while (plans_.size() < cfg_.target_messages) {
        const auto c = activity_->one(rng_);
        const auto t = draw_time();
        if (cfg_.target_messages - plans_.size() >= 2) {
            add(kFileSearchQuery, c, 0, 0, t);
            add(kFileSearchAnswer, c, 0, 0, t + answer_delay());
        } else {
            add(kServerListQuery, c, 0, 0, t);
        }
    }
    if (plans_.size() > 0xFFFFFFFFull) throw std::invalid_argument("workload too large");
    std::sort(plans_.begin(), plans_.end(),
              [](const Plan& x, const Plan& y) { return x.ts != y.ts ? x.ts < y.ts : x.order < y.order; });
}

std::vector<ingest::DropRecord> Generator::build_drops() {
    std::map<std::int64_t, std::uint64_t> by_second;
    if (!cfg_.drop_schedule.empty()) {
        for (const auto& d : cfg_.drop_schedule)
            if (d.count) by_second[cfg_.start_time + static_cast<std::int64_t>(d.time)] += d.count;
    } else if (cfg_.drops_total > 0) {
        const std::uint64_t events = std::min<std::uint64_t>(cfg_.drops_total, 64);
        std::vector<std::uint64_t> cuts{0, cfg_.drops_total};
        for (std::uint64_t i = 1; i < events; ++i) cuts.push_back(uniform_int(rng_, 0, cfg_.drops_total));
        std::sort(cuts.begin(), cuts.end());
        for (std::size_t i = 1; i < cuts.size(); ++i) {
            const auto t = cfg_.start_time + static_cast<std::int64_t>(uniform01(rng_) * cfg_.duration);
            if (cuts[i] > cuts[i - 1]) by_second[t] += cuts[i] - cuts[i - 1];
        }
    }
    std::vector<ingest::DropRecord> out;
    for (const auto& [t, n] : by_second) {
        out.push_back({t, n});
        truth_.drops_total += n;
    }
    return out;
}

std::vector<wire::MetaTag> Generator::file_tags(const File& f, std::mt19937_64& local) const {
    std::vector<wire::MetaTag> tags{wire::MetaTag::name(f.name), wire::MetaTag::size(f.size_bytes),
                                    wire::MetaTag::type(kTypes[f.type])};
    if (uniform01(local) < 0.1) tags.push_back(wire::MetaTag::other(0xD5, f.type == 1 ? "XVID" : "MPEG"));
    return tags;
}

wire::EdonkeyMessage Generator::materialize(const Plan& p, std::mt19937_64& local) {
    const Client& c = clients_[p.client];
    switch (p.type) {
    case kServerListQuery: return wire::ServerListQuery{};
    case kServerListAnswer: {
        wire::ServerListAnswer m;
        const auto n = uniform_int(local, 1, 6);
        for (std::uint64_t i = 0; i < n; ++i)
            m.servers.push_back({kServerListBase + static_cast<std::uint32_t>(uniform_int(local, 1, 254)),
                                 static_cast<std::uint16_t>(4661 + uniform_int(local, 0, 3))});
        return m;
    }
    case kServerStatus:
        return wire::ServerStatus{static_cast<std::uint32_t>(uniform_int(local, 1'000, 900'000)),
                                  static_cast<std::uint32_t>(uniform_int(local, 10'000, 16'000'000)),
                                  descriptions_[uniform_int(local, 0, descriptions_.size() - 1)]};
    case kFileSearchQuery: {
        wire::FileSearchQuery m;
        m.pattern = vocabulary_[uniform_int(local, 0, vocabulary_.size() - 1)];
        if (uniform01(local) < 0.3) m.pattern += " " + vocabulary_[uniform_int(local, 0, vocabulary_.size() - 1)];
        if (uniform01(local) < 0.4) m.filters.push_back(wire::MetaTag::type(kTypes[uniform_int(local, 0, kTypes.size() - 1)]));
        if (uniform01(local) < 0.3)
            m.filters.push_back(wire::MetaTag::size(static_cast<std::uint32_t>(uniform_int(local, 1, 1'000'000) * 1024)));
        return m;
    }
    case kFileSearchAnswer: {
        wire::FileSearchAnswer m;
        const auto n = uniform_int(local, 1, 5);
        for (std::uint64_t i = 0; i < n; ++i) {
            const File& f = files_[uniform_int(local, 0, files_.size() - 1)];
            m.results.push_back({f.id, file_tags(f, local)});
        }
        return m;
    }
    case kSourceSearchQuery: {
        wire::SourceSearchQuery m;
        for (std::uint32_t i = 0; i < p.b; ++i) m.files.push_back(files_[asks_[p.client][p.a + i]].id);
        return m;
    }
    case kSourceSearchAnswer: {
        wire::SourceSearchAnswer m;
        m.file = files_[p.a].id;
        const auto& prov = providers_[p.a];
        std::vector<std::uint32_t> pick;
        if (prov.size() <= kMaxSources) {
            pick = prov;
        } else {
            std::unordered_set<std::size_t> taken;
            while (pick.size() < kMaxSources) {
                const auto i = uniform_int(local, 0, prov.size() - 1);
                if (taken.insert(i).second) pick.push_back(prov[i]);
            }
        }
        for (auto s : pick) m.sources.push_back({clients_[s].id, clients_[s].port});
        return m;
    }
    default: {
        wire::Announce m;
        m.client = c.id;
        m.port = c.port;
        for (std::uint32_t i = 0; i < p.b; ++i) {
            const File& f = files_[provides_[p.client][p.a + i]];
            m.files.push_back({f.id, file_tags(f, local)});
        }
        return m;
    }
    }
}

// Mirrors the anonymizer's traversal with raw identifiers and hash maps:
// peer first, then body fields in wire order.
void Generator::observe(const Plan& p, const wire::EdonkeyMessage& m) {
    const auto client = [&](std::uint32_t raw) {
        const auto [it, inserted] = client_map_.try_emplace(raw, static_cast<ClientIndex>(client_map_.size()));
        if (inserted) truth_.clients.emplace_back(raw, it->second);
    };
    const auto file = [&](std::uint32_t number) {
        const auto [it, inserted] = file_map_.try_emplace(number, static_cast<FileIndex>(file_map_.size()));
        if (inserted) truth_.files.emplace_back(files_[number].id, it->second);
    };
    const auto size = [&](std::uint32_t number) { size_kb_.try_emplace(number, files_[number].size_bytes / 1024); };

    if (truth_.summary.messages == 0) {
        first_ts_ = last_ts_ = p.ts;
    } else {
        first_ts_ = std::min(first_ts_, p.ts);
        last_ts_ = std::max(last_ts_, p.ts);
    }
    ++truth_.summary.messages;
    ++truth_.summary.per_type[m.index()];
    const Client& peer = clients_[p.client];
    client(peer.ip);

    switch (p.type) {
    case kFileSearchQuery: ++truth_.summary.file_search_queries; break;
    case kFileSearchAnswer: {
        const auto& a = std::get<wire::FileSearchAnswer>(m);
        for (const auto& r : a.results) {
            const auto number = number_of_.at(r.file);
            file(number);
            size(number);
        }
        break;
    }
    case kSourceSearchQuery:
        for (std::uint32_t i = 0; i < p.b; ++i) {
            const auto number = asks_[p.client][p.a + i];
            file(number);
            if (ask_seen_.insert((std::uint64_t{peer.ip} << 32) | number).second)
                truth_.asks.emplace_back(peer.ip, files_[number].id);
        }
        break;
    case kSourceSearchAnswer: {
        file(p.a);
        for (const auto& s : std::get<wire::SourceSearchAnswer>(m).sources) client(s.client.value);
        break;
    }
    case kAnnounce:
        client(peer.id.value);
        for (std::uint32_t i = 0; i < p.b; ++i) {
            const auto number = provides_[p.client][p.a + i];
            file(number);
            size(number);
            if (provide_seen_.insert((std::uint64_t{peer.id.value} << 32) | number).second)
                truth_.provides.emplace_back(peer.id.value, files_[number].id);
        }
        break;
    default: break;
    }
}

void Generator::emit_noise(ingest::PcapWriter& w, std::int64_t ts, bool orphan) {
    std::vector<std::uint8_t> junk(orphan ? 64 : 40);
    for (auto& b : junk) b = static_cast<std::uint8_t>(rng_());
    const ingest::Endpoint server{kServerIp, cfg_.server_port};
    if (orphan) {
        // First fragment of a datagram whose remainder never arrives; the
        // source subnet is never used by clients, so the group cannot merge.
        const ingest::Endpoint src{kOrphanBase + (orphan_host_++ & 0xFFFF), 4672};
        const auto frames = ingest::build_udp_frames(src, server, ip_id_++, junk, 32);
        w.write(ts, frames.front());
        ++truth_.fragments;
        ++truth_.fragment_groups;
    } else {
        // IPv4 total length larger than what was captured.
        const ingest::Endpoint src{kOrphanBase + 0x10000 + static_cast<std::uint32_t>(uniform_int(rng_, 1, 0xFFFE)), 4672};
        auto frame = ingest::build_udp_frames(src, server, ip_id_++, junk).front();
        frame.resize(14 + 20 + 4);
        w.write(ts, frame);
    }
    ++truth_.malformed;
}

void Generator::finish_truth() {
    std::map<std::uint64_t, std::uint64_t> sizes;
    for (const auto& [f, kb] : size_kb_) sizes[f] = kb;
    truth_.distributions = distributions_from_relations(truth_.provides, truth_.asks,
                                                        histogram(analyze::ReportKind::FileSizeKB, sizes, true));
    truth_.summary.distinct_clients = client_map_.size();
    truth_.summary.distinct_files = file_map_.size();
    truth_.span_us = truth_.summary.messages ? last_ts_ - first_ts_ : 0;
    truth_.summary.span_seconds = static_cast<double>(truth_.span_us) / 1e6;

    for (const auto& c : clients_) truth_.secrets.push_back({Secret::Kind::Ip, std::to_string(c.ip)});
    for (const auto& f : files_) {
        truth_.secrets.push_back({Secret::Kind::FileId, f.id.hex()});
        truth_.secrets.push_back({Secret::Kind::String, f.name});
    }
    for (const auto& v : vocabulary_) truth_.secrets.push_back({Secret::Kind::String, v});
    for (const auto& d : descriptions_) truth_.secrets.push_back({Secret::Kind::String, d});
}

Workload Generator::run(const std::filesystem::path& pcap) {
    build_clients();
    build_files();
    build_relations();
    build_plans();
    Workload out;
    out.drops = build_drops();

    std::vector<std::pair<std::uint64_t, bool>> noise;
    for (std::uint32_t i = 0; i < cfg_.broken_frames; ++i) noise.emplace_back(uniform_int(rng_, 0, plans_.size()), false);
    for (std::uint32_t i = 0; i < cfg_.orphan_fragments; ++i) noise.emplace_back(uniform_int(rng_, 0, plans_.size()), true);
    std::sort(noise.begin(), noise.end());

    ingest::PcapWriter writer(pcap);
    const ingest::Endpoint server{kServerIp, cfg_.server_port};
    std::size_t next_noise = 0;
    for (std::size_t i = 0; i < plans_.size(); ++i) {
        const Plan& p = plans_[i];
        for (; next_noise < noise.size() && noise[next_noise].first == i; ++next_noise)
            emit_noise(writer, p.ts, noise[next_noise].second);

        std::mt19937_64 local(splitmix64(cfg_.seed ^ splitmix64(p.order)));
        const auto msg = materialize(p, local);
        auto bytes = wire::encode_message(msg);

        bool corrupted = false;
        if (uniform01(rng_) < cfg_.malformed_rate) {
            corrupted = true;
            if (bytes.size() > 2 && uniform01(rng_) < cfg_.truncate_share) {
                bytes.resize(uniform_int(rng_, 2, bytes.size() - 1));
                ++truth_.undecoded_by_kind[static_cast<std::size_t>(wire::DecodeError::StructurallyInvalid)];
            } else {
                const auto extra = uniform_int(rng_, 1, 8);
                for (std::uint64_t k = 0; k < extra; ++k) bytes.push_back(static_cast<std::uint8_t>(rng_()));
                ++truth_.undecoded_by_kind[static_cast<std::size_t>(wire::DecodeError::TrailingBytes)];
            }
        }

        const Client& c = clients_[p.client];
        const ingest::Endpoint client{c.ip, c.port};
        const bool down = from_server(p.type);
        std::size_t fragment_size = 0;
        if (uniform01(rng_) < cfg_.fragment_rate) fragment_size = std::max<std::size_t>(8, (bytes.size() + 8) / 2 / 8 * 8);
        const auto frames = ingest::build_udp_frames(down ? server : client, down ? client : server, ip_id_++, bytes,
                                                     fragment_size);
        for (const auto& f : frames) writer.write(p.ts, f);
        if (frames.size() > 1) {
            truth_.fragments += frames.size();
            ++truth_.fragment_groups;
            ++truth_.reassembled;
        }
        ++truth_.datagrams;
        if (corrupted) {
            ++truth_.undecoded;
        } else {
            ++truth_.decoded;
            observe(p, msg);
        }
    }
    const std::int64_t tail_ts = plans_.empty() ? cfg_.start_time * ingest::kMicrosPerSecond : plans_.back().ts;
    for (; next_noise < noise.size(); ++next_noise) emit_noise(writer, tail_ts, noise[next_noise].second);
    truth_.frames = writer.records();

    finish_truth();
    truth_.write(truth_path(pcap));
    ingest::write_drop_sidecar(drops_path(pcap), out.drops);
    out.truth = std::move(truth_);
    return out;
}

} // namespace

Workload generate_workload(const WorkloadConfig& cfg, const std::filesystem::path& pcap) {
    cfg.validate();
    Generator g(cfg);
    return g.run(pcap);
}

// --- sidecar -------------------------------------------------------------------

namespace {

std::string hex_bytes(std::string_view s) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(s.size() * 2);
    for (unsigned char ch : s) {
        out.push_back(digits[ch >> 4]);
        out.push_back(digits[ch & 15]);
    }
    return out;
}

std::string unhex_bytes(std::string_view h) {
    if (h.size() % 2) throw std::runtime_error("odd-length hex string");
    const auto nib = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        throw std::runtime_error("bad hex digit");
    };
    std::string out(h.size() / 2, '\0');
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<char>(nib(h[2 * i]) << 4 | nib(h[2 * i + 1]));
    return out;
}

const char* secret_kind_name(Secret::Kind k) {
    switch (k) {
    case Secret::Kind::Ip: return "ip";
    case Secret::Kind::FileId: return "fid";
    case Secret::Kind::String: return "str";
    }
    return "?";
}

constexpr std::array<wire::Opcode, wire::kVariantCount> kOpcodes = {
    wire::Opcode::ServerListQuery,   wire::Opcode::ServerListAnswer,  wire::Opcode::ServerStatus,
    wire::Opcode::FileSearchQuery,   wire::Opcode::FileSearchAnswer,  wire::Opcode::SourceSearchQuery,
    wire::Opcode::SourceSearchAnswer, wire::Opcode::Announce};

constexpr std::array<wire::DecodeError, wire::kDecodeErrorKinds> kErrors = {
    wire::DecodeError::StructurallyInvalid, wire::DecodeError::UnknownOpcode, wire::DecodeError::BadMagic,
    wire::DecodeError::TrailingBytes};

} // namespace

void GroundTruth::write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "# edtrace ground truth\n[expected]\n";
    out << "frames " << frames << "\ndatagrams " << datagrams << "\ndecoded " << decoded << "\nundecoded " << undecoded
        << '\n';
    for (std::size_t i = 0; i < kErrors.size(); ++i)
        out << "undecoded." << wire::to_string(kErrors[i]) << ' ' << undecoded_by_kind[i] << '\n';
    out << "fragments " << fragments << "\nfragment_groups " << fragment_groups << "\nreassembled " << reassembled
        << "\nmalformed " << malformed << "\ndrops_total " << drops_total << '\n';
    out << "messages " << summary.messages << '\n';
    for (std::size_t i = 0; i < kOpcodes.size(); ++i)
        out << "messages." << wire::opcode_name(kOpcodes[i]) << ' ' << summary.per_type[i] << '\n';
    out << "distinct_clients " << summary.distinct_clients << "\ndistinct_files " << summary.distinct_files
        << "\nfile_search_queries " << summary.file_search_queries << "\nspan_us " << span_us << '\n';
    for (const auto& d : distributions) {
        out << "dist." << analyze::report_name(d.kind);
        for (const auto& p : d.points) out << ' ' << p.x << ':' << p.y;
        out << '\n';
    }
    out << "[clients]\n";
    for (const auto& [raw, idx] : clients) out << raw << ' ' << idx << '\n';
    out << "[files]\n";
    for (const auto& [f, idx] : files) out << f.hex() << ' ' << idx << '\n';
    out << "[provides]\n";
    for (const auto& [c, f] : provides) out << c << ' ' << f.hex() << '\n';
    out << "[asks]\n";
    for (const auto& [c, f] : asks) out << c << ' ' << f.hex() << '\n';
    out << "[secrets]\n";
    for (const auto& s : secrets)
        out << secret_kind_name(s.kind) << ' ' << (s.kind == Secret::Kind::String ? hex_bytes(s.value) : s.value) << '\n';
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

GroundTruth GroundTruth::read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    GroundTruth t;
    std::map<std::string, std::uint64_t> expected;
    std::map<std::string, std::string> dists;
    std::string section, line;
    std::size_t lineno = 0;
    const auto fail = [&](const std::string& what) {
        throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + what);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail("bad section header");
            section = line.substr(1, line.size() - 2);
            continue;
        }
        std::istringstream ls(line);
        std::string a, b;
        ls >> a;
        std::getline(ls >> std::ws, b);
        if (section == "expected") {
            if (a.rfind("dist.", 0) == 0) {
                dists[a.substr(5)] = b;
            } else {
                try {
                    expected[a] = std::stoull(b);
                } catch (const std::exception&) {
                    fail("bad value for " + a);
                }
            }
        } else if (section == "clients") {
            t.clients.emplace_back(static_cast<std::uint32_t>(std::stoul(a)), static_cast<ClientIndex>(std::stoul(b)));
        } else if (section == "files") {
            t.files.emplace_back(wire::FileId::from_hex(a), static_cast<FileIndex>(std::stoul(b)));
        } else if (section == "provides") {
            t.provides.emplace_back(static_cast<std::uint32_t>(std::stoul(a)), wire::FileId::from_hex(b));
        } else if (section == "asks") {
            t.asks.emplace_back(static_cast<std::uint32_t>(std::stoul(a)), wire::FileId::from_hex(b));
        } else if (section == "secrets") {
            if (a == "ip") t.secrets.push_back({Secret::Kind::Ip, b});
            else if (a == "fid") t.secrets.push_back({Secret::Kind::FileId, b});
            else if (a == "str") t.secrets.push_back({Secret::Kind::String, unhex_bytes(b)});
            else fail("unknown secret kind " + a);
        } else {
            fail("line outside a known section");
        }
    }
    const auto get = [&](const std::string& key) {
        auto it = expected.find(key);
        if (it == expected.end()) throw std::runtime_error(path.string() + ": missing expected." + key);
        return it->second;
    };
    t.frames = get("frames");
    t.datagrams = get("datagrams");
    t.decoded = get("decoded");
    t.undecoded = get("undecoded");
    for (std::size_t i = 0; i < kErrors.size(); ++i)
        t.undecoded_by_kind[i] = get("undecoded." + std::string(wire::to_string(kErrors[i])));
    t.fragments = get("fragments");
    t.fragment_groups = get("fragment_groups");
    t.reassembled = get("reassembled");
    t.malformed = get("malformed");
    t.drops_total = get("drops_total");
    t.summary.messages = get("messages");
    for (std::size_t i = 0; i < kOpcodes.size(); ++i)
        t.summary.per_type[i] = get("messages." + std::string(wire::opcode_name(kOpcodes[i])));
    t.summary.distinct_clients = get("distinct_clients");
    t.summary.distinct_files = get("distinct_files");
    t.summary.file_search_queries = get("file_search_queries");
    t.span_us = static_cast<std::int64_t>(get("span_us"));
    t.summary.span_seconds = static_cast<double>(t.span_us) / 1e6;
    for (std::size_t k = 0; k < analyze::kReportKinds; ++k) {
        const auto kind = analyze::kAllReportKinds[k];
        auto& d = t.distributions[k];
        d.kind = kind;
        auto it = dists.find(std::string(analyze::report_name(kind)));
        if (it == dists.end()) throw std::runtime_error(path.string() + ": missing dist." + std::string(analyze::report_name(kind)));
        std::istringstream ps(it->second);
        std::string pt;
        while (ps >> pt) {
            const auto colon = pt.find(':');
            if (colon == std::string::npos) throw std::runtime_error(path.string() + ": bad point " + pt);
            analyze::Point p{std::stoull(pt.substr(0, colon)), std::stoull(pt.substr(colon + 1))};
            d.points.push_back(p);
            d.total_entities += p.y;
        }
    }
    return t;
}

} // namespace edtrace::generate
