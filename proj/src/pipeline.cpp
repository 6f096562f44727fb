#include "edtrace/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "edtrace/trace.hpp"

namespace edtrace::pipeline {

using nlohmann::json;

namespace {

constexpr std::array<wire::Opcode, wire::kVariantCount> kOpcodes = {
    wire::Opcode::ServerListQuery,   wire::Opcode::ServerListAnswer,  wire::Opcode::ServerStatus,
    wire::Opcode::FileSearchQuery,   wire::Opcode::FileSearchAnswer,  wire::Opcode::SourceSearchQuery,
    wire::Opcode::SourceSearchAnswer, wire::Opcode::Announce};

constexpr std::array<wire::DecodeError, wire::kDecodeErrorKinds> kErrors = {
    wire::DecodeError::StructurallyInvalid, wire::DecodeError::UnknownOpcode, wire::DecodeError::BadMagic,
    wire::DecodeError::TrailingBytes};

std::string dotted(std::uint32_t ip) {
    return std::to_string(ip >> 24) + "." + std::to_string((ip >> 16) & 255) + "." + std::to_string((ip >> 8) & 255) +
           "." + std::to_string(ip & 255);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out || !(out << text)) throw std::runtime_error("cannot write " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

void RunConfig::validate() const {
    if (input.empty()) throw ConfigError("an input pcap is required");
    if (output.empty()) throw ConfigError("an output trace path is required");
    if (client_bits == 0 || client_bits > 32) throw ConfigError("client bits must be in 1..32");
    try {
        index_bytes.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (loss_bucket_seconds <= 0) throw ConfigError("loss bucket must be positive");
    const auto same = [](const std::filesystem::path& a, const std::filesystem::path& b) {
        return std::filesystem::weakly_canonical(a) == std::filesystem::weakly_canonical(b);
    };
    if (same(input, output)) throw ConfigError("input and output are the same file");
    if (reports && same(*reports, output)) throw ConfigError("report directory and output are the same path");
    if (drops && same(*drops, output)) throw ConfigError("drop sidecar and output are the same file");
    if (resume_clients.has_value() != resume_files.has_value())
        throw ConfigError("resuming needs both the client and the file snapshot");
}

double RunReport::undecoded_percent() const {
    const auto n = decoded + undecoded;
    return n ? 100.0 * static_cast<double>(undecoded) / static_cast<double>(n) : 0.0;
}

double RunReport::messages_per_second() const {
    return elapsed_seconds > 0 ? static_cast<double>(decoded + undecoded) / elapsed_seconds : 0.0;
}

std::string RunReport::to_json() const {
    json j;
    j["ingest"] = {{"packets_seen", ingest.packets_seen},
                   {"fragments", ingest.fragments},
                   {"fragment_groups", ingest.fragment_groups},
                   {"malformed", ingest.malformed},
                   {"failed_groups", ingest.failed_groups},
                   {"reassembled", ingest.reassembled},
                   {"filtered", ingest.filtered},
                   {"datagrams", ingest.datagrams},
                   {"first_timestamp_us", ingest.first_timestamp},
                   {"last_timestamp_us", ingest.last_timestamp},
                   {"drops_total", ingest.total_drops()}};
    json drops = json::array();
    for (const auto& d : ingest.drops_reported) drops.push_back({d.epoch_seconds, d.drops});
    j["ingest"]["drops"] = drops;
    j["decoded"] = decoded;
    j["undecoded"] = undecoded;
    j["undecoded_percent"] = undecoded_percent();
    for (std::size_t i = 0; i < kErrors.size(); ++i)
        j["undecoded_by_kind"][std::string(wire::to_string(kErrors[i]))] = undecoded_by_kind[i];
    for (std::size_t i = 0; i < kOpcodes.size(); ++i)
        j["messages"][std::string(wire::opcode_name(kOpcodes[i]))] = per_type[i];
    j["distinct_clients"] = distinct_clients;
    j["distinct_files"] = distinct_files;
    j["client_overflow"] = client_overflow;
    j["skewed_timestamps"] = skewed_timestamps;
    j["client_bits"] = client_bits;
    j["index_bytes"] = {index_bytes.first, index_bytes.second};
    j["elapsed_seconds"] = elapsed_seconds;
    j["messages_per_second"] = messages_per_second();
    return j.dump(2) + "\n";
}

RunReport RunReport::from_json(const std::string& text) {
    const json j = json::parse(text);
    RunReport r;
    const auto& in = j.at("ingest");
    r.ingest.packets_seen = in.at("packets_seen");
    r.ingest.fragments = in.at("fragments");
    r.ingest.fragment_groups = in.at("fragment_groups");
    r.ingest.malformed = in.at("malformed");
    r.ingest.failed_groups = in.at("failed_groups");
    r.ingest.reassembled = in.at("reassembled");
    r.ingest.filtered = in.at("filtered");
    r.ingest.datagrams = in.at("datagrams");
    r.ingest.first_timestamp = in.at("first_timestamp_us");
    r.ingest.last_timestamp = in.at("last_timestamp_us");
    for (const auto& d : in.at("drops")) r.ingest.drops_reported.push_back({d.at(0), d.at(1)});
    r.decoded = j.at("decoded");
    r.undecoded = j.at("undecoded");
    for (std::size_t i = 0; i < kErrors.size(); ++i)
        r.undecoded_by_kind[i] = j.at("undecoded_by_kind").at(std::string(wire::to_string(kErrors[i])));
    for (std::size_t i = 0; i < kOpcodes.size(); ++i)
        r.per_type[i] = j.at("messages").at(std::string(wire::opcode_name(kOpcodes[i])));
    r.distinct_clients = j.at("distinct_clients");
    r.distinct_files = j.at("distinct_files");
    r.client_overflow = j.at("client_overflow");
    r.skewed_timestamps = j.at("skewed_timestamps");
    r.client_bits = j.at("client_bits");
    r.index_bytes = {j.at("index_bytes").at(0), j.at("index_bytes").at(1)};
    r.elapsed_seconds = j.at("elapsed_seconds");
    return r;
}

RunReport run_pipeline(const RunConfig& cfg) {
    cfg.validate();
    const auto started = std::chrono::steady_clock::now();

    ingest::ReaderOptions ro;
    ro.server_port = cfg.server_port;
    if (cfg.drops) {
        ro.drop_sidecar = cfg.drops;
    } else if (const auto side = generate::drops_path(cfg.input); std::filesystem::exists(side)) {
        ro.drop_sidecar = side;
    }
    ingest::PcapReader reader(cfg.input, ro);

    AnonymizerOptions ao;
    ao.client_key_bits = cfg.client_bits;
    ao.index_bytes = cfg.index_bytes;
    ao.enabled = cfg.anonymize;
    std::optional<Anonymizer> anon;
    if (cfg.resume_clients) {
        auto clients = ClientTable::load(*cfg.resume_clients);
        auto files = FileTable::load(*cfg.resume_files);
        if (clients.key_bits() != cfg.client_bits || !(files.index_bytes() == cfg.index_bytes))
            throw ConfigError("snapshot geometry does not match --client-bits / --index-bytes");
        anon.emplace(ao, std::move(clients), std::move(files));
    } else {
        anon.emplace(ao);
    }

    RunReport r;
    r.client_bits = cfg.client_bits;
    r.index_bytes = cfg.index_bytes;
    {
        auto out = trace::open_output(cfg.output);
        trace::TraceWriter writer(*out);
        bool have_start = false;
        std::uint64_t seq = 0;
        while (auto d = reader.next()) {
            if (!have_start) {
                anon->set_capture_start(reader.stats().first_timestamp);
                have_start = true;
            }
            auto decoded = wire::decode_message(d->payload);
            if (!decoded) {
                ++r.undecoded;
                ++r.undecoded_by_kind[static_cast<std::size_t>(decoded.error())];
                continue;
            }
            ++r.decoded;
            ++r.per_type[decoded->index()];
            const bool to_server = d->dst_port == cfg.server_port;
            const wire::ClientId peer{to_server ? d->src_ip : d->dst_ip};
            writer.write({seq++, anon->anonymize(*decoded, d->timestamp, peer,
                                                 to_server ? Direction::ToServer : Direction::FromServer)});
        }
        writer.finish();
        out->flush();
        if (!*out) throw trace::TraceError("write failed for " + cfg.output.string());
    }

    r.ingest = reader.stats();
    r.distinct_clients = anon->clients().size();
    r.distinct_files = anon->files().size();
    r.client_overflow = anon->clients().overflow_size();
    r.skewed_timestamps = anon->skewed_timestamps();
    r.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    if (cfg.reports) {
        const auto& dir = *cfg.reports;
        std::filesystem::create_directories(dir);
        write_text(dir / kRunReportFile, r.to_json());
        std::ostringstream losses;
        losses << "# start_s\tlosses\tcumulative\n";
        for (const auto& b : ingest::loss_timeseries(r.ingest, cfg.loss_bucket_seconds))
            losses << b.start << '\t' << b.losses << '\t' << b.cumulative << '\n';
        write_text(dir / kLossFile, losses.str());
        std::ostringstream buckets;
        buckets << "# occupancy\tbuckets\n";
        for (const auto& [occ, n] : bucket_size_distribution(anon->files())) buckets << occ << '\t' << n << '\n';
        write_text(dir / kBucketFile, buckets.str());
        anon->clients().save(dir / kClientSnapshot);
        anon->files().save(dir / kFileSnapshot);
    }
    return r;
}

// --- analyze ---------------------------------------------------------------------

std::string summary_json(const analyze::Summary& s) {
    json j;
    j["messages"] = s.messages;
    j["distinct_clients"] = s.distinct_clients;
    j["distinct_files"] = s.distinct_files;
    j["span_seconds"] = s.span_seconds;
    j["file_search_queries"] = s.file_search_queries;
    for (std::size_t i = 0; i < kOpcodes.size(); ++i) j["per_type"][std::string(wire::opcode_name(kOpcodes[i]))] = s.per_type[i];
    return j.dump(2) + "\n";
}

AnalyzeResult analyze_trace(const std::filesystem::path& trace_path,
                            const std::optional<std::filesystem::path>& report_dir, analyze::PeakOptions peak_opts) {
    auto in = trace::open_input(trace_path);
    trace::TraceReader reader(*in);
    analyze::DistributionBuilder builder;
    AnalyzeResult res;
    try {
        while (auto e = reader.next()) {
            builder.add(*e);
            ++res.events;
        }
    } catch (const trace::TraceTruncated&) {
        res.truncated = true;
    }
    res.summary = builder.summary();
    res.reports = builder.reports();
    for (const auto& rep : res.reports) {
        FitResult f;
        f.kind = rep.kind;
        try {
            f.fit = analyze::fit_power_law(rep);
        } catch (const analyze::FitError& e) {
            f.error = e.what();
        }
        res.fits.push_back(std::move(f));
        for (const auto& p : analyze::find_peaks(rep, peak_opts)) res.peaks.emplace_back(rep.kind, p);
    }

    if (report_dir) {
        std::filesystem::create_directories(*report_dir);
        for (const auto& rep : res.reports)
            analyze::write_report_tsv(rep, *report_dir / (std::string(analyze::report_name(rep.kind)) + ".tsv"));
        std::ostringstream fits;
        fits << "# report\texponent\tprefactor\tx_min\tx_max\tpoints\trms_residual\n";
        for (const auto& f : res.fits) {
            fits << analyze::report_name(f.kind);
            if (f.fit)
                fits << '\t' << f.fit->exponent << '\t' << f.fit->prefactor << '\t' << f.fit->fit_range.x_min << '\t'
                     << f.fit->fit_range.x_max << '\t' << f.fit->points << '\t' << f.fit->residual << '\n';
            else
                fits << "\tnan\tnan\t-\t-\t0\t" << f.error << '\n';
        }
        write_text(*report_dir / "fits.tsv", fits.str());
        std::ostringstream peaks;
        peaks << "# report\tx\ty\n";
        for (const auto& [kind, p] : res.peaks) peaks << analyze::report_name(kind) << '\t' << p.x << '\t' << p.y << '\n';
        write_text(*report_dir / "peaks.tsv", peaks.str());
        write_text(*report_dir / "summary.json", summary_json(res.summary));
    }
    return res;
}

// --- leak scanning ---------------------------------------------------------------

namespace {

// Multi-pattern byte matcher; the state carries across calls so a match may
// straddle two fed chunks.
class AhoCorasick {
public:
    static constexpr std::uint32_t kNone = UINT32_MAX;

    AhoCorasick() : nodes_(1), children_(1) {}

    void add(std::string_view pattern, std::uint32_t id) {
        if (pattern.empty()) return;
        std::uint32_t s = 0;
        for (unsigned char c : pattern) {
            const auto key = edge(s, c);
            auto it = next_.find(key);
            if (it == next_.end()) {
                const auto n = static_cast<std::uint32_t>(nodes_.size());
                nodes_.push_back({});
                children_.emplace_back();
                children_[s].push_back(n);
                it = next_.emplace(key, n).first;
                nodes_[n].byte = c;
            }
            s = it->second;
        }
        if (nodes_[s].out == kNone) nodes_[s].out = id;
    }

    void build() {
        std::vector<std::uint32_t> queue;
        for (auto c : children_[0]) queue.push_back(c);
        for (std::size_t qi = 0; qi < queue.size(); ++qi) {
            const auto u = queue[qi];
            const auto f = nodes_[u].fail;
            nodes_[u].dict = nodes_[f].out != kNone ? f : nodes_[f].dict;
            for (auto v : children_[u]) {
                std::uint32_t g = f;
                std::uint32_t target = 0;
                while (true) {
                    auto it = next_.find(edge(g, nodes_[v].byte));
                    if (it != next_.end() && it->second != v) {
                        target = it->second;
                        break;
                    }
                    if (g == 0) break;
                    g = nodes_[g].fail;
                }
                nodes_[v].fail = target;
                queue.push_back(v);
            }
        }
        children_.clear();
        children_.shrink_to_fit();
    }

    template <class F>
    void feed(std::string_view bytes, F&& on_match) {
        for (unsigned char c : bytes) {
            while (true) {
                auto it = next_.find(edge(state_, c));
                if (it != next_.end()) {
                    state_ = it->second;
                    break;
                }
                if (state_ == 0) break;
                state_ = nodes_[state_].fail;
            }
            for (auto s = nodes_[state_].out != kNone ? state_ : nodes_[state_].dict; s != kNone && s != 0;
                 s = nodes_[s].dict)
                on_match(nodes_[s].out);
        }
    }

    bool empty() const { return nodes_.size() == 1; }

private:
    struct Node {
        std::uint32_t fail = 0;
        std::uint32_t out = kNone;
        std::uint32_t dict = kNone;  // nearest proper suffix node with an output
        std::uint8_t byte = 0;
    };
    static std::uint64_t edge(std::uint32_t s, unsigned char c) { return (std::uint64_t{s} << 8) | c; }

    std::vector<Node> nodes_;
    std::vector<std::vector<std::uint32_t>> children_;
    std::unordered_map<std::uint64_t, std::uint32_t> next_;
    std::uint32_t state_ = 0;
};

bool is_token_delimiter(char c) {
    return c == '"' || c == '<' || c == '>' || c == '=' || c == '/' || c == ' ' || c == '\t' || c == '\r' || c == '\n';
}

} // namespace

struct LeakScanner::Impl {
    std::vector<generate::Secret> patterns;  // id -> secret as reported
    AhoCorasick raw;                         // strings and raw fileID bytes
    AhoCorasick hex;                         // lowercase fileID hex, fed lowercased text
    std::unordered_map<std::string, std::uint32_t> ip_tokens;
    std::vector<Leak> leaks;
    std::uint64_t total = 0;
    std::string lowered;

    void hit(std::uint32_t id, std::uint64_t line) {
        ++total;
        if (leaks.size() < 100) leaks.push_back({patterns[id].kind, patterns[id].value, line});
    }
};

LeakScanner::LeakScanner(const std::vector<generate::Secret>& secrets) : impl_(std::make_unique<Impl>()) {
    auto& m = *impl_;
    for (const auto& s : secrets) {
        const auto id = static_cast<std::uint32_t>(m.patterns.size());
        m.patterns.push_back(s);
        switch (s.kind) {
        case generate::Secret::Kind::Ip: {
            const auto ip = static_cast<std::uint32_t>(std::stoul(s.value));
            m.ip_tokens.emplace(s.value, id);
            m.ip_tokens.emplace(dotted(ip), id);
            break;
        }
        case generate::Secret::Kind::FileId: {
            const auto f = wire::FileId::from_hex(s.value);
            m.hex.add(f.hex(), id);
            m.raw.add(std::string_view(reinterpret_cast<const char*>(f.bytes.data()), f.bytes.size()), id);
            break;
        }
        case generate::Secret::Kind::String: m.raw.add(s.value, id); break;
        }
    }
    m.raw.build();
    m.hex.build();
}

LeakScanner::~LeakScanner() = default;

void LeakScanner::scan_line(std::string_view line, std::uint64_t lineno) {
    auto& m = *impl_;
    const auto report = [&](std::uint32_t id) { m.hit(id, lineno); };
    // matchers keep state across lines, so a secret split by a line break still hits
    m.raw.feed(line, report);
    m.lowered.assign(line.begin(), line.end());
    for (auto& c : m.lowered) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    m.hex.feed(m.lowered, report);
    if (m.ip_tokens.empty()) return;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && is_token_delimiter(line[i])) ++i;
        std::size_t j = i;
        while (j < line.size() && !is_token_delimiter(line[j])) ++j;
        if (j > i) {
            auto it = m.ip_tokens.find(std::string(line.substr(i, j - i)));
            if (it != m.ip_tokens.end()) report(it->second);
        }
        i = j;
    }
}

const std::vector<Leak>& LeakScanner::leaks() const { return impl_->leaks; }
std::uint64_t LeakScanner::total() const { return impl_->total; }

std::vector<Leak> scan_for_leaks(std::istream& xml, const std::vector<generate::Secret>& secrets, std::uint64_t* total) {
    LeakScanner scanner(secrets);
    std::string line;
    std::uint64_t n = 0;
    while (std::getline(xml, line)) scanner.scan_line(line, ++n);
    if (total) *total = scanner.total();
    return scanner.leaks();
}

// --- verification ----------------------------------------------------------------

std::string_view to_string(Check::Status s) {
    switch (s) {
    case Check::Status::Pass: return "pass";
    case Check::Status::Fail: return "FAIL";
    case Check::Status::Missing: return "MISSING";
    }
    return "?";
}

bool VerifyReport::passed() const {
    return !checks.empty() &&
           std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.status == Check::Status::Pass; });
}

namespace {

class Mismatches {
public:
    template <class A, class B>
    void expect(const std::string& what, const A& got, const B& want) {
        if (got == want) return;
        std::ostringstream ss;
        ss << what << ": got " << got << ", expected " << want;
        add(ss.str());
    }
    void add(std::string s) {
        if (count_++ < 5) text_ += (text_.empty() ? "" : "; ") + s;
    }
    Check check(std::string name, std::string pass_detail) const {
        if (count_ == 0) return {std::move(name), Check::Status::Pass, std::move(pass_detail)};
        return {std::move(name), Check::Status::Fail,
                text_ + (count_ > 5 ? " (+" + std::to_string(count_ - 5) + " more)" : "")};
    }

private:
    std::uint64_t count_ = 0;
    std::string text_;
};

Check missing(std::string name, const std::filesystem::path& p) {
    return {std::move(name), Check::Status::Missing, p.string() + " not found"};
}

std::string describe(const analyze::DistributionReport& r) {
    std::ostringstream ss;
    ss << r.points.size() << " points, " << r.total_entities << " entities";
    return ss.str();
}

} // namespace

VerifyReport verify_pipeline(const VerifyInputs& in) {
    VerifyReport rep;
    const auto truth_file = in.truth.value_or(generate::truth_path(in.pcap));
    if (!std::filesystem::exists(truth_file)) {
        for (const char* name : {"decode-counts", "anonymizer-tables", "distributions", "leaks", "losses"})
            rep.checks.push_back(missing(name, truth_file));
        return rep;
    }
    const auto truth = generate::GroundTruth::read(truth_file);

    // (a)
    const auto run_file = in.reports / kRunReportFile;
    std::optional<RunReport> run;
    if (!std::filesystem::exists(run_file)) {
        rep.checks.push_back(missing("decode-counts", run_file));
    } else {
        run = RunReport::from_json(read_text(run_file));
        Mismatches m;
        m.expect("packets", run->ingest.packets_seen, truth.frames);
        m.expect("datagrams", run->ingest.datagrams, truth.datagrams);
        m.expect("decoded", run->decoded, truth.decoded);
        m.expect("undecoded", run->undecoded, truth.undecoded);
        for (std::size_t i = 0; i < kErrors.size(); ++i)
            m.expect(std::string("undecoded.") + std::string(wire::to_string(kErrors[i])), run->undecoded_by_kind[i],
                     truth.undecoded_by_kind[i]);
        m.expect("fragments", run->ingest.fragments, truth.fragments);
        m.expect("fragment_groups", run->ingest.fragment_groups, truth.fragment_groups);
        m.expect("reassembled", run->ingest.reassembled, truth.reassembled);
        m.expect("malformed", run->ingest.malformed, truth.malformed);
        for (std::size_t i = 0; i < kOpcodes.size(); ++i)
            m.expect(std::string("messages.") + std::string(wire::opcode_name(kOpcodes[i])), run->per_type[i],
                     truth.summary.per_type[i]);
        rep.checks.push_back(m.check("decode-counts", std::to_string(run->decoded) + " decoded, " +
                                                          std::to_string(run->undecoded) + " undecoded"));
    }

    // (b)
    const auto cfile = in.reports / kClientSnapshot, ffile = in.reports / kFileSnapshot;
    if (!std::filesystem::exists(cfile)) {
        rep.checks.push_back(missing("anonymizer-tables", cfile));
    } else if (!std::filesystem::exists(ffile)) {
        rep.checks.push_back(missing("anonymizer-tables", ffile));
    } else {
        const auto clients = ClientTable::load(cfile);
        const auto files = FileTable::load(ffile);
        Mismatches m;
        m.expect("client count", clients.size(), truth.clients.size());
        m.expect("file count", files.size(), truth.files.size());
        for (const auto& [raw, idx] : truth.clients) {
            const auto got = clients.lookup(wire::ClientId{raw});
            if (!got) m.add("client " + std::to_string(raw) + " unassigned");
            else m.expect("client " + std::to_string(raw), *got, idx);
        }
        for (const auto& [f, idx] : truth.files) {
            const auto got = files.lookup(f);
            if (!got) m.add("file " + f.hex() + " unassigned");
            else m.expect("file " + f.hex(), *got, idx);
        }
        rep.checks.push_back(m.check("anonymizer-tables", std::to_string(truth.clients.size()) + " clients, " +
                                                              std::to_string(truth.files.size()) + " files"));
    }

    // (c) and (d) read the trace.
    if (!std::filesystem::exists(in.trace)) {
        rep.checks.push_back(missing("distributions", in.trace));
        rep.checks.push_back(missing("leaks", in.trace));
    } else {
        Mismatches m;
        try {
            const auto res = analyze_trace(in.trace, std::nullopt);
            if (res.truncated) m.add("trace is truncated");
            for (std::size_t k = 0; k < analyze::kReportKinds; ++k)
                if (!(res.reports[k] == truth.distributions[k]))
                    m.add(std::string(analyze::report_name(res.reports[k].kind)) + " differs (" +
                          describe(res.reports[k]) + " vs " + describe(truth.distributions[k]) + ")");
            m.expect("messages", res.summary.messages, truth.summary.messages);
            m.expect("distinct_clients", res.summary.distinct_clients, truth.summary.distinct_clients);
            m.expect("distinct_files", res.summary.distinct_files, truth.summary.distinct_files);
            m.expect("file_search_queries", res.summary.file_search_queries, truth.summary.file_search_queries);
            m.expect("span_seconds", res.summary.span_seconds, truth.summary.span_seconds);
            const auto& r = res.reports;
            m.expect("provide duality", analyze::pair_mass(r[0]), analyze::pair_mass(r[2]));
            m.expect("ask duality", analyze::pair_mass(r[1]), analyze::pair_mass(r[3]));
        } catch (const trace::TraceError& e) {
            m.add(e.what());
        }
        rep.checks.push_back(m.check("distributions", "five reports equal"));

        auto xml = trace::open_input(in.trace);
        std::uint64_t total = 0;
        const auto leaks = scan_for_leaks(*xml, truth.secrets, &total);
        if (total == 0) {
            rep.checks.push_back({"leaks", Check::Status::Pass, std::to_string(truth.secrets.size()) + " secrets scanned"});
        } else {
            std::ostringstream ss;
            ss << total << " hits; first at line " << leaks.front().line;
            rep.checks.push_back({"leaks", Check::Status::Fail, ss.str()});
        }
    }

    // (e)
    const auto loss_file = in.reports / kLossFile;
    if (!std::filesystem::exists(loss_file)) {
        rep.checks.push_back(missing("losses", loss_file));
    } else {
        std::ifstream lf(loss_file);
        std::string line;
        std::uint64_t last = 0;
        while (std::getline(lf, line)) {
            if (line.empty() || line[0] == '#') continue;
            std::istringstream ls(line);
            std::int64_t start = 0;
            std::uint64_t losses = 0;
            ls >> start >> losses >> last;
        }
        Mismatches m;
        m.expect("cumulative losses", last, truth.drops_total);
        if (run) m.expect("reported drops", run->ingest.total_drops(), truth.drops_total);
        rep.checks.push_back(m.check("losses", std::to_string(truth.drops_total) + " drops"));
    }
    return rep;
}

FileTable rebucket(const FileTable& t, IndexBytes index_bytes) {
    std::vector<FileTable::Entry> all;
    all.reserve(t.size());
    for (std::size_t b = 0; b < FileTable::kBuckets; ++b)
        for (const auto& e : t.bucket(b)) all.push_back(e);
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
    FileTable out(index_bytes);
    for (const auto& e : all) out.encode(e.file);
    return out;
}

} // namespace edtrace::pipeline
