// edtrace: generate | run | analyze | verify | bucket-stats
//
// Exit codes: 0 success, 1 I/O, 2 configuration, 3 verification failure.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "edtrace/generate.hpp"
#include "edtrace/pipeline.hpp"
#include "edtrace/trace.hpp"

namespace {

using namespace edtrace;

constexpr int kExitIo = 1;
constexpr int kExitConfig = 2;
constexpr int kExitVerify = 3;

struct ConfigFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

IndexBytes parse_index_bytes(const std::string& s) {
    const auto comma = s.find(',');
    if (comma == std::string::npos) throw ConfigFailure("--index-bytes expects i,j");
    IndexBytes b;
    try {
        b.first = static_cast<unsigned>(std::stoul(s.substr(0, comma)));
        b.second = static_cast<unsigned>(std::stoul(s.substr(comma + 1)));
        b.validate();
    } catch (const std::exception& e) {
        throw ConfigFailure(std::string("--index-bytes: ") + e.what());
    }
    return b;
}

std::pair<double, double> parse_pair(const std::string& s, const char* flag) {
    const auto colon = s.find(':');
    if (colon == std::string::npos) throw ConfigFailure(std::string(flag) + " expects A:B, got " + s);
    try {
        return {std::stod(s.substr(0, colon)), std::stod(s.substr(colon + 1))};
    } catch (const std::exception&) {
        throw ConfigFailure(std::string(flag) + " expects numbers, got " + s);
    }
}

struct GenerateArgs {
    generate::WorkloadConfig cfg;
    std::string out;
    std::vector<std::string> peaks, drops;
    bool no_background = false;
};

struct RunArgs {
    pipeline::RunConfig cfg;
    std::string input, out, reports, drops, resume_clients, resume_files;
    std::string index_bytes = "2,3";
    bool no_anonymize = false;
};

struct AnalyzeArgs {
    std::string input, reports;
    analyze::PeakOptions peaks;
};

struct VerifyArgs {
    std::string input, truth, out, reports;
};

struct BucketArgs {
    std::string input, reports;
    std::string index_bytes;
};

int do_generate(GenerateArgs& a) {
    for (const auto& p : a.peaks) {
        const auto [kb, w] = parse_pair(p, "--size-peak");
        a.cfg.size_peaks.push_back({static_cast<std::uint64_t>(kb), w});
    }
    for (const auto& d : a.drops) {
        const auto [t, n] = parse_pair(d, "--drop");
        a.cfg.drop_schedule.push_back({t, static_cast<std::uint64_t>(n)});
    }
    a.cfg.background = !a.no_background;
    try {
        a.cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigFailure(e.what());
    }
    const auto w = generate::generate_workload(a.cfg, a.out);
    const auto& t = w.truth;
    std::cout << "wrote " << a.out << ": " << t.frames << " frames, " << t.datagrams << " datagrams (" << t.decoded
              << " decodable, " << t.undecoded << " corrupted), " << t.drops_total << " drops\n"
              << "ground truth: " << generate::truth_path(a.out).string() << "\n"
              << "drop sidecar: " << generate::drops_path(a.out).string() << "\n";
    return 0;
}

int do_run(RunArgs& a) {
    auto& c = a.cfg;
    c.input = a.input;
    c.output = a.out;
    c.index_bytes = parse_index_bytes(a.index_bytes);
    if (!a.reports.empty()) c.reports = a.reports;
    if (!a.drops.empty()) c.drops = a.drops;
    if (!a.resume_clients.empty()) c.resume_clients = a.resume_clients;
    if (!a.resume_files.empty()) c.resume_files = a.resume_files;
    c.anonymize = !a.no_anonymize;
    const auto r = pipeline::run_pipeline(c);
    std::printf("packets %llu  datagrams %llu  decoded %llu  undecoded %llu (%.4f%%)\n",
                static_cast<unsigned long long>(r.ingest.packets_seen),
                static_cast<unsigned long long>(r.ingest.datagrams), static_cast<unsigned long long>(r.decoded),
                static_cast<unsigned long long>(r.undecoded), r.undecoded_percent());
    std::printf("clients %llu  files %llu  overflow %llu  malformed %llu  drops %llu\n",
                static_cast<unsigned long long>(r.distinct_clients), static_cast<unsigned long long>(r.distinct_files),
                static_cast<unsigned long long>(r.client_overflow),
                static_cast<unsigned long long>(r.ingest.malformed),
                static_cast<unsigned long long>(r.ingest.total_drops()));
    std::printf("%.2f s, %.0f messages/s\n", r.elapsed_seconds, r.messages_per_second());
    return 0;
}

int do_analyze(AnalyzeArgs& a) {
    std::optional<std::filesystem::path> dir;
    if (!a.reports.empty()) dir = a.reports;
    const auto res = pipeline::analyze_trace(a.input, dir, a.peaks);
    std::cout << pipeline::summary_json(res.summary);
    for (const auto& f : res.fits) {
        if (f.fit)
            std::printf("%-24s exponent %.4f over %zu points\n", std::string(analyze::report_name(f.kind)).c_str(),
                        f.fit->exponent, f.fit->points);
        else
            std::printf("%-24s no fit: %s\n", std::string(analyze::report_name(f.kind)).c_str(), f.error.c_str());
    }
    for (const auto& [kind, p] : res.peaks)
        std::printf("peak %-19s x=%llu y=%llu\n", std::string(analyze::report_name(kind)).c_str(),
                    static_cast<unsigned long long>(p.x), static_cast<unsigned long long>(p.y));
    if (res.truncated) {
        std::cerr << "warning: trace is truncated; reports cover the " << res.events << " complete events\n";
        return kExitIo;
    }
    return 0;
}

int do_verify(VerifyArgs& a) {
    pipeline::VerifyInputs in;
    in.pcap = a.input;
    if (!a.truth.empty()) in.truth = a.truth;
    in.trace = a.out;
    in.reports = a.reports;
    const auto rep = pipeline::verify_pipeline(in);
    for (const auto& c : rep.checks)
        std::printf("%-8s %-18s %s\n", std::string(pipeline::to_string(c.status)).c_str(), c.name.c_str(),
                    c.detail.c_str());
    return rep.passed() ? 0 : kExitVerify;
}

int do_buckets(BucketArgs& a) {
    auto table = FileTable::load(a.input);
    if (!a.index_bytes.empty()) {
        const auto ib = parse_index_bytes(a.index_bytes);
        if (!(ib == table.index_bytes())) table = pipeline::rebucket(table, ib);
    }
    const auto skew = bucket_skew(table);
    const auto ib = table.index_bytes();
    std::printf("index bytes %u,%u  files %llu  mean %.3f  max %zu (bucket %zu)  max/mean %.2f\n", ib.first, ib.second,
                static_cast<unsigned long long>(table.size()), skew.mean, skew.max, skew.argmax, skew.ratio());
    if (!a.reports.empty()) {
        std::filesystem::create_directories(a.reports);
        const auto path = std::filesystem::path(a.reports) /
                          ("buckets_" + std::to_string(ib.first) + "_" + std::to_string(ib.second) + ".tsv");
        std::ofstream out(path, std::ios::trunc);
        out << "# occupancy\tbuckets\n";
        for (const auto& [occ, n] : bucket_size_distribution(table)) out << occ << '\t' << n << '\n';
        if (!out) throw std::runtime_error("cannot write " + path.string());
        std::printf("wrote %s\n", path.string().c_str());
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"eDonkey server traffic: pcap to anonymized XML trace, analysis and verification"};
    app.set_config("--config", "", "INI/TOML file with option values; sections name subcommands");
    app.require_subcommand(1);

    GenerateArgs g;
    auto* gen = app.add_subcommand("generate", "write a synthetic capture with ground-truth and drop sidecars");
    gen->add_option("--out", g.out, "output pcap")->required();
    gen->add_option("--seed", g.cfg.seed, "RNG seed");
    gen->add_option("--port", g.cfg.server_port, "server UDP port");
    gen->add_option("--clients", g.cfg.num_clients, "number of clients");
    gen->add_option("--files", g.cfg.num_files, "number of files");
    gen->add_option("--provide-exponent", g.cfg.provide_exponent, "Zipf exponent of providers per file");
    gen->add_option("--ask-exponent", g.cfg.ask_exponent, "Zipf exponent of askers per file");
    gen->add_option("--ask-fraction", g.cfg.ask_fraction, "share of files that are asked for");
    gen->add_option("--forged-fraction", g.cfg.forged_fraction, "share of fileIDs with a forged prefix");
    gen->add_option("--forged-prefixes", g.cfg.forged_prefixes, "forged 2-byte prefixes")->delimiter(',');
    gen->add_option("--malformed-rate", g.cfg.malformed_rate, "share of datagrams corrupted");
    gen->add_option("--truncate-share", g.cfg.truncate_share, "share of corruptions that truncate");
    gen->add_option("--fragment-rate", g.cfg.fragment_rate, "share of datagrams sent as IP fragments");
    gen->add_option("--drops-total", g.cfg.drops_total, "capture drops spread over the run");
    gen->add_option("--drop", g.drops, "drop event SECONDS:COUNT (repeatable)");
    gen->add_option("--duration", g.cfg.duration, "seconds of traffic");
    gen->add_option("--cohort-52", g.cfg.cohort_52, "clients asking exactly 52 files");
    gen->add_option("--size-peak", g.peaks, "file-size mass KB:WEIGHT (repeatable)");
    gen->add_option("--low-id-fraction", g.cfg.low_id_fraction, "share of clients with a low ID");
    gen->add_option("--reannounce-rate", g.cfg.reannounce_rate, "chance an announce or query is repeated");
    gen->add_option("--messages", g.cfg.target_messages, "pad with keyword searches up to this many datagrams");
    gen->add_option("--broken-frames", g.cfg.broken_frames, "malformed IPv4 frames to inject");
    gen->add_option("--orphan-fragments", g.cfg.orphan_fragments, "never-completed fragments to inject");
    gen->add_option("--start-time", g.cfg.start_time, "capture start, epoch seconds");
    gen->add_flag("--no-background", g.no_background, "omit server-list, status and keyword traffic");

    RunArgs r;
    auto* run = app.add_subcommand("run", "decode, anonymize and write the XML trace");
    run->add_option("--input", r.input, "input pcap")->required();
    run->add_option("--out", r.out, "output trace (.gz compresses)")->required();
    run->add_option("--port", r.cfg.server_port, "server UDP port");
    run->add_option("--index-bytes", r.index_bytes, "fileID bytes selecting the bucket, i,j");
    run->add_option("--client-bits", r.cfg.client_bits, "client table width in bits (1..32)");
    run->add_option("--reports", r.reports, "directory for run.json, losses, buckets and table snapshots");
    run->add_option("--drops", r.drops, "drop sidecar (default: <input>.drops if present)");
    run->add_option("--loss-bucket", r.cfg.loss_bucket_seconds, "loss time-series bucket, seconds");
    run->add_option("--resume-clients", r.resume_clients, "client table snapshot to continue from");
    run->add_option("--resume-files", r.resume_files, "file table snapshot to continue from");
    run->add_flag("--no-anonymize", r.no_anonymize, "emit raw identifiers (testing only)")->group("");

    AnalyzeArgs an;
    auto* ana = app.add_subcommand("analyze", "distributions, fits and peaks from a trace");
    ana->add_option("--input", an.input, "trace file")->required();
    ana->add_option("--reports", an.reports, "directory for the TSV reports");
    ana->add_option("--peak-window", an.peaks.window, "neighbouring points on each side");
    ana->add_option("--peak-prominence", an.peaks.prominence, "factor over the local median");

    VerifyArgs v;
    auto* ver = app.add_subcommand("verify", "check run outputs against the generator's ground truth");
    ver->add_option("--input", v.input, "generated pcap")->required();
    ver->add_option("--truth", v.truth, "ground-truth sidecar (default: <input>.truth)");
    ver->add_option("--out", v.out, "trace written by run")->required();
    ver->add_option("--reports", v.reports, "report directory written by run")->required();

    BucketArgs b;
    auto* bkt = app.add_subcommand("bucket-stats", "bucket occupancy of a file-table snapshot");
    bkt->add_option("--input", b.input, "files.dktb snapshot")->required();
    bkt->add_option("--index-bytes", b.index_bytes, "re-bucket on these bytes, i,j");
    bkt->add_option("--reports", b.reports, "directory for buckets_<i>_<j>.tsv");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        if (gen->parsed()) return do_generate(g);
        if (run->parsed()) return do_run(r);
        if (ana->parsed()) return do_analyze(an);
        if (ver->parsed()) return do_verify(v);
        if (bkt->parsed()) return do_buckets(b);
    } catch (const ConfigFailure& e) {
        std::cerr << "edtrace: " << e.what() << '\n';
        return kExitConfig;
    } catch (const pipeline::ConfigError& e) {
        std::cerr << "edtrace: " << e.what() << '\n';
        return kExitConfig;
    } catch (const trace::TraceParseError& e) {
        std::cerr << "edtrace: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "edtrace: " << e.what() << '\n';
        return kExitIo;
    }
    return 0;
}
