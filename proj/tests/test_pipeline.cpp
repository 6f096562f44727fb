#include <catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "edtrace/generate.hpp"
#include "edtrace/pipeline.hpp"
#include "edtrace/trace.hpp"
#include "support.hpp"

using namespace edtrace;
using namespace edtrace::pipeline;
using testsupport::TempDir;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

generate::WorkloadConfig workload(std::uint64_t seed) {
    generate::WorkloadConfig cfg;
    cfg.seed = seed;
    cfg.num_clients = 400;
    cfg.num_files = 800;
    cfg.malformed_rate = 0.01;
    cfg.truncate_share = 0.8;
    cfg.fragment_rate = 0.03;
    cfg.drops_total = 777;
    cfg.forged_fraction = 0.3;
    cfg.cohort_52 = 6;
    cfg.size_peaks = {{716'800, 0.05}};
    cfg.broken_frames = 2;
    cfg.orphan_fragments = 2;
    return cfg;
}

RunConfig run_config(const TempDir& dir, const std::string& stem) {
    RunConfig rc;
    rc.input = dir / (stem + ".pcap");
    rc.output = dir / (stem + ".xml");
    rc.reports = dir / (stem + "_reports");
    rc.client_bits = 32;  // generated addresses are above 2^24
    return rc;
}

VerifyInputs verify_inputs(const RunConfig& rc) {
    VerifyInputs in;
    in.pcap = rc.input;
    in.trace = rc.output;
    in.reports = *rc.reports;
    return in;
}

const Check& check_named(const VerifyReport& r, const std::string& name) {
    for (const auto& c : r.checks)
        if (c.name == name) return c;
    FAIL("no check named " << name);
    throw std::logic_error("unreachable");
}

#ifdef EDTRACE_CLI
int cli(const std::string& args) {
    const std::string cmd = std::string(EDTRACE_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}
#endif

} // namespace

TEST_CASE("clean workload passes every check") {
    TempDir dir("pipe");
    const auto rc = run_config(dir, "w");
    const auto w = generate::generate_workload(workload(1), rc.input);
    const auto r = run_pipeline(rc);
    CHECK(r.decoded == w.truth.decoded);
    CHECK(r.undecoded == w.truth.undecoded);
    CHECK(r.client_overflow == 0);
    CHECK(r.skewed_timestamps == 0);
    CHECK(r.ingest.total_drops() == 777);  // sidecar picked up by default
    CHECK(r.undecoded_percent() == Catch::Approx(100.0 * double(w.truth.undecoded) / double(w.truth.datagrams)));

    const auto rep = verify_pipeline(verify_inputs(rc));
    for (const auto& c : rep.checks) {
        INFO(c.name << ": " << c.detail);
        CHECK(c.status == Check::Status::Pass);
    }
    CHECK(rep.checks.size() == 5);
    CHECK(rep.passed());

    for (const char* f : {kRunReportFile, kLossFile, kBucketFile, kClientSnapshot, kFileSnapshot})
        CHECK(std::filesystem::exists(*rc.reports / f));
    const auto back = RunReport::from_json(slurp(*rc.reports / kRunReportFile));
    CHECK(back.decoded == r.decoded);
    CHECK(back.per_type == r.per_type);
    CHECK(back.index_bytes == r.index_bytes);
}

TEST_CASE("analysis of the corpus equals the sidecar") {
    TempDir dir("pipe");
    const auto rc = run_config(dir, "a");
    const auto w = generate::generate_workload(workload(2), rc.input);
    run_pipeline(rc);
    const auto res = analyze_trace(rc.output, dir / "analysis");
    CHECK_FALSE(res.truncated);
    for (std::size_t k = 0; k < analyze::kReportKinds; ++k) CHECK(res.reports[k] == w.truth.distributions[k]);
    CHECK(res.summary == w.truth.summary);
    for (const auto kind : analyze::kAllReportKinds) {
        const auto p = dir / "analysis" / (std::string(analyze::report_name(kind)) + ".tsv");
        REQUIRE(std::filesystem::exists(p));
        CHECK(analyze::read_report_tsv(kind, p) == res.reports[static_cast<std::size_t>(kind)]);
    }
    for (const char* f : {"fits.tsv", "peaks.tsv", "summary.json"}) CHECK(std::filesystem::exists(dir / "analysis" / f));

    bool peak52 = false, peak700 = false;
    for (const auto& [kind, p] : res.peaks) {
        peak52 |= kind == analyze::ReportKind::FilesAskedPerClient && p.x == 52;
        peak700 |= kind == analyze::ReportKind::FileSizeKB && p.x == 716'800;
    }
    CHECK(peak52);
    CHECK(peak700);
}

TEST_CASE("skipping anonymization is caught") {
    TempDir dir("pipe");
    auto rc = run_config(dir, "raw");
    generate::generate_workload(workload(3), rc.input);
    rc.anonymize = false;
    run_pipeline(rc);
    const auto rep = verify_pipeline(verify_inputs(rc));
    CHECK_FALSE(rep.passed());
    CHECK(check_named(rep, "leaks").status == Check::Status::Fail);
}

TEST_CASE("missing artifacts are reported as missing") {
    TempDir dir("pipe");
    const auto rc = run_config(dir, "m");
    generate::generate_workload(workload(4), rc.input);
    run_pipeline(rc);
    std::filesystem::remove(*rc.reports / kLossFile);
    auto rep = verify_pipeline(verify_inputs(rc));
    CHECK(check_named(rep, "losses").status == Check::Status::Missing);
    CHECK(check_named(rep, "leaks").status == Check::Status::Pass);

    std::filesystem::remove(rc.output);
    rep = verify_pipeline(verify_inputs(rc));
    CHECK(check_named(rep, "leaks").status == Check::Status::Missing);
    CHECK(check_named(rep, "distributions").status == Check::Status::Missing);
    CHECK(to_string(Check::Status::Missing) == "MISSING");
}

TEST_CASE("tampered outputs fail verification") {
    TempDir dir("pipe");
    const auto rc = run_config(dir, "t");
    generate::generate_workload(workload(5), rc.input);
    run_pipeline(rc);

    // drop one message line from the trace
    std::string text = slurp(rc.output);
    const auto first = text.find("<msg ");
    text.erase(first, text.find('\n', first) + 1 - first);
    std::ofstream(rc.output, std::ios::trunc) << text;
    const auto rep = verify_pipeline(verify_inputs(rc));
    CHECK(check_named(rep, "distributions").status == Check::Status::Fail);
}

TEST_CASE("run is deterministic") {
    TempDir dir("pipe");
    auto a = run_config(dir, "d");
    generate::generate_workload(workload(6), a.input);
    auto b = a;
    b.output = dir / "d2.xml";
    b.reports = dir / "d2_reports";
    run_pipeline(a);
    run_pipeline(b);
    CHECK(slurp(a.output) == slurp(b.output));
    for (const char* f : {kLossFile, kBucketFile, kClientSnapshot, kFileSnapshot})
        CHECK(slurp(*a.reports / f) == slurp(*b.reports / f));
}

TEST_CASE("resuming from snapshots continues the numbering") {
    TempDir dir("pipe");
    auto first = run_config(dir, "r1");
    generate::generate_workload(workload(7), first.input);
    const auto r1 = run_pipeline(first);

    auto second = run_config(dir, "r1");
    second.output = dir / "r2.xml";
    second.reports = dir / "r2_reports";
    second.resume_clients = *first.reports / kClientSnapshot;
    second.resume_files = *first.reports / kFileSnapshot;
    const auto r2 = run_pipeline(second);
    // same capture again: nothing new to assign
    CHECK(r2.distinct_clients == r1.distinct_clients);
    CHECK(r2.distinct_files == r1.distinct_files);
    CHECK(slurp(*second.reports / kClientSnapshot) == slurp(*first.reports / kClientSnapshot));
}

TEST_CASE("empty capture") {
    TempDir dir("pipe");
    { ingest::PcapWriter w(dir / "e.pcap"); }
    RunConfig rc;
    rc.input = dir / "e.pcap";
    rc.output = dir / "e.xml";
    rc.reports = dir / "e_reports";
    const auto r = run_pipeline(rc);
    CHECK(r.decoded == 0);
    CHECK(r.undecoded == 0);
    CHECK(r.ingest.packets_seen == 0);
    CHECK(r.undecoded_percent() == 0);
    std::ifstream in(rc.output);
    CHECK(trace::read_trace(in).empty());
    const auto res = analyze_trace(rc.output, dir / "e_analysis");
    for (const auto& rep : res.reports) CHECK(rep.points.empty());
}

TEST_CASE("run config validation") {
    TempDir dir("pipe");
    RunConfig rc;
    rc.input = dir / "x.pcap";
    rc.output = dir / "x.pcap";
    CHECK_THROWS_AS(rc.validate(), ConfigError);
    rc.output = dir / "y.xml";
    CHECK_NOTHROW(rc.validate());
    rc.client_bits = 40;
    CHECK_THROWS_AS(rc.validate(), ConfigError);
    rc.client_bits = 24;
    rc.index_bytes = {3, 3};
    CHECK_THROWS_AS(rc.validate(), ConfigError);
    rc.index_bytes = {};
    rc.reports = dir / "y.xml";
    CHECK_THROWS_AS(rc.validate(), ConfigError);
    rc.reports.reset();
    rc.resume_clients = dir / "c.dktb";
    CHECK_THROWS_AS(rc.validate(), ConfigError);
    rc.resume_clients.reset();
    rc.loss_bucket_seconds = 0;
    CHECK_THROWS_AS(rc.validate(), ConfigError);
    rc.loss_bucket_seconds = 60;
    CHECK_THROWS_AS(run_pipeline(rc), ingest::IngestError);  // input does not exist
}

TEST_CASE("truncated trace still yields partial reports") {
    TempDir dir("pipe");
    const auto rc = run_config(dir, "cut");
    generate::generate_workload(workload(8), rc.input);
    run_pipeline(rc);
    const std::string text = slurp(rc.output);
    std::ofstream(dir / "cut_short.xml", std::ios::trunc) << text.substr(0, text.size() / 2);
    const auto res = analyze_trace(dir / "cut_short.xml", std::nullopt);
    CHECK(res.truncated);
    CHECK(res.events > 0);
    CHECK(res.summary.messages == res.events);
}

TEST_CASE("rebucketing keeps the assigned integers") {
    testsupport::Rng rng(9);
    FileTable t({0, 1});
    std::vector<wire::FileId> files;
    for (int i = 0; i < 3'000; ++i) {
        files.push_back(testsupport::random_file(rng));
        t.encode(files.back());
    }
    const auto r = rebucket(t, {2, 3});
    CHECK(r.index_bytes() == IndexBytes{2, 3});
    CHECK(r.size() == t.size());
    for (const auto& f : files) REQUIRE(r.lookup(f) == t.lookup(f));
}

TEST_CASE("leak scanner matching rules") {
    using generate::Secret;
    wire::FileId fid;
    for (std::size_t i = 0; i < 16; ++i) fid.bytes[i] = static_cast<std::uint8_t>(0xA0 + i);
    const std::vector<Secret> secrets{{Secret::Kind::Ip, "167772161"},
                                      {Secret::Kind::FileId, fid.hex()},
                                      {Secret::Kind::String, "SECRET_NAME.MP3"}};
    auto hits = [&](const std::string& xml) {
        std::istringstream in(xml);
        std::uint64_t total = 0;
        scan_for_leaks(in, secrets, &total);
        return total;
    };
    CHECK(hits("<src cid=\"0\"/>") == 0);
    CHECK(hits("<src cid=\"167772161\"/>") == 1);
    CHECK(hits("<server ip=\"10.0.0.1\" port=\"1\"/>") == 1);
    CHECK(hits("<src cid=\"1677721610\"/>") == 0);  // not a whole token
    CHECK(hits("<x v=\"" + fid.hex() + "\"/>") == 1);
    std::string upper = fid.hex();
    for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    CHECK(hits("<x v=\"" + upper + "\"/>") == 1);
    CHECK(hits(std::string("<x v=\"") + std::string(fid.bytes.begin(), fid.bytes.end()) + "\"/>") == 1);
    CHECK(hits("<query pattern=\"xxSECRET_NAME.MP3yy\"/>") == 1);
    CHECK(hits("<a>SECRET_NA\nME.MP3</a>") == 1);  // across a line break
    CHECK(hits("<query pattern=\"" + anon_string("SECRET_NAME.MP3") + "\"/>") == 0);
}

#ifdef EDTRACE_CLI
TEST_CASE("command-line exit codes") {
    TempDir dir("cli");
    const std::string d = dir.path().string();
    CHECK(cli("generate --out " + d + "/c.pcap --clients 300 --files 600 --seed 3 --malformed-rate 0.01 "
              "--fragment-rate 0.02 --drops-total 50 --size-peak 716800:0.05 --cohort-52 4") == 0);
    CHECK(cli("run --input " + d + "/c.pcap --out " + d + "/c.xml.gz --reports " + d + "/rep --client-bits 32") == 0);
    CHECK(cli("verify --input " + d + "/c.pcap --out " + d + "/c.xml.gz --reports " + d + "/rep") == 0);
    CHECK(cli("analyze --input " + d + "/c.xml.gz --reports " + d + "/ana") == 0);
    CHECK(std::filesystem::exists(dir / "ana" / "summary.json"));
    CHECK(cli("bucket-stats --input " + d + "/rep/files.dktb --index-bytes 0,1 --reports " + d + "/rep") == 0);
    CHECK(std::filesystem::exists(dir / "rep" / "buckets_0_1.tsv"));

    // configuration errors
    CHECK(cli("") == 2);
    CHECK(cli("run --input " + d + "/c.pcap") == 2);
    CHECK(cli("run --input " + d + "/c.pcap --out " + d + "/z.xml --index-bytes 5,5") == 2);
    CHECK(cli("run --input " + d + "/c.pcap --out " + d + "/c.pcap") == 2);
    CHECK(cli("generate --out " + d + "/bad.pcap --malformed-rate 3") == 2);
    CHECK(cli("generate --out " + d + "/bad.pcap --size-peak 12") == 2);
    CHECK(cli("frobnicate") == 2);

    // I/O errors
    CHECK(cli("run --input " + d + "/missing.pcap --out " + d + "/m.xml") == 1);
    CHECK(cli("analyze --input " + d + "/missing.xml") == 1);
    std::ofstream(dir / "broken.xml") << "<trace version=\"1\">\n<msg seq=\"q\"";
    CHECK(cli("analyze --input " + d + "/broken.xml") == 1);

    // verification failure
    CHECK(cli("run --input " + d + "/c.pcap --out " + d + "/raw.xml --reports " + d + "/raw --client-bits 32 "
              "--no-anonymize") == 0);
    CHECK(cli("verify --input " + d + "/c.pcap --out " + d + "/raw.xml --reports " + d + "/raw") == 3);

    // empty capture: empty trace, exit 0
    { ingest::PcapWriter w(dir / "empty.pcap"); }
    CHECK(cli("run --input " + d + "/empty.pcap --out " + d + "/empty.xml") == 0);
    CHECK(cli("analyze --input " + d + "/empty.xml --reports " + d + "/empty_ana") == 0);

    // truncated trace: partial reports, nonzero exit
    const std::string full = slurp(dir / "raw.xml");
    std::ofstream(dir / "half.xml") << full.substr(0, full.size() / 2);
    CHECK(cli("analyze --input " + d + "/half.xml --reports " + d + "/half") == 1);
    CHECK(std::filesystem::exists(dir / "half" / "summary.json"));
}

TEST_CASE("config file supplies options") {
    TempDir dir("cli");
    const std::string d = dir.path().string();
    std::ofstream(dir / "gen.ini") << "[generate]\nout=" << d << "/f.pcap\nclients=100\nfiles=200\nseed=12\n";
    CHECK(cli("--config " + d + "/gen.ini generate") == 0);
    CHECK(std::filesystem::exists(dir / "f.pcap"));
    CHECK(generate::GroundTruth::read(generate::truth_path(dir / "f.pcap")).clients.size() <= 200);  // low-ID clients appear under two identifiers

    std::ofstream(dir / "run.ini") << "[run]\ninput=" << d << "/f.pcap\nout=" << d << "/f.xml\nclient-bits=32\n";
    CHECK(cli("--config " + d + "/run.ini run") == 0);
    CHECK(std::filesystem::exists(dir / "f.xml"));
    CHECK(cli("--config " + d + "/nope.ini run") == 2);
}
#endif
