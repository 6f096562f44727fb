#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "edtrace/analyze.hpp"
#include "edtrace/anonymize.hpp"
#include "edtrace/generate.hpp"
#include "edtrace/md5.hpp"
#include "edtrace/pipeline.hpp"
#include "edtrace/wire.hpp"

namespace py = pybind11;
using namespace edtrace;

namespace {

using Points = std::vector<std::pair<std::uint64_t, std::uint64_t>>;

Points to_pairs(const analyze::DistributionReport& r) {
    Points out;
    for (const auto& p : r.points) out.emplace_back(p.x, p.y);
    return out;
}

analyze::DistributionReport from_pairs(const Points& pts) {
    analyze::DistributionReport r;
    for (const auto& [x, y] : pts) {
        r.points.push_back({x, y});
        r.total_entities += y;
    }
    return r;
}

wire::ByteView view(const py::bytes& b, std::string& hold) {
    hold = b;
    return {reinterpret_cast<const std::uint8_t*>(hold.data()), hold.size()};
}

py::dict summary_dict(const analyze::Summary& s) {
    py::dict d;
    d["messages"] = s.messages;
    d["distinct_clients"] = s.distinct_clients;
    d["distinct_files"] = s.distinct_files;
    d["span_seconds"] = s.span_seconds;
    d["file_search_queries"] = s.file_search_queries;
    return d;
}

} // namespace

PYBIND11_MODULE(_edtrace, m) {
    m.doc() = "eDonkey capture to anonymized trace, with distribution analysis";

    py::register_exception<pipeline::ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<analyze::FitError>(m, "FitError", PyExc_ValueError);

    m.def("md5_hex", [](const py::bytes& b) { return Md5::hex_of(std::string(b)); });
    m.def("anon_string", [](const py::bytes& b) { return anon_string(std::string(b)); });

    // Returns the opcode name, or raises ValueError carrying the error name.
    m.def("decode", [](const py::bytes& b) {
        std::string hold;
        auto r = wire::decode_message(view(b, hold));
        if (!r) throw py::value_error(std::string(wire::to_string(r.error())));
        return std::string(wire::opcode_name(wire::opcode_of(*r)));
    });
    m.def("reencode", [](const py::bytes& b) {
        std::string hold;
        auto r = wire::decode_message(view(b, hold));
        if (!r) throw py::value_error(std::string(wire::to_string(r.error())));
        const auto out = wire::encode_message(*r);
        return py::bytes(reinterpret_cast<const char*>(out.data()), out.size());
    });

    py::class_<generate::WorkloadConfig>(m, "WorkloadConfig")
        .def(py::init<>())
        .def_readwrite("seed", &generate::WorkloadConfig::seed)
        .def_readwrite("num_clients", &generate::WorkloadConfig::num_clients)
        .def_readwrite("num_files", &generate::WorkloadConfig::num_files)
        .def_readwrite("provide_exponent", &generate::WorkloadConfig::provide_exponent)
        .def_readwrite("ask_exponent", &generate::WorkloadConfig::ask_exponent)
        .def_readwrite("ask_fraction", &generate::WorkloadConfig::ask_fraction)
        .def_readwrite("forged_fraction", &generate::WorkloadConfig::forged_fraction)
        .def_readwrite("malformed_rate", &generate::WorkloadConfig::malformed_rate)
        .def_readwrite("truncate_share", &generate::WorkloadConfig::truncate_share)
        .def_readwrite("fragment_rate", &generate::WorkloadConfig::fragment_rate)
        .def_readwrite("drops_total", &generate::WorkloadConfig::drops_total)
        .def_readwrite("duration", &generate::WorkloadConfig::duration)
        .def_readwrite("cohort_52", &generate::WorkloadConfig::cohort_52)
        .def_readwrite("low_id_fraction", &generate::WorkloadConfig::low_id_fraction)
        .def_readwrite("background", &generate::WorkloadConfig::background)
        .def_readwrite("target_messages", &generate::WorkloadConfig::target_messages);

    m.def(
        "generate",
        [](const generate::WorkloadConfig& cfg, const std::filesystem::path& pcap) {
            py::gil_scoped_release nogil;
            const auto w = generate::generate_workload(cfg, pcap);
            return std::make_tuple(w.truth.datagrams, w.truth.decoded, w.truth.undecoded);
        },
        py::arg("config"), py::arg("pcap"), "Writes a synthetic capture and its truth sidecar.");

    m.def(
        "run",
        [](const std::filesystem::path& input, const std::filesystem::path& output,
           std::optional<std::filesystem::path> reports, unsigned client_bits, std::pair<unsigned, unsigned> index_bytes,
           std::uint16_t server_port) {
            pipeline::RunConfig rc;
            rc.input = input;
            rc.output = output;
            rc.reports = std::move(reports);
            rc.client_bits = client_bits;
            rc.index_bytes = {index_bytes.first, index_bytes.second};
            rc.server_port = server_port;
            rc.validate();
            py::gil_scoped_release nogil;
            return pipeline::run_pipeline(rc).to_json();
        },
        py::arg("input"), py::arg("output"), py::arg("reports") = std::nullopt,
        py::arg("client_bits") = ClientTable::kDefaultKeyBits, py::arg("index_bytes") = std::make_pair(2u, 3u),
        py::arg("server_port") = ingest::kDefaultServerPort);

    m.def(
        "analyze",
        [](const std::filesystem::path& trace, std::optional<std::filesystem::path> reports) {
            pipeline::AnalyzeResult res;
            {
                py::gil_scoped_release nogil;
                res = pipeline::analyze_trace(trace, reports);
            }
            py::dict d, reps;
            d["summary"] = summary_dict(res.summary);
            for (const auto& r : res.reports) reps[py::str(std::string(analyze::report_name(r.kind)))] = to_pairs(r);
            d["reports"] = reps;
            py::list peaks;
            for (const auto& [kind, p] : res.peaks)
                peaks.append(py::make_tuple(std::string(analyze::report_name(kind)), p.x, p.y));
            d["peaks"] = peaks;
            d["truncated"] = res.truncated;
            d["events"] = res.events;
            return d;
        },
        py::arg("trace"), py::arg("reports") = std::nullopt);

    m.def(
        "verify",
        [](const std::filesystem::path& pcap, const std::filesystem::path& trace,
           const std::filesystem::path& reports) {
            pipeline::VerifyReport rep;
            {
                py::gil_scoped_release nogil;
                rep = pipeline::verify_pipeline({pcap, std::nullopt, trace, reports});
            }
            std::vector<std::tuple<std::string, std::string, std::string>> out;
            for (const auto& c : rep.checks) out.emplace_back(c.name, std::string(pipeline::to_string(c.status)), c.detail);
            return out;
        },
        py::arg("pcap"), py::arg("trace"), py::arg("reports"));

    m.def(
        "fit_power_law",
        [](const Points& pts, std::uint64_t x_min, std::uint64_t x_max) {
            const auto f = analyze::fit_power_law(from_pairs(pts), {x_min, x_max});
            py::dict d;
            d["exponent"] = f.exponent;
            d["prefactor"] = f.prefactor;
            d["residual"] = f.residual;
            d["points"] = f.points;
            return d;
        },
        py::arg("points"), py::arg("x_min") = 1, py::arg("x_max") = UINT64_MAX);

    m.def(
        "find_peaks",
        [](const Points& pts, std::size_t window, double prominence) {
            Points out;
            for (const auto& p : analyze::find_peaks(from_pairs(pts), {window, prominence})) out.emplace_back(p.x, p.y);
            return out;
        },
        py::arg("points"), py::arg("window") = 10, py::arg("prominence") = 3.0);
}
