#include "edtrace/analyze.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace edtrace::analyze {

std::string_view report_name(ReportKind k) {
    switch (k) {
    case ReportKind::ProvidersPerFile: return "providers_per_file";
    case ReportKind::AskersPerFile: return "askers_per_file";
    case ReportKind::FilesPerProvider: return "files_per_provider";
    case ReportKind::FilesAskedPerClient: return "files_asked_per_client";
    case ReportKind::FileSizeKB: return "file_size_kb";
    }
    return "unknown";
}

DistributionReport DistributionReport::from_values(ReportKind kind, std::span<const std::uint64_t> values) {
    std::map<std::uint64_t, std::uint64_t> hist;
    for (auto v : values)
        if (v > 0) ++hist[v];
    DistributionReport r;
    r.kind = kind;
    r.points.reserve(hist.size());
    for (const auto& [x, y] : hist) {
        r.points.push_back({x, y});
        r.total_entities += y;
    }
    return r;
}

DistributionReport merge(const DistributionReport& a, const DistributionReport& b) {
    if (a.kind != b.kind) throw std::invalid_argument("cannot merge reports of different kinds");
    DistributionReport out;
    out.kind = a.kind;
    out.total_entities = a.total_entities + b.total_entities;
    std::size_t i = 0, j = 0;
    while (i < a.points.size() || j < b.points.size()) {
        if (j == b.points.size() || (i < a.points.size() && a.points[i].x < b.points[j].x)) {
            out.points.push_back(a.points[i++]);
        } else if (i == a.points.size() || b.points[j].x < a.points[i].x) {
            out.points.push_back(b.points[j++]);
        } else {
            out.points.push_back({a.points[i].x, a.points[i].y + b.points[j].y});
            ++i;
            ++j;
        }
    }
    return out;
}

std::uint64_t pair_mass(const DistributionReport& r) {
    std::uint64_t s = 0;
    for (const auto& p : r.points) s += p.x * p.y;
    return s;
}

// --- IdCounter -----------------------------------------------------------------

std::uint32_t IdCounter::increment(std::uint64_t id) {
    std::uint32_t* slot;
    if (id < kDenseLimit) {
        if (id >= dense_.size()) dense_.resize(std::max<std::size_t>(id + 1, dense_.size() * 2), 0);
        slot = &dense_[id];
    } else {
        slot = &sparse_[id];
    }
    if (*slot == 0) ++nonzero_;
    return ++*slot;
}

std::uint32_t IdCounter::get(std::uint64_t id) const {
    if (id < kDenseLimit) return id < dense_.size() ? dense_[id] : 0;
    auto it = sparse_.find(id);
    return it == sparse_.end() ? 0 : it->second;
}

std::vector<std::uint64_t> IdCounter::values() const {
    std::vector<std::uint64_t> out;
    out.reserve(nonzero_);
    for (auto v : dense_)
        if (v) out.push_back(v);
    for (const auto& [id, v] : sparse_)
        if (v) out.push_back(v);
    return out;
}

// --- DistributionBuilder ---------------------------------------------------------

void DistributionBuilder::note_size(FileIndex f, const std::vector<anon::Tag>& tags) {
    for (const auto& t : tags) {
        if (t.kind != wire::TagKind::Size) continue;
        if (const auto* kb = std::get_if<std::uint64_t>(&t.value)) {
            size_kb_.try_emplace(f, *kb);
            return;
        }
    }
}

void DistributionBuilder::add(const trace::TraceEvent& e) {
    const AnonMessage& m = e.message;
    if (summary_.messages == 0) {
        first_us_ = last_us_ = m.rebased_us;
    } else {
        first_us_ = std::min(first_us_, m.rebased_us);
        last_us_ = std::max(last_us_, m.rebased_us);
    }
    ++summary_.messages;
    ++summary_.per_type[m.body.index()];
    see_client(m.peer);

    std::visit(
        [&](const auto& body) {
            using T = std::decay_t<decltype(body)>;
            if constexpr (std::is_same_v<T, anon::FileSearchQuery>) {
                ++summary_.file_search_queries;
            } else if constexpr (std::is_same_v<T, anon::FileSearchAnswer>) {
                for (const auto& r : body.results) {
                    see_file(r.file);
                    note_size(r.file, r.tags);
                }
            } else if constexpr (std::is_same_v<T, anon::SourceSearchQuery>) {
                for (auto f : body.files) {
                    see_file(f);
                    if (ask_pairs_.insert((std::uint64_t{m.peer} << 32) | f).second) {
                        askers_per_file_.increment(f);
                        files_per_asker_.increment(m.peer);
                    }
                }
            } else if constexpr (std::is_same_v<T, anon::SourceSearchAnswer>) {
                see_file(body.file);
                for (const auto& s : body.sources) see_client(s.client);
            } else if constexpr (std::is_same_v<T, anon::Announce>) {
                see_client(body.client);
                for (const auto& f : body.files) {
                    see_file(f.file);
                    note_size(f.file, f.tags);
                    if (provide_pairs_.insert((std::uint64_t{body.client} << 32) | f.file).second) {
                        providers_per_file_.increment(f.file);
                        files_per_provider_.increment(body.client);
                    }
                }
            }
        },
        m.body);
}

DistributionReport DistributionBuilder::report(ReportKind kind) const {
    std::vector<std::uint64_t> values;
    switch (kind) {
    case ReportKind::ProvidersPerFile: values = providers_per_file_.values(); break;
    case ReportKind::AskersPerFile: values = askers_per_file_.values(); break;
    case ReportKind::FilesPerProvider: values = files_per_provider_.values(); break;
    case ReportKind::FilesAskedPerClient: values = files_per_asker_.values(); break;
    case ReportKind::FileSizeKB:
        values.reserve(size_kb_.size());
        for (const auto& [f, kb] : size_kb_) values.push_back(kb);
        break;
    }
    if (kind == ReportKind::FileSizeKB) {
        // A size of 0 KB is a real value here, unlike a zero relation count.
        std::map<std::uint64_t, std::uint64_t> hist;
        for (auto v : values) ++hist[v];
        DistributionReport r;
        r.kind = kind;
        for (const auto& [x, y] : hist) {
            r.points.push_back({x, y});
            r.total_entities += y;
        }
        return r;
    }
    return DistributionReport::from_values(kind, values);
}

std::array<DistributionReport, kReportKinds> DistributionBuilder::reports() const {
    std::array<DistributionReport, kReportKinds> out;
    for (std::size_t i = 0; i < kReportKinds; ++i) out[i] = report(kAllReportKinds[i]);
    return out;
}

Summary DistributionBuilder::summary() const {
    Summary s = summary_;
    s.distinct_clients = clients_seen_.nonzero();
    s.distinct_files = files_seen_.nonzero();
    s.span_seconds = s.messages ? static_cast<double>(last_us_ - first_us_) / 1e6 : 0.0;
    return s;
}

std::array<DistributionReport, kReportKinds> build_distributions(std::span<const trace::TraceEvent> events) {
    DistributionBuilder b;
    for (const auto& e : events) b.add(e);
    return b.reports();
}

Summary summarize(std::span<const trace::TraceEvent> events) {
    DistributionBuilder b;
    for (const auto& e : events) b.add(e);
    return b.summary();
}

// --- fitting ---------------------------------------------------------------------

PowerLawFit fit_power_law(const DistributionReport& report, FitRange range) {
    std::vector<double> lx, ly;
    for (const auto& p : report.points) {
        if (p.x < range.x_min || p.x > range.x_max || p.y == 0 || p.x == 0) continue;
        lx.push_back(std::log(static_cast<double>(p.x)));
        ly.push_back(std::log(static_cast<double>(p.y)));
    }
    if (lx.size() < 2) throw FitError("power-law fit needs at least two points in range");

    const double n = static_cast<double>(lx.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    PowerLawFit fit;
    fit.exponent = sxy / sxx;
    const double intercept = my - fit.exponent * mx;
    fit.prefactor = std::exp(intercept);
    fit.fit_range = range;
    fit.points = lx.size();
    double ss = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        const double r = ly[i] - (intercept + fit.exponent * lx[i]);
        ss += r * r;
    }
    fit.residual = std::sqrt(ss / n);
    return fit;
}

// --- peaks -----------------------------------------------------------------------

std::vector<Point> find_peaks(const DistributionReport& report, PeakOptions options) {
    std::vector<Point> peaks;
    const auto& pts = report.points;
    if (options.window == 0) return peaks;
    std::vector<std::uint64_t> neigh;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const std::size_t lo = i >= options.window ? i - options.window : 0;
        const std::size_t hi = std::min(pts.size() - 1, i + options.window);
        if (lo == i || hi == i) continue;
        neigh.clear();
        bool dominant = true;
        for (std::size_t k = lo; k <= hi && dominant; ++k) {
            if (k == i) continue;
            dominant = pts[k].y < pts[i].y;
            neigh.push_back(pts[k].y);
        }
        if (!dominant) continue;
        auto mid = neigh.begin() + static_cast<std::ptrdiff_t>(neigh.size() / 2);
        std::nth_element(neigh.begin(), mid, neigh.end());
        double median = static_cast<double>(*mid);
        if (neigh.size() % 2 == 0) {
            const auto lower = *std::max_element(neigh.begin(), mid);
            median = (median + static_cast<double>(lower)) / 2.0;
        }
        if (static_cast<double>(pts[i].y) > options.prominence * median) peaks.push_back(pts[i]);
    }
    return peaks;
}

// --- TSV -------------------------------------------------------------------------

void write_report_tsv(const DistributionReport& r, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (const auto& p : r.points) out << p.x << '\t' << p.y << '\n';
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

DistributionReport read_report_tsv(ReportKind kind, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    DistributionReport r;
    r.kind = kind;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        Point p;
        if (!(ls >> p.x >> p.y)) throw std::runtime_error(path.string() + ": bad line \"" + line + "\"");
        r.points.push_back(p);
        r.total_entities += p.y;
    }
    return r;
}

} // namespace edtrace::analyze
