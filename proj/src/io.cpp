#include "idc/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "idc/error.hpp"

namespace idc::io {

std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string format_time(double t) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9f", t);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::error_code ec;
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IO, "cannot open for writing: " + path.string());
    out << text;
    if (!out) throw Error(ErrorCode::IO, "write failed: " + path.string());
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IO, "cannot open for reading: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_json(const fs::path& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

json read_json(const fs::path& path) {
    const auto text = read_text(path);
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, "malformed JSON in " + path.string() + ": " + e.what());
    }
}

fs::path metadata_path(const fs::path& csv) {
    auto p = csv;
    p.replace_extension(".meta.json");
    return p;
}

void write_recording_csv(const fs::path& path, const Recording& rec) {
    std::string s = "time,current\n";
    s.reserve(rec.samples.size() * 36);
    for (std::size_t k = 0; k < rec.samples.size(); ++k) {
        s += format_time(static_cast<double>(k) / rec.sample_rate);
        s += ',';
        s += format_real(rec.samples[k]);
        s += '\n';
    }
    write_text(path, s);
}

namespace {

bool parse_double(const std::string& s, double& v) {
    const char* b = s.c_str();
    while (*b == ' ' || *b == '\t') ++b;
    char* end = nullptr;
    v = std::strtod(b, &end);
    if (end == b) return false;
    while (*end == ' ' || *end == '\t' || *end == '\r') ++end;
    return *end == '\0';
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',' || c == ';' || c == '\t') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

double median_step(const std::vector<double>& t) {
    std::vector<double> d;
    for (std::size_t k = 1; k < t.size(); ++k) d.push_back(t[k] - t[k - 1]);
    if (d.empty()) return 0.0;
    std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2), d.end());
    return d[d.size() / 2];
}

}  // namespace

LoadedSeries read_two_column_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IO, "cannot open for reading: " + path.string());
    LoadedSeries s;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto f = split_fields(line);
        double a = 0, b = 0;
        if (f.size() < 2 || !parse_double(f[0], a) || !parse_double(f[1], b)) {
            if (s.times.empty() && !s.had_header) {
                s.had_header = true;
                continue;
            }
            throw Error(ErrorCode::IO, path.string() + ":" + std::to_string(lineno) + ": expected two numeric columns");
        }
        s.times.push_back(a);
        s.values.push_back(b);
    }
    return s;
}

Recording read_recording(const fs::path& csv, std::optional<double> fallback_rate) {
    auto series = read_two_column_csv(csv);
    if (series.values.empty()) throw Error(ErrorCode::EmptyTrace, "recording has no samples: " + csv.string());
    Recording rec;
    rec.samples = std::move(series.values);
    const auto meta = metadata_path(csv);
    std::optional<double> rate;
    if (fs::exists(meta)) {
        const auto j = read_json(meta);
        if (j.contains("sample_rate")) rate = j.at("sample_rate").get<double>();
        if (j.contains("kernel")) rec.kernel = kernel_from_json(j.at("kernel"));
        if (j.contains("truth") && j.at("truth").contains("theta")) {
            rec.truth_theta = theta_from_json(j.at("truth").at("theta"));
        }
    }
    if (!rate) rate = fallback_rate;
    if (!rate) {
        const double step = median_step(series.times);
        if (step > 0.0) rate = 1.0 / step;
    }
    if (!rate || !(*rate > 0.0)) throw Error(ErrorCode::InvalidConfig, "sampling rate unknown for " + csv.string());
    rec.sample_rate = *rate;
    if (fs::exists(meta)) {
        const auto j = read_json(meta);
        if (j.contains("truth") && j.at("truth").contains("trace_csv")) {
            const auto tpath = csv.parent_path() / j.at("truth").at("trace_csv").get<std::string>();
            if (fs::exists(tpath)) rec.truth_trace = read_discrete_trace_csv(tpath, rec.sample_rate);
            if (rec.truth_trace && j.at("truth").contains("ladder")) {
                rec.truth_trace->ladder = ladder_from_json(j.at("truth").at("ladder"));
            }
        }
    }
    return rec;
}

json kernel_to_json(const Kernel& k) {
    json j;
    j["kind"] = synth::to_string(k.kind);
    j["taps"] = k.taps;
    if (k.kind == KernelKind::BesselFIR) {
        j["bessel_order"] = k.bessel_order;
        j["bessel_cutoff_hz"] = k.bessel_cutoff_hz;
    }
    return j;
}

Kernel kernel_from_json(const json& j) {
    Kernel k;
    const auto kind = j.value("kind", std::string("identity"));
    if (kind == "identity") k.kind = KernelKind::Identity;
    else if (kind == "bspline2") k.kind = KernelKind::BSpline2;
    else if (kind == "bessel") k.kind = KernelKind::BesselFIR;
    else if (kind == "custom") k.kind = KernelKind::Custom;
    else throw Error(ErrorCode::InvalidConfig, "unknown kernel kind: " + kind);
    if (j.contains("taps")) k.taps = j.at("taps").get<std::vector<double>>();
    k.bessel_order = j.value("bessel_order", 0);
    k.bessel_cutoff_hz = j.value("bessel_cutoff_hz", 0.0);
    return k;
}

json noise_to_json(const synth::NoiseSpec& n) {
    json j;
    j["kind"] = synth::to_string(n.kind);
    j["sigma"] = n.sigma;
    j["scale"] = n.scale;
    j["weight_gaussian"] = n.weight_gaussian;
    j["filtered"] = n.filtered;
    return j;
}

synth::NoiseSpec noise_from_json(const json& j) {
    synth::NoiseSpec n;
    const auto kind = j.value("kind", std::string("gaussian"));
    if (kind == "gaussian") n.kind = synth::NoiseKind::Gaussian;
    else if (kind == "cauchy") n.kind = synth::NoiseKind::Cauchy;
    else if (kind == "mixture") n.kind = synth::NoiseKind::Mixture;
    else throw Error(ErrorCode::InvalidConfig, "unknown noise kind: " + kind);
    n.sigma = j.value("sigma", n.sigma);
    n.scale = j.value("scale", n.scale);
    n.weight_gaussian = j.value("weight_gaussian", n.kind == synth::NoiseKind::Gaussian ? 1.0 : n.weight_gaussian);
    n.filtered = j.value("filtered", false);
    return n;
}

json theta_to_json(const ParamVector& theta) {
    json j;
    j["L"] = theta.L();
    j["lambda"] = theta.lambda;
    j["eta"] = theta.eta;
    return j;
}

ParamVector theta_from_json(const json& j) {
    ParamVector t;
    if (j.is_array()) return ParamVector::from_flat(j.get<std::vector<double>>());
    t.lambda = j.at("lambda").get<std::vector<double>>();
    t.eta = j.at("eta").get<std::vector<double>>();
    return t;
}

json ladder_to_json(const LevelLadder& l) {
    return json{{"L", l.L}, {"offset", l.offset}, {"spacing", l.spacing}, {"sse", l.sse}};
}

LevelLadder ladder_from_json(const json& j) {
    LevelLadder l;
    l.L = j.at("L").get<int>();
    l.offset = j.at("offset").get<double>();
    l.spacing = j.at("spacing").get<double>();
    l.sse = j.value("sse", 0.0);
    return l;
}

void write_idealisation_csv(const fs::path& path, const idealise::Idealisation& ideal, double sample_rate) {
    std::string s = "segment_start_time,segment_end_time,level\n";
    for (const auto& seg : ideal.segments) {
        s += format_time(static_cast<double>(seg.start) / sample_rate) + "," +
             format_time(static_cast<double>(seg.end) / sample_rate) + "," + format_real(seg.level) + "\n";
    }
    write_text(path, s);
}

idealise::Idealisation read_idealisation_csv(const fs::path& path, double sample_rate) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IO, "cannot open for reading: " + path.string());
    idealise::Idealisation ideal;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto f = split_fields(line);
        double a, b, c;
        if (f.size() < 3 || !parse_double(f[0], a) || !parse_double(f[1], b) || !parse_double(f[2], c)) {
            if (first) {
                first = false;
                continue;
            }
            throw Error(ErrorCode::IO, "malformed idealisation row in " + path.string());
        }
        first = false;
        idealise::Segment seg;
        seg.start = static_cast<std::size_t>(std::llround(a * sample_rate));
        seg.end = static_cast<std::size_t>(std::llround(b * sample_rate));
        seg.tested_from = seg.start;
        seg.level = c;
        ideal.segments.push_back(seg);
    }
    if (ideal.segments.empty()) throw Error(ErrorCode::EmptyTrace, "idealisation has no segments");
    for (const auto& seg : ideal.segments) {
        ideal.fit.breakpoints.push_back(static_cast<double>(seg.start) / sample_rate);
        ideal.fit.levels.push_back(seg.level);
    }
    ideal.fit.breakpoints.push_back(static_cast<double>(ideal.segments.back().end) / sample_rate);
    ideal.n_switches = ideal.segments.size() - 1;
    return ideal;
}

void write_discrete_trace_csv(const fs::path& path, const DiscreteTrace& trace) {
    std::string s = "time,open_channels\n";
    s.reserve(trace.values.size() * 16);
    for (std::size_t k = 0; k < trace.values.size(); ++k) {
        s += format_time(static_cast<double>(k) / trace.sample_rate);
        s += ',';
        s += std::to_string(trace.values[k]);
        s += '\n';
    }
    write_text(path, s);
}

DiscreteTrace read_discrete_trace_csv(const fs::path& path, std::optional<double> fallback_rate) {
    const auto series = read_two_column_csv(path);
    if (series.values.empty()) throw Error(ErrorCode::EmptyTrace, "trace has no samples: " + path.string());
    DiscreteTrace t;
    int mx = 0;
    for (double v : series.values) {
        const double r = std::round(v);
        if (r != v || r < 0) throw Error(ErrorCode::IO, "open_channels must be nonnegative integers: " + path.string());
        t.values.push_back(static_cast<int>(r));
        mx = std::max(mx, static_cast<int>(r));
    }
    t.ladder.L = std::max(mx, 1);
    const auto meta = metadata_path(path);
    std::optional<double> rate;
    if (fs::exists(meta)) {
        const auto j = read_json(meta);
        if (j.contains("sample_rate")) rate = j.at("sample_rate").get<double>();
        if (j.contains("ladder")) t.ladder = ladder_from_json(j.at("ladder"));
    }
    if (!rate) rate = fallback_rate;
    if (!rate) {
        const double step = median_step(series.times);
        if (step > 0.0) rate = 1.0 / step;
    }
    if (!rate || !(*rate > 0.0)) throw Error(ErrorCode::InvalidConfig, "sampling rate unknown for " + path.string());
    t.sample_rate = *rate;
    if (mx > t.ladder.L) throw Error(ErrorCode::IO, "trace exceeds ladder L in " + path.string());
    return t;
}

void write_histogram_csv(const fs::path& path, const diagnostics::Histogram& h) {
    std::string s = "bin_left,bin_right,count\n";
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
        s += format_real(h.edges[b]) + "," + format_real(h.edges[b + 1]) + "," + format_real(h.counts[b]) + "\n";
    }
    write_text(path, s);
}

json report_to_json(const vnd::CooperativityReport& r) {
    json j;
    j["theta_hat"] = theta_to_json(r.theta_hat);
    j["lambda_ratios"] = r.lambda_ratios;
    j["eta_open_ratios"] = r.eta_open_ratios;
    j["eta_close_ratios"] = r.eta_close_ratios;
    j["verdict"] = vnd::to_string(r.verdict);
    j["tolerance"] = r.tolerance;
    return j;
}

json mde_to_json(const infer::MdeResult& fit) {
    const auto& d = fit.diagnostics;
    json j;
    j["theta_hat"] = theta_to_json(fit.theta_hat);
    j["objective"] = fit.objective;
    j["theta_init"] = theta_to_json(d.theta_init);
    j["init_objective"] = d.init_objective;
    j["masked_rows"] = d.masked_rows;
    j["degenerate"] = d.degenerate;
    j["converged"] = d.converged;
    j["iterations"] = d.iterations;
    j["chosen_branch"] = infer::to_string(d.chosen_branch);
    json branches = json::array();
    for (const auto& b : d.branches) {
        branches.push_back({{"branch", infer::to_string(b.branch)},
                            {"objective", b.objective},
                            {"theta", theta_to_json(b.theta)},
                            {"converged", b.converged}});
    }
    j["branches"] = branches;
    return j;
}

json markov_to_json(const diagnostics::MarkovTestResult& r) {
    json j;
    j["statistic"] = r.statistic;
    j["dof"] = r.dof;
    j["p_value"] = r.p_value;
    json tables = json::array();
    for (const auto& t : r.contingency) {
        tables.push_back({{"current", t.current},
                          {"previous_states", t.previous_states},
                          {"next_states", t.next_states},
                          {"counts", t.counts},
                          {"statistic", t.statistic},
                          {"dof", t.dof},
                          {"used", t.used}});
    }
    j["contingency"] = tables;
    return j;
}

}  // namespace idc::io
