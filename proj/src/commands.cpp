#include "idc/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "idc/diagnostics.hpp"
#include "idc/discretise.hpp"
#include "idc/error.hpp"
#include "idc/idealise.hpp"
#include "idc/infer.hpp"
#include "idc/io.hpp"
#include "idc/pipeline.hpp"
#include "idc/signal_synth.hpp"
#include "idc/studies.hpp"
#include "idc/svg.hpp"

namespace idc::cli {

namespace fs = std::filesystem;

std::string default_out_dir() {
    if (const char* env = std::getenv("IDC_OUT_DIR"); env && *env) return env;
    return "idc_out";
}

json default_config() {
    json c;
    c["seed"] = 1;
    c["out"] = default_out_dir();
    c["alpha"] = idealise::kDefaultAlpha;
    c["L"] = nullptr;
    c["max_L"] = discretise::kDefaultMaxL;
    c["gap_factor"] = discretise::kDefaultGapFactor;
    c["tolerance"] = vnd::kDefaultTolerance;
    c["baseline"] = 0.0;
    c["threads"] = 1;
    c["plots"] = false;
    c["L_sweep"] = nullptr;
    c["input"] = nullptr;
    c["sample_rate"] = nullptr;
    c["kernel"] = nullptr;
    c["state"] = nullptr;
    c["simulate"] = {{"scenario", "zero"},
                     {"theta", nullptr},
                     {"n", nullptr},
                     {"sample_rate", 10000.0},
                     {"offset", 0.0},
                     {"spacing", 1.0},
                     {"kernel", {{"kind", "bessel"}, {"order", 4}, {"cutoff_hz", 1000.0}, {"taps", json::array()}}},
                     {"noise", io::noise_to_json(synth::NoiseSpec::gaussian(0.1))}};
    c["mde"] = {{"max_iters", 10000}, {"objective_tol", 1e-12}, {"branch", "auto"}, {"starts_per_row", 3}};
    c["reproduce"] = {{"study", nullptr}, {"repetitions", nullptr}};
    return c;
}

const std::vector<std::string>& study_ids() {
    static const std::vector<std::string> ids{"fig-errors-zero", "fig-errors-pos", "fig-errors-neg",
                                              "fig-L-hist",      "fig-ratio-hist", "fdr-check"};
    return ids;
}

namespace {

[[noreturn]] void bad_config(const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); }

template <class T>
T get(const json& j, const std::string& key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        bad_config("config key '" + key + "': " + e.what());
    }
}

template <class T>
std::optional<T> get_opt(const json& j, const std::string& key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return get<T>(j, key);
}

fs::path out_dir(const json& cfg) { return fs::path(get<std::string>(cfg, "out")); }

fs::path require_input(const json& cfg) {
    const auto in = get_opt<std::string>(cfg, "input");
    if (!in) bad_config("this command needs --input");
    if (!fs::exists(*in)) throw Error(ErrorCode::IO, "input does not exist: " + *in);
    return *in;
}

KernelKind kernel_kind(const std::string& s) {
    if (s == "identity") return KernelKind::Identity;
    if (s == "bspline2") return KernelKind::BSpline2;
    if (s == "bessel") return KernelKind::BesselFIR;
    if (s == "custom") return KernelKind::Custom;
    bad_config("unknown kernel kind: " + s);
}

synth::KernelSpec kernel_spec(const json& j) {
    synth::KernelSpec k;
    k.kind = kernel_kind(j.value("kind", std::string("identity")));
    k.bessel_order = j.value("order", 4);
    k.bessel_cutoff_hz = j.value("cutoff_hz", 1000.0);
    if (j.contains("taps")) k.custom_taps = get<std::vector<double>>(j, "taps");
    return k;
}

infer::MdeOptions mde_options(const json& cfg) {
    infer::MdeOptions o;
    const auto& m = cfg.at("mde");
    o.max_iters = get<std::size_t>(m, "max_iters");
    o.objective_tol = get<double>(m, "objective_tol");
    o.starts_per_row = get<std::size_t>(m, "starts_per_row");
    const auto b = get<std::string>(m, "branch");
    if (b == "auto") o.branch = infer::Branch::Auto;
    else if (b == "plus") o.branch = infer::Branch::Plus;
    else if (b == "minus") o.branch = infer::Branch::Minus;
    else bad_config("mde.branch must be auto, plus or minus");
    try {
        infer::validate(o);
    } catch (const Error& e) {
        bad_config(e.what());
    }
    return o;
}

pipeline::Options pipeline_options(const json& cfg) {
    pipeline::Options o;
    o.alpha = get<double>(cfg, "alpha");
    o.L = get_opt<int>(cfg, "L");
    o.max_L = get<int>(cfg, "max_L");
    o.gap_factor = get<double>(cfg, "gap_factor");
    o.tolerance = get<double>(cfg, "tolerance");
    o.baseline = get<double>(cfg, "baseline");
    o.mde = mde_options(cfg);
    return o;
}

void validate_common(const json& cfg) {
    const double alpha = get<double>(cfg, "alpha");
    if (!(alpha > 0.0 && alpha < 1.0)) bad_config("alpha must lie in (0,1)");
    if (const auto L = get_opt<int>(cfg, "L"); L && *L < 1) bad_config("L must be >= 1");
    if (get<int>(cfg, "max_L") < 1) bad_config("max_L must be >= 1");
    if (!(get<double>(cfg, "gap_factor") > 1.0)) bad_config("gap_factor must exceed 1");
    if (!(get<double>(cfg, "tolerance") >= 0.0)) bad_config("tolerance must be >= 0");
    if (get<int>(cfg, "threads") < 1) bad_config("threads must be >= 1");
    if (const auto r = get_opt<double>(cfg, "sample_rate"); r && !(*r > 0.0)) bad_config("sample_rate must be positive");
    get<std::uint64_t>(cfg, "seed");
    get<std::string>(cfg, "out");
    get<bool>(cfg, "plots");
    mde_options(cfg);
}

std::pair<int, int> parse_sweep(const std::string& s) {
    const auto colon = s.find(':');
    try {
        if (colon == std::string::npos) {
            const int v = std::stoi(s);
            return {v, v};
        }
        const int a = std::stoi(s.substr(0, colon));
        const int b = std::stoi(s.substr(colon + 1));
        if (a < 1 || b < a) bad_config("L sweep must be A:B with 1 <= A <= B");
        return {a, b};
    } catch (const std::logic_error&) {
        bad_config("L sweep must look like 2:6");
    }
}

struct SimulationSetup {
    ParamVector theta;
    synth::SynthesisConfig synthesis;
};

SimulationSetup simulation_setup(const json& cfg) {
    const auto& s = cfg.at("simulate");
    SimulationSetup out;
    std::size_t default_n = 1200;
    if (const auto t = get_opt<std::vector<double>>(s, "theta")) {
        try {
            out.theta = ParamVector::from_flat(*t);
            vnd::require_valid(out.theta);
        } catch (const Error& e) {
            bad_config(std::string("simulate.theta: ") + e.what());
        }
    } else {
        const auto name = get<std::string>(s, "scenario");
        std::map<std::string, std::pair<studies::Cooperativity, bool>> table{
            {"zero", {studies::Cooperativity::Zero, false}},
            {"positive", {studies::Cooperativity::Positive, false}},
            {"negative", {studies::Cooperativity::Negative, false}},
            {"zero-L20", {studies::Cooperativity::Zero, true}},
            {"positive-L20", {studies::Cooperativity::Positive, true}},
            {"negative-L20", {studies::Cooperativity::Negative, true}}};
        const auto it = table.find(name);
        if (it == table.end()) bad_config("unknown scenario: " + name);
        out.theta = it->second.second ? studies::twenty_channel_theta(it->second.first)
                                      : studies::two_channel_theta(it->second.first);
        if (it->second.second) default_n = 100000;
    }
    auto& syn = out.synthesis;
    syn.n = get_opt<std::size_t>(s, "n").value_or(default_n);
    if (syn.n == 0) bad_config("simulate.n must be >= 1");
    syn.sample_rate = get<double>(s, "sample_rate");
    syn.offset = get<double>(s, "offset");
    syn.spacing = get<double>(s, "spacing");
    if (!(syn.sample_rate > 0.0) || !(syn.spacing > 0.0)) bad_config("sample_rate and spacing must be positive");
    syn.kernel = kernel_spec(s.at("kernel"));
    try {
        syn.noise = io::noise_from_json(s.at("noise"));
        synth::validate(syn.noise);
        synth::make_kernel(syn.kernel, syn.sample_rate);
    } catch (const Error& e) {
        bad_config(std::string("simulate: ") + e.what());
    }
    return out;
}

void snapshot(const json& cfg, const std::string& command) {
    json c = cfg;
    c["command"] = command;
    io::write_json(out_dir(cfg) / "config.resolved.json", c);
}

Recording load_recording(const json& cfg) {
    const auto path = require_input(cfg);
    auto rec = io::read_recording(path, get_opt<double>(cfg, "sample_rate"));
    if (cfg.contains("kernel") && !cfg.at("kernel").is_null()) {
        rec.kernel = synth::make_kernel(kernel_spec(cfg.at("kernel")), rec.sample_rate);
    }
    return rec;
}

void plot_idealisation(const fs::path& path, const Recording& rec, const idealise::Idealisation& ideal) {
    svg::Series raw, fit;
    fit.colour = "#d62728";
    fit.step = true;
    const auto lv = idealise::expand(ideal, rec.samples.size());
    for (std::size_t k = 0; k < rec.samples.size(); ++k) {
        const double t = static_cast<double>(k) / rec.sample_rate;
        raw.x.push_back(t);
        raw.y.push_back(rec.samples[k]);
        fit.x.push_back(t);
        fit.y.push_back(lv[k]);
    }
    io::write_text(path, svg::line_plot("recording and idealisation", {raw, fit}));
}

diagnostics::Histogram level_histogram(const idealise::Idealisation& ideal, double sample_rate) {
    const auto levels = discretise::levels_from_idealisation(ideal, sample_rate);
    std::vector<double> x, w;
    for (const auto& l : levels) {
        x.push_back(l.level);
        w.push_back(l.weight);
    }
    return diagnostics::make_histogram(x, w, 60);
}

void write_idealisation(const json& cfg, const Recording& rec, const idealise::Idealisation& ideal) {
    const auto dir = out_dir(cfg);
    io::write_idealisation_csv(dir / "idealisation.csv", ideal, rec.sample_rate);
    io::write_json(dir / "idealisation.meta.json", {{"sample_rate", rec.sample_rate},
                                                     {"n", rec.samples.size()},
                                                     {"alpha", ideal.alpha},
                                                     {"n_switches", ideal.n_switches},
                                                     {"transient_samples", ideal.transient_samples}});
    if (get<bool>(cfg, "plots")) plot_idealisation(dir / "idealisation.svg", rec, ideal);
}

void write_discretisation(const json& cfg, const pipeline::Result& r, double sample_rate,
                          const idealise::Idealisation& ideal) {
    const auto dir = out_dir(cfg);
    const auto h = level_histogram(ideal, sample_rate);
    io::write_histogram_csv(dir / "levels_histogram.csv", h);
    io::write_discrete_trace_csv(dir / "discrete_trace.csv", r.trace);
    io::write_json(dir / "discrete_trace.meta.json", {{"sample_rate", sample_rate},
                                                       {"ladder", io::ladder_to_json(r.ladder)},
                                                       {"L", r.L},
                                                       {"L_selected", r.L_selected},
                                                       {"baseline_mismatch", r.baseline_mismatch}});
    if (get<bool>(cfg, "plots")) io::write_text(dir / "levels_histogram.svg", svg::bar_plot("idealised levels", h));
}

json report_document(const pipeline::Result& r) {
    json j;
    j["L"] = r.L;
    j["L_selected"] = r.L_selected;
    j["ladder"] = io::ladder_to_json(r.ladder);
    j["baseline_mismatch"] = r.baseline_mismatch;
    j["n_switches"] = r.ideal.n_switches;
    j["mde"] = io::mde_to_json(r.fit);
    j["objective"] = r.fit.objective;
    j["masked_rows"] = r.fit.diagnostics.masked_rows;
    j["report"] = io::report_to_json(r.report);
    j["verdict"] = vnd::to_string(r.report.verdict);
    json acc = json::object();
    if (r.accuracy.level_sse) acc["idealisation_level_sse"] = *r.accuracy.level_sse;
    if (r.accuracy.mismatch_rate) acc["discrete_mismatch_rate"] = *r.accuracy.mismatch_rate;
    if (r.accuracy.theta_l2) acc["theta_l2_error"] = *r.accuracy.theta_l2;
    j["accuracy"] = acc;
    return j;
}

}  // namespace

void cmd_simulate(const json& cfg, std::ostream& out) {
    const auto setup = simulation_setup(cfg);
    const auto seed = get<std::uint64_t>(cfg, "seed");
    const auto dir = out_dir(cfg);
    snapshot(cfg, "simulate");
    const auto sim = synth::synthesize_recording(setup.theta, setup.synthesis, seed);
    const auto& rec = sim.recording;
    io::write_recording_csv(dir / "recording.csv", rec);
    io::write_discrete_trace_csv(dir / "truth_trace.csv", *rec.truth_trace);
    io::write_json(dir / "truth_trace.meta.json",
                   {{"sample_rate", rec.sample_rate}, {"ladder", io::ladder_to_json(rec.truth_trace->ladder)}});
    json noise = io::noise_to_json(setup.synthesis.noise);
    noise["filter_disabled_for_asymmetric_kernel"] = sim.noise_filter_disabled;
    io::write_json(dir / "recording.meta.json",
                   {{"sample_rate", rec.sample_rate},
                    {"n", rec.samples.size()},
                    {"seed", seed},
                    {"kernel", io::kernel_to_json(rec.kernel)},
                    {"noise", noise},
                    {"truth",
                     {{"theta", io::theta_to_json(setup.theta)},
                      {"L", setup.theta.L()},
                      {"offset", setup.synthesis.offset},
                      {"spacing", setup.synthesis.spacing},
                      {"ladder", io::ladder_to_json(rec.truth_trace->ladder)},
                      {"n_switches", rec.truth_step->K()},
                      {"trace_csv", "truth_trace.csv"}}}});
    if (get<bool>(cfg, "plots")) {
        svg::Series s;
        for (std::size_t k = 0; k < rec.samples.size(); ++k) {
            s.x.push_back(static_cast<double>(k) / rec.sample_rate);
            s.y.push_back(rec.samples[k]);
        }
        io::write_text(dir / "recording.svg", svg::line_plot("simulated recording", {s}));
    }
    out << "simulated " << rec.samples.size() << " samples, L=" << setup.theta.L() << ", "
        << rec.truth_step->K() << " switches -> " << (dir / "recording.csv").string() << "\n";
}

void cmd_idealise(const json& cfg, std::ostream& out) {
    const auto rec = load_recording(cfg);
    snapshot(cfg, "idealise");
    const auto ideal = idealise::muscle_fit(rec, get<double>(cfg, "alpha"));
    write_idealisation(cfg, rec, ideal);
    out << "idealised " << rec.samples.size() << " samples: " << ideal.n_switches << " switches\n";
}

void cmd_discretise(const json& cfg, std::ostream& out) {
    const auto path = require_input(cfg);
    const auto meta_path = io::metadata_path(path);
    std::optional<double> rate = get_opt<double>(cfg, "sample_rate");
    std::optional<std::size_t> n;
    if (fs::exists(meta_path)) {
        const auto meta = io::read_json(meta_path);
        if (!rate && meta.contains("sample_rate")) rate = meta.at("sample_rate").get<double>();
        if (meta.contains("n")) n = meta.at("n").get<std::size_t>();
    }
    if (!rate) bad_config("sampling rate unknown: pass --sample-rate or keep the idealisation metadata");
    snapshot(cfg, "discretise");
    const auto ideal = io::read_idealisation_csv(path, *rate);
    const std::size_t len = n.value_or(ideal.segments.back().end);
    const auto opts = pipeline_options(cfg);

    pipeline::Result r;
    r.ideal = ideal;
    r.levels = discretise::levels_from_idealisation(ideal, *rate);
    r.L_selected = !opts.L;
    r.L = opts.L ? *opts.L : discretise::select_L(r.levels, opts.max_L, opts.gap_factor);
    r.ladder = discretise::equal_spacing_cluster(r.levels, r.L);
    r.baseline_mismatch = discretise::baseline_mismatch(r.ladder, opts.baseline);
    r.trace = discretise::discretise_trace(ideal, r.ladder, *rate, len);
    write_discretisation(cfg, r, *rate, ideal);
    out << "discretised onto L=" << r.L << " (offset " << r.ladder.offset << ", spacing " << r.ladder.spacing << ")"
        << (r.baseline_mismatch ? " [rung 0 away from baseline]" : "") << "\n";
}

void cmd_infer(const json& cfg, std::ostream& out) {
    const auto path = require_input(cfg);
    auto trace = io::read_discrete_trace_csv(path, get_opt<double>(cfg, "sample_rate"));
    const auto opts = pipeline_options(cfg);
    if (opts.L) {
        const int mx = *std::max_element(trace.values.begin(), trace.values.end());
        if (mx > *opts.L) bad_config("trace exceeds the requested L");
        trace.ladder.L = *opts.L;
    }
    snapshot(cfg, "infer");
    pipeline::Result r;
    r.trace = trace;
    r.L = trace.ladder.L;
    r.ladder = trace.ladder;
    pipeline::fit_trace(opts, r);
    io::write_json(out_dir(cfg) / "report.json", report_document(r));
    out << "verdict " << vnd::to_string(r.report.verdict) << " (objective " << r.fit.objective << ")\n";
}

void cmd_pipeline(const json& cfg, std::ostream& out) {
    const auto rec = load_recording(cfg);
    const auto opts = pipeline_options(cfg);
    const auto dir = out_dir(cfg);
    snapshot(cfg, "pipeline");
    pipeline::Result r;
    try {
        r.ideal = idealise::muscle_fit(rec, opts.alpha);
        r.reached = pipeline::Stage::Idealised;
        write_idealisation(cfg, rec, r.ideal);
        pipeline::run_from_idealisation(rec, opts, r);
    } catch (const Error&) {
        if (r.reached >= pipeline::Stage::Discretised) write_discretisation(cfg, r, rec.sample_rate, r.ideal);
        throw;
    }
    pipeline::score(rec, r);
    write_discretisation(cfg, r, rec.sample_rate, r.ideal);
    io::write_json(dir / "report.json", report_document(r));
    out << "pipeline: " << r.ideal.n_switches << " switches, L=" << r.L << ", verdict "
        << vnd::to_string(r.report.verdict) << "\n";

    if (const auto sweep = get_opt<std::string>(cfg, "L_sweep")) {
        const auto [a, b] = parse_sweep(*sweep);
        for (int L = a; L <= b; ++L) {
            auto o = opts;
            o.L = L;
            pipeline::Result s;
            s.ideal = r.ideal;
            s.reached = pipeline::Stage::Idealised;
            try {
                pipeline::run_from_idealisation(rec, o, s);
                pipeline::score(rec, s);
                io::write_json(dir / ("report_L" + std::to_string(L) + ".json"), report_document(s));
                out << "  L=" << L << ": verdict " << vnd::to_string(s.report.verdict) << "\n";
            } catch (const Error& e) {
                io::write_json(dir / ("report_L" + std::to_string(L) + ".json"),
                               {{"L", L}, {"error", to_string(e.code())}, {"message", e.what()}});
                out << "  L=" << L << ": " << to_string(e.code()) << "\n";
            }
        }
    }
}

void cmd_markov_test(const json& cfg, std::ostream& out) {
    const auto path = require_input(cfg);
    const auto trace = io::read_discrete_trace_csv(path, get_opt<double>(cfg, "sample_rate"));
    snapshot(cfg, "markov-test");
    const auto res = diagnostics::markov_property_test(trace);
    io::write_json(out_dir(cfg) / "markov_test.json", io::markov_to_json(res));
    out << "Markov test: statistic " << res.statistic << ", dof " << res.dof << ", p-value " << res.p_value << "\n";
}

void cmd_dwell(const json& cfg, std::ostream& out) {
    const auto path = require_input(cfg);
    const auto trace = io::read_discrete_trace_csv(path, get_opt<double>(cfg, "sample_rate"));
    const auto dir = out_dir(cfg);
    snapshot(cfg, "dwell");
    std::vector<int> states;
    if (const auto s = get_opt<int>(cfg, "state")) {
        if (*s < 0 || *s > trace.ladder.L) bad_config("state outside {0..L}");
        states.push_back(*s);
    } else {
        for (int s = 0; s <= trace.ladder.L; ++s) states.push_back(s);
    }
    json doc = json::array();
    for (int s : states) {
        json entry{{"state", s}};
        try {
            const auto fit = diagnostics::dwell_times(trace, s, trace.sample_rate);
            const std::string name = "dwell_state" + std::to_string(s) + ".csv";
            io::write_histogram_csv(dir / name, fit.histogram);
            double mean = 0.0;
            for (double v : fit.samples) mean += v;
            mean /= static_cast<double>(fit.samples.size());
            std::vector<double> expected;
            const double total = static_cast<double>(fit.samples.size());
            for (std::size_t b = 0; b < fit.histogram.counts.size(); ++b) {
                expected.push_back(total * (std::exp(-fit.rate * fit.histogram.edges[b]) -
                                            std::exp(-fit.rate * fit.histogram.edges[b + 1])));
            }
            entry["dwells"] = fit.samples.size();
            entry["mean_seconds"] = mean;
            entry["rate"] = fit.rate;
            entry["histogram_csv"] = name;
            entry["exponential_expected_counts"] = expected;
            if (get<bool>(cfg, "plots")) {
                io::write_text(dir / ("dwell_state" + std::to_string(s) + ".svg"),
                               svg::bar_plot("dwell times, state " + std::to_string(s), fit.histogram));
            }
            out << "state " << s << ": " << fit.samples.size() << " dwells, rate " << fit.rate << " 1/s\n";
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NoVisits) throw;
            entry["error"] = to_string(e.code());
            out << "state " << s << ": no interior dwells\n";
        }
        doc.push_back(entry);
    }
    io::write_json(dir / "dwell.json", {{"sample_rate", trace.sample_rate}, {"states", doc}});
}

namespace {

double median_of(std::vector<double> v) {
    v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return std::isnan(x); }), v.end());
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t k = v.size();
    return k % 2 ? v[k / 2] : 0.5 * (v[k / 2 - 1] + v[k / 2]);
}

void reproduce_errors(const json& cfg, studies::Cooperativity c, const std::string& id, std::ostream& out) {
    auto sc = studies::make_error_config(c);
    sc.seed = get<std::uint64_t>(cfg, "seed");
    sc.threads = static_cast<unsigned>(get<int>(cfg, "threads"));
    sc.repetitions = get_opt<std::size_t>(cfg.at("reproduce"), "repetitions").value_or(100);
    sc.pipeline = pipeline_options(cfg);
    if (!sc.pipeline.L) sc.pipeline.L = 2;
    const auto study = studies::run_error_study(sc);

    std::string csv = "noise,rep,seed,L,l2_error,verdict\n";
    std::map<std::string, std::vector<double>> errors;
    std::map<std::string, std::size_t> correct, total;
    for (const auto& r : study.reps) {
        csv += r.noise + "," + std::to_string(r.rep) + "," + std::to_string(r.seed) + "," + std::to_string(r.L) + "," +
               io::format_real(r.l2_error) + "," + (r.failed ? std::string("failed") : vnd::to_string(r.verdict)) + "\n";
        errors[r.noise].push_back(r.l2_error);
        ++total[r.noise];
        correct[r.noise] += !r.failed && r.verdict == studies::expected_verdict(c);
    }
    const auto dir = out_dir(cfg);
    io::write_text(dir / (id + ".csv"), csv);
    json summary{{"study", id}, {"scenario", studies::to_string(c)}, {"repetitions", sc.repetitions}};
    for (const auto& [noise, e] : errors) {
        summary["noise"][noise] = {{"median_l2_error", median_of(e)},
                                   {"correct_fraction", static_cast<double>(correct[noise]) / total[noise]}};
        out << id << " " << noise << ": median l2 " << median_of(e) << ", correct "
            << static_cast<double>(correct[noise]) / total[noise] << "\n";
    }
    io::write_json(dir / (id + ".summary.json"), summary);
}

void reproduce_many_channel(const json& cfg, bool ratios, const std::string& id, std::ostream& out) {
    studies::ManyChannelConfig mc;
    mc.seed = get<std::uint64_t>(cfg, "seed");
    mc.threads = static_cast<unsigned>(get<int>(cfg, "threads"));
    mc.repetitions = get_opt<std::size_t>(cfg.at("reproduce"), "repetitions").value_or(300);
    mc.max_L = get<int>(cfg, "max_L");
    mc.gap_factor = get<double>(cfg, "gap_factor");
    mc.mde = mde_options(cfg);
    mc.tolerance = get<double>(cfg, "tolerance");
    mc.fit = ratios;
    const auto reps = studies::run_many_channel_study(mc);

    const auto dir = out_dir(cfg);
    std::string csv = ratios ? "scenario,rep,L_hat,family,index,value\n" : "scenario,rep,distinct_states,L_hat\n";
    json summary{{"study", id}, {"repetitions", mc.repetitions}, {"true_L", 20}};
    std::map<std::string, std::map<int, int>> hist;
    std::map<std::string, std::map<std::string, std::vector<double>>> fam;
    std::map<std::string, std::map<std::string, int>> verdicts;
    for (const auto& r : reps) {
        const std::string sc = studies::to_string(r.scenario);
        ++hist[sc][r.L_hat];
        if (!ratios) {
            csv += sc + "," + std::to_string(r.rep) + "," + std::to_string(r.distinct_states) + "," +
                   std::to_string(r.L_hat) + "\n";
            continue;
        }
        if (!r.fitted) continue;
        ++verdicts[sc][vnd::to_string(r.report.verdict)];
        const std::pair<const char*, const std::vector<double>*> families[] = {
            {"lambda", &r.report.lambda_ratios},
            {"eta_open", &r.report.eta_open_ratios},
            {"eta_close", &r.report.eta_close_ratios}};
        for (const auto& [name, vec] : families) {
            for (std::size_t i = 0; i < vec->size(); ++i) {
                csv += sc + "," + std::to_string(r.rep) + "," + std::to_string(r.L_hat) + "," + name + "," +
                       std::to_string(i + 1) + "," + io::format_real((*vec)[i]) + "\n";
                fam[sc][name].push_back((*vec)[i]);
            }
        }
    }
    io::write_text(dir / (id + ".csv"), csv);
    for (const auto& [sc, h] : hist) {
        json hj = json::object();
        int under_ok = 0, count = 0;
        for (const auto& [L, k] : h) {
            hj[std::to_string(L)] = k;
            count += k;
            if (20 - L <= 3) under_ok += k;
        }
        summary["scenarios"][sc]["L_hat_histogram"] = hj;
        summary["scenarios"][sc]["fraction_underestimate_le_3"] = static_cast<double>(under_ok) / count;
        out << id << " " << sc << ": fraction with L_hat >= 17: " << static_cast<double>(under_ok) / count << "\n";
    }
    for (const auto& [sc, fams] : fam) {
        for (const auto& [name, v] : fams) summary["scenarios"][sc]["median_ratio"][name] = median_of(v);
        summary["scenarios"][sc]["verdicts"] = verdicts[sc];
    }
    io::write_json(dir / (id + ".summary.json"), summary);
}

void reproduce_fdr(const json& cfg, const std::string& id, std::ostream& out) {
    studies::FdrConfig fc;
    fc.seed = get<std::uint64_t>(cfg, "seed");
    fc.threads = static_cast<unsigned>(get<int>(cfg, "threads"));
    fc.repetitions = get_opt<std::size_t>(cfg.at("reproduce"), "repetitions").value_or(500);
    fc.kernel = kernel_spec(cfg.at("simulate").at("kernel"));
    const auto reps = studies::run_fdr_study(fc);
    std::string csv = "alpha,rep,seed,K_hat\n";
    std::map<double, std::vector<std::size_t>> by_alpha;
    for (const auto& r : reps) {
        csv += io::format_real(r.alpha) + "," + std::to_string(r.rep) + "," + std::to_string(r.seed) + "," +
               std::to_string(r.K_hat) + "\n";
        by_alpha[r.alpha].push_back(r.K_hat);
    }
    const auto dir = out_dir(cfg);
    io::write_text(dir / (id + ".csv"), csv);
    json summary{{"study", id}, {"repetitions", fc.repetitions}, {"n", fc.n}, {"sigma", fc.sigma}};
    json rows = json::array();
    for (const auto& [alpha, ks] : by_alpha) {
        const double fdr = idealise::empirical_fdr(0, ks);
        rows.push_back({{"alpha", alpha}, {"empirical_fdr", fdr}});
        out << id << " alpha=" << alpha << ": empirical FDR " << fdr << "\n";
    }
    summary["results"] = rows;
    io::write_json(dir / (id + ".summary.json"), summary);
}

}  // namespace

void cmd_reproduce(const json& cfg, std::ostream& out) {
    const auto id = get_opt<std::string>(cfg.at("reproduce"), "study");
    if (!id) bad_config("reproduce needs a study id");
    const auto& ids = study_ids();
    if (std::find(ids.begin(), ids.end(), *id) == ids.end()) {
        throw Error(ErrorCode::UnknownStudy, "unknown study: " + *id);
    }
    snapshot(cfg, "reproduce");
    if (*id == "fig-errors-zero") reproduce_errors(cfg, studies::Cooperativity::Zero, *id, out);
    else if (*id == "fig-errors-pos") reproduce_errors(cfg, studies::Cooperativity::Positive, *id, out);
    else if (*id == "fig-errors-neg") reproduce_errors(cfg, studies::Cooperativity::Negative, *id, out);
    else if (*id == "fig-L-hist") reproduce_many_channel(cfg, false, *id, out);
    else if (*id == "fig-ratio-hist") reproduce_many_channel(cfg, true, *id, out);
    else reproduce_fdr(cfg, *id, out);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Idealisation, discretisation and cooperativity inference for ion channel recordings", "idc"};
    app.require_subcommand(1);

    std::string config_path, out_path, input, l_sweep, study, noise, scenario, kernel, theta, branch;
    std::uint64_t seed = 0;
    double alpha = 0, sample_rate = 0, gap_factor = 0, tolerance = 0;
    int L = 0, max_L = 0, threads = 0, state = 0;
    std::size_t n = 0, reps = 0;
    bool plots = false;

    auto* o_config = app.add_option("--config", config_path, "JSON configuration file");
    auto* o_seed = app.add_option("--seed", seed, "random seed");
    auto* o_out = app.add_option("--out", out_path, "output directory (default $IDC_OUT_DIR or idc_out)");
    auto* o_alpha = app.add_option("--alpha", alpha, "idealisation error level in (0,1)");
    auto* o_L = app.add_option("--L", L, "channel count; skips automatic selection");
    auto* o_maxL = app.add_option("--max-L", max_L, "largest channel count considered");
    auto* o_threads = app.add_option("--threads", threads, "worker threads for reproduce");
    auto* o_plots = app.add_flag("--plots", plots, "write SVG plots");
    auto* o_sweep = app.add_option("--L-sweep", l_sweep, "pipeline: also fit each L in A:B");
    auto* o_input = app.add_option("--input", input, "input CSV");
    auto* o_rate = app.add_option("--sample-rate", sample_rate, "sampling rate in Hz when metadata is missing");
    auto* o_gap = app.add_option("--gap-factor", gap_factor, "level grouping gap factor");
    auto* o_tol = app.add_option("--tolerance", tolerance, "cooperativity ratio tolerance");
    auto* o_state = app.add_option("--state", state, "dwell: single state to analyse");
    auto* o_scen = app.add_option("--scenario", scenario, "simulate: zero|positive|negative[-L20]");
    auto* o_theta = app.add_option("--theta", theta, "simulate: comma separated lambda_0..lambda_{L-1},eta_1..eta_L");
    auto* o_n = app.add_option("--n", n, "simulate: number of samples");
    auto* o_noise = app.add_option("--noise", noise, "simulate: gaussian|cauchy|mixture");
    auto* o_kernel = app.add_option("--kernel", kernel, "simulate: identity|bspline2|bessel");
    auto* o_reps = app.add_option("--reps", reps, "reproduce: repetitions per cell");
    auto* o_branch = app.add_option("--branch", branch, "even L: auto|plus|minus");

    std::vector<std::string> names{"simulate", "idealise", "discretise", "infer", "pipeline", "markov-test", "dwell", "reproduce"};
    std::map<std::string, CLI::App*> subs;
    for (const auto& name : names) {
        auto* s = app.add_subcommand(name);
        s->fallthrough();
        subs[name] = s;
    }
    auto* o_study = subs["reproduce"]->add_option("study", study, "study id");

    std::vector<std::string> rev(args.rbegin(), args.rend());
    if (!rev.empty()) rev.pop_back();
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kInvalidConfig;
    }

    std::string command;
    for (const auto& [name, s] : subs) {
        if (s->parsed()) command = name;
    }

    try {
        json cfg = default_config();
        if (o_config->count()) {
            json file = io::read_json(config_path);
            if (!file.is_object()) bad_config("configuration must be a JSON object");
            file.erase("command");
            cfg.merge_patch(file);
        }
        if (o_seed->count()) cfg["seed"] = seed;
        if (o_out->count()) cfg["out"] = out_path;
        if (o_alpha->count()) cfg["alpha"] = alpha;
        if (o_L->count()) cfg["L"] = L;
        if (o_maxL->count()) cfg["max_L"] = max_L;
        if (o_threads->count()) cfg["threads"] = threads;
        if (o_plots->count()) cfg["plots"] = plots;
        if (o_sweep->count()) cfg["L_sweep"] = l_sweep;
        if (o_input->count()) cfg["input"] = input;
        if (o_rate->count()) cfg["sample_rate"] = sample_rate;
        if (o_gap->count()) cfg["gap_factor"] = gap_factor;
        if (o_tol->count()) cfg["tolerance"] = tolerance;
        if (o_state->count()) cfg["state"] = state;
        if (o_scen->count()) {
            cfg["simulate"]["scenario"] = scenario;
            cfg["simulate"]["theta"] = nullptr;
        }
        if (o_theta->count()) {
            std::vector<double> t;
            std::stringstream ss(theta);
            std::string tok;
            while (std::getline(ss, tok, ',')) {
                try {
                    t.push_back(std::stod(tok));
                } catch (const std::logic_error&) {
                    bad_config("--theta must be a comma separated list of numbers");
                }
            }
            cfg["simulate"]["theta"] = t;
        }
        if (o_n->count()) cfg["simulate"]["n"] = n;
        if (o_noise->count()) {
            json nz = cfg["simulate"]["noise"];
            nz["kind"] = noise;
            if (noise == "gaussian") nz["weight_gaussian"] = 1.0;
            if (noise == "mixture") nz["weight_gaussian"] = 0.85;
            if (noise == "cauchy") nz["weight_gaussian"] = 0.0;
            cfg["simulate"]["noise"] = nz;
        }
        if (o_kernel->count()) cfg["simulate"]["kernel"]["kind"] = kernel;
        if (o_reps->count()) cfg["reproduce"]["repetitions"] = reps;
        if (o_branch->count()) cfg["mde"]["branch"] = branch;
        if (o_study->count()) cfg["reproduce"]["study"] = study;

        validate_common(cfg);

        if (command == "simulate") cmd_simulate(cfg, out);
        else if (command == "idealise") cmd_idealise(cfg, out);
        else if (command == "discretise") cmd_discretise(cfg, out);
        else if (command == "infer") cmd_infer(cfg, out);
        else if (command == "pipeline") cmd_pipeline(cfg, out);
        else if (command == "markov-test") cmd_markov_test(cfg, out);
        else if (command == "dwell") cmd_dwell(cfg, out);
        else cmd_reproduce(cfg, out);
        return kOk;
    } catch (const Error& e) {
        err << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
        switch (e.code()) {
            case ErrorCode::InvalidConfig:
            case ErrorCode::UnknownStudy: return kInvalidConfig;
            case ErrorCode::IO: return kIoError;
            default: return kStageFailure;
        }
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error [IO]: " << e.what() << "\n";
        return kIoError;
    } catch (const json::exception& e) {
        err << "error [InvalidConfig]: " << e.what() << "\n";
        return kInvalidConfig;
    }
}

}  // namespace idc::cli
