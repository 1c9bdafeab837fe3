#pragma once

// File formats. All writers are byte-deterministic: fixed number formatting
// and sorted JSON keys.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "idc/diagnostics.hpp"
#include "idc/discretise.hpp"
#include "idc/idealise.hpp"
#include "idc/infer.hpp"
#include "idc/signal_synth.hpp"
#include "idc/types.hpp"

namespace idc::io {

using json = nlohmann::json;
namespace fs = std::filesystem;

// %.17g, shortest form that round-trips.
std::string format_real(double v);
// Seconds with 9 decimals.
std::string format_time(double t);

void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

void write_json(const fs::path& path, const json& doc);
json read_json(const fs::path& path);

// `time,current`
void write_recording_csv(const fs::path& path, const Recording& rec);

struct LoadedSeries {
    std::vector<double> times;
    std::vector<double> values;
    bool had_header = false;
};

// Two numeric columns, with or without a header line.
LoadedSeries read_two_column_csv(const fs::path& path);

// Sampling rate from metadata if present, otherwise `fallback_rate`, otherwise
// the median time step of the file.
Recording read_recording(const fs::path& csv, std::optional<double> fallback_rate = std::nullopt);

fs::path metadata_path(const fs::path& csv);

json kernel_to_json(const Kernel& k);
Kernel kernel_from_json(const json& j);
json noise_to_json(const synth::NoiseSpec& n);
synth::NoiseSpec noise_from_json(const json& j);
json theta_to_json(const ParamVector& theta);
ParamVector theta_from_json(const json& j);
json ladder_to_json(const LevelLadder& l);
LevelLadder ladder_from_json(const json& j);

// `segment_start_time,segment_end_time,level`
void write_idealisation_csv(const fs::path& path, const idealise::Idealisation& ideal, double sample_rate);
idealise::Idealisation read_idealisation_csv(const fs::path& path, double sample_rate);

// `time,open_channels`
void write_discrete_trace_csv(const fs::path& path, const DiscreteTrace& trace);
DiscreteTrace read_discrete_trace_csv(const fs::path& path, std::optional<double> fallback_rate = std::nullopt);

// `bin_left,bin_right,count`
void write_histogram_csv(const fs::path& path, const diagnostics::Histogram& h);

json report_to_json(const vnd::CooperativityReport& report);
json mde_to_json(const infer::MdeResult& fit);
json markov_to_json(const diagnostics::MarkovTestResult& r);

}  // namespace idc::io
