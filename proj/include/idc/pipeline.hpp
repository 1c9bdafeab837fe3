#pragma once

// Recording -> idealisation -> ladder -> discrete trace -> MDE -> report.

#include <optional>
#include <vector>

#include "idc/discretise.hpp"
#include "idc/idealise.hpp"
#include "idc/infer.hpp"
#include "idc/types.hpp"
#include "idc/vnd_model.hpp"

namespace idc::pipeline {

struct Options {
    double alpha = idealise::kDefaultAlpha;
    std::optional<int> L;  // skips select_L when set
    int max_L = discretise::kDefaultMaxL;
    double gap_factor = discretise::kDefaultGapFactor;
    infer::MdeOptions mde;
    double tolerance = vnd::kDefaultTolerance;
    double baseline = 0.0;
};

enum class Stage { None, Idealised, Discretised, Fitted };

struct Accuracy {
    std::optional<double> level_sse;       // idealised vs true conductance, summed over samples
    std::optional<double> mismatch_rate;   // discrete trace vs true open-channel count
    std::optional<double> theta_l2;        // when the fitted L equals the true L
};

struct Result {
    Stage reached = Stage::None;
    idealise::Idealisation ideal;
    std::vector<discretise::WeightedLevel> levels;
    int L = 0;
    bool L_selected = false;
    LevelLadder ladder;
    bool baseline_mismatch = false;
    DiscreteTrace trace;
    TransitionMatrix q_hat;
    infer::MdeResult fit;
    vnd::CooperativityReport report;
    Accuracy accuracy;
};

// Fills `out` stage by stage, so a partially filled result survives an exception.
void run(const Recording& rec, const Options& options, Result& out);
Result run(const Recording& rec, const Options& options);

// Stages after idealisation, with L fixed or selected; used for L sweeps.
void run_from_idealisation(const Recording& rec, const Options& options, Result& out);

// MDE stage on an already discretised trace.
void fit_trace(const Options& options, Result& out);

void score(const Recording& rec, Result& out);

}  // namespace idc::pipeline
