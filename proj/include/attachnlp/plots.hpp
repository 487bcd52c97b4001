#pragma once

#include <string>
#include <utility>
#include <vector>

#include "attachnlp/corpus.hpp"
#include "attachnlp/evaluation.hpp"

namespace attachnlp {

// Standalone SVG renderers. All report numbers are computed by the
// evaluation module before any of these run; rendering only draws them.

// Grouped per-label bar chart of patient-turn lengths.
std::string render_turn_length_histogram_svg(const TurnLengthHistogram& histogram);

// Grid of confusion matrices (e.g. majority vote plus one per fold),
// shaded by row-normalized frequency.
std::string render_confusion_grid_svg(
    const std::vector<std::pair<std::string, ConfusionMatrix>>& matrices);

// Mean accuracy with population-std error bars over minimum input lengths.
std::string render_sweep_errorbars_svg(const SweepReport& report);

}  // namespace attachnlp
