#pragma once

#include <string>
#include <vector>

#include "cellpp/envelopes.hpp"
#include "cellpp/field.hpp"
#include "cellpp/groupstats.hpp"
#include "cellpp/intensity.hpp"
#include "cellpp/pattern.hpp"
#include "cellpp/secondorder.hpp"

// Self-contained SVG documents; output depends only on the inputs.
namespace cellpp::svg {

/// Heat map of a field; cells outside the window are left blank. When
/// `contour_of` is given, its level set at `level` is drawn on top.
std::string heatmap(const ScalarField& field, const std::string& title, const ScalarField* contour_of = nullptr,
                    double level = 0.05, bool diverging = false);

/// Most probable type per cell, one colour per level.
std::string argmax_map(const TypeProbabilities& probs, const std::string& title);

/// Points coloured by type inside the window outline.
std::string pattern_map(const MultitypePattern& pattern, const std::string& title);

/// Estimated curves (solid) against their theoretical values (dashed).
std::string line_plot(const std::vector<SummaryFunction>& functions, const std::string& title);

/// Observed curve over the shaded central region, with the simulation mean.
std::string envelope_plot(const EnvelopeResult& result, const std::string& title);

/// One panel per group: member curves, group mean, and the group's segment of
/// the permutation region.
std::string group_panels(const GroupedCurves& grouped, const EnvelopeResult& result, const std::string& title);

}  // namespace cellpp::svg
