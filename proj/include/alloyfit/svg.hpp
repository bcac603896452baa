#pragma once

#include <span>
#include <string>
#include <utility>

namespace alloyfit {

struct ScatterLabels {
    std::string title = "Predictions vs targets";
    std::string x_label = "target";
    std::string y_label = "prediction";
};

struct ScatterDocument {
    std::string svg;  // self-contained, inline styles only
    std::string csv;  // target,prediction
};

/// Square plot sharing one scale on both axes, with the y = x diagonal, one
/// <circle> marker per pair, and tick labels. Throws DataError on empty input.
ScatterDocument emit_scatter_svg(std::span<const std::pair<double, double>> pairs, const ScatterLabels& labels = {});

}  // namespace alloyfit
