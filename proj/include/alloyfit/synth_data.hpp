#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include "alloyfit/dataset.hpp"

namespace alloyfit::synth {

/// Handbook composition bounds in weight-percent, Fe..Mo.
inline constexpr std::array<RangeSpec, kNumElements> kElementBounds = {{
    {70.0, 100.0}, {0.08, 1.2}, {0.25, 2.0}, {0.0, 0.2}, {0.0, 1.0},
    {0.0, 3.0}, {0.0, 26.0}, {0.0, 37.0}, {0.0, 4.0},
}};

inline constexpr std::string_view kGroundTruthVersion = "steel-gt-v1";

/// Fixed closed-form property model. Only the noise and sampling knobs vary.
struct GroundTruthSpec {
    std::array<double, 4> noise_std = {3.0, 10.0, 8.0, 0.6};  // hardness, tensile, yield, elongation
    double ranged_probability = 0.5;  // chance that an element is given as a range
    double min_width = 0.05;          // range width as a fraction of the element's bound span
    double max_width = 0.30;
    std::uint64_t seed = 20180619;
};

/// Noise-free property values at a concrete composition.
PropertyVector ground_truth(const AlloyPoint& point);

/// Records with ranges inside kElementBounds, a uniform route, and targets
/// from ground_truth at the range midpoints plus seeded Gaussian noise.
std::vector<AlloyRecord> generate(std::size_t n_records, const GroundTruthSpec& spec);

}  // namespace alloyfit::synth
