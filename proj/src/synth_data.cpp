#include "alloyfit/synth_data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "alloyfit/error.hpp"
#include "alloyfit/rng.hpp"

namespace alloyfit::synth {

namespace {

double unit(const AlloyPoint& p, Element e) {
    const auto i = static_cast<std::size_t>(e);
    const auto& b = kElementBounds[i];
    return (p.composition[i] - b.min) / (b.max - b.min);
}

}  // namespace

PropertyVector ground_truth(const AlloyPoint& p) {
    const double c = unit(p, Element::C), mn = unit(p, Element::Mn), ph = unit(p, Element::P);
    const double s = unit(p, Element::S), si = unit(p, Element::Si), ni = unit(p, Element::Ni);
    const double cr = unit(p, Element::Cr), mo = unit(p, Element::Mo);
    const int route = p.process.code();

    const double strengthening = 1.6 * c + 0.5 * mn + 0.6 * cr + 0.5 * mo + 0.3 * ni + 0.25 * si;
    double route_gain = 0.0;
    switch (route) {
        case 2: route_gain = 0.35; break;
        case 3: route_gain = -0.35; break;
        case 4: route_gain = 0.1; break;
        case 5: route_gain = 0.2 + 0.9 * c; break;  // quench response grows with carbon
        default: break;
    }
    const double index = strengthening + route_gain;

    PropertyVector out;
    out.hardness = 110.0 + 320.0 * std::tanh(0.45 * index) + 15.0 * ph - 10.0 * s;
    out.tensile_strength = 3.3 * out.hardness + 40.0 * std::sin(std::numbers::pi * si) + 25.0 * ni;
    const double yield_ratio = 0.58 + 0.08 * std::tanh(0.5 * index);
    out.yield_strength = out.tensile_strength * yield_ratio - 20.0 * ni * cr;
    out.elongation = 42.0 * std::exp(-0.9 * index) + 4.0 + 5.0 * ni - 3.0 * s;
    return out;
}

std::vector<AlloyRecord> generate(std::size_t n_records, const GroundTruthSpec& spec) {
    if (n_records < 1) throw UsageError("synthetic dataset needs at least one record");
    if (!(spec.min_width > 0.0 && spec.min_width <= spec.max_width && spec.max_width <= 1.0)) {
        throw UsageError("range width fractions must satisfy 0 < min <= max <= 1");
    }
    for (double s : spec.noise_std) {
        if (!(s >= 0.0)) throw UsageError("noise std must be >= 0");
    }

    Rng rng(spec.seed);
    std::vector<AlloyRecord> records;
    records.reserve(n_records);
    for (std::size_t r = 0; r < n_records; ++r) {
        AlloyRecord rec;
        char id[24];
        std::snprintf(id, sizeof id, "S%04zu", r + 1);
        rec.record_id = id;
        rec.process = ProcessRoute(1 + static_cast<int>(rng.below(kNumRoutes)));
        AlloyPoint mid{.process = rec.process};
        for (std::size_t e = 0; e < kNumElements; ++e) {
            const auto& b = kElementBounds[e];
            const double span = b.max - b.min;
            if (rng.uniform() < spec.ranged_probability) {
                const double width = span * rng.uniform(spec.min_width, spec.max_width);
                const double lo = b.min + rng.uniform() * (span - width);
                rec.composition[e] = {lo, std::min(lo + width, b.max)};
            } else {
                const double v = b.min + rng.uniform() * span;
                rec.composition[e] = {v, v};
            }
            mid.composition[e] = rec.composition[e].midpoint();
        }
        const auto truth = ground_truth(mid);
        auto noisy = [&](double v, std::size_t k) { return std::max(0.0, v + spec.noise_std[k] * rng.normal()); };
        rec.targets.hardness = noisy(truth.hardness, 0);
        rec.targets.tensile_strength = noisy(truth.tensile_strength, 1);
        rec.targets.yield_strength = noisy(truth.yield_strength, 2);
        rec.targets.elongation = std::min(100.0, noisy(truth.elongation, 3));
        validate_record(rec);
        records.push_back(std::move(rec));
    }
    return records;
}

}  // namespace alloyfit::synth
