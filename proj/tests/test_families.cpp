#include <gtest/gtest.h>

#include <cmath>

#include "alloyfit/error.hpp"
#include "alloyfit/families.hpp"
#include "alloyfit/parallel.hpp"
#include "alloyfit/synth_data.hpp"
#include "support.hpp"

using namespace alloyfit;

namespace {

AugmentedSet small_set(std::size_t records = 40, Property p = Property::Hardness) {
    synth::GroundTruthSpec spec;
    spec.seed = 5;
    return augment(synth::generate(records, spec), {p, RouteEncoding::Ordinal, 4096});
}

std::vector<FamilyCell> one_cell_per_family() {
    nn::TrainerSpec t;
    t.max_epochs = 30;
    return {LinearCell{{2, false, 1e-3}}, NnCell{3, t, 300},
            SvrCell{{svr::KernelKind::Gaussian, 3, 1.0, 1.0}, true, {}, 300}, TreeCell{{2, -1}, {0.05}}};
}

}  // namespace

TEST(Families, NamesRoundTrip) {
    for (auto f : kAllFamilies) EXPECT_EQ(parse_family(family_name(f)), f);
    EXPECT_EQ(family_label(Family::Svr), "SVR");
    EXPECT_EQ(family_label(Family::Tree), "DT");
    EXPECT_THROW(parse_family("forest"), UsageError);
}

TEST(Families, CrossValidateReportShape) {
    const auto set = small_set();
    const auto folds = assign_folds(set.train_val, 10, 3, true);
    for (const auto& cell : one_cell_per_family()) {
        const auto rep = cross_validate(cell, set.train_val, folds, set.test, 9, "hardness");
        ASSERT_EQ(rep.k(), 10) << describe(cell);
        double sum = 0;
        for (double v : rep.fold_r2) sum += v;
        EXPECT_NEAR(rep.mean_r2(), sum / 10.0, 1e-12);
        EXPECT_EQ(rep.family, family_name(family_of(cell)));
    }
}

TEST(Families, ParallelEqualsSerial) {
    const auto set = small_set();
    const auto folds = assign_folds(set.train_val, 5, 3, true);
    const auto cells = one_cell_per_family();
    set_jobs(1);
    std::vector<GridResult> serial;
    for (const auto& c : cells) {
        const std::vector<FamilyCell> one = {c};
        serial.push_back(cross_validate_grid(one, set.train_val, folds, set.test, 17));
    }
    set_jobs(8);
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const std::vector<FamilyCell> one = {cells[i]};
        const auto par = cross_validate_grid(one, set.train_val, folds, set.test, 17);
        for (std::size_t f = 0; f < 5; ++f) {
            EXPECT_EQ(par.best().folds[f].test_predictions, serial[i].best().folds[f].test_predictions);
            EXPECT_EQ(serialize_model(par.best().folds[f].model), serialize_model(serial[i].best().folds[f].model));
        }
    }
    set_jobs(1);
}

TEST(Families, SerializationRoundTrip) {
    const auto set = small_set(30);
    const auto folds = assign_folds(set.train_val, 3, 1, true);
    const auto X = feature_matrix(set.test);
    for (const auto& cell : one_cell_per_family()) {
        const auto model = fit_cell(cell, set.train_val, folds, 0, 4);
        const auto text = serialize_model(model);
        const auto back = deserialize_model(text);
        EXPECT_EQ(back.predict(X), model.predict(X)) << describe(cell);
        EXPECT_EQ(serialize_model(back), text);
    }
    EXPECT_THROW(deserialize_model("{}"), DataError);
    EXPECT_THROW(deserialize_model("not json"), DataError);
}

TEST(Families, LinearExactOnNoiselessLinearData) {
    Rng rng(2);
    std::vector<Sample> train, test;
    for (int r = 0; r < 60; ++r) {
        for (int i = 0; i < 3; ++i) {
            Sample s;
            s.source_record_id = "R" + std::to_string(r);
            s.features = {rng.uniform(0, 2), rng.uniform(-1, 1), rng.uniform(0, 5)};
            s.target = 4.0 + 2.0 * s.features[0] - 3.0 * s.features[1] + 0.5 * s.features[2];
            (i == 2 ? test : train).push_back(s);
        }
    }
    const auto folds = assign_folds(train, 10, 1, true);
    const std::vector<FamilyCell> cells = {LinearCell{{1, false, 0.0}}, LinearCell{{3, false, 1.0}}};
    const auto grid = cross_validate_grid(cells, train, folds, test, 1);
    EXPECT_EQ(grid.selected, 0u);
    EXPECT_GE(grid.best().mean_test_r2(), 0.999);
}

TEST(Families, GridSelectionUsesFriedmanForSvr) {
    const auto set = small_set();
    const auto folds = assign_folds(set.train_val, 5, 2, true);
    std::vector<FamilyCell> cells;
    for (auto k : {svr::KernelKind::Linear, svr::KernelKind::Gaussian}) {
        cells.push_back(SvrCell{{k, 3, 1.0, 1.0}, true, {}, 300});
    }
    const auto grid = cross_validate_grid(cells, set.train_val, folds, set.test, 3);
    ASSERT_TRUE(grid.variant_test.has_value());
    const auto& ranks = grid.variant_test->mean_ranks;
    EXPECT_LE(ranks[grid.selected], ranks[1 - grid.selected]);
}

TEST(Families, SubsampleIsSortedDeterministicAndCapped) {
    std::vector<std::size_t> rows(100);
    for (std::size_t i = 0; i < 100; ++i) rows[i] = i * 2;
    const auto a = subsample(rows, 30, 7), b = subsample(rows, 30, 7);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.size(), 30u);
    EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
    EXPECT_EQ(subsample(rows, 0, 7), rows);
    EXPECT_EQ(subsample(rows, 500, 7), rows);
}
