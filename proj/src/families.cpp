#include "alloyfit/families.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "json.hpp"

#include "alloyfit/error.hpp"
#include "alloyfit/parallel.hpp"
#include "alloyfit/rng.hpp"

namespace alloyfit {

using nlohmann::json;

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

std::vector<double> row_of(const Eigen::MatrixXd& X, Eigen::Index i) {
    std::vector<double> r(static_cast<std::size_t>(X.cols()));
    for (Eigen::Index j = 0; j < X.cols(); ++j) r[static_cast<std::size_t>(j)] = X(i, j);
    return r;
}

Eigen::VectorXd scaled_targets(const Scaler& s, const Eigen::VectorXd& y) {
    return ((y.array() - s.target_mean) / s.target_std).matrix();
}

std::string fmt(double v) { return format_double(v); }

}  // namespace

std::string_view family_name(Family f) {
    switch (f) {
        case Family::Linear: return "linear";
        case Family::NeuralNet: return "nn";
        case Family::Svr: return "svr";
        case Family::Tree: return "tree";
    }
    return "?";
}

std::string_view family_label(Family f) {
    switch (f) {
        case Family::Linear: return "LR";
        case Family::NeuralNet: return "NN";
        case Family::Svr: return "SVR";
        case Family::Tree: return "DT";
    }
    return "?";
}

Family parse_family(std::string_view name) {
    for (auto f : kAllFamilies) {
        if (family_name(f) == name) return f;
    }
    throw UsageError("unknown model family '" + std::string(name) + "' (expected linear|nn|svr|tree)");
}

Family family_of(const FamilyCell& cell) {
    return std::visit(overloaded{[](const LinearCell&) { return Family::Linear; },
                                 [](const NnCell&) { return Family::NeuralNet; },
                                 [](const SvrCell&) { return Family::Svr; },
                                 [](const TreeCell&) { return Family::Tree; }},
                      cell);
}

std::string describe(const FamilyCell& cell) {
    return std::visit(
        overloaded{
            [](const LinearCell& c) {
                return "degree=" + std::to_string(c.spec.degree) + " lambda=" + fmt(c.spec.lambda) +
                       (c.spec.interactions ? " interactions" : "");
            },
            [](const NnCell& c) {
                return std::string(nn::algorithm_name(c.trainer.algorithm)) + " hidden=" + std::to_string(c.n_hidden);
            },
            [](const SvrCell& c) {
                std::string s(svr::kernel_name(c.kernel.kind));
                if (c.kernel.kind == svr::KernelKind::Polynomial) s += " degree=" + std::to_string(c.kernel.degree);
                if (c.kernel.kind == svr::KernelKind::Gaussian) {
                    s += c.auto_gamma ? " gamma=auto" : " gamma=" + fmt(c.kernel.gamma);
                }
                return s + " C=" + fmt(c.params.C) + " epsilon=" + fmt(c.params.epsilon);
            },
            [](const TreeCell& c) {
                return "min_leaf=" + std::to_string(c.grow.min_leaf) + " gap_tol=" + fmt(c.prune.gap_tol);
            }},
        cell);
}

double TrainedModel::predict(std::span<const double> x) const {
    return std::visit(overloaded{[&](const linear::LinearModel& m) { return linear::predict(m, x); },
                                 [&](const NnModel& m) {
                                     const auto xs = m.scaler.transform(x);
                                     return m.scaler.unscale_target(nn::forward(m.net, xs));
                                 },
                                 [&](const svr::SvrModel& m) { return svr::predict(m, x); },
                                 [&](const TreeModel& m) { return tree::predict(m.tree, x); }},
                      model);
}

Eigen::VectorXd TrainedModel::predict(const Eigen::MatrixXd& X) const {
    Eigen::VectorXd out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) = predict(row_of(X, i));
    return out;
}

std::vector<std::size_t> subsample(std::vector<std::size_t> rows, std::size_t cap, std::uint64_t seed) {
    if (cap == 0 || rows.size() <= cap) return rows;
    Rng rng(seed);
    rng.shuffle(rows.begin(), rows.end());
    rows.resize(cap);
    std::sort(rows.begin(), rows.end());
    return rows;
}

TrainedModel fit_cell(const FamilyCell& cell, std::span<const Sample> samples, const FoldAssignment& folds, int fold,
                      std::uint64_t seed) {
    const auto train_rows = folds.train_indices(fold);
    const auto val_rows = folds.val_indices(fold);
    if (train_rows.empty() || val_rows.empty()) {
        throw DataError("fold " + std::to_string(fold + 1) + " has an empty training or validation portion");
    }
    const Eigen::MatrixXd X = feature_matrix(samples, train_rows);
    const Eigen::VectorXd y = target_vector(samples, train_rows);
    const Eigen::MatrixXd X_val = feature_matrix(samples, val_rows);
    const Eigen::VectorXd y_val = target_vector(samples, val_rows);

    TrainedModel out{cell, linear::LinearModel{}};
    std::visit(
        overloaded{
            [&](const LinearCell& c) { out.model = linear::fit_linear(X, y, c.spec); },
            [&](const NnCell& c) {
                const auto rows = subsample(train_rows, c.max_train_samples, derive_seed(seed, 0x5ab));
                const Eigen::MatrixXd Xs = feature_matrix(samples, rows);
                const Eigen::VectorXd ys = target_vector(samples, rows);
                const Scaler scaler = fit_scaler(Xs, ys);
                auto net = nn::init_network({static_cast<int>(X.cols()), c.n_hidden, derive_seed(seed, 0x17)});
                auto result = nn::train(std::move(net), scale_features(scaler, Xs), scaled_targets(scaler, ys),
                                        scale_features(scaler, X_val), scaled_targets(scaler, y_val), c.trainer);
                out.model = NnModel{std::move(result.net), scaler, std::move(result.history)};
            },
            [&](const SvrCell& c) {
                const auto rows = subsample(train_rows, c.max_train_samples, derive_seed(seed, 0x5ab));
                const Eigen::MatrixXd Xs = feature_matrix(samples, rows);
                const Eigen::VectorXd ys = target_vector(samples, rows);
                const Scaler scaler = fit_scaler(Xs, ys);
                const Eigen::MatrixXd Xss = scale_features(scaler, Xs);
                auto kernel = c.kernel;
                if (c.auto_gamma) kernel.gamma = svr::default_gamma(Xss);
                auto model = svr::fit_svr(Xss, scaled_targets(scaler, ys), kernel, c.params);
                model.scaler = scaler;
                out.model = std::move(model);
            },
            [&](const TreeCell& c) {
                const auto grown = tree::grow(X, y, c.grow);
                const auto seq = tree::prune_sequence(grown);
                auto sel = tree::select_pruned(seq, X_val, y_val, c.prune);
                out.model = TreeModel{std::move(sel.tree), sel.step, sel.train_r2, sel.val_r2, sel.within_tolerance};
            }},
        cell);
    return out;
}

namespace {

double mean_ok(const std::vector<FoldOutcome>& folds, double FoldOutcome::*field) {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& f : folds) {
        if (f.ok()) {
            s += f.*field;
            ++n;
        }
    }
    return n ? s / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

double CellEvaluation::mean_val_r2() const { return mean_ok(folds, &FoldOutcome::val_r2); }

double CellEvaluation::mean_test_r2() const { return mean_ok(folds, &FoldOutcome::test_r2); }

std::size_t CellEvaluation::failed_folds() const {
    return static_cast<std::size_t>(std::count_if(folds.begin(), folds.end(), [](const FoldOutcome& f) { return !f.ok(); }));
}

GridResult cross_validate_grid(std::span<const FamilyCell> cells, std::span<const Sample> samples,
                               const FoldAssignment& folds, std::span<const Sample> test, std::uint64_t seed) {
    if (cells.empty()) throw UsageError("hyperparameter grid is empty");
    if (test.empty()) throw DataError("test set is empty");
    if (folds.size() != samples.size()) throw UsageError("fold assignment does not match the sample list");
    const auto family = family_of(cells.front());
    for (const auto& c : cells) {
        if (family_of(c) != family) throw UsageError("grid mixes model families");
    }

    const auto k = static_cast<std::size_t>(folds.k);
    const Eigen::MatrixXd X_test = feature_matrix(test);
    const Eigen::VectorXd y_test = target_vector(test);
    constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

    GridResult grid;
    grid.family = family;
    grid.cells.resize(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
        grid.cells[c].cell = cells[c];
        grid.cells[c].folds.resize(k, FoldOutcome{kNaN, kNaN, kNaN, {}, TrainedModel{cells[c], linear::LinearModel{}}, {}});
    }

    parallel_for(cells.size() * k, [&](std::size_t t) {
        const auto c = t / k;
        const auto f = static_cast<int>(t % k);
        auto& slot = grid.cells[c].folds[static_cast<std::size_t>(f)];
        try {
            auto model = fit_cell(cells[c], samples, folds, f, derive_seed(seed, c, static_cast<std::uint64_t>(f)));
            const auto val_rows = folds.val_indices(f);
            FoldOutcome o{0, 0, 0, {}, std::move(model), {}};
            o.val_r2 = r_square(target_vector(samples, val_rows), o.model.predict(feature_matrix(samples, val_rows)));
            o.test_predictions = o.model.predict(X_test);
            o.test_r2 = r_square(y_test, o.test_predictions);
            o.test_eqm = eqm(y_test, o.test_predictions);
            if (!std::isfinite(o.val_r2) || !std::isfinite(o.test_r2)) throw NumericalError("non-finite predictions");
            slot = std::move(o);
        } catch (const NumericalError& e) {
            slot.error = e.what();
        } catch (const DataError& e) {
            slot.error = e.what();
        }
    });

    std::vector<std::size_t> complete;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        if (grid.cells[c].failed_folds() == 0) complete.push_back(c);
    }
    if (complete.empty()) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < cells.size(); ++c) {
            const auto ok_c = k - grid.cells[c].failed_folds(), ok_b = k - grid.cells[best].failed_folds();
            if (ok_c > ok_b || (ok_c == ok_b && ok_c > 0 && grid.cells[c].mean_val_r2() > grid.cells[best].mean_val_r2())) {
                best = c;
            }
        }
        if (grid.cells[best].failed_folds() == k) {
            throw NumericalError("every fold failed for every cell; first error: " + grid.cells[0].folds[0].error);
        }
        grid.selected = best;
        return grid;
    }

    const bool rank_select = (family == Family::NeuralNet || family == Family::Svr) && complete.size() > 1;
    std::size_t best = complete.front();
    if (rank_select) {
        ScoreMatrix m;
        m.scores.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(complete.size()));
        for (std::size_t q = 0; q < complete.size(); ++q) {
            m.labels.push_back(describe(cells[complete[q]]));
            for (std::size_t f = 0; f < k; ++f) {
                m.scores(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(q)) =
                    grid.cells[complete[q]].folds[f].val_r2;
            }
        }
        grid.variant_test = friedman(m);
        const auto& ranks = grid.variant_test->mean_ranks;
        std::size_t bq = 0;
        for (std::size_t q = 1; q < complete.size(); ++q) {
            if (ranks[q] < ranks[bq] ||
                (ranks[q] == ranks[bq] && grid.cells[complete[q]].mean_val_r2() > grid.cells[complete[bq]].mean_val_r2())) {
                bq = q;
            }
        }
        best = complete[bq];
    } else {
        for (auto c : complete) {
            if (grid.cells[c].mean_val_r2() > grid.cells[best].mean_val_r2()) best = c;
        }
    }
    grid.selected = best;
    return grid;
}

EvalReport make_report(const CellEvaluation& evaluation, Family family, std::string_view property) {
    EvalReport r;
    r.family = std::string(family_name(family));
    r.property = std::string(property);
    for (const auto& f : evaluation.folds) {
        r.fold_r2.push_back(f.test_r2);
        r.fold_eqm.push_back(f.test_eqm);
    }
    return r;
}

EvalReport cross_validate(const FamilyCell& cell, std::span<const Sample> samples, const FoldAssignment& folds,
                          std::span<const Sample> test, std::uint64_t seed, std::string_view property) {
    const auto grid = cross_validate_grid(std::span<const FamilyCell>(&cell, 1), samples, folds, test, seed);
    return make_report(grid.best(), family_of(cell), property);
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr int kModelFormatVersion = 1;

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd json_vec(const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json scaler_json(const Scaler& s) {
    return {{"feature_min", s.feature_min}, {"feature_max", s.feature_max},
            {"target_mean", s.target_mean}, {"target_std", s.target_std}};
}

Scaler json_scaler(const json& j) {
    return {j.at("feature_min").get<std::vector<double>>(), j.at("feature_max").get<std::vector<double>>(),
            j.at("target_mean").get<double>(), j.at("target_std").get<double>()};
}

json kernel_json(const svr::KernelSpec& k) {
    return {{"kind", svr::kernel_name(k.kind)}, {"degree", k.degree}, {"gamma", k.gamma}, {"coef0", k.coef0}};
}

svr::KernelSpec json_kernel(const json& j) {
    return {svr::parse_kernel(j.at("kind").get<std::string>()), j.at("degree").get<int>(),
            j.at("gamma").get<double>(), j.at("coef0").get<double>()};
}

json trainer_json(const nn::TrainerSpec& t) {
    return {{"algorithm", nn::algorithm_name(t.algorithm)},
            {"learning_rate", t.learning_rate},
            {"momentum", t.momentum},
            {"rprop", {{"eta_plus", t.rprop.eta_plus}, {"eta_minus", t.rprop.eta_minus},
                       {"delta0", t.rprop.delta0}, {"delta_max", t.rprop.delta_max},
                       {"delta_min", t.rprop.delta_min}}},
            {"mu_init", t.mu_init},
            {"mu_decrease", t.mu_decrease},
            {"mu_increase", t.mu_increase},
            {"mu_max", t.mu_max},
            {"l2", t.l2},
            {"max_epochs", t.max_epochs},
            {"patience", t.patience}};
}

nn::TrainerSpec json_trainer(const json& j) {
    nn::TrainerSpec t;
    t.algorithm = nn::parse_algorithm(j.at("algorithm").get<std::string>());
    t.learning_rate = j.at("learning_rate").get<double>();
    t.momentum = j.at("momentum").get<double>();
    const auto& r = j.at("rprop");
    t.rprop = {r.at("eta_plus").get<double>(), r.at("eta_minus").get<double>(), r.at("delta0").get<double>(),
               r.at("delta_max").get<double>(), r.at("delta_min").get<double>()};
    t.mu_init = j.at("mu_init").get<double>();
    t.mu_decrease = j.at("mu_decrease").get<double>();
    t.mu_increase = j.at("mu_increase").get<double>();
    t.mu_max = j.at("mu_max").get<double>();
    t.l2 = j.at("l2").get<double>();
    t.max_epochs = j.at("max_epochs").get<int>();
    t.patience = j.at("patience").get<int>();
    return t;
}

json cell_json(const FamilyCell& cell) {
    return std::visit(
        overloaded{
            [](const LinearCell& c) -> json {
                return {{"degree", c.spec.degree}, {"interactions", c.spec.interactions}, {"lambda", c.spec.lambda}};
            },
            [](const NnCell& c) -> json {
                return {{"n_hidden", c.n_hidden}, {"trainer", trainer_json(c.trainer)},
                        {"max_train_samples", c.max_train_samples}};
            },
            [](const SvrCell& c) -> json {
                return {{"kernel", kernel_json(c.kernel)},
                        {"auto_gamma", c.auto_gamma},
                        {"C", c.params.C},
                        {"epsilon", c.params.epsilon},
                        {"tolerance", c.params.tolerance},
                        {"max_passes", c.params.max_passes},
                        {"cache_mb", c.params.cache_mb},
                        {"max_train_samples", c.max_train_samples}};
            },
            [](const TreeCell& c) -> json {
                return {{"min_leaf", c.grow.min_leaf}, {"max_depth", c.grow.max_depth}, {"gap_tol", c.prune.gap_tol}};
            }},
        cell);
}

FamilyCell json_cell(Family family, const json& j) {
    switch (family) {
        case Family::Linear:
            return LinearCell{{j.at("degree").get<int>(), j.at("interactions").get<bool>(), j.at("lambda").get<double>()}};
        case Family::NeuralNet:
            return NnCell{j.at("n_hidden").get<int>(), json_trainer(j.at("trainer")),
                          j.at("max_train_samples").get<std::size_t>()};
        case Family::Svr:
            return SvrCell{json_kernel(j.at("kernel")), j.at("auto_gamma").get<bool>(),
                           {j.at("C").get<double>(), j.at("epsilon").get<double>(), j.at("tolerance").get<double>(),
                            j.at("max_passes").get<int>(), j.at("cache_mb").get<double>()},
                           j.at("max_train_samples").get<std::size_t>()};
        case Family::Tree:
            return TreeCell{{j.at("min_leaf").get<std::size_t>(), j.at("max_depth").get<int>()},
                            {j.at("gap_tol").get<double>()}};
    }
    throw UsageError("unknown family");
}

}  // namespace

std::string serialize_model(const TrainedModel& m) {
    const auto family = family_of(m.cell);
    json body = std::visit(
        overloaded{
            [](const linear::LinearModel& lm) -> json {
                return {{"arity", lm.arity},
                        {"weights", vec_json(lm.weights)},
                        {"scaler", lm.scaler ? scaler_json(*lm.scaler) : json(nullptr)}};
            },
            [](const NnModel& nm) -> json {
                return {{"n_inputs", nm.net.n_inputs()},
                        {"n_hidden", nm.net.n_hidden()},
                        {"parameters", vec_json(nm.net.parameters())},
                        {"scaler", scaler_json(nm.scaler)}};
            },
            [](const svr::SvrModel& sm) -> json {
                json svs = json::array();
                for (Eigen::Index r = 0; r < sm.support_vectors.rows(); ++r) {
                    svs.push_back(vec_json(sm.support_vectors.row(r).transpose()));
                }
                return {{"kernel", kernel_json(sm.kernel)},
                        {"C", sm.C},
                        {"epsilon", sm.epsilon},
                        {"bias", sm.bias},
                        {"arity", sm.support_vectors.cols()},
                        {"support_vectors", svs},
                        {"coefficients", vec_json(sm.coefficients)},
                        {"converged", sm.status == svr::FitStatus::Converged},
                        {"final_gap", sm.final_gap},
                        {"iterations", sm.iterations},
                        {"scaler", sm.scaler ? scaler_json(*sm.scaler) : json(nullptr)}};
            },
            [](const TreeModel& tm) -> json {
                json nodes = json::array();
                for (const auto& n : tm.tree.nodes) {
                    nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value, n.count, n.sse});
                }
                return {{"n_features", tm.tree.n_features},
                        {"prune_step", tm.prune_step},
                        {"train_r2", tm.train_r2},
                        {"val_r2", tm.val_r2},
                        {"within_tolerance", tm.within_tolerance},
                        {"node_fields", {"feature", "threshold", "left", "right", "value", "count", "sse"}},
                        {"nodes", nodes}};
            }},
        m.model);
    const json doc = {{"format", "alloyfit-model"},
                      {"version", kModelFormatVersion},
                      {"family", family_name(family)},
                      {"cell", cell_json(m.cell)},
                      {"model", body}};
    return doc.dump(1) + "\n";
}

TrainedModel deserialize_model(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("model file is not valid JSON: ") + e.what());
    }
    try {
        if (doc.at("format") != "alloyfit-model") throw DataError("not an alloyfit model file");
        if (doc.at("version").get<int>() != kModelFormatVersion) throw DataError("unsupported model format version");
        const auto family = parse_family(doc.at("family").get<std::string>());
        TrainedModel out{json_cell(family, doc.at("cell")), linear::LinearModel{}};
        const auto& b = doc.at("model");
        auto scaler_or_null = [](const json& j) { return j.is_null() ? std::optional<Scaler>{} : json_scaler(j); };
        switch (family) {
            case Family::Linear: {
                linear::LinearModel lm;
                lm.spec = std::get<LinearCell>(out.cell).spec;
                lm.arity = b.at("arity").get<std::size_t>();
                lm.weights = json_vec(b.at("weights"));
                lm.scaler = scaler_or_null(b.at("scaler"));
                out.model = std::move(lm);
                break;
            }
            case Family::NeuralNet: {
                const int n_in = b.at("n_inputs").get<int>();
                const int n_hidden = b.at("n_hidden").get<int>();
                nn::Network net{Eigen::MatrixXd(n_hidden, n_in), Eigen::VectorXd(n_hidden),
                                Eigen::VectorXd(n_hidden), 0.0};
                net.set_parameters(json_vec(b.at("parameters")));
                out.model = NnModel{std::move(net), json_scaler(b.at("scaler")), {}};
                break;
            }
            case Family::Svr: {
                svr::SvrModel sm;
                sm.kernel = json_kernel(b.at("kernel"));
                sm.C = b.at("C").get<double>();
                sm.epsilon = b.at("epsilon").get<double>();
                sm.bias = b.at("bias").get<double>();
                const auto& svs = b.at("support_vectors");
                sm.support_vectors.resize(static_cast<Eigen::Index>(svs.size()), b.at("arity").get<Eigen::Index>());
                for (std::size_t r = 0; r < svs.size(); ++r) {
                    sm.support_vectors.row(static_cast<Eigen::Index>(r)) = json_vec(svs[r]).transpose();
                }
                sm.coefficients = json_vec(b.at("coefficients"));
                sm.status = b.at("converged").get<bool>() ? svr::FitStatus::Converged : svr::FitStatus::IterationLimit;
                sm.final_gap = b.at("final_gap").get<double>();
                sm.iterations = b.at("iterations").get<long>();
                sm.scaler = scaler_or_null(b.at("scaler"));
                out.model = std::move(sm);
                break;
            }
            case Family::Tree: {
                TreeModel tm;
                tm.tree.n_features = b.at("n_features").get<int>();
                for (const auto& n : b.at("nodes")) {
                    tm.tree.nodes.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(),
                                             n.at(3).get<int>(), n.at(4).get<double>(), n.at(5).get<std::size_t>(),
                                             n.at(6).get<double>()});
                }
                tm.prune_step = b.at("prune_step").get<std::size_t>();
                tm.train_r2 = b.at("train_r2").get<double>();
                tm.val_r2 = b.at("val_r2").get<double>();
                tm.within_tolerance = b.at("within_tolerance").get<bool>();
                if (tm.tree.nodes.empty()) throw DataError("tree model has no nodes");
                out.model = std::move(tm);
                break;
            }
        }
        return out;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed model file: ") + e.what());
    }
}

}  // namespace alloyfit
