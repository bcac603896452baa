#include "alloyfit/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include <openssl/evp.h>

#include "json.hpp"

#include "alloyfit/error.hpp"
#include "alloyfit/linear_model.hpp"
#include "alloyfit/rng.hpp"
#include "alloyfit/svg.hpp"
#include "alloyfit/synth_data.hpp"

namespace alloyfit {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const fs::path& path, std::string_view content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw DataError("write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw DataError("cannot rename onto " + path.string() + ": " + ec.message());
    }
}

std::string sha256_hex(std::string_view content) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(content.data(), content.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256 failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

namespace {

std::string manifest_key(const fs::path& out_dir, const fs::path& file) {
    const auto rel = file.lexically_relative(out_dir);
    if (rel.empty() || *rel.begin() == "..") return file.generic_string();
    return rel.generic_string();
}

std::vector<AlloyRecord> load_dataset(const fs::path& path) {
    const auto text = read_file(path);
    try {
        return parse_records(text);
    } catch (const ParseError& e) {
        throw DataError(path.string() + ":" + std::to_string(e.row()) + ": column '" + e.column() + "': " +
                        std::string(e.what()).substr(std::string(e.what()).find(": ") + 2));
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

std::string csv_field(double v) { return std::isfinite(v) ? format_double(v) : std::string("nan"); }

std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::string two_digit(int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%02d", i);
    return buf;
}

}  // namespace

void record_stage(const ExperimentConfig& config, std::string_view stage, const std::vector<fs::path>& outputs) {
    const fs::path out_dir(config.out_dir);
    const auto manifest_path = out_dir / "manifest.json";
    json manifest = json::object();
    if (fs::exists(manifest_path)) {
        try {
            manifest = json::parse(read_file(manifest_path));
        } catch (const json::exception&) {
            manifest = json::object();
        }
    }
    auto snapshot = config;
    snapshot.jobs = 1;  // never affects outputs
    manifest["tool"] = "alloyfit";
    manifest["version"] = std::string(kToolVersion);
    manifest["rng"] = kRngAlgorithm;
    manifest["ground_truth"] = std::string(synth::kGroundTruthVersion);
    manifest["config"] = json::parse(config_to_json(snapshot));
    manifest["seeds"] = {{"folds", config.fold_seed}, {"synth", config.synth.seed}};
    json hashes = json::object();
    for (const auto& f : outputs) hashes[manifest_key(out_dir, f)] = sha256_hex(read_file(f));
    manifest["stages"][std::string(stage)] = hashes;
    write_file_atomic(manifest_path, manifest.dump(2) + "\n");
}

SynthSummary cmd_synth(const ExperimentConfig& config, const fs::path& out_csv) {
    synth::GroundTruthSpec spec;
    spec.seed = config.synth.seed;
    for (auto& s : spec.noise_std) s *= config.synth.noise_scale;
    const auto records = synth::generate(config.synth.records, spec);
    write_file_atomic(out_csv, format_records(records));
    record_stage(config, "synth", {out_csv});
    return {out_csv, records.size()};
}

ValidateSummary cmd_validate(const ExperimentConfig& config) {
    const auto records = load_dataset(config.dataset);
    ValidateSummary s;
    s.records = records.size();
    for (const auto& r : records) {
        if (r.ranged_count() > 0) ++s.ranged_records;
    }
    AugmentPolicy policy{Property::Hardness, config.encoding, config.max_combinations};
    s.train_val_samples = augment(records, policy).train_val.size();
    return s;
}

fs::path augmented_path(const ExperimentConfig& config, Property property) {
    return fs::path(config.out_dir) / "augmented" / (std::string(property_name(property)) + ".csv");
}

fs::path report_path(const fs::path& out_dir, Family family, Property property) {
    return out_dir / "reports" / (std::string(family_name(family)) + "_" + std::string(property_name(property)) + ".csv");
}

std::vector<AugmentSummary> cmd_augment(const ExperimentConfig& config) {
    const auto records = load_dataset(config.dataset);
    std::vector<AugmentSummary> out;
    std::vector<fs::path> files;
    for (auto p : config.properties) {
        AugmentPolicy policy{p, config.encoding, config.max_combinations};
        const auto set = augment(records, policy);
        const auto file = augmented_path(config, p);
        write_file_atomic(file, format_augmented(set));
        out.push_back({p, set.train_val.size(), set.test.size(), file});
        files.push_back(file);
    }
    record_stage(config, "augment", files);
    return out;
}

TrainSummary cmd_train(const ExperimentConfig& config, Family family, Property property) {
    const auto aug_file = augmented_path(config, property);
    if (!fs::exists(aug_file)) {
        throw DataError(aug_file.string() + " not found; run `augment` first");
    }
    const auto set = parse_augmented(read_file(aug_file), config.encoding);
    const auto folds = assign_folds(set.train_val, config.k, config.fold_seed, config.grouped);
    const auto cells = grid_cells(config, family);
    const auto seed = derive_seed(config.fold_seed, 0x7a11 + static_cast<std::uint64_t>(family),
                                  static_cast<std::uint64_t>(property));
    const auto grid = cross_validate_grid(cells, set.train_val, folds, set.test, seed);
    const auto& best = grid.best();
    const auto prop = std::string(property_name(property));
    const auto fam = std::string(family_name(family));

    TrainSummary summary;
    summary.family = family;
    summary.property = property;
    summary.report = make_report(best, family, prop);
    summary.selected = describe(best.cell);
    summary.failed_folds = best.failed_folds();

    const fs::path out_dir(config.out_dir);
    const auto reports = out_dir / "reports";
    std::vector<fs::path> files;
    auto emit = [&](const fs::path& path, const std::string& content) {
        write_file_atomic(path, content);
        files.push_back(path);
    };

    summary.report_file = report_path(out_dir, family, property);
    emit(summary.report_file, format_report(summary.report));

    std::string grid_csv = "cell,description,mean_val_r2,mean_test_r2,failed_folds,selected";
    if (grid.variant_test) grid_csv += ",mean_rank";
    grid_csv += "\n";
    for (std::size_t c = 0; c < grid.cells.size(); ++c) {
        const auto& ce = grid.cells[c];
        grid_csv += std::to_string(c + 1) + "," + describe(ce.cell) + "," + csv_field(ce.mean_val_r2()) + "," +
                    csv_field(ce.mean_test_r2()) + "," + std::to_string(ce.failed_folds()) + "," +
                    (c == grid.selected ? "1" : "0");
        if (grid.variant_test) grid_csv += "," + csv_field(grid.variant_test->mean_ranks[static_cast<Eigen::Index>(c)]);
        grid_csv += "\n";
    }
    emit(reports / (fam + "_" + prop + "_grid.csv"), grid_csv);

    std::string errors;
    for (std::size_t f = 0; f < best.folds.size(); ++f) {
        const auto& fo = best.folds[f];
        const auto fold_tag = two_digit(static_cast<int>(f) + 1);
        if (!fo.ok()) {
            errors += std::to_string(f + 1) + "," + fo.error + "\n";
            continue;
        }
        emit(out_dir / "models" / fam / prop / ("fold_" + fold_tag + ".json"), serialize_model(fo.model));
        if (const auto* m = std::get_if<NnModel>(&fo.model.model)) {
            emit(reports / ("nn_" + prop + "_history_fold_" + fold_tag + ".csv"), nn::history_csv(m->history));
        }
    }
    if (!errors.empty()) emit(reports / (fam + "_" + prop + "_errors.csv"), "fold,error\n" + errors);

    std::string pred = "source_id,target,mean_prediction";
    for (int f = 1; f <= config.k; ++f) pred += ",fold_" + std::to_string(f);
    pred += "\n";
    for (std::size_t i = 0; i < set.test.size(); ++i) {
        const auto& s = set.test[i];
        double sum = 0.0;
        int n = 0;
        std::string per_fold;
        for (const auto& fo : best.folds) {
            if (fo.ok()) {
                const double v = fo.test_predictions[static_cast<Eigen::Index>(i)];
                sum += v;
                ++n;
                per_fold += "," + csv_field(v);
            } else {
                per_fold += ",nan";
            }
        }
        pred += s.source_record_id + "," + csv_field(s.target) + "," +
                csv_field(n > 0 ? sum / n : std::nan("")) + per_fold + "\n";
    }
    emit(reports / (fam + "_" + prop + "_predictions.csv"), pred);

    if (family == Family::Linear) {
        const auto curve = linear::sweep(set.train_val, folds, config.linear.degrees, config.linear.lambdas,
                                         config.linear.interactions);
        emit(reports / ("linear_" + prop + "_curve.csv"), curve.to_csv());
    }

    record_stage(config, "train/" + fam + "/" + prop, files);
    return summary;
}

CompareSummary compare_reports(const std::vector<fs::path>& paths, double alpha) {
    if (paths.size() < 2) throw UsageError("compare needs at least two report CSVs");
    std::vector<EvalReport> reports;
    for (const auto& p : paths) {
        try {
            reports.push_back(parse_report(read_file(p)));
        } catch (const DataError& e) {
            throw DataError(p.string() + ": " + e.what());
        }
    }
    const auto k = static_cast<std::size_t>(reports.front().k());
    const auto& property = reports.front().property;
    for (std::size_t i = 1; i < reports.size(); ++i) {
        if (static_cast<std::size_t>(reports[i].k()) != k) {
            throw DataError("fold count mismatch: " + paths[0].string() + " has " + std::to_string(k) + ", " +
                            paths[i].string() + " has " + std::to_string(reports[i].k()));
        }
        if (reports[i].property != property) {
            throw DataError("property mismatch: " + property + " vs " + reports[i].property);
        }
    }

    CompareSummary s;
    s.matrix.higher_is_better = true;
    s.matrix.scores.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(reports.size()));
    for (std::size_t j = 0; j < reports.size(); ++j) {
        std::string label;
        try {
            label = std::string(family_label(parse_family(reports[j].family)));
        } catch (const UsageError&) {
            label = reports[j].family;
        }
        int dup = 1;
        for (const auto& prev : s.matrix.labels) {
            if (prev == label || prev.starts_with(label + "#")) ++dup;
        }
        if (dup > 1) label += "#" + std::to_string(dup);
        s.matrix.labels.push_back(label);
        for (std::size_t f = 0; f < k; ++f) {
            s.matrix.scores(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(j)) = reports[j].fold_r2[f];
        }
    }
    s.friedman = friedman(s.matrix);
    const int n_treat = static_cast<int>(reports.size());
    const int n_blocks = static_cast<int>(k);
    s.critical_difference = bonferroni_critical_difference(n_treat, n_blocks, alpha);
    s.pairs = bonferroni_pairwise(s.friedman, n_blocks, alpha);

    std::string table = "fold";
    for (const auto& l : s.matrix.labels) table += "," + l;
    table += "\n";
    for (std::size_t f = 0; f < k; ++f) {
        table += std::to_string(f + 1);
        for (const auto& r : reports) table += "," + csv_field(r.fold_r2[f]);
        table += "\n";
    }
    table += "mean";
    for (const auto& r : reports) table += "," + csv_field(r.mean_r2());
    table += "\n";
    s.table_csv = table;

    std::ostringstream text;
    text << "property: " << property << "\n";
    text << "folds: " << k << ", treatments: " << n_treat << "\n";
    text << "mean ranks (1 = best R2):";
    for (int j = 0; j < n_treat; ++j) text << " " << s.matrix.labels[j] << "=" << format_double(s.friedman.mean_ranks[j]);
    text << "\n";
    text << "Friedman chi2 = " << format_double(s.friedman.statistic) << ", df = " << s.friedman.df
         << ", p = " << format_double(s.friedman.p_value) << "\n";
    text << "critical difference = " << format_double(s.critical_difference) << " (alpha = " << format_double(alpha)
         << ")\n";
    for (const auto& p : s.pairs) {
        text << "  " << s.matrix.labels[p.first] << " vs " << s.matrix.labels[p.second] << ": |diff| = "
             << format_double(p.rank_difference) << (p.significant ? "  significant" : "  not significant") << "\n";
    }
    text << "note: the critical difference uses the Bonferroni-Dunn correction over k - 1 comparisons.\n";
    s.text = text.str();
    return s;
}

CompareSummary cmd_compare(const std::vector<fs::path>& reports, double alpha, const fs::path& out_dir) {
    auto s = compare_reports(reports, alpha);
    const auto prop = reports.empty() ? std::string() : parse_report(read_file(reports.front())).property;
    const auto dir = out_dir / "comparison";

    std::string friedman_csv = "treatment,mean_rank\n";
    for (std::size_t j = 0; j < s.matrix.labels.size(); ++j) {
        friedman_csv += s.matrix.labels[j] + "," + csv_field(s.friedman.mean_ranks[static_cast<Eigen::Index>(j)]) + "\n";
    }
    friedman_csv += "statistic," + csv_field(s.friedman.statistic) + "\n";
    friedman_csv += "df," + std::to_string(s.friedman.df) + "\n";
    friedman_csv += "p_value," + csv_field(s.friedman.p_value) + "\n";

    std::string pairs_csv = "first,second,rank_difference,critical_difference,significant\n";
    for (const auto& p : s.pairs) {
        pairs_csv += s.matrix.labels[p.first] + "," + s.matrix.labels[p.second] + "," + csv_field(p.rank_difference) +
                     "," + csv_field(p.critical_difference) + "," + (p.significant ? "1" : "0") + "\n";
    }

    const std::pair<std::string, const std::string*> outputs[] = {
        {prop + "_table.csv", &s.table_csv},
        {prop + "_friedman.csv", &friedman_csv},
        {prop + "_pairwise.csv", &pairs_csv},
        {prop + "_summary.txt", &s.text},
    };
    for (const auto& [name, content] : outputs) {
        write_file_atomic(dir / name, *content);
        s.files.push_back(dir / name);
    }
    return s;
}

ReportSummary cmd_report(const ExperimentConfig& config) {
    const fs::path out_dir(config.out_dir);
    ReportSummary out;
    std::vector<fs::path> files;
    std::string summary = "family,property,mean_r2,mean_eqm,failed_folds\n";
    for (auto prop : config.properties) {
        for (auto fam : kAllFamilies) {
            const auto rp = report_path(out_dir, fam, prop);
            if (!fs::exists(rp)) continue;
            const auto report = parse_report(read_file(rp));
            std::size_t failed = 0;
            for (auto v : report.fold_r2) {
                if (!std::isfinite(v)) ++failed;
            }
            summary += std::string(family_name(fam)) + "," + std::string(property_name(prop)) + "," +
                       csv_field(report.mean_r2()) + "," + csv_field(report.mean_eqm()) + "," + std::to_string(failed) +
                       "\n";

            const auto stem = std::string(family_name(fam)) + "_" + std::string(property_name(prop));
            const auto pred_file = out_dir / "reports" / (stem + "_predictions.csv");
            if (!fs::exists(pred_file)) continue;
            std::istringstream in(read_file(pred_file));
            std::string line;
            std::getline(in, line);
            std::vector<std::pair<double, double>> pairs;
            std::size_t row = 1;
            while (std::getline(in, line)) {
                ++row;
                if (line.empty()) continue;
                const auto cols = split_csv_line(line);
                if (cols.size() < 3) throw DataError(pred_file.string() + ":" + std::to_string(row) + ": too few columns");
                try {
                    const double t = std::stod(cols[1]);
                    const double p = std::stod(cols[2]);
                    if (std::isfinite(t) && std::isfinite(p)) pairs.emplace_back(t, p);
                } catch (const std::exception&) {
                    throw DataError(pred_file.string() + ":" + std::to_string(row) + ": not a number");
                }
            }
            ScatterLabels labels;
            labels.title = "Predictions vs targets: " + std::string(property_name(prop)) + " (" +
                           std::string(family_label(fam)) + ")";
            labels.x_label = "target " + std::string(property_name(prop));
            labels.y_label = "prediction";
            const auto doc = emit_scatter_svg(pairs, labels);
            const auto svg_path = out_dir / "plots" / (stem + ".svg");
            const auto csv_path = out_dir / "plots" / (stem + ".csv");
            write_file_atomic(svg_path, doc.svg);
            write_file_atomic(csv_path, doc.csv);
            out.plots.push_back(svg_path);
            files.push_back(svg_path);
            files.push_back(csv_path);
        }
    }
    if (files.empty() && summary.find('\n') == summary.size() - 1) {
        throw DataError("no training reports under " + (out_dir / "reports").string() + "; run `train` first");
    }
    out.summary = out_dir / "reports" / "summary.csv";
    write_file_atomic(out.summary, summary);
    files.push_back(out.summary);
    record_stage(config, "report", files);
    return out;
}

}  // namespace alloyfit
