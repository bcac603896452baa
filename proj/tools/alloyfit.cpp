#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "alloyfit/config.hpp"
#include "alloyfit/error.hpp"
#include "alloyfit/parallel.hpp"
#include "alloyfit/pipeline.hpp"

namespace fs = std::filesystem;
using namespace alloyfit;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    std::string out;
    std::string property;
    std::string family;
};

void add_common(CLI::App* cmd, Common& c, bool with_property, bool with_family) {
    cmd->add_option("--config", c.config, "TOML config or run manifest (.json)");
    cmd->add_option("--seed", c.seed, "override the fold seed (synth: the generator seed)");
    cmd->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
    cmd->add_option("--out", c.out, "output directory");
    if (with_property) {
        cmd->add_option("--property", c.property, "hardness|tensile|yield|elongation")
            ->check(CLI::IsMember({"hardness", "tensile", "yield", "elongation"}));
    }
    if (with_family) {
        cmd->add_option("--family", c.family, "linear|nn|svr|tree")->check(CLI::IsMember({"linear", "nn", "svr", "tree"}));
    }
}

ExperimentConfig resolve(const Common& c) {
    auto cfg = c.config.empty() ? ExperimentConfig{} : load_config(c.config);
    if (c.seed) cfg.fold_seed = *c.seed;
    if (c.jobs) cfg.jobs = *c.jobs;
    if (!c.out.empty()) cfg.out_dir = c.out;
    if (!c.property.empty()) cfg.properties = {parse_property(c.property)};
    validate(cfg);
    set_jobs(cfg.jobs);
    return cfg;
}

int run(int argc, char** argv) {
    CLI::App app{"alloyfit: regression models for steel mechanical properties"};
    app.require_subcommand(1);

    Common synth_opts, validate_opts, augment_opts, train_opts, report_opts;
    std::string dataset_override;

    auto* synth = app.add_subcommand("synth", "generate a synthetic alloy dataset");
    add_common(synth, synth_opts, false, false);
    std::size_t records = 0;
    synth->add_option("--records", records, "number of records");
    synth->add_option("--dataset", dataset_override, "output CSV (default: the config's dataset path)");

    auto* validate_cmd = app.add_subcommand("validate", "parse and check a dataset");
    add_common(validate_cmd, validate_opts, false, false);
    validate_cmd->add_option("dataset", dataset_override, "dataset CSV (default: the config's dataset path)");

    auto* augment_cmd = app.add_subcommand("augment", "expand composition ranges into samples");
    add_common(augment_cmd, augment_opts, true, false);

    auto* train = app.add_subcommand("train", "cross-validate a family's grid and write reports");
    add_common(train, train_opts, true, true);

    auto* compare = app.add_subcommand("compare", "rank families from report CSVs");
    std::vector<std::string> report_files;
    double alpha = 0.05;
    std::string compare_out = "out";
    compare->add_option("reports", report_files, "report CSVs")->required();
    compare->add_option("--alpha", alpha, "significance level")->check(CLI::Range(0.0, 1.0));
    compare->add_option("--out", compare_out, "output directory");

    auto* report = app.add_subcommand("report", "scatter plots and a summary from trained outputs");
    add_common(report, report_opts, true, false);

    auto* config_cmd = app.add_subcommand("config", "configuration helpers");
    config_cmd->require_subcommand(1);
    auto* init = config_cmd->add_subcommand("init", "print the default configuration");
    std::string init_out;
    init->add_option("--out", init_out, "write to this file instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (*synth) {
        auto cfg = resolve({synth_opts.config, std::nullopt, synth_opts.jobs, synth_opts.out, "", ""});
        if (synth_opts.seed) cfg.synth.seed = *synth_opts.seed;
        if (records > 0) cfg.synth.records = records;
        const fs::path file = dataset_override.empty() ? fs::path(cfg.dataset) : fs::path(dataset_override);
        const auto s = cmd_synth(cfg, file);
        std::cout << "wrote " << s.records << " records to " << s.file.string() << "\n";
    } else if (*validate_cmd) {
        auto cfg = resolve(validate_opts);
        if (!dataset_override.empty()) cfg.dataset = dataset_override;
        const auto s = cmd_validate(cfg);
        std::cout << cfg.dataset << ": " << s.records << " records, " << s.ranged_records << " with ranges, "
                  << s.train_val_samples << " train_val samples after augmentation\n";
    } else if (*augment_cmd) {
        const auto cfg = resolve(augment_opts);
        for (const auto& s : cmd_augment(cfg)) {
            std::cout << property_name(s.property) << ": train_val=" << s.train_val << " test=" << s.test << " -> "
                      << s.file.string() << "\n";
        }
    } else if (*train) {
        const auto cfg = resolve(train_opts);
        std::vector<Family> families;
        if (train_opts.family.empty()) {
            families.assign(kAllFamilies.begin(), kAllFamilies.end());
        } else {
            families.push_back(parse_family(train_opts.family));
        }
        for (auto p : cfg.properties) {
            for (auto f : families) {
                const auto s = cmd_train(cfg, f, p);
                std::cout << family_name(f) << "/" << property_name(p) << ": selected " << s.selected
                          << ", mean test R2 = " << format_double(s.report.mean_r2());
                if (s.failed_folds > 0) std::cout << " (" << s.failed_folds << " failed folds)";
                std::cout << " -> " << s.report_file.string() << "\n";
            }
        }
    } else if (*compare) {
        std::vector<fs::path> paths(report_files.begin(), report_files.end());
        const auto s = cmd_compare(paths, alpha, compare_out);
        std::cout << s.table_csv << "\n" << s.text;
    } else if (*report) {
        const auto cfg = resolve(report_opts);
        const auto s = cmd_report(cfg);
        for (const auto& p : s.plots) std::cout << "plot " << p.string() << "\n";
        std::cout << "summary " << s.summary.string() << "\n";
    } else if (*init) {
        const auto text = config_to_toml(ExperimentConfig{});
        if (init_out.empty()) {
            std::cout << text;
        } else {
            write_file_atomic(init_out, text);
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    }
}
