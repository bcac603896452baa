#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "alloyfit/config.hpp"
#include "alloyfit/evalstat.hpp"
#include "alloyfit/families.hpp"

namespace alloyfit {

inline constexpr std::string_view kToolVersion = "1.0.0";

std::string read_file(const std::filesystem::path& path);
/// Writes to a sibling temp file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string sha256_hex(std::string_view content);

/// Merges one stage's file hashes into <out>/manifest.json together with the
/// current config snapshot, RNG name and tool version.
void record_stage(const ExperimentConfig& config, std::string_view stage,
                  const std::vector<std::filesystem::path>& outputs);

struct SynthSummary {
    std::filesystem::path file;
    std::size_t records = 0;
};
SynthSummary cmd_synth(const ExperimentConfig& config, const std::filesystem::path& out_csv);

struct ValidateSummary {
    std::size_t records = 0;
    std::size_t ranged_records = 0;
    std::size_t train_val_samples = 0;
};
ValidateSummary cmd_validate(const ExperimentConfig& config);

struct AugmentSummary {
    Property property = Property::Hardness;
    std::size_t train_val = 0;
    std::size_t test = 0;
    std::filesystem::path file;
};
std::vector<AugmentSummary> cmd_augment(const ExperimentConfig& config);

std::filesystem::path augmented_path(const ExperimentConfig& config, Property property);
std::filesystem::path report_path(const std::filesystem::path& out_dir, Family family, Property property);

struct TrainSummary {
    Family family = Family::Linear;
    Property property = Property::Hardness;
    EvalReport report;
    std::string selected;
    std::size_t failed_folds = 0;
    std::filesystem::path report_file;
};
TrainSummary cmd_train(const ExperimentConfig& config, Family family, Property property);

struct CompareSummary {
    ScoreMatrix matrix;
    FriedmanResult friedman;
    std::vector<PairDecision> pairs;
    double critical_difference = 0.0;
    std::string table_csv;
    std::string text;
    std::vector<std::filesystem::path> files;
};
/// Reads only the given report CSVs. Throws DataError on mismatched fold
/// counts or properties.
CompareSummary compare_reports(const std::vector<std::filesystem::path>& reports, double alpha);
CompareSummary cmd_compare(const std::vector<std::filesystem::path>& reports, double alpha,
                           const std::filesystem::path& out_dir);

struct ReportSummary {
    std::vector<std::filesystem::path> plots;
    std::filesystem::path summary;
};
ReportSummary cmd_report(const ExperimentConfig& config);

}  // namespace alloyfit
