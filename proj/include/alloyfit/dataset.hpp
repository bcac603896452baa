#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace alloyfit {

inline constexpr std::size_t kNumElements = 9;
inline constexpr std::size_t kNumRoutes = 5;

enum class Element : std::uint8_t { Fe, C, Mn, P, S, Si, Ni, Cr, Mo };
inline constexpr std::array<std::string_view, kNumElements> kElementSymbols = {
    "Fe", "C", "Mn", "P", "S", "Si", "Ni", "Cr", "Mo"};

enum class Property : std::uint8_t { Hardness, Tensile, Yield, Elongation };
inline constexpr std::array<Property, 4> kAllProperties = {
    Property::Hardness, Property::Tensile, Property::Yield, Property::Elongation};

std::string_view property_name(Property p);
/// Parses the CLI/CSV spelling (hardness|tensile|yield|elongation).
Property parse_property(std::string_view name);

struct RangeSpec {
    double min = 0.0;
    double max = 0.0;

    bool fixed() const noexcept { return min == max; }
    double midpoint() const noexcept { return 0.5 * (min + max); }
};

/// Processing route, codes 1..5: hot rolling, cold rolling, annealing,
/// normalizing, quench in water or oil.
class ProcessRoute {
public:
    explicit ProcessRoute(int code);
    int code() const noexcept { return code_; }
    friend bool operator==(ProcessRoute, ProcessRoute) = default;

private:
    int code_;
};

struct PropertyVector {
    double hardness = 0.0;
    double tensile_strength = 0.0;
    double yield_strength = 0.0;
    double elongation = 0.0;

    double get(Property p) const noexcept;
};

struct AlloyRecord {
    std::string record_id;
    std::array<RangeSpec, kNumElements> composition{};
    ProcessRoute process{1};
    PropertyVector targets;

    const RangeSpec& range(Element e) const { return composition[static_cast<std::size_t>(e)]; }
    std::size_t ranged_count() const noexcept;
};

/// Throws DataError naming the record if any invariant is violated.
void validate_record(const AlloyRecord& record);

enum class Split : std::uint8_t { TrainVal, Test };
std::string_view split_name(Split s);

enum class RouteEncoding : std::uint8_t { Ordinal, OneHot };
std::string_view encoding_name(RouteEncoding e);
RouteEncoding parse_encoding(std::string_view name);

/// Concrete composition plus route, before encoding.
struct AlloyPoint {
    std::array<double, kNumElements> composition{};
    ProcessRoute process{1};
};

struct Sample {
    std::string source_record_id;
    AlloyPoint point;
    std::vector<double> features;
    double target = 0.0;
    Split split = Split::TrainVal;
};

std::size_t feature_count(RouteEncoding encoding) noexcept;

/// Ordinal: [Fe..Mo, route]. One-hot: [Fe..Mo, r1..r5].
std::vector<double> encode_features(const AlloyPoint& point, RouteEncoding encoding);

// ---------------------------------------------------------------------------
// CSV

inline constexpr std::string_view kDatasetHeader =
    "id,fe_min,fe_max,c_min,c_max,mn_min,mn_max,p_min,p_max,s_min,s_max,si_min,si_max,"
    "ni_min,ni_max,cr_min,cr_max,mo_min,mo_max,process,hardness,tensile,yield,elongation";

inline constexpr std::string_view kAugmentedHeader =
    "source_id,split,fe,c,mn,p,s,si,ni,cr,mo,process,target";

/// Parses the dataset CSV. Rows are numbered from 1 at the header line, so
/// the first data row is row 2 (its line number in the file).
std::vector<AlloyRecord> parse_records(std::string_view text);
std::string format_records(std::span<const AlloyRecord> records);

/// Shortest round-trip decimal formatting used by every CSV writer.
std::string format_double(double v);

// ---------------------------------------------------------------------------
// Augmentation

struct AugmentPolicy {
    Property property = Property::Hardness;
    RouteEncoding encoding = RouteEncoding::Ordinal;
    std::size_t max_combinations = 4096;
};

struct AugmentedSet {
    std::vector<Sample> train_val;
    std::vector<Sample> test;
};

/// The two interior points of the 4-point equidistant grid over [min, max].
std::array<double, 2> inner_grid_points(const RangeSpec& r) noexcept;

/// Range-grid augmentation. Train/val samples are the Cartesian product of
/// the interior grid points of every ranged element, enumerated with the
/// last ranged element varying fastest. One test sample per record sits at
/// every range midpoint.
AugmentedSet augment(std::span<const AlloyRecord> records, const AugmentPolicy& policy);

std::string format_augmented(const AugmentedSet& set);
AugmentedSet parse_augmented(std::string_view text, RouteEncoding encoding);

// ---------------------------------------------------------------------------
// Folds

struct FoldAssignment {
    int k = 10;
    std::uint64_t seed = 0;
    bool grouped = true;
    std::vector<int> fold_of;  // per sample index

    std::vector<std::size_t> train_indices(int fold) const;
    std::vector<std::size_t> val_indices(int fold) const;
    std::size_t size() const noexcept { return fold_of.size(); }
};

/// Shuffles groups (grouped) or samples (ungrouped) with the seeded
/// generator and deals them round-robin into k folds.
FoldAssignment assign_folds(std::span<const Sample> samples, int k, std::uint64_t seed, bool grouped);

// ---------------------------------------------------------------------------
// Scaling

struct Scaler {
    std::vector<double> feature_min;
    std::vector<double> feature_max;
    double target_mean = 0.0;
    double target_std = 1.0;

    std::size_t arity() const noexcept { return feature_min.size(); }
    void transform_in_place(std::span<double> x) const;
    std::vector<double> transform(std::span<const double> x) const;
    double scale_target(double y) const noexcept { return (y - target_mean) / target_std; }
    double unscale_target(double z) const noexcept { return z * target_std + target_mean; }
};

/// Per-feature min-max to [-1, 1] and target standardization, fitted on the
/// given rows only.
Scaler fit_scaler(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets);
Scaler fit_scaler(std::span<const Sample> samples);

Eigen::MatrixXd scale_features(const Scaler& scaler, const Eigen::MatrixXd& features);

Eigen::MatrixXd feature_matrix(std::span<const Sample> samples);
Eigen::MatrixXd feature_matrix(std::span<const Sample> samples, std::span<const std::size_t> rows);
Eigen::VectorXd target_vector(std::span<const Sample> samples);
Eigen::VectorXd target_vector(std::span<const Sample> samples, std::span<const std::size_t> rows);

}  // namespace alloyfit
