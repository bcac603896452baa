#include "alloyfit/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>

#include "alloyfit/error.hpp"
#include "alloyfit/rng.hpp"

namespace alloyfit {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
    return out;
}

// Calls fn(line_number, line) for every non-blank line.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        ++line_no;
        const auto line = trim(text.substr(pos, nl - pos));
        if (!line.empty()) fn(line_no, line);
        pos = nl + 1;
    }
}

double parse_number(std::string_view field, std::size_t row, std::string_view column) {
    double value = 0.0;
    const auto* first = field.data();
    const auto* last = field.data() + field.size();
    if (!field.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (field.empty() || ec != std::errc{} || ptr != last || !std::isfinite(value)) {
        throw ParseError(row, std::string(column), "not a finite number: '" + std::string(field) + "'");
    }
    return value;
}

std::vector<std::string_view> header_columns(std::string_view header) { return split_fields(header); }

void check_header(std::string_view got, std::string_view expected, std::size_t row) {
    if (header_columns(got) != header_columns(expected)) {
        throw ParseError(row, "<header>", "expected header '" + std::string(expected) + "'");
    }
}

}  // namespace

std::string_view property_name(Property p) {
    switch (p) {
        case Property::Hardness: return "hardness";
        case Property::Tensile: return "tensile";
        case Property::Yield: return "yield";
        case Property::Elongation: return "elongation";
    }
    return "?";
}

Property parse_property(std::string_view name) {
    for (auto p : kAllProperties) {
        if (property_name(p) == name) return p;
    }
    throw UsageError("unknown property '" + std::string(name) + "' (expected hardness|tensile|yield|elongation)");
}

ProcessRoute::ProcessRoute(int code) : code_(code) {
    if (code < 1 || code > static_cast<int>(kNumRoutes)) {
        throw DataError("process route code " + std::to_string(code) + " outside 1..5");
    }
}

double PropertyVector::get(Property p) const noexcept {
    switch (p) {
        case Property::Hardness: return hardness;
        case Property::Tensile: return tensile_strength;
        case Property::Yield: return yield_strength;
        case Property::Elongation: return elongation;
    }
    return 0.0;
}

std::size_t AlloyRecord::ranged_count() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(composition.begin(), composition.end(), [](const RangeSpec& r) { return !r.fixed(); }));
}

void validate_record(const AlloyRecord& record) {
    const auto where = " (record " + record.record_id + ")";
    if (record.record_id.empty()) throw DataError("empty record id");
    for (std::size_t e = 0; e < kNumElements; ++e) {
        const auto& r = record.composition[e];
        const auto sym = std::string(kElementSymbols[e]);
        if (!std::isfinite(r.min) || !std::isfinite(r.max)) throw DataError("non-finite range: " + sym + where);
        if (r.min > r.max) throw DataError("range inverted: " + sym + where);
        if (r.min < 0.0 || r.max > 100.0) throw DataError("range outside [0, 100]: " + sym + where);
    }
    const auto& t = record.targets;
    for (auto p : kAllProperties) {
        const double v = t.get(p);
        if (!std::isfinite(v) || v < 0.0) {
            throw DataError("target " + std::string(property_name(p)) + " must be finite and >= 0" + where);
        }
    }
    if (t.elongation > 100.0) throw DataError("elongation above 100%" + where);
}

std::string_view split_name(Split s) { return s == Split::TrainVal ? "train_val" : "test"; }

std::string_view encoding_name(RouteEncoding e) { return e == RouteEncoding::Ordinal ? "ordinal" : "onehot"; }

RouteEncoding parse_encoding(std::string_view name) {
    if (name == "ordinal") return RouteEncoding::Ordinal;
    if (name == "onehot" || name == "one-hot") return RouteEncoding::OneHot;
    throw UsageError("unknown route encoding '" + std::string(name) + "' (expected ordinal|onehot)");
}

std::size_t feature_count(RouteEncoding encoding) noexcept {
    return encoding == RouteEncoding::Ordinal ? kNumElements + 1 : kNumElements + kNumRoutes;
}

std::vector<double> encode_features(const AlloyPoint& point, RouteEncoding encoding) {
    std::vector<double> x(point.composition.begin(), point.composition.end());
    if (encoding == RouteEncoding::Ordinal) {
        x.push_back(static_cast<double>(point.process.code()));
    } else {
        for (int r = 1; r <= static_cast<int>(kNumRoutes); ++r) x.push_back(point.process.code() == r ? 1.0 : 0.0);
    }
    return x;
}

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, ptr);
}

std::vector<AlloyRecord> parse_records(std::string_view text) {
    static const auto columns = header_columns(kDatasetHeader);
    std::vector<AlloyRecord> records;
    bool seen_header = false;
    for_each_line(text, [&](std::size_t row, std::string_view line) {
        if (!seen_header) {
            check_header(line, kDatasetHeader, row);
            seen_header = true;
            return;
        }
        const auto fields = split_fields(line);
        if (fields.size() != columns.size()) {
            throw ParseError(row, "<row>",
                             "expected " + std::to_string(columns.size()) + " columns, got " +
                                 std::to_string(fields.size()));
        }
        AlloyRecord rec;
        rec.record_id = std::string(fields[0]);
        if (rec.record_id.empty()) throw ParseError(row, "id", "empty record id");
        for (std::size_t e = 0; e < kNumElements; ++e) {
            rec.composition[e].min = parse_number(fields[1 + 2 * e], row, columns[1 + 2 * e]);
            rec.composition[e].max = parse_number(fields[2 + 2 * e], row, columns[2 + 2 * e]);
        }
        const double code = parse_number(fields[19], row, columns[19]);
        if (code != std::floor(code)) throw ParseError(row, "process", "route code must be an integer");
        try {
            rec.process = ProcessRoute(static_cast<int>(code));
        } catch (const DataError& e) {
            throw ParseError(row, "process", e.what());
        }
        rec.targets.hardness = parse_number(fields[20], row, columns[20]);
        rec.targets.tensile_strength = parse_number(fields[21], row, columns[21]);
        rec.targets.yield_strength = parse_number(fields[22], row, columns[22]);
        rec.targets.elongation = parse_number(fields[23], row, columns[23]);
        try {
            validate_record(rec);
        } catch (const DataError& e) {
            throw DataError(std::string(e.what()) + " at row " + std::to_string(row));
        }
        records.push_back(std::move(rec));
    });
    if (!seen_header) throw ParseError(1, "<header>", "empty document");
    return records;
}

std::string format_records(std::span<const AlloyRecord> records) {
    std::string out(kDatasetHeader);
    out += '\n';
    for (const auto& r : records) {
        out += r.record_id;
        for (const auto& range : r.composition) {
            out += ',' + format_double(range.min) + ',' + format_double(range.max);
        }
        out += ',' + std::to_string(r.process.code());
        for (auto p : kAllProperties) out += ',' + format_double(r.targets.get(p));
        out += '\n';
    }
    return out;
}

std::array<double, 2> inner_grid_points(const RangeSpec& r) noexcept {
    const double step = (r.max - r.min) / 3.0;
    return {r.min + step, r.min + 2.0 * step};
}

AugmentedSet augment(std::span<const AlloyRecord> records, const AugmentPolicy& policy) {
    AugmentedSet out;
    for (const auto& rec : records) {
        std::vector<std::size_t> ranged;
        for (std::size_t e = 0; e < kNumElements; ++e) {
            if (!rec.composition[e].fixed()) ranged.push_back(e);
        }
        if (ranged.size() >= 63 || (std::size_t{1} << ranged.size()) > policy.max_combinations) {
            throw DataError("record " + rec.record_id + ": " + std::to_string(ranged.size()) +
                            " ranged elements exceed the augmentation cap of " +
                            std::to_string(policy.max_combinations) + " combinations");
        }
        const double target = rec.targets.get(policy.property);

        AlloyPoint mid{.process = rec.process};
        for (std::size_t e = 0; e < kNumElements; ++e) mid.composition[e] = rec.composition[e].midpoint();

        const std::size_t combos = std::size_t{1} << ranged.size();
        for (std::size_t c = 0; c < combos; ++c) {
            AlloyPoint p = mid;
            for (std::size_t j = 0; j < ranged.size(); ++j) {
                const auto bit = (c >> (ranged.size() - 1 - j)) & 1U;
                p.composition[ranged[j]] = inner_grid_points(rec.composition[ranged[j]])[bit];
            }
            out.train_val.push_back(Sample{rec.record_id, p, encode_features(p, policy.encoding), target, Split::TrainVal});
        }
        out.test.push_back(Sample{rec.record_id, mid, encode_features(mid, policy.encoding), target, Split::Test});
    }
    return out;
}

std::string format_augmented(const AugmentedSet& set) {
    std::string out(kAugmentedHeader);
    out += '\n';
    auto emit = [&](const Sample& s) {
        out += s.source_record_id;
        out += ',';
        out += split_name(s.split);
        for (double v : s.point.composition) out += ',' + format_double(v);
        out += ',' + std::to_string(s.point.process.code());
        out += ',' + format_double(s.target);
        out += '\n';
    };
    for (const auto& s : set.train_val) emit(s);
    for (const auto& s : set.test) emit(s);
    return out;
}

AugmentedSet parse_augmented(std::string_view text, RouteEncoding encoding) {
    static const auto columns = header_columns(kAugmentedHeader);
    AugmentedSet out;
    bool seen_header = false;
    for_each_line(text, [&](std::size_t row, std::string_view line) {
        if (!seen_header) {
            check_header(line, kAugmentedHeader, row);
            seen_header = true;
            return;
        }
        const auto fields = split_fields(line);
        if (fields.size() != columns.size()) {
            throw ParseError(row, "<row>",
                             "expected " + std::to_string(columns.size()) + " columns, got " +
                                 std::to_string(fields.size()));
        }
        Sample s;
        s.source_record_id = std::string(fields[0]);
        if (fields[1] == "train_val") {
            s.split = Split::TrainVal;
        } else if (fields[1] == "test") {
            s.split = Split::Test;
        } else {
            throw ParseError(row, "split", "expected train_val or test");
        }
        for (std::size_t e = 0; e < kNumElements; ++e) {
            s.point.composition[e] = parse_number(fields[2 + e], row, columns[2 + e]);
        }
        const double code = parse_number(fields[11], row, "process");
        try {
            s.point.process = ProcessRoute(static_cast<int>(code));
        } catch (const DataError& e) {
            throw ParseError(row, "process", e.what());
        }
        s.target = parse_number(fields[12], row, "target");
        s.features = encode_features(s.point, encoding);
        (s.split == Split::TrainVal ? out.train_val : out.test).push_back(std::move(s));
    });
    if (!seen_header) throw ParseError(1, "<header>", "empty document");
    return out;
}

std::vector<std::size_t> FoldAssignment::train_indices(int fold) const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < fold_of.size(); ++i) {
        if (fold_of[i] != fold) idx.push_back(i);
    }
    return idx;
}

std::vector<std::size_t> FoldAssignment::val_indices(int fold) const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < fold_of.size(); ++i) {
        if (fold_of[i] == fold) idx.push_back(i);
    }
    return idx;
}

FoldAssignment assign_folds(std::span<const Sample> samples, int k, std::uint64_t seed, bool grouped) {
    if (k < 2) throw UsageError("fold count k must be >= 2");

    // group id per sample, groups numbered by first appearance
    std::vector<std::size_t> group_of(samples.size());
    std::size_t n_groups = 0;
    if (grouped) {
        std::map<std::string, std::size_t, std::less<>> ids;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            auto [it, inserted] = ids.try_emplace(samples[i].source_record_id, n_groups);
            if (inserted) ++n_groups;
            group_of[i] = it->second;
        }
    } else {
        std::iota(group_of.begin(), group_of.end(), std::size_t{0});
        n_groups = samples.size();
    }
    if (n_groups < static_cast<std::size_t>(k)) {
        throw DataError("cannot split " + std::to_string(n_groups) + (grouped ? " record groups" : " samples") +
                        " into " + std::to_string(k) + " folds");
    }

    std::vector<std::size_t> order(n_groups);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(order.begin(), order.end());
    std::vector<int> fold_of_group(n_groups);
    for (std::size_t pos = 0; pos < n_groups; ++pos) fold_of_group[order[pos]] = static_cast<int>(pos % k);

    FoldAssignment fa{.k = k, .seed = seed, .grouped = grouped, .fold_of = {}};
    fa.fold_of.resize(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) fa.fold_of[i] = fold_of_group[group_of[i]];
    return fa;
}

void Scaler::transform_in_place(std::span<double> x) const {
    if (x.size() != arity()) {
        throw UsageError("scaler arity mismatch: expected " + std::to_string(arity()) + ", got " +
                         std::to_string(x.size()));
    }
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double span = feature_max[j] - feature_min[j];
        x[j] = span > 0.0 ? 2.0 * (x[j] - feature_min[j]) / span - 1.0 : 0.0;
    }
}

std::vector<double> Scaler::transform(std::span<const double> x) const {
    std::vector<double> out(x.begin(), x.end());
    transform_in_place(out);
    return out;
}

Scaler fit_scaler(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets) {
    if (features.rows() == 0) throw DataError("cannot fit a scaler on an empty subset");
    Scaler s;
    s.feature_min.resize(static_cast<std::size_t>(features.cols()));
    s.feature_max.resize(static_cast<std::size_t>(features.cols()));
    for (Eigen::Index j = 0; j < features.cols(); ++j) {
        s.feature_min[static_cast<std::size_t>(j)] = features.col(j).minCoeff();
        s.feature_max[static_cast<std::size_t>(j)] = features.col(j).maxCoeff();
    }
    if (targets.size() > 0) {
        s.target_mean = targets.mean();
        const double var = (targets.array() - s.target_mean).square().mean();
        s.target_std = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    return s;
}

Scaler fit_scaler(std::span<const Sample> samples) {
    return fit_scaler(feature_matrix(samples), target_vector(samples));
}

Eigen::MatrixXd scale_features(const Scaler& scaler, const Eigen::MatrixXd& features) {
    if (static_cast<std::size_t>(features.cols()) != scaler.arity()) {
        throw UsageError("scaler arity mismatch");
    }
    Eigen::MatrixXd out(features.rows(), features.cols());
    for (Eigen::Index j = 0; j < features.cols(); ++j) {
        const auto jj = static_cast<std::size_t>(j);
        const double span = scaler.feature_max[jj] - scaler.feature_min[jj];
        if (span > 0.0) {
            out.col(j) = 2.0 * (features.col(j).array() - scaler.feature_min[jj]) / span - 1.0;
        } else {
            out.col(j).setZero();
        }
    }
    return out;
}

Eigen::MatrixXd feature_matrix(std::span<const Sample> samples) {
    std::vector<std::size_t> all(samples.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return feature_matrix(samples, all);
}

Eigen::MatrixXd feature_matrix(std::span<const Sample> samples, std::span<const std::size_t> rows) {
    const auto cols = samples.empty() ? 0 : samples.front().features.size();
    Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& f = samples[rows[r]].features;
        for (std::size_t c = 0; c < cols; ++c) X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = f[c];
    }
    return X;
}

Eigen::VectorXd target_vector(std::span<const Sample> samples) {
    Eigen::VectorXd y(static_cast<Eigen::Index>(samples.size()));
    for (std::size_t i = 0; i < samples.size(); ++i) y(static_cast<Eigen::Index>(i)) = samples[i].target;
    return y;
}

Eigen::VectorXd target_vector(std::span<const Sample> samples, std::span<const std::size_t> rows) {
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) y(static_cast<Eigen::Index>(r)) = samples[rows[r]].target;
    return y;
}

}  // namespace alloyfit
