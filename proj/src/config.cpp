#include "alloyfit/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "toml.hpp"

#include "alloyfit/error.hpp"

namespace alloyfit {

using nlohmann::json;

namespace {

template <typename T>
std::string join(const std::vector<T>& v, auto&& fmt) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        out += fmt(v[i]);
    }
    return out + "]";
}

std::string quote(std::string_view s) { return "\"" + std::string(s) + "\""; }

std::string toml_float(double v) {
    auto s = format_double(v);
    if (s.find_first_of(".eE") == std::string::npos && s.find_first_of("ni") == std::string::npos) s += ".0";
    return s;
}

void reject_unknown(const toml::table& table, std::string_view section, std::set<std::string_view> allowed) {
    for (const auto& [key, node] : table) {
        (void)node;
        if (!allowed.contains(key.str())) {
            throw UsageError("unknown config key '" + std::string(section) + (section.empty() ? "" : ".") +
                             std::string(key.str()) + "'");
        }
    }
}

const toml::table* section(const toml::table& root, std::string_view name) {
    const auto* node = root.get(name);
    if (!node) return nullptr;
    const auto* t = node->as_table();
    if (!t) throw UsageError("config section [" + std::string(name) + "] must be a table");
    return t;
}

template <typename T>
void read(const toml::table* t, std::string_view section_name, std::string_view key, T& out) {
    if (!t) return;
    const auto* node = t->get(key);
    if (!node) return;
    const auto v = node->value<T>();
    if (!v) throw UsageError("config key '" + std::string(section_name) + "." + std::string(key) + "' has the wrong type");
    out = *v;
}

template <typename T>
void read_array(const toml::table* t, std::string_view section_name, std::string_view key, std::vector<T>& out) {
    if (!t) return;
    const auto* node = t->get(key);
    if (!node) return;
    const auto* arr = node->as_array();
    const auto where = std::string(section_name) + "." + std::string(key);
    if (!arr) throw UsageError("config key '" + where + "' must be an array");
    out.clear();
    for (const auto& item : *arr) {
        const auto v = item.value<T>();
        if (!v) throw UsageError("config key '" + where + "' has an element of the wrong type");
        out.push_back(*v);
    }
}

std::uint64_t as_seed(std::int64_t v, std::string_view key) {
    if (v < 0) throw UsageError("config key '" + std::string(key) + "' must be >= 0");
    return static_cast<std::uint64_t>(v);
}

std::size_t as_count(std::int64_t v, std::string_view key) {
    if (v < 0) throw UsageError("config key '" + std::string(key) + "' must be >= 0");
    return static_cast<std::size_t>(v);
}

}  // namespace

void validate(const ExperimentConfig& c) {
    if (c.dataset.empty()) throw UsageError("config: data.dataset is empty");
    if (c.properties.empty()) throw UsageError("config: data.properties is empty");
    if (c.k < 2) throw UsageError("config: folds.k must be >= 2");
    if (c.jobs < 1) throw UsageError("config: run.jobs must be >= 1");
    if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw UsageError("config: run.alpha must lie in (0, 1)");
    if (c.max_combinations < 1) throw UsageError("config: data.max_combinations must be >= 1");
    if (c.linear.degrees.empty() || c.linear.lambdas.empty()) throw UsageError("config: linear grid is empty");
    if (c.nn.hidden.empty() || c.nn.trainers.empty()) throw UsageError("config: nn grid is empty");
    if (c.svr.kernels.empty()) throw UsageError("config: svr.kernels is empty");
    if (c.tree.min_leaf.empty() || c.tree.gap_tols.empty()) throw UsageError("config: tree grid is empty");
    if (!(c.synth.noise_scale >= 0.0)) throw UsageError("config: synth.noise_scale must be >= 0");
    for (auto d : c.linear.degrees) linear::validate({d, c.linear.interactions, 0.0});
    for (auto l : c.linear.lambdas) linear::validate({1, false, l});
    for (auto h : c.nn.hidden) nn::validate(nn::NetworkSpec{1, h, 0});
    nn::validate(c.nn.base);
    svr::validate(c.svr.params);
    if (c.svr.gamma < 0.0) throw UsageError("config: svr.gamma must be >= 0 (0 = automatic)");
    if (c.svr.degree < 1) throw UsageError("config: svr.degree must be >= 1");
    for (auto m : c.tree.min_leaf) {
        if (m < 1) throw UsageError("config: tree.min_leaf entries must be >= 1");
    }
    for (auto g : c.tree.gap_tols) {
        if (!(g >= 0.0)) throw UsageError("config: tree.gap_tol entries must be >= 0");
    }
}

std::vector<FamilyCell> grid_cells(const ExperimentConfig& c, Family family) {
    std::vector<FamilyCell> cells;
    switch (family) {
        case Family::Linear:
            for (auto d : c.linear.degrees) {
                for (auto l : c.linear.lambdas) cells.push_back(LinearCell{{d, c.linear.interactions, l}});
            }
            break;
        case Family::NeuralNet:
            for (auto a : c.nn.trainers) {
                for (auto h : c.nn.hidden) {
                    auto t = c.nn.base;
                    t.algorithm = a;
                    cells.push_back(NnCell{h, t, c.nn.max_train_samples});
                }
            }
            break;
        case Family::Svr:
            for (auto kind : c.svr.kernels) {
                svr::KernelSpec k{kind, c.svr.degree, c.svr.gamma > 0.0 ? c.svr.gamma : 1.0, c.svr.coef0};
                cells.push_back(SvrCell{k, c.svr.gamma <= 0.0, c.svr.params, c.svr.max_train_samples});
            }
            break;
        case Family::Tree:
            for (auto m : c.tree.min_leaf) {
                for (auto g : c.tree.gap_tols) cells.push_back(TreeCell{{m, c.tree.max_depth}, {g}});
            }
            break;
    }
    return cells;
}

ExperimentConfig parse_config_toml(std::string_view text) {
    toml::table root;
    try {
        root = toml::parse(text);
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << "config parse error at line " << e.source().begin.line << ": " << e.description();
        throw UsageError(msg.str());
    }
    reject_unknown(root, "", {"data", "folds", "run", "synth", "linear", "nn", "svr", "tree"});

    ExperimentConfig c;
    std::int64_t i64 = 0;
    std::string str;

    if (const auto* t = section(root, "data")) {
        reject_unknown(*t, "data", {"dataset", "properties", "encoding", "max_combinations"});
        read(t, "data", "dataset", c.dataset);
        std::vector<std::string> props;
        read_array(t, "data", "properties", props);
        if (t->get("properties")) {
            c.properties.clear();
            for (const auto& p : props) c.properties.push_back(parse_property(p));
        }
        if (t->get("encoding")) {
            read(t, "data", "encoding", str);
            c.encoding = parse_encoding(str);
        }
        if (t->get("max_combinations")) {
            read(t, "data", "max_combinations", i64);
            c.max_combinations = as_count(i64, "data.max_combinations");
        }
    }
    if (const auto* t = section(root, "folds")) {
        reject_unknown(*t, "folds", {"k", "seed", "grouped"});
        if (t->get("k")) {
            read(t, "folds", "k", i64);
            c.k = static_cast<int>(i64);
        }
        if (t->get("seed")) {
            read(t, "folds", "seed", i64);
            c.fold_seed = as_seed(i64, "folds.seed");
        }
        read(t, "folds", "grouped", c.grouped);
    }
    if (const auto* t = section(root, "run")) {
        reject_unknown(*t, "run", {"out", "jobs", "alpha"});
        read(t, "run", "out", c.out_dir);
        if (t->get("jobs")) {
            read(t, "run", "jobs", i64);
            c.jobs = static_cast<int>(i64);
        }
        read(t, "run", "alpha", c.alpha);
    }
    if (const auto* t = section(root, "synth")) {
        reject_unknown(*t, "synth", {"records", "seed", "noise_scale"});
        if (t->get("records")) {
            read(t, "synth", "records", i64);
            c.synth.records = as_count(i64, "synth.records");
        }
        if (t->get("seed")) {
            read(t, "synth", "seed", i64);
            c.synth.seed = as_seed(i64, "synth.seed");
        }
        read(t, "synth", "noise_scale", c.synth.noise_scale);
    }
    if (const auto* t = section(root, "linear")) {
        reject_unknown(*t, "linear", {"degrees", "lambdas", "interactions"});
        std::vector<std::int64_t> degrees;
        read_array(t, "linear", "degrees", degrees);
        if (t->get("degrees")) c.linear.degrees.assign(degrees.begin(), degrees.end());
        read_array(t, "linear", "lambdas", c.linear.lambdas);
        read(t, "linear", "interactions", c.linear.interactions);
    }
    if (const auto* t = section(root, "nn")) {
        reject_unknown(*t, "nn", {"hidden", "trainers", "max_epochs", "patience", "learning_rate", "momentum", "l2",
                                  "max_train_samples"});
        std::vector<std::int64_t> hidden;
        read_array(t, "nn", "hidden", hidden);
        if (t->get("hidden")) c.nn.hidden.assign(hidden.begin(), hidden.end());
        std::vector<std::string> trainers;
        read_array(t, "nn", "trainers", trainers);
        if (t->get("trainers")) {
            c.nn.trainers.clear();
            for (const auto& s : trainers) c.nn.trainers.push_back(nn::parse_algorithm(s));
        }
        if (t->get("max_epochs")) {
            read(t, "nn", "max_epochs", i64);
            c.nn.base.max_epochs = static_cast<int>(i64);
        }
        if (t->get("patience")) {
            read(t, "nn", "patience", i64);
            c.nn.base.patience = static_cast<int>(i64);
        }
        read(t, "nn", "learning_rate", c.nn.base.learning_rate);
        read(t, "nn", "momentum", c.nn.base.momentum);
        read(t, "nn", "l2", c.nn.base.l2);
        if (t->get("max_train_samples")) {
            read(t, "nn", "max_train_samples", i64);
            c.nn.max_train_samples = as_count(i64, "nn.max_train_samples");
        }
    }
    if (const auto* t = section(root, "svr")) {
        reject_unknown(*t, "svr", {"kernels", "C", "epsilon", "gamma", "degree", "coef0", "tolerance", "max_passes",
                                   "cache_mb", "max_train_samples"});
        std::vector<std::string> kernels;
        read_array(t, "svr", "kernels", kernels);
        if (t->get("kernels")) {
            c.svr.kernels.clear();
            for (const auto& s : kernels) c.svr.kernels.push_back(svr::parse_kernel(s));
        }
        read(t, "svr", "C", c.svr.params.C);
        read(t, "svr", "epsilon", c.svr.params.epsilon);
        read(t, "svr", "gamma", c.svr.gamma);
        if (t->get("degree")) {
            read(t, "svr", "degree", i64);
            c.svr.degree = static_cast<int>(i64);
        }
        read(t, "svr", "coef0", c.svr.coef0);
        read(t, "svr", "tolerance", c.svr.params.tolerance);
        if (t->get("max_passes")) {
            read(t, "svr", "max_passes", i64);
            c.svr.params.max_passes = static_cast<int>(i64);
        }
        read(t, "svr", "cache_mb", c.svr.params.cache_mb);
        if (t->get("max_train_samples")) {
            read(t, "svr", "max_train_samples", i64);
            c.svr.max_train_samples = as_count(i64, "svr.max_train_samples");
        }
    }
    if (const auto* t = section(root, "tree")) {
        reject_unknown(*t, "tree", {"min_leaf", "max_depth", "gap_tol"});
        std::vector<std::int64_t> min_leaf;
        read_array(t, "tree", "min_leaf", min_leaf);
        if (t->get("min_leaf")) {
            c.tree.min_leaf.clear();
            for (auto m : min_leaf) c.tree.min_leaf.push_back(as_count(m, "tree.min_leaf"));
        }
        if (t->get("max_depth")) {
            read(t, "tree", "max_depth", i64);
            c.tree.max_depth = static_cast<int>(i64);
        }
        read_array(t, "tree", "gap_tol", c.tree.gap_tols);
    }
    validate(c);
    return c;
}

std::string config_to_toml(const ExperimentConfig& c) {
    auto f = [](double v) { return toml_float(v); };
    auto i = [](auto v) { return std::to_string(v); };
    auto q = [](auto v) { return quote(v); };
    std::vector<std::string_view> props, trainers, kernels;
    for (auto p : c.properties) props.push_back(property_name(p));
    for (auto a : c.nn.trainers) trainers.push_back(nn::algorithm_name(a));
    for (auto k : c.svr.kernels) kernels.push_back(svr::kernel_name(k));

    std::string s;
    s += "# alloyfit experiment configuration\n\n";
    s += "[data]\n";
    s += "dataset = " + quote(c.dataset) + "\n";
    s += "properties = " + join(props, q) + "\n";
    s += "encoding = " + quote(encoding_name(c.encoding)) + "          # ordinal | onehot\n";
    s += "max_combinations = " + i(c.max_combinations) + "   # per-record cap on augmented samples\n\n";
    s += "[folds]\n";
    s += "k = " + i(c.k) + "\n";
    s += "seed = " + i(c.fold_seed) + "\n";
    s += "grouped = " + std::string(c.grouped ? "true" : "false") + "   # keep samples of one record in one fold\n\n";
    s += "[run]\n";
    s += "out = " + quote(c.out_dir) + "\n";
    s += "jobs = " + i(c.jobs) + "\n";
    s += "alpha = " + f(c.alpha) + "\n\n";
    s += "[synth]\n";
    s += "records = " + i(c.synth.records) + "\n";
    s += "seed = " + i(c.synth.seed) + "\n";
    s += "noise_scale = " + f(c.synth.noise_scale) + "\n\n";
    s += "[linear]\n";
    s += "degrees = " + join(c.linear.degrees, i) + "\n";
    s += "lambdas = " + join(c.linear.lambdas, f) + "\n";
    s += "interactions = " + std::string(c.linear.interactions ? "true" : "false") + "\n\n";
    s += "[nn]\n";
    s += "hidden = " + join(c.nn.hidden, i) + "\n";
    s += "trainers = " + join(trainers, q) + "\n";
    s += "max_epochs = " + i(c.nn.base.max_epochs) + "\n";
    s += "patience = " + i(c.nn.base.patience) + "\n";
    s += "learning_rate = " + f(c.nn.base.learning_rate) + "\n";
    s += "momentum = " + f(c.nn.base.momentum) + "\n";
    s += "l2 = " + f(c.nn.base.l2) + "\n";
    s += "max_train_samples = " + i(c.nn.max_train_samples) + "   # 0 = no cap\n\n";
    s += "[svr]\n";
    s += "kernels = " + join(kernels, q) + "\n";
    s += "C = " + f(c.svr.params.C) + "\n";
    s += "epsilon = " + f(c.svr.params.epsilon) + "\n";
    s += "gamma = " + f(c.svr.gamma) + "   # 0 = 1 / (features * variance)\n";
    s += "degree = " + i(c.svr.degree) + "\n";
    s += "coef0 = " + f(c.svr.coef0) + "\n";
    s += "tolerance = " + f(c.svr.params.tolerance) + "\n";
    s += "max_passes = " + i(c.svr.params.max_passes) + "\n";
    s += "cache_mb = " + f(c.svr.params.cache_mb) + "\n";
    s += "max_train_samples = " + i(c.svr.max_train_samples) + "   # 0 = no cap\n\n";
    s += "[tree]\n";
    s += "min_leaf = " + join(c.tree.min_leaf, i) + "\n";
    s += "max_depth = " + i(c.tree.max_depth) + "   # -1 = unlimited\n";
    s += "gap_tol = " + join(c.tree.gap_tols, f) + "\n";
    return s;
}

std::string config_to_json(const ExperimentConfig& c) {
    // The TOML text is the canonical form; the JSON snapshot embeds it.
    return json{{"toml", config_to_toml(c)}}.dump();
}

ExperimentConfig config_from_json(std::string_view text) {
    try {
        const auto j = json::parse(text);
        return parse_config_toml(j.at("toml").get<std::string>());
    } catch (const json::exception& e) {
        throw UsageError(std::string("config snapshot is not valid: ") + e.what());
    }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    if (path.extension() == ".json") {
        try {
            const auto j = json::parse(ss.str());
            if (j.contains("config")) return config_from_json(j.at("config").dump());
            return config_from_json(ss.str());
        } catch (const json::exception& e) {
            throw UsageError("manifest " + path.string() + " is not valid JSON: " + e.what());
        }
    }
    return parse_config_toml(ss.str());
}

}  // namespace alloyfit
