#include "run_config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "conftree/errors.hpp"
#include "schema.hpp"

namespace conftree::cli {

using nlohmann::json;

namespace {

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

TrainSpec read_train_spec(const json& j, TrainSpec spec) {
    spec.learning_rate = j.value("learning_rate", spec.learning_rate);
    spec.epochs = j.value("epochs", spec.epochs);
    spec.batch_size = j.value("batch_size", spec.batch_size);
    spec.l2 = j.value("l2", spec.l2);
    spec.lr_decay = j.value("lr_decay", spec.lr_decay);
    spec.decay_every = j.value("decay_every", spec.decay_every);
    spec.freeze_hidden = j.value("freeze_hidden", spec.freeze_hidden);
    return spec;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

void require_file(const std::filesystem::path& path, const std::string& pointer,
                  std::vector<SchemaViolation>& errors) {
    if (!std::filesystem::is_regular_file(path)) errors.push_back({pointer, "file not found: " + path.string()});
}

DataConfig read_data(const json& j, const std::filesystem::path& base, std::vector<SchemaViolation>& errors) {
    DataConfig d;
    const std::string kind = j.at("kind");
    auto path_of = [&](const char* key, bool required) -> std::filesystem::path {
        const std::string ptr = std::string("/data/") + key;
        if (!j.contains(key)) {
            if (required) errors.push_back({ptr, "required when kind is " + kind});
            return {};
        }
        auto p = resolve(base, j.at(key).get<std::string>());
        require_file(p, ptr, errors);
        return p;
    };
    d.test_fraction = j.value("test_fraction", d.test_fraction);
    if (kind == "csv") {
        d.kind = DataConfig::Kind::Csv;
        d.train = path_of("train", true);
        d.test = path_of("test", false);
        d.header = j.value("header", false);
    } else if (kind == "idx") {
        d.kind = DataConfig::Kind::Idx;
        d.train_images = path_of("train_images", true);
        d.train_labels = path_of("train_labels", true);
        d.test_images = path_of("test_images", false);
        d.test_labels = path_of("test_labels", false);
        if (d.test_images.empty() != d.test_labels.empty())
            errors.push_back({d.test_images.empty() ? "/data/test_images" : "/data/test_labels",
                              "test_images and test_labels go together"});
    } else {
        d.kind = DataConfig::Kind::Synthetic;
        const json s = j.value("synthetic", json::object());
        auto& spec = d.synthetic;
        spec.n_groups = s.value("n_groups", spec.n_groups);
        spec.classes_per_group = s.value("classes_per_group", spec.classes_per_group);
        spec.dim = s.value("dim", spec.dim);
        spec.samples_per_class = s.value("samples_per_class", spec.samples_per_class);
        spec.intra_group_spread = s.value("intra_group_spread", spec.intra_group_spread);
        spec.inter_group_separation = s.value("inter_group_separation", spec.inter_group_separation);
        if (s.contains("seed")) {
            spec.seed = s.at("seed").get<std::uint64_t>();
            d.synthetic_seed_given = true;
        }
        try {
            spec.validate();
        } catch (const Error& e) {
            errors.push_back({"/data/synthetic", e.what()});
        }
    }
    return d;
}

std::string format_violations(const std::string& source, const std::vector<SchemaViolation>& errors) {
    std::string msg = "invalid configuration " + source + ":";
    for (const auto& e : errors) msg += "\n  " + (e.pointer.empty() ? std::string("/") : e.pointer) + ": " + e.message;
    return msg;
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::string& source,
                           const std::filesystem::path& base_dir) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw UsageError(source + ": malformed JSON at byte " + std::to_string(e.byte));
    }
    auto errors = validate_against(run_config_schema(), doc);
    if (!errors.empty()) throw UsageError(format_violations(source, errors));

    RunConfig c;
    c.seed = doc.value("seed", c.seed);
    c.workers = doc.value("workers", c.workers);
    if (doc.contains("out")) c.out = resolve(base_dir, doc.at("out").get<std::string>());
    if (doc.contains("data")) c.data = read_data(doc.at("data"), base_dir, errors);
    if (doc.contains("model")) {
        const auto& m = doc.at("model");
        c.shape.architecture = architecture_from_string(m.value("architecture", "softmax-regression"));
        c.shape.hidden_width = m.value("hidden_width", std::size_t{0});
        if (c.shape.architecture == Architecture::OneHiddenLayer && c.shape.hidden_width == 0)
            errors.push_back({"/model/hidden_width", "required for one-hidden-layer"});
        if (c.shape.architecture == Architecture::SoftmaxRegression && c.shape.hidden_width != 0)
            errors.push_back({"/model/hidden_width", "not allowed for softmax-regression"});
    }
    if (doc.contains("train")) c.train = read_train_spec(doc.at("train"), c.train);
    if (doc.contains("tree")) {
        const auto& t = doc.at("tree");
        if (t.contains("max_depth")) c.tree.max_depth = t.at("max_depth").get<std::size_t>();
        if (t.contains("size_limits")) c.tree.size_limits = t.at("size_limits").get<std::vector<std::size_t>>();
        if (t.contains("alphas")) c.tree.alphas = t.at("alphas").get<std::vector<double>>();
        if (t.contains("train")) c.tree.train = read_train_spec(t.at("train"), c.train);
        c.tree.min_overlap = t.value("min_overlap", c.tree.min_overlap);
        c.tree.confusion_holdout = t.value("confusion_holdout", c.tree.confusion_holdout);
        const std::size_t depth = c.tree.max_depth.value_or(2);
        if (c.tree.size_limits && c.tree.size_limits->size() != depth)
            errors.push_back({"/tree/size_limits", "expected " + std::to_string(depth) + " entries, one per depth"});
        if (c.tree.alphas && c.tree.alphas->size() != depth)
            errors.push_back({"/tree/alphas", "expected " + std::to_string(depth) + " entries, one per depth"});
    }
    if (doc.contains("evaluate")) c.ks = doc.at("evaluate").value("ks", c.ks);
    if (doc.contains("confusion")) {
        const auto& j = doc.at("confusion");
        c.confusion_alpha = j.value("alpha", c.confusion_alpha);
        if (j.contains("cap")) c.confusion_cap = j.at("cap").get<std::size_t>();
        c.confusion_on_test = j.value("split", std::string("train")) == "test";
    }
    if (doc.contains("pack")) {
        const auto& j = doc.at("pack");
        if (j.contains("limit")) c.pack_limit = j.at("limit").get<std::size_t>();
        c.pack_min_overlap = j.value("min_overlap", c.pack_min_overlap);
        c.pack_exact = j.value("exact", c.pack_exact);
    }
    if (!errors.empty()) throw UsageError(format_violations(source, errors));
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    if (!std::filesystem::is_regular_file(path)) throw UsageError("config file not found: " + path.string());
    return parse_run_config(read_text(path), path.string(), path.parent_path());
}

std::pair<LabeledDataset, LabeledDataset> load_partitions(const RunConfig& config) {
    if (!config.data) throw UsageError("configuration has no /data section");
    const DataConfig& d = *config.data;
    const std::uint64_t split_seed = derive_seed(config.seed, "split");
    try {
        switch (d.kind) {
            case DataConfig::Kind::Csv: {
                auto train = load_csv(d.train, d.header);
                if (!d.test.empty()) return {std::move(train), load_csv(d.test, d.header)};
                return split(train, d.test_fraction, split_seed);
            }
            case DataConfig::Kind::Idx: {
                auto train = load_idx(d.train_images, d.train_labels);
                if (!d.test_images.empty()) return {std::move(train), load_idx(d.test_images, d.test_labels)};
                return split(train, d.test_fraction, split_seed);
            }
            case DataConfig::Kind::Synthetic: {
                SyntheticSpec spec = d.synthetic;
                if (!d.synthetic_seed_given) spec.seed = derive_seed(config.seed, "data");
                return split(generate_synthetic(spec), d.test_fraction, split_seed);
            }
        }
    } catch (const Error& e) {
        throw UsageError(std::string("cannot load dataset: ") + e.what());
    }
    throw UsageError("unsupported data kind");
}

TrainSpec base_train_spec(const RunConfig& config) {
    TrainSpec spec = config.train;
    spec.seed = derive_seed(config.seed, "base");
    return spec;
}

TreeConfig resolve_tree_config(const RunConfig& config, std::size_t num_classes) {
    TreeConfig t;
    t.max_depth = config.tree.max_depth.value_or(2);
    const auto ceil_div = [](std::size_t a, std::size_t b) { return (a + b - 1) / b; };
    if (config.tree.size_limits) {
        t.size_limits = *config.tree.size_limits;
    } else {
        std::size_t divisor = 10;
        for (std::size_t d = 0; d < t.max_depth; ++d, divisor *= 2)
            t.size_limits.push_back(std::max<std::size_t>(2, ceil_div(num_classes, divisor)));
    }
    t.alphas = config.tree.alphas.value_or(std::vector<double>(t.max_depth, 0.01));
    t.train_specs.assign(t.max_depth, config.tree.train.value_or(config.train));
    t.seed = config.seed;
    t.min_overlap = config.tree.min_overlap;
    t.confusion_holdout = config.tree.confusion_holdout;
    return t;
}

}  // namespace conftree::cli
