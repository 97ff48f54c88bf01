#include "commands.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <memory>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "conftree/classifier.hpp"
#include "conftree/confusion.hpp"
#include "conftree/errors.hpp"
#include "conftree/evaluation.hpp"
#include "conftree/packing.hpp"
#include "conftree/tree.hpp"
#include "run_config.hpp"
#include "schema.hpp"

namespace conftree::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

RunConfig effective_config(const GlobalOptions& g) {
    RunConfig c = g.config ? load_run_config(*g.config) : RunConfig{};
    if (g.seed) c.seed = *g.seed;
    if (g.out) c.out = *g.out;
    if (g.workers) {
        if (*g.workers == 0) throw UsageError("--workers must be at least 1");
        c.workers = *g.workers;
    }
    return c;
}

void prepare_out(const RunConfig& c) {
    std::error_code ec;
    fs::create_directories(c.out, ec);
    if (ec) throw UsageError("cannot create output directory " + c.out.string() + ": " + ec.message());
}

std::string read_text(const fs::path& path) {
    if (!fs::is_regular_file(path)) throw UsageError("file not found: " + path.string());
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw Error("cannot write " + path.string());
}

std::string timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string num(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// Runs an input-loading step, reporting library errors as invalid input.
template <class F>
auto load_input(const std::string& what, F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        throw UsageError("cannot load " + what + ": " + e.what());
    }
}

ClassifierModel load_model_input(const fs::path& path) {
    if (!fs::is_regular_file(path)) throw UsageError("model file not found: " + path.string());
    return load_input("model " + path.string(), [&] { return load_model(path); });
}

ClassifierTree load_tree_input(const fs::path& path) {
    if (!fs::is_regular_file(path)) throw UsageError("tree manifest not found: " + path.string());
    return load_input("tree " + path.string(), [&] { return load_tree(path); });
}

std::shared_ptr<const Predictor> load_predictor(const fs::path& path, const std::string& id) {
    const std::string text = read_text(path);
    std::string format;
    try {
        format = json::parse(text).value("format", "");
    } catch (const json::exception&) {
        throw UsageError(path.string() + ": not a JSON document");
    }
    if (format == "conftree-model") return std::make_shared<ModelPredictor>(load_model_input(path), id);
    if (format == "conftree-tree") return std::make_shared<TreePredictor>(load_tree_input(path), id);
    throw UsageError(path.string() + ": neither a model nor a tree manifest");
}

void check_spec(const TrainSpec& spec, const std::string& where) {
    try {
        spec.validate();
    } catch (const Error& e) {
        throw UsageError(where + ": " + e.what());
    }
}

}  // namespace

int cmd_train_base(const GlobalOptions& g) {
    const RunConfig c = effective_config(g);
    prepare_out(c);
    const TrainSpec spec = base_train_spec(c);
    check_spec(spec, "/train");
    const auto data = load_partitions(c);
    const LabeledDataset& train = data.first;

    std::vector<std::size_t> all(train.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::string losses = "epoch,loss\n";
    std::string log = timestamp() + " train-base seed=" + std::to_string(c.seed) + " examples=" +
                      std::to_string(train.size()) + " classes=" + std::to_string(train.classes().size()) + "\n";
    FitHooks hooks;
    hooks.on_start = [&](const ClassifierModel& m) {
        const double l = loss(m, train, all, spec.l2);
        losses += "0," + num(l) + "\n";
        log += timestamp() + " initial loss " + num(l) + "\n";
    };
    hooks.on_epoch = [&](int epoch, double mean_loss) {
        losses += std::to_string(epoch + 1) + "," + num(mean_loss) + "\n";
        log += timestamp() + " epoch " + std::to_string(epoch + 1) + " loss " + num(mean_loss) + "\n";
    };
    const ClassifierModel model = fit(train, train.classes(), spec, c.shape, &hooks);
    save_model(model, c.out / "model.json");
    write_text(c.out / "train_losses.csv", losses);
    write_text(c.out / "train.log", log + timestamp() + " done\n");
    std::cout << "model: " << (c.out / "model.json").string() << "\n";
    return 0;
}

int cmd_build_tree(const GlobalOptions& g, const fs::path& model_path) {
    const RunConfig c = effective_config(g);
    prepare_out(c);
    const ClassifierModel basic = load_model_input(model_path);
    const auto data = load_partitions(c);
    const LabeledDataset& train = data.first;
    TreeConfig tc = resolve_tree_config(c, train.classes().size());
    try {
        tc.validate();
    } catch (const Error& e) {
        throw UsageError(std::string("/tree: ") + e.what());
    }
    std::string log = timestamp() + " build-tree seed=" + std::to_string(c.seed) + " max_depth=" +
                      std::to_string(tc.max_depth) + " workers=" + std::to_string(c.workers) + "\n";
    const ClassifierTree tree = train_tree(basic, train, tc, c.workers);
    save_tree(tree, c.out / "tree" / "manifest.json");
    write_text(c.out / "build_report.json", build_report_json(tree));
    for (const auto& n : tree.nodes())
        log += timestamp() + " node " + n.path + " classes=" + std::to_string(n.subset.size()) +
               " children=" + std::to_string(n.children.size()) + "\n";
    write_text(c.out / "build.log", log + timestamp() + " done\n");
    std::cout << "tree: " << (c.out / "tree" / "manifest.json").string() << " (" << tree.nodes().size()
              << " nodes)\n";
    return 0;
}

int cmd_evaluate(const GlobalOptions& g, const std::vector<fs::path>& predictor_paths) {
    const RunConfig c = effective_config(g);
    prepare_out(c);
    if (predictor_paths.empty()) throw UsageError("at least one --predictor is required");
    std::vector<std::shared_ptr<const Predictor>> members;
    for (std::size_t i = 0; i < predictor_paths.size(); ++i)
        members.push_back(load_predictor(predictor_paths[i], predictor_paths.size() == 1 ? "predictor"
                                                                                          : "member" + std::to_string(i)));
    std::shared_ptr<const Predictor> predictor = members.front();
    if (members.size() > 1)
        predictor = load_input("ensemble", [&] { return std::make_shared<Ensemble>(members, "ensemble"); });
    const auto data = load_partitions(c);
    const EvalReport report = evaluate(*predictor, data.second, c.ks, c.workers);
    write_text(c.out / "eval_report.json", report.to_json());
    write_text(c.out / "eval_report.txt", report.to_table());
    std::cout << report.to_table();
    return 0;
}

int cmd_compare(const GlobalOptions& g, const fs::path& basic_path, const fs::path& tree_path) {
    const RunConfig c = effective_config(g);
    prepare_out(c);
    const auto basic = load_predictor(basic_path, "basic");
    const auto tree = load_predictor(tree_path, "tree");
    const auto data = load_partitions(c);
    const Comparison cmp = compare(*basic, *tree, data.second, c.ks, c.workers);
    json doc = {{"basic", json::parse(cmp.basic.to_json())},
                {"tree", json::parse(cmp.tree.to_json())},
                {"n_flips", cmp.flips.size()},
                {"corrected", cmp.corrected()},
                {"broken", cmp.broken()}};
    write_text(c.out / "compare_report.json", doc.dump(1) + "\n");
    const std::string table = cmp.basic.to_table() + "\n" + cmp.tree.to_table() + "\ncorrected " +
                              std::to_string(cmp.corrected()) + ", broken " + std::to_string(cmp.broken()) + "\n";
    write_text(c.out / "compare_report.txt", table);
    write_text(c.out / "flips.csv", cmp.flips_csv());
    std::cout << table;
    return 0;
}

int cmd_pack(const GlobalOptions& g, const PackOptions& o) {
    const RunConfig c = effective_config(g);
    prepare_out(c);
    const std::string text = read_text(o.instance);
    const auto limit = o.limit ? o.limit : c.pack_limit;
    const PackingInstance inst =
        load_input("packing instance " + o.instance.string(), [&] { return packing_instance_from_json(text, limit); });
    for (std::size_t i = 0; i < inst.sets.size(); ++i)
        if (inst.sets[i].size() > inst.limit)
            throw UsageError("set " + std::to_string(i) + " has " + std::to_string(inst.sets[i].size()) +
                             " labels, more than the limit " + std::to_string(inst.limit));
    const bool exact = o.exact || c.pack_exact;
    if (exact && inst.sets.size() > kExactMaxSets)
        throw UsageError("--exact supports at most " + std::to_string(kExactMaxSets) + " sets");
    const PackingSolution sol = exact ? pack_exact(inst)
                                      : pack_greedy(inst, derive_seed(c.seed, "pack"),
                                                    o.min_overlap.value_or(c.pack_min_overlap));
    const PackingValidation v = validate_packing(sol, inst);
    if (!v.ok()) throw Error("packing failed validation");
    write_text(c.out / "packing.json", packing_solution_json(sol, inst));
    std::cout << inst.sets.size() << " sets packed into " << sol.count() << " supersets (limit " << inst.limit
              << ", lower bound " << packing_lower_bound(inst) << ")\n";
    return 0;
}

int cmd_confusion(const GlobalOptions& g, const std::optional<fs::path>& model_path, bool oracle) {
    const RunConfig c = effective_config(g);
    prepare_out(c);
    if (oracle == model_path.has_value()) throw UsageError("give exactly one of --model or --oracle");
    std::optional<ClassifierModel> model;
    if (model_path) model = load_model_input(*model_path);
    const auto data = load_partitions(c);
    const LabeledDataset& d = c.confusion_on_test ? data.second : data.first;
    SoftmaxConfusionMatrix h = [&] {
        if (model) return compute_confusion_matrix(*model, d, model->classes());
        const ClassSubset classes = d.classes();
        ExampleScorer truth = [classes](const FeatureVector&, Label label) {
            ProbVector p(classes.size(), 0.0);
            p[classes.index_of(label)] = 1.0;
            return p;
        };
        return compute_confusion_matrix(truth, d, classes);
    }();
    const std::size_t cap = c.confusion_cap.value_or(h.classes().size());
    const auto sets = extract_confusion_sets(h, c.confusion_alpha, cap);
    write_text(c.out / "confusion_matrix.csv", confusion_matrix_csv(h));
    write_text(c.out / "confusion_sets.json", confusion_sets_json(sets));
    std::cout << "confusion matrix over " << h.classes().size() << " classes, max row deviation "
              << num(h.max_row_deviation()) << "\n";
    return 0;
}

int cmd_schema() {
    std::cout << run_config_schema().dump(2) << "\n";
    return 0;
}

}  // namespace conftree::cli
