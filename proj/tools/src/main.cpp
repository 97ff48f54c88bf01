#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "run_config.hpp"

using namespace conftree::cli;

int main(int argc, char** argv) {
    CLI::App app{"Confusion-driven classifier trees: train, build, evaluate, compare, pack."};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", "conftree 0.1.0");

    GlobalOptions g;
    std::string config, out;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    auto* config_opt = app.add_option("--config", config, "Run configuration (JSON)");
    auto* seed_opt = app.add_option("--seed", seed, "Root seed, overrides the configuration");
    auto* out_opt = app.add_option("--out", out, "Output directory, overrides the configuration");
    auto* workers_opt = app.add_option("--workers", workers, "Worker threads for tree building and evaluation");

    auto* train = app.add_subcommand("train-base", "Train the basic model on the training partition");

    std::string model_path;
    auto* build = app.add_subcommand("build-tree", "Build a classifier tree from a basic model");
    build->add_option("--model", model_path, "Basic model file")->required();

    std::vector<std::string> predictors;
    auto* eval = app.add_subcommand("evaluate", "Evaluate a model, a tree, or an ensemble of several");
    eval->add_option("--predictor", predictors, "Model file or tree manifest; repeat for an ensemble")->required();

    std::string basic_path, tree_path;
    auto* cmp = app.add_subcommand("compare", "Compare a basic model and a tree example by example");
    cmp->add_option("--basic", basic_path, "Basic model file or tree manifest")->required();
    cmp->add_option("--tree", tree_path, "Tree manifest or model file")->required();

    std::string instance;
    std::size_t limit = 0, min_overlap = 0;
    bool exact = false;
    auto* pack = app.add_subcommand("pack", "Pack confusion sets from a standalone instance");
    pack->add_option("--instance", instance, "JSON array of label arrays, or {\"sets\", \"limit\"}")->required();
    auto* limit_opt = pack->add_option("--limit", limit, "Superset size limit")->check(CLI::PositiveNumber);
    auto* overlap_opt = pack->add_option("--min-overlap", min_overlap, "Smallest overlap a merge may have");
    pack->add_flag("--exact", exact, "Use the exact solver (at most 12 sets)");

    std::string confusion_model;
    bool oracle = false;
    auto* conf = app.add_subcommand("confusion", "Export a softmax confusion matrix and confusion sets");
    auto* conf_model_opt = conf->add_option("--model", confusion_model, "Model file");
    auto* oracle_opt = conf->add_flag("--oracle", oracle, "Score with a perfect classifier instead of a model");
    conf_model_opt->excludes(oracle_opt);

    auto* schema = app.add_subcommand("schema", "Print the run configuration schema");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (*config_opt) g.config = config;
    if (*seed_opt) g.seed = seed;
    if (*out_opt) g.out = out;
    if (*workers_opt) g.workers = workers;

    try {
        if (*train) return cmd_train_base(g);
        if (*build) return cmd_build_tree(g, model_path);
        if (*eval) return cmd_evaluate(g, {predictors.begin(), predictors.end()});
        if (*cmp) return cmd_compare(g, basic_path, tree_path);
        if (*pack) {
            PackOptions o;
            o.instance = instance;
            if (*limit_opt) o.limit = limit;
            if (*overlap_opt) o.min_overlap = min_overlap;
            o.exact = exact;
            return cmd_pack(g, o);
        }
        if (*conf) {
            std::optional<std::filesystem::path> m;
            if (*conf_model_opt) m = confusion_model;
            return cmd_confusion(g, m, oracle);
        }
        if (*schema) return cmd_schema();
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
