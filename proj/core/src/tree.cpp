#include "conftree/tree.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "conftree/dataio.hpp"
#include "conftree/errors.hpp"
#include "json_util.hpp"

namespace conftree {

using detail::json;

TreeConfig TreeConfig::defaults(std::size_t num_classes) {
    TreeConfig c;
    c.max_depth = 2;
    const auto ceil_div = [](std::size_t a, std::size_t b) { return (a + b - 1) / b; };
    c.size_limits = {std::max<std::size_t>(2, ceil_div(num_classes, 10)),
                     std::max<std::size_t>(2, ceil_div(num_classes, 20))};
    c.alphas = {0.01, 0.01};
    c.train_specs = {TrainSpec{}, TrainSpec{}};
    return c;
}

void TreeConfig::validate() const {
    if (size_limits.size() != max_depth)
        throw InvalidArgument("size_limits must have max_depth = " + std::to_string(max_depth) + " entries");
    if (alphas.size() != max_depth) throw InvalidArgument("alphas must have one entry per depth");
    if (train_specs.size() != max_depth) throw InvalidArgument("train_specs must have one entry per depth");
    for (std::size_t d = 0; d < max_depth; ++d) {
        if (size_limits[d] < 2) throw InvalidArgument("size limit at depth " + std::to_string(d) + " is below 2");
        if (!(alphas[d] >= 0.0 && alphas[d] < 1.0))
            throw InvalidArgument("alpha at depth " + std::to_string(d) + " must lie in [0, 1)");
        train_specs[d].validate();
    }
    if (!(confusion_holdout >= 0.0 && confusion_holdout < 1.0))
        throw InvalidArgument("confusion_holdout must lie in [0, 1)");
}

ClassifierTree::ClassifierTree(TreeConfig config, std::vector<TreeNode> nodes)
    : config_(std::move(config)), nodes_(std::move(nodes)) {
    check();
}

const TreeNode& ClassifierTree::child(const TreeNode& node, Label routed_label) const {
    const auto it = node.routing.find(routed_label);
    if (it == node.routing.end())
        throw InvalidArgument("node " + node.path + " has no route for label " + std::to_string(routed_label));
    return nodes_.at(node.children.at(it->second));
}

void ClassifierTree::check() const {
    if (nodes_.empty()) throw InvalidArgument("tree has no nodes");
    if (nodes_.front().parent || nodes_.front().depth != 0) throw InvalidArgument("root must have depth 0");
    for (std::size_t id = 0; id < nodes_.size(); ++id) {
        const TreeNode& n = nodes_[id];
        const std::string where = "node " + n.path;
        if (n.id != id) throw InvalidArgument(where + ": id does not match its position");
        if (n.model.classes() != n.subset) throw InvalidArgument(where + ": model classes differ from subset");
        if (n.depth > config_.max_depth) throw InvalidArgument(where + ": deeper than max_depth");
        if (n.children.empty()) {
            if (!n.routing.empty()) throw InvalidArgument(where + ": leaf with a routing table");
            continue;
        }
        if (n.routing.size() != n.subset.size()) throw InvalidArgument(where + ": routing is not total");
        for (std::size_t c : n.children) {
            if (c <= id || c >= nodes_.size()) throw InvalidArgument(where + ": bad child id");
            if (nodes_[c].parent != id || nodes_[c].depth != n.depth + 1)
                throw InvalidArgument(where + ": child lineage mismatch");
        }
        for (Label l : n.subset) {
            const auto it = n.routing.find(l);
            if (it == n.routing.end()) throw InvalidArgument(where + ": no route for label " + std::to_string(l));
            if (it->second >= n.children.size()) throw InvalidArgument(where + ": route out of range");
            if (!nodes_[n.children[it->second]].subset.contains(l))
                throw InvalidArgument(where + ": label " + std::to_string(l) + " routed to a child without it");
        }
    }
}

std::uint64_t derive_seed(std::uint64_t root_seed, std::string_view node_path) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : node_path) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    std::uint64_t z = root_seed ^ h;
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

namespace {

struct NodeOutcome {
    std::vector<LabelSet> child_subsets;
};

class TreeBuilder {
public:
    TreeBuilder(const ClassifierModel& basic, const LabeledDataset& dataset, const TreeConfig& config,
                std::size_t workers, const TreeHooks* hooks)
        : config_(config), workers_(std::max<std::size_t>(1, workers)), hooks_(hooks) {
        config_.validate();
        basic.check();
        if (!dataset.empty() && dataset.dim() != basic.input_dim())
            throw ShapeError("dataset dimension " + std::to_string(dataset.dim()) + " differs from model input " +
                             std::to_string(basic.input_dim()));
        for (Label l : dataset.classes())
            if (!basic.classes().contains(l))
                throw InvalidLabel("dataset label " + std::to_string(l) + " is not in the basic model's class set");
        const LabeledDataset full = dataset.restrict_to(basic.classes());
        if (config_.confusion_holdout > 0.0) {
            auto [train, held] = split(full, config_.confusion_holdout, derive_seed(config_.seed, "holdout"));
            train_ = std::move(train);
            confusion_ = std::move(held);
        } else {
            train_ = full;
            confusion_ = full;
        }
        TreeNode root;
        root.path = "r";
        root.subset = basic.classes();
        root.model = basic;
        nodes_.push_back(std::move(root));
    }

    ClassifierTree build() {
        std::vector<std::size_t> level = {0};
        while (!level.empty()) {
            std::vector<NodeOutcome> outcomes(level.size());
            run_level(level, outcomes);
            std::vector<std::size_t> next;
            for (std::size_t i = 0; i < level.size(); ++i) {
                const std::size_t parent = level[i];
                for (const LabelSet& q : outcomes[i].child_subsets) {
                    TreeNode child;
                    child.id = nodes_.size();
                    child.parent = parent;
                    child.depth = nodes_[parent].depth + 1;
                    child.path = nodes_[parent].path + "." + std::to_string(nodes_[parent].children.size());
                    child.subset = ClassSubset(q);
                    nodes_[parent].children.push_back(child.id);
                    next.push_back(child.id);
                    nodes_.push_back(std::move(child));
                }
            }
            level = std::move(next);
        }
        return ClassifierTree(config_, std::move(nodes_));
    }

private:
    void run_level(const std::vector<std::size_t>& level, std::vector<NodeOutcome>& outcomes) {
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        auto worker = [&] {
            for (std::size_t i = next++; i < level.size(); i = next++) {
                try {
                    outcomes[i] = process(nodes_[level[i]]);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        };
        const std::size_t threads = std::min(workers_, level.size());
        if (threads <= 1) {
            worker();
        } else {
            std::vector<std::jthread> pool;
            pool.reserve(threads);
            for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
        }
        if (failure) std::rethrow_exception(failure);
    }

    // Trains `node` (except the root) and, above max depth, derives its
    // child subsets and routing. Touches only `node`; its parent is frozen.
    NodeOutcome process(TreeNode& node) {
        const std::size_t d = node.depth;
        if (d != 0) {
            const TreeNode& parent = nodes_[*node.parent];
            if (node.subset.size() == 1) {
                node.single_class = true;
                node.model = ClassifierModel::zeros(parent.model.shape(), parent.model.input_dim(), node.subset);
                if (node.model.has_hidden()) node.model.hidden_layer() = parent.model.hidden_layer();
                return {};
            }
            TrainSpec spec = config_.train_specs[d - 1];
            spec.seed = derive_seed(config_.seed, node.path);
            FitHooks fit_hooks;
            if (hooks_ && hooks_->on_child_fit_start) {
                fit_hooks.on_start = [&](const ClassifierModel& m) { hooks_->on_child_fit_start(parent, node.path, m); };
            }
            node.model = fine_tune(train_.restrict_to(node.subset), node.subset, spec, parent.model, &fit_hooks);
        }
        if (d == config_.max_depth) return {};

        const std::size_t limit = config_.size_limits[d];
        const auto matrix = compute_confusion_matrix(node.model, confusion_, node.subset);
        node.confusion_sets = extract_confusion_sets(matrix, config_.alphas[d], limit);
        const auto instance = PackingInstance::from_confusion_sets(node.confusion_sets, limit);
        const auto packing = pack_greedy(instance, derive_seed(config_.seed, node.path + "/pack"), config_.min_overlap);

        if (packing.count() == 1 && packing.supersets.front().labels.size() == node.subset.size()) {
            node.no_refinement = true;
            return {};
        }
        NodeOutcome out;
        const auto assignment = packing.assignment(instance.sets.size());
        for (std::size_t j = 0; j < node.confusion_sets.size(); ++j)
            node.routing[node.confusion_sets[j].owner] = assignment[j].value();
        for (const auto& q : packing.supersets) out.child_subsets.push_back(q.labels);
        return out;
    }

    TreeConfig config_;
    std::size_t workers_;
    const TreeHooks* hooks_;
    LabeledDataset train_;
    LabeledDataset confusion_;
    std::vector<TreeNode> nodes_;
};

json train_spec_to_json(const TrainSpec& s) {
    return {{"learning_rate", s.learning_rate}, {"epochs", s.epochs},     {"batch_size", s.batch_size},
            {"seed", s.seed},                   {"freeze_hidden", s.freeze_hidden}, {"l2", s.l2},
            {"lr_decay", s.lr_decay},           {"decay_every", s.decay_every}};
}

TrainSpec train_spec_from_json(const json& j, const std::string& where) {
    TrainSpec s;
    s.learning_rate = detail::as_double(detail::member(j, "learning_rate", where), where + "/learning_rate");
    s.epochs = static_cast<int>(detail::as_i64(detail::member(j, "epochs", where), where + "/epochs"));
    s.batch_size = static_cast<int>(detail::as_i64(detail::member(j, "batch_size", where), where + "/batch_size"));
    s.seed = detail::as_u64(detail::member(j, "seed", where), where + "/seed");
    s.freeze_hidden = detail::as_bool(detail::member(j, "freeze_hidden", where), where + "/freeze_hidden");
    s.l2 = detail::as_double(detail::member(j, "l2", where), where + "/l2");
    s.lr_decay = detail::as_double(detail::member(j, "lr_decay", where), where + "/lr_decay");
    s.decay_every = static_cast<int>(detail::as_i64(detail::member(j, "decay_every", where), where + "/decay_every"));
    return s;
}

json config_to_json(const TreeConfig& c) {
    json specs = json::array();
    for (const auto& s : c.train_specs) specs.push_back(train_spec_to_json(s));
    return {{"max_depth", c.max_depth},
            {"size_limits", c.size_limits},
            {"alphas", detail::doubles_to_json(c.alphas)},
            {"train_specs", std::move(specs)},
            {"seed", c.seed},
            {"min_overlap", c.min_overlap},
            {"confusion_holdout", c.confusion_holdout}};
}

TreeConfig config_from_json(const json& j, const std::string& where) {
    TreeConfig c;
    c.max_depth = detail::as_u64(detail::member(j, "max_depth", where), where + "/max_depth");
    const auto& limits = detail::member(j, "size_limits", where);
    if (!limits.is_array()) throw ParseError(where + "/size_limits", "expected an array");
    for (std::size_t i = 0; i < limits.size(); ++i)
        c.size_limits.push_back(detail::as_u64(limits[i], where + "/size_limits/" + std::to_string(i)));
    c.alphas = detail::as_doubles(detail::member(j, "alphas", where), where + "/alphas");
    const auto& specs = detail::member(j, "train_specs", where);
    if (!specs.is_array()) throw ParseError(where + "/train_specs", "expected an array");
    for (std::size_t i = 0; i < specs.size(); ++i)
        c.train_specs.push_back(train_spec_from_json(specs[i], where + "/train_specs/" + std::to_string(i)));
    c.seed = detail::as_u64(detail::member(j, "seed", where), where + "/seed");
    c.min_overlap = detail::as_u64(detail::member(j, "min_overlap", where), where + "/min_overlap");
    c.confusion_holdout =
        detail::as_double(detail::member(j, "confusion_holdout", where), where + "/confusion_holdout");
    try {
        c.validate();
    } catch (const InvalidArgument& e) {
        throw ParseError(where, e.what());
    }
    return c;
}

std::string model_file_name(const TreeNode& node) { return "node_" + node.path + ".json"; }

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("failed writing " + path.string());
}

}  // namespace

ClassifierTree train_tree(const ClassifierModel& basic_model, const LabeledDataset& dataset,
                          const TreeConfig& config, std::size_t workers, const TreeHooks* hooks) {
    return TreeBuilder(basic_model, dataset, config, workers, hooks).build();
}

LeafPrediction route(const ClassifierTree& tree, std::span<const double> x) {
    LeafPrediction out;
    const TreeNode* node = &tree.root();
    while (true) {
        out.path.push_back(node->id);
        out.probs = predict_probs(node->model, x);
        if (node->is_leaf()) break;
        node = &tree.child(*node, argmax_label(node->subset, out.probs));
    }
    out.leaf = node->id;
    return out;
}

Label predict(const ClassifierTree& tree, std::span<const double> x) {
    const auto leaf = route(tree, x);
    return argmax_label(tree.node(leaf.leaf).subset, leaf.probs);
}

std::vector<Label> predict_topk(const ClassifierTree& tree, std::span<const double> x, std::size_t k) {
    if (k == 0) throw InvalidArgument("k must be at least 1");
    const auto leaf = route(tree, x);
    k = std::min(k, tree.classes().size());
    std::vector<Label> out = rank_labels(tree.node(leaf.leaf).subset, leaf.probs, k);
    for (auto it = leaf.path.rbegin() + 1; it != leaf.path.rend() && out.size() < k; ++it) {
        const TreeNode& anc = tree.node(*it);
        const auto ranking = rank_labels(anc.subset, predict_probs(anc.model, x), anc.subset.size());
        for (Label l : ranking) {
            if (out.size() == k) break;
            if (std::find(out.begin(), out.end(), l) == out.end()) out.push_back(l);
        }
    }
    return out;
}

void save_tree(const ClassifierTree& tree, const std::filesystem::path& manifest_path) {
    const auto dir = manifest_path.has_parent_path() ? manifest_path.parent_path() : std::filesystem::path(".");
    std::filesystem::create_directories(dir);
    json nodes = json::array();
    for (const TreeNode& n : tree.nodes()) {
        json routing = json::array();
        for (const auto& [label, child] : n.routing) routing.push_back({label, child});
        json sets = json::array();
        for (const auto& s : n.confusion_sets) sets.push_back({{"owner", s.owner}, {"members", s.members}});
        json node = {{"id", n.id},
                     {"path", n.path},
                     {"depth", n.depth},
                     {"parent", n.parent ? json(*n.parent) : json(nullptr)},
                     {"subset", n.subset.labels()},
                     {"model", model_file_name(n)},
                     {"children", n.children},
                     {"routing", std::move(routing)},
                     {"confusion_sets", std::move(sets)},
                     {"no_refinement", n.no_refinement},
                     {"single_class", n.single_class}};
        nodes.push_back(std::move(node));
        save_model(n.model, dir / model_file_name(n));
    }
    json manifest = {{"format", "conftree-tree"},
                     {"version", 1},
                     {"config", config_to_json(tree.config())},
                     {"nodes", std::move(nodes)}};
    write_text(manifest_path, manifest.dump(1) + "\n");
}

ClassifierTree load_tree(const std::filesystem::path& manifest_path) {
    const std::string name = manifest_path.string();
    const json doc = detail::parse_json(read_text(manifest_path), name);
    const auto dir = manifest_path.has_parent_path() ? manifest_path.parent_path() : std::filesystem::path(".");
    try {
        if (detail::as_string(detail::member(doc, "format", ""), "/format") != "conftree-tree")
            throw ParseError("/format", "not a conftree tree manifest");
        TreeConfig config = config_from_json(detail::member(doc, "config", ""), "/config");
        const json& jnodes = detail::member(doc, "nodes", "");
        if (!jnodes.is_array() || jnodes.empty()) throw ParseError("/nodes", "expected a nonempty array");
        std::vector<TreeNode> nodes;
        for (std::size_t i = 0; i < jnodes.size(); ++i) {
            const std::string w = "/nodes/" + std::to_string(i);
            const json& jn = jnodes[i];
            TreeNode n;
            n.id = detail::as_u64(detail::member(jn, "id", w), w + "/id");
            n.path = detail::as_string(detail::member(jn, "path", w), w + "/path");
            n.depth = detail::as_u64(detail::member(jn, "depth", w), w + "/depth");
            const json& parent = detail::member(jn, "parent", w);
            if (!parent.is_null()) n.parent = detail::as_u64(parent, w + "/parent");
            try {
                n.subset = ClassSubset(detail::as_ints(detail::member(jn, "subset", w), w + "/subset"));
            } catch (const InvalidArgument& e) {
                throw ParseError(w + "/subset", e.what());
            }
            const std::string model_file = detail::as_string(detail::member(jn, "model", w), w + "/model");
            n.model = load_model(dir / model_file);
            const json& children = detail::member(jn, "children", w);
            if (!children.is_array()) throw ParseError(w + "/children", "expected an array");
            for (std::size_t c = 0; c < children.size(); ++c)
                n.children.push_back(detail::as_u64(children[c], w + "/children/" + std::to_string(c)));
            const json& routing = detail::member(jn, "routing", w);
            if (!routing.is_array()) throw ParseError(w + "/routing", "expected an array");
            for (std::size_t r = 0; r < routing.size(); ++r) {
                const auto pair = detail::as_ints(routing[r], w + "/routing/" + std::to_string(r));
                if (pair.size() != 2 || pair[1] < 0)
                    throw ParseError(w + "/routing/" + std::to_string(r), "expected [label, child]");
                n.routing[pair[0]] = static_cast<std::size_t>(pair[1]);
            }
            const json& sets = detail::member(jn, "confusion_sets", w);
            if (!sets.is_array()) throw ParseError(w + "/confusion_sets", "expected an array");
            for (std::size_t s = 0; s < sets.size(); ++s) {
                const std::string sw = w + "/confusion_sets/" + std::to_string(s);
                ConfusionSet cs;
                cs.owner = static_cast<Label>(detail::as_i64(detail::member(sets[s], "owner", sw), sw + "/owner"));
                cs.members = detail::as_ints(detail::member(sets[s], "members", sw), sw + "/members");
                n.confusion_sets.push_back(std::move(cs));
            }
            n.no_refinement = detail::as_bool(detail::member(jn, "no_refinement", w), w + "/no_refinement");
            n.single_class = detail::as_bool(detail::member(jn, "single_class", w), w + "/single_class");
            nodes.push_back(std::move(n));
        }
        try {
            return ClassifierTree(std::move(config), std::move(nodes));
        } catch (const InvalidArgument& e) {
            throw ParseError("/nodes", e.what());
        }
    } catch (const ParseError& e) {
        if (e.location().rfind(name, 0) == 0) throw;
        throw ParseError(name + ":" + e.location(), e.message());
    }
}

std::string build_report_json(const ClassifierTree& tree) {
    json nodes = json::array();
    std::size_t leaves = 0;
    std::size_t deepest = 0;
    for (const TreeNode& n : tree.nodes()) {
        json entry = {{"path", n.path},
                      {"depth", n.depth},
                      {"subset_size", n.subset.size()},
                      {"subset", n.subset.labels()},
                      {"leaf", n.is_leaf()},
                      {"num_supersets", n.children.size()}};
        if (!n.confusion_sets.empty()) {
            std::size_t lo = n.confusion_sets.front().members.size();
            std::size_t hi = lo;
            double total = 0.0;
            std::map<std::size_t, std::size_t> histogram;
            for (const auto& s : n.confusion_sets) {
                lo = std::min(lo, s.members.size());
                hi = std::max(hi, s.members.size());
                total += static_cast<double>(s.members.size());
                ++histogram[s.members.size()];
            }
            json hist = json::object();
            for (const auto& [size, count] : histogram) hist[std::to_string(size)] = count;
            entry["confusion_set_sizes"] = {{"min", lo},
                                            {"max", hi},
                                            {"mean", total / static_cast<double>(n.confusion_sets.size())},
                                            {"histogram", std::move(hist)}};
        }
        json child_subsets = json::array();
        for (std::size_t c : n.children) child_subsets.push_back(tree.node(c).subset.labels());
        entry["child_subsets"] = std::move(child_subsets);
        json flags = json::array();
        if (n.no_refinement) flags.push_back("no_refinement");
        if (n.single_class) flags.push_back("single_class");
        entry["flags"] = std::move(flags);
        nodes.push_back(std::move(entry));
        if (n.is_leaf()) ++leaves;
        deepest = std::max(deepest, n.depth);
    }
    json report = {{"num_nodes", tree.nodes().size()},
                   {"num_leaves", leaves},
                   {"max_depth_reached", deepest},
                   {"config", config_to_json(tree.config())},
                   {"nodes", std::move(nodes)}};
    return report.dump(1) + "\n";
}

std::string tree_config_json(const TreeConfig& config) { return config_to_json(config).dump(1) + "\n"; }

TreeConfig tree_config_from_json(std::string_view text) {
    return config_from_json(detail::parse_json(text, "tree config"), "");
}

}  // namespace conftree
