#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "conftree/classifier.hpp"
#include "conftree/confusion.hpp"
#include "conftree/packing.hpp"
#include "conftree/types.hpp"

namespace conftree {

class LabeledDataset;

struct TreeConfig {
    std::size_t max_depth = 2;
    // One entry per depth 0..max_depth-1: superset size limit, confusion
    // threshold and the TrainSpec used to fine-tune that depth's children.
    std::vector<std::size_t> size_limits;
    std::vector<double> alphas;
    std::vector<TrainSpec> train_specs;
    std::uint64_t seed = 0;
    std::size_t min_overlap = 0;
    // 0 estimates confusion on the node's training examples. A value in
    // (0,1) holds that stratified fraction out of training at every node
    // and estimates confusion on it instead.
    double confusion_holdout = 0.0;

    // max_depth 2, L = ceil(n/10) then ceil(n/20) (at least 2), alpha 0.01.
    static TreeConfig defaults(std::size_t num_classes);
    void validate() const;

    friend bool operator==(const TreeConfig&, const TreeConfig&) = default;
};

struct TreeNode {
    std::size_t id = 0;
    std::optional<std::size_t> parent;
    std::size_t depth = 0;
    std::string path;  // "r", "r.0", "r.0.1", ...
    ClassSubset subset;
    ClassifierModel model;
    std::vector<std::size_t> children;  // node ids
    // label -> position in `children`; empty at leaves
    std::map<Label, std::size_t> routing;
    std::vector<ConfusionSet> confusion_sets;  // empty at leaves
    // The packing produced one superset equal to this node's subset, so the
    // node was kept as a leaf.
    bool no_refinement = false;
    // Single-class node; its model is never trained.
    bool single_class = false;

    bool is_leaf() const noexcept { return children.empty(); }
};

// Nodes are stored flat in breadth-first order; nodes[0] is the root.
class ClassifierTree {
public:
    ClassifierTree() = default;
    ClassifierTree(TreeConfig config, std::vector<TreeNode> nodes);

    const TreeConfig& config() const noexcept { return config_; }
    const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
    const TreeNode& root() const { return nodes_.front(); }
    const TreeNode& node(std::size_t id) const { return nodes_.at(id); }
    const ClassSubset& classes() const { return root().subset; }
    const TreeNode& child(const TreeNode& node, Label routed_label) const;

    // Throws ShapeError/InvalidArgument when structure invariants fail.
    void check() const;

private:
    TreeConfig config_;
    std::vector<TreeNode> nodes_;
};

struct TreeHooks {
    // Called when a child's SGD is about to start, with the parent's model
    // and the child's initialized model. May run on worker threads.
    std::function<void(const TreeNode& parent, const std::string& child_path,
                       const ClassifierModel& start_model)>
        on_child_fit_start;
};

// Per-node seed: splitmix64 of (root_seed xor FNV-1a(path)).
std::uint64_t derive_seed(std::uint64_t root_seed, std::string_view node_path);

// Grows the tree breadth-first. Sibling nodes of one level are trained on
// up to `workers` threads; results do not depend on the worker count.
ClassifierTree train_tree(const ClassifierModel& basic_model, const LabeledDataset& dataset,
                          const TreeConfig& config, std::size_t workers = 1,
                          const TreeHooks* hooks = nullptr);

// Follows argmax routing from the root; returns the leaf's argmax.
Label predict(const ClassifierTree& tree, std::span<const double> x);

struct LeafPrediction {
    std::size_t leaf = 0;
    std::vector<std::size_t> path;  // node ids root..leaf
    ProbVector probs;               // over node(leaf).subset
};
LeafPrediction route(const ClassifierTree& tree, std::span<const double> x);

// Leaf ranking, extended by the nearest ancestors' rankings over labels not
// yet listed. Length min(k, number of classes).
std::vector<Label> predict_topk(const ClassifierTree& tree, std::span<const double> x,
                                std::size_t k);

// Writes `manifest_path` and one model file per node next to it.
void save_tree(const ClassifierTree& tree, const std::filesystem::path& manifest_path);
ClassifierTree load_tree(const std::filesystem::path& manifest_path);

// Per-node structure summary as JSON.
std::string build_report_json(const ClassifierTree& tree);

std::string tree_config_json(const TreeConfig& config);
TreeConfig tree_config_from_json(std::string_view text);

}  // namespace conftree
