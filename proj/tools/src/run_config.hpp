#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "conftree/classifier.hpp"
#include "conftree/dataio.hpp"
#include "conftree/tree.hpp"

namespace conftree::cli {

// Invalid input: bad flags, schema violations, missing or malformed files.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DataConfig {
    enum class Kind { Csv, Idx, Synthetic };
    Kind kind = Kind::Synthetic;
    std::filesystem::path train;
    std::filesystem::path test;
    bool header = false;
    std::filesystem::path train_images, train_labels, test_images, test_labels;
    SyntheticSpec synthetic;
    bool synthetic_seed_given = false;
    double test_fraction = 1.0 / 3.0;
};

struct TreeSection {
    std::optional<std::size_t> max_depth;
    std::optional<std::vector<std::size_t>> size_limits;
    std::optional<std::vector<double>> alphas;
    std::optional<TrainSpec> train;
    std::size_t min_overlap = 0;
    double confusion_holdout = 0.0;
};

struct RunConfig {
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    std::filesystem::path out = "conftree-out";
    std::optional<DataConfig> data;
    ModelShape shape;
    TrainSpec train;
    TreeSection tree;
    std::vector<std::size_t> ks{1, 5};
    double confusion_alpha = 0.01;
    std::optional<std::size_t> confusion_cap;
    bool confusion_on_test = false;
    std::optional<std::size_t> pack_limit;
    std::size_t pack_min_overlap = 0;
    bool pack_exact = false;
};

// Parses and validates a configuration document. Relative paths are
// resolved against base_dir. Throws UsageError listing every violation.
RunConfig parse_run_config(const std::string& text, const std::string& source,
                           const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

// Training and evaluation partitions. Without an explicit test source the
// training source is split with a stratified, seed-derived split.
std::pair<LabeledDataset, LabeledDataset> load_partitions(const RunConfig& config);

TrainSpec base_train_spec(const RunConfig& config);
TreeConfig resolve_tree_config(const RunConfig& config, std::size_t num_classes);

}  // namespace conftree::cli
