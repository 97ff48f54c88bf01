#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace conftree::cli {

struct GlobalOptions {
    std::optional<std::filesystem::path> config;
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> out;
    std::optional<std::size_t> workers;
};

int cmd_train_base(const GlobalOptions& g);
int cmd_build_tree(const GlobalOptions& g, const std::filesystem::path& model_path);
int cmd_evaluate(const GlobalOptions& g, const std::vector<std::filesystem::path>& predictor_paths);
int cmd_compare(const GlobalOptions& g, const std::filesystem::path& basic_path,
                const std::filesystem::path& tree_path);

struct PackOptions {
    std::filesystem::path instance;
    std::optional<std::size_t> limit;
    std::optional<std::size_t> min_overlap;
    bool exact = false;
};
int cmd_pack(const GlobalOptions& g, const PackOptions& options);

int cmd_confusion(const GlobalOptions& g, const std::optional<std::filesystem::path>& model_path, bool oracle);
int cmd_schema();

}  // namespace conftree::cli
