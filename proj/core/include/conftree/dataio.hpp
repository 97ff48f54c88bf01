#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string_view>
#include <utility>
#include <vector>

#include "conftree/types.hpp"

namespace conftree {

// Labeled examples with a uniform feature dimension. The class set lists
// every label that occurs, and each of them has at least one example.
class LabeledDataset {
public:
    LabeledDataset() = default;

    // Class set is the sorted set of distinct labels.
    LabeledDataset(std::vector<FeatureVector> features, std::vector<Label> labels);
    // Explicit class set; every label must belong to it and every class
    // must occur at least once.
    LabeledDataset(std::vector<FeatureVector> features, std::vector<Label> labels, ClassSubset classes);

    std::size_t size() const noexcept { return labels_.size(); }
    bool empty() const noexcept { return labels_.empty(); }
    std::size_t dim() const noexcept { return dim_; }
    const FeatureVector& features(std::size_t i) const { return features_[i]; }
    Label label(std::size_t i) const { return labels_[i]; }
    const std::vector<Label>& labels() const noexcept { return labels_; }
    const ClassSubset& classes() const noexcept { return classes_; }

    // Number of examples of `label` (t_i).
    std::size_t count(Label label) const;

    // Examples whose label belongs to `subset`; the result's class set is
    // `subset`. Throws EmptyClassError if some class of `subset` has no
    // example here.
    LabeledDataset restrict_to(const ClassSubset& subset) const;

    // Indices of the examples of each class, in class-set order.
    std::vector<std::vector<std::size_t>> indices_by_class() const;

    friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;

private:
    void validate();

    std::vector<FeatureVector> features_;
    std::vector<Label> labels_;
    ClassSubset classes_;
    std::vector<std::size_t> counts_;
    std::size_t dim_ = 0;
};

// Rows "label,f_1,...,f_d". Labels are integers.
LabeledDataset load_csv(const std::filesystem::path& path, bool has_header);
LabeledDataset parse_csv(std::string_view text, bool has_header);

// IDX pair (images magic 0x00000803, labels magic 0x00000801). Pixels are
// scaled to [0,1] and flattened row-major.
LabeledDataset load_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path);

struct SyntheticSpec {
    std::size_t n_groups = 4;
    std::size_t classes_per_group = 5;
    std::size_t dim = 10;
    std::size_t samples_per_class = 100;
    double intra_group_spread = 1.5;
    double inter_group_separation = 8.0;
    std::uint64_t seed = 0;

    std::size_t num_classes() const noexcept { return n_groups * classes_per_group; }
    void validate() const;
};

// Group g is centered at inter_group_separation * e_g. Each class center
// sits at intra_group_spread along a seeded random unit direction from its
// group center. Examples are drawn from N(class center, I). Labels of group
// g are g*classes_per_group .. (g+1)*classes_per_group - 1. Requires
// dim >= n_groups.
LabeledDataset generate_synthetic(const SyntheticSpec& spec);

// Stratified split. `heldout_fraction` of each class (rounded, at least one
// and at most t_i - 1 examples) goes to the second part.
std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& dataset,
                                                double heldout_fraction, std::uint64_t seed);

}  // namespace conftree
