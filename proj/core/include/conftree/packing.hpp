#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "conftree/types.hpp"

namespace conftree {

struct ConfusionSet;

// Sorted, duplicate-free label list.
using LabelSet = std::vector<Label>;

LabelSet make_label_set(std::vector<Label> labels);
std::size_t overlap(const LabelSet& a, const LabelSet& b);
LabelSet set_union(const LabelSet& a, const LabelSet& b);
std::size_t union_size(const LabelSet& a, const LabelSet& b);

struct PackingInstance {
    std::vector<LabelSet> sets;
    std::size_t limit = 0;

    static PackingInstance from_confusion_sets(const std::vector<ConfusionSet>& sets,
                                               std::size_t limit);
};

struct Superset {
    LabelSet labels;
    std::vector<std::size_t> members;  // indices into PackingInstance::sets

    friend bool operator==(const Superset&, const Superset&) = default;
};

struct PackingSolution {
    std::vector<Superset> supersets;

    std::size_t count() const noexcept { return supersets.size(); }
    // Superset index per set index; nullopt where a set is unassigned. When
    // a set is (invalidly) listed twice the first superset wins.
    std::vector<std::optional<std::size_t>> assignment(std::size_t num_sets) const;

    friend bool operator==(const PackingSolution&, const PackingSolution&) = default;
};

// Greedy max-overlap merging. Each round merges the feasible pair
// (union size <= limit) of nonempty candidates with the largest
// intersection; equal-overlap pairs are chosen uniformly with `seed`.
// Pairs with overlap < min_overlap are never merged (0 keeps every
// feasible pair eligible). Throws InfeasibleSetError for a set larger than
// the limit.
PackingSolution pack_greedy(const PackingInstance& instance, std::uint64_t seed,
                            std::size_t min_overlap = 0);

inline constexpr std::size_t kExactMaxSets = 12;

// Minimum number of supersets by branch-and-bound over set partitions.
// Among optima, returns the lexicographically smallest assignment with
// supersets numbered by first use. Throws InstanceTooLarge above
// kExactMaxSets sets.
PackingSolution pack_exact(const PackingInstance& instance);

// Lower bound ceil(|union of all sets| / limit).
std::size_t packing_lower_bound(const PackingInstance& instance);

struct PackingCheck {
    std::string name;
    bool passed = true;
    std::string detail;
};

struct PackingValidation {
    std::vector<PackingCheck> checks;

    bool ok() const;
    const PackingCheck& check(std::string_view name) const;
};

// Checks "size_limit", "exactly_once", "union_consistency" and "nonempty".
PackingValidation validate_packing(const PackingSolution& solution, const PackingInstance& instance);

// Accepts a JSON array of label arrays, or {"sets": [...], "limit": L}.
// An explicit `limit` overrides the document's.
PackingInstance packing_instance_from_json(std::string_view text,
                                           std::optional<std::size_t> limit = std::nullopt);
std::string packing_solution_json(const PackingSolution& solution, const PackingInstance& instance);

}  // namespace conftree
