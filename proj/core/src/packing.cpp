#include "conftree/packing.hpp"

#include <algorithm>
#include <iterator>
#include <random>
#include <utility>

#include "conftree/confusion.hpp"
#include "conftree/errors.hpp"
#include "json_util.hpp"

namespace conftree {

LabelSet make_label_set(std::vector<Label> labels) {
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    return labels;
}

std::size_t overlap(const LabelSet& a, const LabelSet& b) {
    std::size_t n = 0;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (*ia < *ib) {
            ++ia;
        } else if (*ib < *ia) {
            ++ib;
        } else {
            ++n;
            ++ia;
            ++ib;
        }
    }
    return n;
}

LabelSet set_union(const LabelSet& a, const LabelSet& b) {
    LabelSet out;
    out.reserve(a.size() + b.size());
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

std::size_t union_size(const LabelSet& a, const LabelSet& b) { return a.size() + b.size() - overlap(a, b); }

PackingInstance PackingInstance::from_confusion_sets(const std::vector<ConfusionSet>& sets, std::size_t limit) {
    PackingInstance inst;
    inst.limit = limit;
    inst.sets.reserve(sets.size());
    for (const auto& s : sets) inst.sets.push_back(make_label_set(s.members));
    return inst;
}

std::vector<std::optional<std::size_t>> PackingSolution::assignment(std::size_t num_sets) const {
    std::vector<std::optional<std::size_t>> out(num_sets);
    for (std::size_t k = 0; k < supersets.size(); ++k)
        for (std::size_t j : supersets[k].members)
            if (j < num_sets && !out[j]) out[j] = k;
    return out;
}

namespace {

void check_instance(const PackingInstance& instance) {
    if (instance.limit == 0) throw InvalidArgument("packing size limit must be positive");
    if (instance.sets.empty()) throw InvalidArgument("packing instance has no sets");
    for (std::size_t j = 0; j < instance.sets.size(); ++j) {
        const auto& s = instance.sets[j];
        if (s.empty()) throw InvalidArgument("set " + std::to_string(j) + " is empty");
        if (!std::is_sorted(s.begin(), s.end()) || std::adjacent_find(s.begin(), s.end()) != s.end())
            throw InvalidArgument("set " + std::to_string(j) + " is not a sorted label set");
        if (s.size() > instance.limit)
            throw InfeasibleSetError(j, "set " + std::to_string(j) + " has " + std::to_string(s.size()) +
                                            " labels, above the size limit " + std::to_string(instance.limit));
    }
}

class ExactSearch {
public:
    explicit ExactSearch(const PackingInstance& inst)
        : inst_(inst), lower_bound_(packing_lower_bound(inst)), assign_(inst.sets.size()) {
        best_count_ = inst.sets.size() + 1;
    }

    PackingSolution run() {
        descend(0);
        PackingSolution sol;
        sol.supersets.resize(best_count_);
        for (std::size_t j = 0; j < best_.size(); ++j) {
            auto& q = sol.supersets[best_[j]];
            q.members.push_back(j);
            q.labels = set_union(q.labels, inst_.sets[j]);
        }
        return sol;
    }

private:
    // Restricted growth order: existing groups first, a new group last,
    // so the first optimum reached is the lexicographically smallest.
    void descend(std::size_t j) {
        if (done_) return;
        if (j == inst_.sets.size()) {
            if (groups_.size() < best_count_) {
                best_count_ = groups_.size();
                best_ = assign_;
                if (best_count_ <= lower_bound_) done_ = true;
            }
            return;
        }
        const LabelSet& s = inst_.sets[j];
        for (std::size_t g = 0; g < groups_.size() && !done_; ++g) {
            if (union_size(groups_[g], s) > inst_.limit) continue;
            LabelSet saved = groups_[g];
            groups_[g] = set_union(saved, s);
            assign_[j] = g;
            descend(j + 1);
            groups_[g] = std::move(saved);
        }
        if (done_ || groups_.size() + 1 >= best_count_) return;
        groups_.push_back(s);
        assign_[j] = groups_.size() - 1;
        descend(j + 1);
        groups_.pop_back();
    }

    const PackingInstance& inst_;
    std::size_t lower_bound_;
    std::vector<LabelSet> groups_;
    std::vector<std::size_t> assign_;
    std::vector<std::size_t> best_;
    std::size_t best_count_;
    bool done_ = false;
};

}  // namespace

PackingSolution pack_greedy(const PackingInstance& instance, std::uint64_t seed, std::size_t min_overlap) {
    check_instance(instance);
    const std::size_t n = instance.sets.size();
    std::vector<LabelSet> cand = instance.sets;
    std::vector<std::vector<std::size_t>> members(n);
    for (std::size_t j = 0; j < n; ++j) members[j] = {j};
    std::mt19937_64 rng(seed);

    std::vector<std::pair<std::size_t, std::size_t>> ties;
    while (true) {
        ties.clear();
        std::size_t best = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (cand[i].empty()) continue;
            for (std::size_t j = i + 1; j < n; ++j) {
                if (cand[j].empty()) continue;
                const std::size_t ov = overlap(cand[i], cand[j]);
                if (ov < min_overlap) continue;
                if (cand[i].size() + cand[j].size() - ov > instance.limit) continue;
                if (ties.empty() || ov > best) {
                    ties.clear();
                    best = ov;
                }
                if (ov == best) ties.emplace_back(i, j);
            }
        }
        if (ties.empty()) break;
        std::size_t pick = 0;
        if (ties.size() > 1) pick = std::uniform_int_distribution<std::size_t>(0, ties.size() - 1)(rng);
        const auto [i, j] = ties[pick];
        cand[i] = set_union(cand[i], cand[j]);
        cand[j].clear();
        members[i].insert(members[i].end(), members[j].begin(), members[j].end());
        members[j].clear();
    }

    PackingSolution sol;
    for (std::size_t k = 0; k < n; ++k) {
        if (cand[k].empty()) continue;
        std::sort(members[k].begin(), members[k].end());
        sol.supersets.push_back({std::move(cand[k]), std::move(members[k])});
    }
    return sol;
}

std::size_t packing_lower_bound(const PackingInstance& instance) {
    if (instance.limit == 0) throw InvalidArgument("packing size limit must be positive");
    LabelSet all;
    for (const auto& s : instance.sets) all = set_union(all, s);
    return (all.size() + instance.limit - 1) / instance.limit;
}

PackingSolution pack_exact(const PackingInstance& instance) {
    if (instance.sets.size() > kExactMaxSets)
        throw InstanceTooLarge("exact packing handles at most " + std::to_string(kExactMaxSets) +
                               " sets, got " + std::to_string(instance.sets.size()));
    check_instance(instance);
    return ExactSearch(instance).run();
}

bool PackingValidation::ok() const {
    return std::all_of(checks.begin(), checks.end(), [](const PackingCheck& c) { return c.passed; });
}

const PackingCheck& PackingValidation::check(std::string_view name) const {
    for (const auto& c : checks)
        if (c.name == name) return c;
    throw InvalidArgument("no packing check named '" + std::string(name) + "'");
}

PackingValidation validate_packing(const PackingSolution& solution, const PackingInstance& instance) {
    const std::size_t n = instance.sets.size();
    PackingCheck size_limit{"size_limit", true, ""};
    PackingCheck exactly_once{"exactly_once", true, ""};
    PackingCheck union_ok{"union_consistency", true, ""};
    PackingCheck nonempty{"nonempty", true, ""};
    auto fail = [](PackingCheck& c, const std::string& why) {
        if (c.passed) c.detail = why;
        c.passed = false;
    };

    std::vector<std::size_t> seen(n, 0);
    for (std::size_t k = 0; k < solution.supersets.size(); ++k) {
        const auto& q = solution.supersets[k];
        const std::string name = "superset " + std::to_string(k);
        if (q.labels.size() > instance.limit)
            fail(size_limit, name + " has " + std::to_string(q.labels.size()) + " labels, limit " +
                                 std::to_string(instance.limit));
        if (q.labels.empty() || q.members.empty()) fail(nonempty, name + " is empty");
        LabelSet expected;
        for (std::size_t j : q.members) {
            if (j >= n) {
                fail(exactly_once, name + " references unknown set " + std::to_string(j));
                continue;
            }
            ++seen[j];
            expected = set_union(expected, instance.sets[j]);
        }
        if (make_label_set(q.labels) != expected) fail(union_ok, name + " differs from the union of its sets");
    }
    for (std::size_t j = 0; j < n; ++j) {
        if (seen[j] != 1)
            fail(exactly_once, "set " + std::to_string(j) + " assigned " + std::to_string(seen[j]) + " times");
    }
    return {{size_limit, exactly_once, union_ok, nonempty}};
}

PackingInstance packing_instance_from_json(std::string_view text, std::optional<std::size_t> limit) {
    const auto doc = detail::parse_json(text, "packing instance");
    const detail::json* sets = &doc;
    std::string base;
    PackingInstance inst;
    if (doc.is_object()) {
        sets = &detail::member(doc, "sets", "");
        base = "/sets";
        if (doc.contains("limit")) inst.limit = detail::as_u64(doc["limit"], "/limit");
    }
    if (!sets->is_array()) throw ParseError(base, "expected an array of label arrays");
    for (std::size_t j = 0; j < sets->size(); ++j) {
        const std::string where = base + "/" + std::to_string(j);
        auto labels = detail::as_ints((*sets)[j], where);
        if (labels.empty()) throw ParseError(where, "empty label set");
        inst.sets.push_back(make_label_set(std::move(labels)));
    }
    if (limit) inst.limit = *limit;
    if (inst.limit == 0) throw InvalidArgument("no positive size limit given for the packing instance");
    return inst;
}

std::string packing_solution_json(const PackingSolution& solution, const PackingInstance& instance) {
    detail::json j;
    j["limit"] = instance.limit;
    j["num_sets"] = instance.sets.size();
    j["num_supersets"] = solution.count();
    detail::json arr = detail::json::array();
    for (const auto& q : solution.supersets) arr.push_back({{"labels", q.labels}, {"sets", q.members}});
    j["supersets"] = std::move(arr);
    detail::json assign = detail::json::array();
    for (const auto& a : solution.assignment(instance.sets.size())) {
        if (a)
            assign.push_back(*a);
        else
            assign.push_back(nullptr);
    }
    j["assignment"] = std::move(assign);
    return j.dump(1) + "\n";
}

}  // namespace conftree
