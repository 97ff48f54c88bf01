#include "conftree/dataio.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "conftree/errors.hpp"

namespace conftree {

LabeledDataset::LabeledDataset(std::vector<FeatureVector> features, std::vector<Label> labels)
    : features_(std::move(features)), labels_(std::move(labels)) {
    std::vector<Label> distinct = labels_;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (!distinct.empty()) classes_ = ClassSubset(std::move(distinct));
    validate();
}

LabeledDataset::LabeledDataset(std::vector<FeatureVector> features, std::vector<Label> labels,
                               ClassSubset classes)
    : features_(std::move(features)), labels_(std::move(labels)), classes_(std::move(classes)) {
    validate();
}

void LabeledDataset::validate() {
    if (features_.size() != labels_.size())
        throw InvalidArgument("feature and label counts differ");
    dim_ = features_.empty() ? 0 : features_.front().size();
    for (std::size_t i = 0; i < features_.size(); ++i) {
        if (features_[i].size() != dim_)
            throw ShapeError("example " + std::to_string(i) + " has dimension " +
                             std::to_string(features_[i].size()) + ", expected " + std::to_string(dim_));
        for (double v : features_[i])
            if (!std::isfinite(v)) throw InvalidArgument("example " + std::to_string(i) + " has a non-finite feature");
    }
    counts_.assign(classes_.size(), 0);
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        const std::size_t c = classes_.index_of(labels_[i]);
        if (c == classes_.size())
            throw InvalidLabel("label " + std::to_string(labels_[i]) + " is not in the class set");
        ++counts_[c];
    }
    for (std::size_t c = 0; c < classes_.size(); ++c)
        if (counts_[c] == 0)
            throw EmptyClassError(classes_[c], "class " + std::to_string(classes_[c]) + " has no examples");
}

std::size_t LabeledDataset::count(Label label) const {
    const std::size_t c = classes_.index_of(label);
    return c == classes_.size() ? 0 : counts_[c];
}

LabeledDataset LabeledDataset::restrict_to(const ClassSubset& subset) const {
    std::vector<FeatureVector> feats;
    std::vector<Label> labs;
    for (std::size_t i = 0; i < size(); ++i) {
        if (subset.contains(labels_[i])) {
            feats.push_back(features_[i]);
            labs.push_back(labels_[i]);
        }
    }
    return LabeledDataset(std::move(feats), std::move(labs), subset);
}

std::vector<std::vector<std::size_t>> LabeledDataset::indices_by_class() const {
    std::vector<std::vector<std::size_t>> out(classes_.size());
    for (std::size_t i = 0; i < size(); ++i) out[classes_.index_of(labels_[i])].push_back(i);
    return out;
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    const auto* end = s.data() + s.size();
    const auto res = std::from_chars(s.data(), end, out);
    return !s.empty() && res.ec == std::errc{} && res.ptr == end;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::uint32_t read_be32(const std::string& bytes, std::size_t offset, const std::string& what) {
    if (bytes.size() < offset + 4) throw FormatError(what + ": truncated header");
    std::uint32_t v = 0;
    for (std::size_t i = 0; i < 4; ++i) v = (v << 8) | static_cast<unsigned char>(bytes[offset + i]);
    return v;
}

}  // namespace

LabeledDataset parse_csv(std::string_view text, bool has_header) {
    std::vector<FeatureVector> feats;
    std::vector<Label> labs;
    std::size_t expected_fields = 0;
    std::size_t row = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        const std::string_view line =
            text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++row;
        if (has_header && row == 1) continue;
        if (trim(line).empty()) continue;

        const std::string where = "row " + std::to_string(row);
        std::vector<std::string_view> fields;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            fields.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (fields.size() < 2) throw ParseError(where, "expected a label and at least one feature");
        if (expected_fields == 0) expected_fields = fields.size();
        if (fields.size() != expected_fields)
            throw ParseError(where, "has " + std::to_string(fields.size()) + " fields, expected " +
                                        std::to_string(expected_fields));
        Label label = 0;
        if (!parse_number(fields[0], label))
            throw ParseError(where, "label '" + std::string(trim(fields[0])) + "' is not an integer");
        FeatureVector x(fields.size() - 1);
        for (std::size_t f = 1; f < fields.size(); ++f) {
            if (!parse_number(fields[f], x[f - 1]) || !std::isfinite(x[f - 1]))
                throw ParseError(where, "field " + std::to_string(f + 1) + " ('" + std::string(trim(fields[f])) +
                                            "') is not a finite number");
        }
        feats.push_back(std::move(x));
        labs.push_back(label);
    }
    if (labs.empty()) throw EmptyDatasetError("CSV input contains no examples");
    return LabeledDataset(std::move(feats), std::move(labs));
}

LabeledDataset load_csv(const std::filesystem::path& path, bool has_header) {
    const std::string text = read_file(path);
    try {
        return parse_csv(text, has_header);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.location(), e.message());
    }
}

LabeledDataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
    const std::string images = read_file(images_path);
    const std::string labels = read_file(labels_path);
    const std::string iname = images_path.string();
    const std::string lname = labels_path.string();

    const std::uint32_t imagic = read_be32(images, 0, iname);
    if (imagic != 0x00000803u) throw FormatError(iname + ": bad image magic number");
    const std::uint32_t lmagic = read_be32(labels, 0, lname);
    if (lmagic != 0x00000801u) throw FormatError(lname + ": bad label magic number");

    const std::uint32_t n_images = read_be32(images, 4, iname);
    const std::uint32_t rows = read_be32(images, 8, iname);
    const std::uint32_t cols = read_be32(images, 12, iname);
    const std::uint32_t n_labels = read_be32(labels, 4, lname);
    if (n_images != n_labels)
        throw FormatError("image count " + std::to_string(n_images) + " does not match label count " +
                          std::to_string(n_labels));
    if (n_images == 0) throw EmptyDatasetError(iname + ": no images");
    const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
    if (pixels == 0) throw FormatError(iname + ": zero-sized images");
    if (images.size() != 16 + pixels * n_images)
        throw FormatError(iname + ": payload size does not match header");
    if (labels.size() != 8 + static_cast<std::size_t>(n_labels))
        throw FormatError(lname + ": payload size does not match header");

    std::vector<FeatureVector> feats(n_images, FeatureVector(pixels));
    std::vector<Label> labs(n_images);
    for (std::size_t i = 0; i < n_images; ++i) {
        const char* src = images.data() + 16 + i * pixels;
        for (std::size_t p = 0; p < pixels; ++p)
            feats[i][p] = static_cast<double>(static_cast<unsigned char>(src[p])) / 255.0;
        labs[i] = static_cast<unsigned char>(labels[8 + i]);
    }
    return LabeledDataset(std::move(feats), std::move(labs));
}

void SyntheticSpec::validate() const {
    if (n_groups == 0 || classes_per_group == 0 || dim == 0 || samples_per_class == 0)
        throw InvalidArgument("synthetic spec counts must be positive");
    if (!(intra_group_spread > 0.0) || !(inter_group_separation > 0.0))
        throw InvalidArgument("synthetic spread and separation must be positive");
    if (!(inter_group_separation > intra_group_spread))
        throw InvalidArgument("inter_group_separation must exceed intra_group_spread");
    if (dim < n_groups) throw InvalidArgument("dim must be at least n_groups");
}

LabeledDataset generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    const std::size_t n_classes = spec.num_classes();
    std::vector<FeatureVector> centers(n_classes, FeatureVector(spec.dim, 0.0));
    for (std::size_t g = 0; g < spec.n_groups; ++g) {
        for (std::size_t c = 0; c < spec.classes_per_group; ++c) {
            FeatureVector& center = centers[g * spec.classes_per_group + c];
            double norm = 0.0;
            do {
                norm = 0.0;
                for (double& v : center) {
                    v = normal(rng);
                    norm += v * v;
                }
                norm = std::sqrt(norm);
            } while (norm < 1e-12);
            for (double& v : center) v *= spec.intra_group_spread / norm;
            center[g] += spec.inter_group_separation;
        }
    }

    std::vector<FeatureVector> feats;
    std::vector<Label> labs;
    feats.reserve(n_classes * spec.samples_per_class);
    labs.reserve(n_classes * spec.samples_per_class);
    for (std::size_t c = 0; c < n_classes; ++c) {
        for (std::size_t s = 0; s < spec.samples_per_class; ++s) {
            FeatureVector x = centers[c];
            for (double& v : x) v += normal(rng);
            feats.push_back(std::move(x));
            labs.push_back(static_cast<Label>(c));
        }
    }
    return LabeledDataset(std::move(feats), std::move(labs));
}

std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& dataset, double heldout_fraction,
                                                std::uint64_t seed) {
    if (!(heldout_fraction > 0.0 && heldout_fraction < 1.0))
        throw InvalidArgument("split fraction must lie strictly between 0 and 1");
    if (dataset.empty()) throw EmptyDatasetError("cannot split an empty dataset");
    std::mt19937_64 rng(seed);
    std::vector<bool> heldout(dataset.size(), false);
    const auto by_class = dataset.indices_by_class();
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto idx = by_class[c];
        if (idx.size() < 2)
            throw StratificationError("class " + std::to_string(dataset.classes()[c]) +
                                      " has fewer than 2 examples");
        std::shuffle(idx.begin(), idx.end(), rng);
        auto take = static_cast<std::size_t>(std::llround(heldout_fraction * static_cast<double>(idx.size())));
        take = std::clamp<std::size_t>(take, 1, idx.size() - 1);
        for (std::size_t i = 0; i < take; ++i) heldout[idx[i]] = true;
    }
    std::array<std::vector<FeatureVector>, 2> feats;
    std::array<std::vector<Label>, 2> labs;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const std::size_t part = heldout[i] ? 1 : 0;
        feats[part].push_back(dataset.features(i));
        labs[part].push_back(dataset.label(i));
    }
    return {LabeledDataset(std::move(feats[0]), std::move(labs[0]), dataset.classes()),
            LabeledDataset(std::move(feats[1]), std::move(labs[1]), dataset.classes())};
}

}  // namespace conftree
