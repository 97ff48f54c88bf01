#include "schema.hpp"

#include <algorithm>

namespace conftree::cli {

using nlohmann::json;

namespace {

constexpr const char* kSchema = R"json({
  "$schema": "https://json-schema.org/draft/2020-12/schema",
  "title": "conftree run configuration",
  "type": "object",
  "additionalProperties": false,
  "properties": {
    "seed": {"type": "integer", "minimum": 0},
    "workers": {"type": "integer", "minimum": 1},
    "out": {"type": "string"},
    "data": {
      "type": "object",
      "additionalProperties": false,
      "required": ["kind"],
      "properties": {
        "kind": {"enum": ["csv", "idx", "synthetic"]},
        "train": {"type": "string"},
        "test": {"type": "string"},
        "header": {"type": "boolean"},
        "train_images": {"type": "string"},
        "train_labels": {"type": "string"},
        "test_images": {"type": "string"},
        "test_labels": {"type": "string"},
        "test_fraction": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "synthetic": {
          "type": "object",
          "additionalProperties": false,
          "properties": {
            "n_groups": {"type": "integer", "minimum": 1},
            "classes_per_group": {"type": "integer", "minimum": 1},
            "dim": {"type": "integer", "minimum": 1},
            "samples_per_class": {"type": "integer", "minimum": 1},
            "intra_group_spread": {"type": "number", "minimum": 0},
            "inter_group_separation": {"type": "number", "exclusiveMinimum": 0},
            "seed": {"type": "integer", "minimum": 0}
          }
        }
      }
    },
    "model": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "architecture": {"enum": ["softmax-regression", "one-hidden-layer"]},
        "hidden_width": {"type": "integer", "minimum": 1}
      }
    },
    "train": {"$ref": "#/$defs/train_spec"},
    "tree": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "max_depth": {"type": "integer", "minimum": 0},
        "size_limits": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "alphas": {"type": "array", "items": {"type": "number", "minimum": 0, "exclusiveMaximum": 1}},
        "train": {"$ref": "#/$defs/train_spec"},
        "min_overlap": {"type": "integer", "minimum": 0},
        "confusion_holdout": {"type": "number", "minimum": 0, "exclusiveMaximum": 1}
      }
    },
    "evaluate": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "ks": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 1}}
      }
    },
    "confusion": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "alpha": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "cap": {"type": "integer", "minimum": 1},
        "split": {"enum": ["train", "test"]}
      }
    },
    "pack": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "limit": {"type": "integer", "minimum": 1},
        "min_overlap": {"type": "integer", "minimum": 0},
        "exact": {"type": "boolean"}
      }
    }
  },
  "$defs": {
    "train_spec": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "learning_rate": {"type": "number", "exclusiveMinimum": 0},
        "epochs": {"type": "integer", "minimum": 1},
        "batch_size": {"type": "integer", "minimum": 1},
        "l2": {"type": "number", "minimum": 0},
        "lr_decay": {"type": "number", "exclusiveMinimum": 0},
        "decay_every": {"type": "integer", "minimum": 0},
        "freeze_hidden": {"type": "boolean"}
      }
    }
  }
})json";

std::string type_name(const json& v) {
    if (v.is_number_integer()) return "integer";
    if (v.is_number()) return "number";
    return v.type_name();
}

bool has_type(const json& v, const std::string& type) {
    if (type == "object") return v.is_object();
    if (type == "array") return v.is_array();
    if (type == "string") return v.is_string();
    if (type == "boolean") return v.is_boolean();
    if (type == "integer") return v.is_number_integer();
    if (type == "number") return v.is_number();
    if (type == "null") return v.is_null();
    return false;
}

class Validator {
public:
    explicit Validator(const json& root) : root_(root) {}

    void run(const json& schema, const json& v, const std::string& ptr) {
        if (auto ref = schema.find("$ref"); ref != schema.end()) {
            run(resolve(ref->get<std::string>()), v, ptr);
            return;
        }
        if (auto t = schema.find("type"); t != schema.end() && !has_type(v, *t)) {
            add(ptr, "expected " + t->get<std::string>() + ", got " + type_name(v));
            return;
        }
        if (auto e = schema.find("enum"); e != schema.end()) {
            if (std::find(e->begin(), e->end(), v) == e->end()) add(ptr, "value " + v.dump() + " is not one of " + e->dump());
        }
        if (v.is_number()) numeric(schema, v.get<double>(), ptr);
        if (v.is_array()) array(schema, v, ptr);
        if (v.is_object()) object(schema, v, ptr);
    }

    std::vector<SchemaViolation> take() { return std::move(violations_); }

private:
    const json& resolve(const std::string& ref) const {
        if (ref.rfind("#/", 0) != 0) throw std::logic_error("only local schema references are supported");
        return root_.at(json::json_pointer(ref.substr(1)));
    }

    void numeric(const json& schema, double x, const std::string& ptr) {
        if (auto m = schema.find("minimum"); m != schema.end() && x < m->get<double>())
            add(ptr, "must be >= " + m->dump());
        if (auto m = schema.find("maximum"); m != schema.end() && x > m->get<double>())
            add(ptr, "must be <= " + m->dump());
        if (auto m = schema.find("exclusiveMinimum"); m != schema.end() && x <= m->get<double>())
            add(ptr, "must be > " + m->dump());
        if (auto m = schema.find("exclusiveMaximum"); m != schema.end() && x >= m->get<double>())
            add(ptr, "must be < " + m->dump());
    }

    void array(const json& schema, const json& v, const std::string& ptr) {
        if (auto m = schema.find("minItems"); m != schema.end() && v.size() < m->get<std::size_t>())
            add(ptr, "needs at least " + m->dump() + " items");
        if (auto items = schema.find("items"); items != schema.end())
            for (std::size_t i = 0; i < v.size(); ++i) run(*items, v[i], ptr + "/" + std::to_string(i));
    }

    void object(const json& schema, const json& v, const std::string& ptr) {
        const auto props = schema.find("properties");
        if (auto req = schema.find("required"); req != schema.end())
            for (const auto& key : *req)
                if (!v.contains(key.get<std::string>()))
                    add(ptr + "/" + json_pointer_token(key), "missing required key");
        const auto extra = schema.find("additionalProperties");
        const bool closed = extra != schema.end() && extra->is_boolean() && !extra->get<bool>();
        for (const auto& [key, value] : v.items()) {
            const std::string child = ptr + "/" + json_pointer_token(key);
            if (props != schema.end() && props->contains(key))
                run(props->at(key), value, child);
            else if (closed)
                add(child, "unknown key");
        }
    }

    void add(const std::string& ptr, std::string message) { violations_.push_back({ptr, std::move(message)}); }

    const json& root_;
    std::vector<SchemaViolation> violations_;
};

}  // namespace

const json& run_config_schema() {
    static const json schema = json::parse(kSchema);
    return schema;
}

std::vector<SchemaViolation> validate_against(const json& schema, const json& document) {
    Validator v(schema);
    v.run(schema, document, "");
    return v.take();
}

std::string json_pointer_token(const std::string& key) {
    std::string out;
    for (char c : key) {
        if (c == '~')
            out += "~0";
        else if (c == '/')
            out += "~1";
        else
            out += c;
    }
    return out;
}

}  // namespace conftree::cli
