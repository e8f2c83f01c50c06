#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "olp/common.hpp"

namespace olp::foon {

/// The closed relation vocabulary for object states.
inline const std::vector<std::string>& allowed_relations() {
    static const std::vector<std::string> kRelations = {"in", "on", "under", "contains"};
    return kRelations;
}

inline bool is_allowed_relation(std::string_view rel) {
    for (const auto& r : allowed_relations())
        if (rel == r) return true;
    return false;
}

/// One object-state assertion, e.g. "on table" or "under nothing".
/// The target may name another plan object or one of the distinguished
/// tokens "nothing", "table", "air"; its geometric meaning is assigned
/// by the grounding layer, not here.
struct StateRelation {
    std::string relation;
    std::string target;

    friend bool operator==(const StateRelation&, const StateRelation&) = default;
    friend auto operator<=>(const StateRelation&, const StateRelation&) = default;
};

/// Object node: alias, its states, and optional composition (sub-objects).
struct ObjectNode {
    std::string alias;
    std::vector<StateRelation> states;
    std::vector<std::string> composition;

    friend bool operator==(const ObjectNode&, const ObjectNode&) = default;
};

/// Motion node: the action verb of a functional unit.
struct MotionNode {
    std::string verb;

    friend bool operator==(const MotionNode&, const MotionNode&) = default;
};

/// One object-level action: preconditions and effects over the objects it
/// touches, plus the natural-language instruction it was codified from.
struct FunctionalUnit {
    int step = 0;
    MotionNode motion;
    std::vector<std::string> required_objects;
    std::map<std::string, ObjectNode> inputs;
    std::map<std::string, ObjectNode> outputs;
    std::string instruction;

    friend bool operator==(const FunctionalUnit&, const FunctionalUnit&) = default;
};

/// An ordered sequence of functional units for one task.
struct ObjectLevelPlan {
    std::string task;
    std::vector<FunctionalUnit> units;

    friend bool operator==(const ObjectLevelPlan&, const ObjectLevelPlan&) = default;
};

// ---------------------------------------------------------------------------
// Errors

class MalformedJson : public Error {
public:
    explicit MalformedJson(const std::string& what) : Error("malformed JSON: " + what) {}
};

class SchemaViolation : public Error {
public:
    SchemaViolation(std::string path_, const std::string& what)
        : Error("schema violation at " + path_ + ": " + what), path(std::move(path_)) {}
    std::string path;
};

class UnknownRelation : public Error {
public:
    UnknownRelation(std::string token_, std::string path_)
        : Error("unknown relation \"" + token_ + "\" at " + path_ +
                " (allowed: in, on, under, contains)"),
          token(std::move(token_)),
          path(std::move(path_)) {}
    std::string token;
    std::string path;
};

// ---------------------------------------------------------------------------
// Validation

/// A single invariant violation. `unit_index` is -1 for plan-level issues,
/// otherwise the 0-based index of the offending unit.
struct Violation {
    enum class Kind {
        UnknownRelation,
        EmptyTarget,
        EmptyAlias,
        EmptyVerb,
        DuplicateState,
        DuplicateComposition,
        KeySetMismatch,
        UnknownTargetAlias,
        StepSequence,
        ChainInconsistency,
    };
    Kind kind;
    int unit_index = -1;
    std::string message;
};

inline std::string_view violation_kind_name(Violation::Kind k) {
    switch (k) {
        case Violation::Kind::UnknownRelation: return "UnknownRelation";
        case Violation::Kind::EmptyTarget: return "EmptyTarget";
        case Violation::Kind::EmptyAlias: return "EmptyAlias";
        case Violation::Kind::EmptyVerb: return "EmptyVerb";
        case Violation::Kind::DuplicateState: return "DuplicateState";
        case Violation::Kind::DuplicateComposition: return "DuplicateComposition";
        case Violation::Kind::KeySetMismatch: return "KeySetMismatch";
        case Violation::Kind::UnknownTargetAlias: return "UnknownTargetAlias";
        case Violation::Kind::StepSequence: return "StepSequence";
        case Violation::Kind::ChainInconsistency: return "ChainInconsistency";
    }
    return "?";
}

/// Targets that are always legal regardless of the unit's object set.
inline bool is_distinguished_target(std::string_view t) {
    return t == "nothing" || t == "table" || t == "air";
}

namespace detail {

inline void validate_object_node(const ObjectNode& node, int unit_index,
                                 const std::set<std::string>& required,
                                 std::vector<Violation>& out) {
    using Kind = Violation::Kind;
    if (node.alias.empty())
        out.push_back({Kind::EmptyAlias, unit_index, "object node with empty alias"});
    std::set<StateRelation> seen;
    for (const auto& st : node.states) {
        if (!is_allowed_relation(st.relation))
            out.push_back({Kind::UnknownRelation, unit_index,
                           "relation \"" + st.relation + "\" on \"" + node.alias + "\""});
        if (st.target.empty())
            out.push_back({Kind::EmptyTarget, unit_index,
                           "empty state target on \"" + node.alias + "\""});
        if (!seen.insert(st).second)
            out.push_back({Kind::DuplicateState, unit_index,
                           "duplicate state \"" + st.relation + " " + st.target + "\" on \"" +
                               node.alias + "\""});
        if (!st.target.empty() && !is_distinguished_target(st.target) && !required.count(st.target))
            out.push_back({Kind::UnknownTargetAlias, unit_index,
                           "state target \"" + st.target + "\" of \"" + node.alias +
                               "\" is not a required object"});
    }
    std::set<std::string> comp(node.composition.begin(), node.composition.end());
    if (comp.size() != node.composition.size())
        out.push_back({Kind::DuplicateComposition, unit_index,
                       "duplicate composition alias on \"" + node.alias + "\""});
}

// Targets asserted for (alias, relation) on one side of a unit boundary.
inline std::set<std::string> targets_for(const std::map<std::string, ObjectNode>& nodes,
                                         const std::string& alias, const std::string& relation) {
    std::set<std::string> out;
    auto it = nodes.find(alias);
    if (it == nodes.end()) return out;
    for (const auto& st : it->second.states)
        if (st.relation == relation) out.insert(st.target);
    return out;
}

}  // namespace detail

/// Checks every invariant and returns the violations found (empty == valid).
/// Violations are data, not errors: callers decide what is fatal.
inline std::vector<Violation> validate_olp(const ObjectLevelPlan& plan) {
    using Kind = Violation::Kind;
    std::vector<Violation> out;

    for (size_t i = 0; i < plan.units.size(); ++i) {
        const FunctionalUnit& fu = plan.units[i];
        const int idx = static_cast<int>(i);

        if (fu.step != static_cast<int>(i) + 1)
            out.push_back({Kind::StepSequence, idx,
                           "step " + std::to_string(fu.step) + " at position " +
                               std::to_string(i + 1) + " (steps must be 1..n consecutive)"});
        if (fu.motion.verb.empty())
            out.push_back({Kind::EmptyVerb, idx, "empty action verb"});

        std::set<std::string> required(fu.required_objects.begin(), fu.required_objects.end());
        auto keys = [](const std::map<std::string, ObjectNode>& m) {
            std::set<std::string> k;
            for (const auto& [alias, node] : m) k.insert(alias);
            return k;
        };
        if (keys(fu.inputs) != required || keys(fu.outputs) != required)
            out.push_back({Kind::KeySetMismatch, idx,
                           "inputs/outputs keys must equal required_objects"});

        for (const auto& [alias, node] : fu.inputs)
            detail::validate_object_node(node, idx, required, out);
        for (const auto& [alias, node] : fu.outputs)
            detail::validate_object_node(node, idx, required, out);
    }

    // Chain consistency across consecutive units: if both sides constrain the
    // same (alias, relation) and share no target, the chain contradicts itself.
    for (size_t i = 0; i + 1 < plan.units.size(); ++i) {
        const FunctionalUnit& prev = plan.units[i];
        const FunctionalUnit& next = plan.units[i + 1];
        for (const auto& [alias, node] : next.inputs) {
            if (!prev.outputs.count(alias)) continue;
            for (const auto& rel : allowed_relations()) {
                auto before = detail::targets_for(prev.outputs, alias, rel);
                auto after = detail::targets_for(next.inputs, alias, rel);
                if (before.empty() || after.empty()) continue;
                std::vector<std::string> common;
                std::set_intersection(before.begin(), before.end(), after.begin(), after.end(),
                                      std::back_inserter(common));
                if (common.empty())
                    out.push_back({Kind::ChainInconsistency, static_cast<int>(i + 1),
                                   "unit " + std::to_string(next.step) + " expects \"" + alias +
                                       " " + rel + " " + *after.begin() + "\" but unit " +
                                       std::to_string(prev.step) + " produced \"" + alias + " " +
                                       rel + " " + *before.begin() + "\""});
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON codec

namespace detail {

using olp::detail::trim;

inline StateRelation parse_state_string(const std::string& text, const std::string& path) {
    const std::string s = trim(text);
    auto space = s.find(' ');
    if (space == std::string::npos)
        throw SchemaViolation(path, "state \"" + s + "\" must look like \"<relation> <obj>\"");
    std::string rel = s.substr(0, space);
    std::string target = trim(s.substr(space + 1));
    if (!is_allowed_relation(rel)) throw UnknownRelation(rel, path);
    if (target.empty()) throw SchemaViolation(path, "state \"" + s + "\" has an empty target");
    return {rel, target};
}

inline void warn_unknown_fields(const nlohmann::ordered_json& obj,
                                const std::set<std::string>& known, const std::string& path,
                                std::vector<std::string>* warnings) {
    if (!warnings) return;
    for (const auto& [key, value] : obj.items())
        if (!known.count(key)) warnings->push_back("ignored unknown field " + path + "." + key);
}

}  // namespace detail

/// Parses the JSON codification of an object-level plan (top-level "plan"
/// array; per-unit fields `step`, `action`, `required_objects`,
/// `object_states` with `preconditions`/`effects`, `instruction`).
/// Unknown extra fields are ignored; a warning per field is appended to
/// `warnings` when given.
inline ObjectLevelPlan parse_olp_json(const std::string& text,
                                      std::vector<std::string>* warnings = nullptr) {
    nlohmann::ordered_json doc;
    try {
        doc = nlohmann::ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw MalformedJson(e.what());
    }
    if (!doc.is_object()) throw SchemaViolation("$", "top level must be a JSON object");
    if (!doc.contains("plan")) throw SchemaViolation("$", "missing \"plan\" array");
    if (!doc["plan"].is_array()) throw SchemaViolation("$.plan", "\"plan\" must be an array");
    detail::warn_unknown_fields(doc, {"plan", "task"}, "$", warnings);

    ObjectLevelPlan plan;
    if (doc.contains("task") && doc["task"].is_string()) plan.task = doc["task"].get<std::string>();

    int pos = 0;
    for (const auto& ju : doc["plan"]) {
        const std::string upath = "$.plan[" + std::to_string(pos) + "]";
        ++pos;
        if (!ju.is_object()) throw SchemaViolation(upath, "unit must be an object");
        detail::warn_unknown_fields(
            ju, {"step", "action", "required_objects", "object_states", "instruction"}, upath,
            warnings);

        FunctionalUnit fu;
        if (!ju.contains("step") || !ju["step"].is_number_integer())
            throw SchemaViolation(upath + ".step", "missing or non-integer step");
        fu.step = ju["step"].get<int>();
        if (fu.step <= 0) throw SchemaViolation(upath + ".step", "step must be positive");

        if (!ju.contains("action") || !ju["action"].is_string())
            throw SchemaViolation(upath + ".action", "missing or non-string action");
        fu.motion.verb = ju["action"].get<std::string>();

        if (!ju.contains("required_objects") || !ju["required_objects"].is_array())
            throw SchemaViolation(upath + ".required_objects", "missing required_objects array");
        for (const auto& o : ju["required_objects"]) {
            if (!o.is_string())
                throw SchemaViolation(upath + ".required_objects", "entries must be strings");
            fu.required_objects.push_back(o.get<std::string>());
        }

        if (!ju.contains("object_states") || !ju["object_states"].is_object())
            throw SchemaViolation(upath + ".object_states", "missing object_states object");
        const auto& states = ju["object_states"];

        std::set<std::string> required(fu.required_objects.begin(), fu.required_objects.end());
        std::set<std::string> present;
        for (const auto& [alias, spec] : states.items()) present.insert(alias);
        if (present != required)
            throw SchemaViolation(upath + ".object_states",
                                  "object_states keys must match required_objects");

        for (const auto& alias : fu.required_objects) {
            const auto& spec = states.at(alias);
            const std::string opath = upath + ".object_states[\"" + alias + "\"]";
            if (!spec.is_object()) throw SchemaViolation(opath, "must be an object");
            detail::warn_unknown_fields(spec, {"preconditions", "effects", "composition"}, opath,
                                        warnings);
            auto read_states = [&](const char* key) {
                std::vector<StateRelation> out;
                if (!spec.contains(key) || !spec[key].is_array())
                    throw SchemaViolation(opath + "." + key, "missing state array");
                int si = 0;
                for (const auto& s : spec[key]) {
                    const std::string spath =
                        opath + "." + key + "[" + std::to_string(si++) + "]";
                    if (!s.is_string()) throw SchemaViolation(spath, "state must be a string");
                    out.push_back(detail::parse_state_string(s.get<std::string>(), spath));
                }
                return out;
            };
            ObjectNode in_node{alias, read_states("preconditions"), {}};
            ObjectNode out_node{alias, read_states("effects"), {}};
            if (spec.contains("composition")) {
                if (!spec["composition"].is_array())
                    throw SchemaViolation(opath + ".composition", "must be an array");
                for (const auto& c : spec["composition"]) {
                    if (!c.is_string())
                        throw SchemaViolation(opath + ".composition", "entries must be strings");
                    in_node.composition.push_back(c.get<std::string>());
                }
                out_node.composition = in_node.composition;
            }
            fu.inputs.emplace(alias, std::move(in_node));
            fu.outputs.emplace(alias, std::move(out_node));
        }

        if (!ju.contains("instruction") || !ju["instruction"].is_string())
            throw SchemaViolation(upath + ".instruction", "missing or non-string instruction");
        fu.instruction = ju["instruction"].get<std::string>();

        plan.units.push_back(std::move(fu));
    }
    return plan;
}

/// Serializes a plan back to the same JSON shape parse_olp_json accepts.
/// Deterministic: two serializations of the same plan are byte-identical.
inline nlohmann::ordered_json olp_to_json(const ObjectLevelPlan& plan) {
    nlohmann::ordered_json doc;
    if (!plan.task.empty()) doc["task"] = plan.task;
    doc["plan"] = nlohmann::ordered_json::array();
    for (const FunctionalUnit& fu : plan.units) {
        nlohmann::ordered_json ju;
        ju["step"] = fu.step;
        ju["action"] = fu.motion.verb;
        ju["required_objects"] = fu.required_objects;
        nlohmann::ordered_json states = nlohmann::ordered_json::object();
        for (const auto& alias : fu.required_objects) {
            nlohmann::ordered_json spec;
            auto render = [](const ObjectNode& node) {
                std::vector<std::string> out;
                for (const auto& st : node.states) out.push_back(st.relation + " " + st.target);
                return out;
            };
            spec["preconditions"] = render(fu.inputs.at(alias));
            spec["effects"] = render(fu.outputs.at(alias));
            if (!fu.inputs.at(alias).composition.empty())
                spec["composition"] = fu.inputs.at(alias).composition;
            states[alias] = std::move(spec);
        }
        ju["object_states"] = std::move(states);
        ju["instruction"] = fu.instruction;
        doc["plan"].push_back(std::move(ju));
    }
    return doc;
}

inline std::string serialize_olp(const ObjectLevelPlan& plan) {
    return olp_to_json(plan).dump(4);
}

}  // namespace olp::foon
