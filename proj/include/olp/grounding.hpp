#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "olp/common.hpp"
#include "olp/foon.hpp"
#include "olp/pddl.hpp"

namespace olp::grounding {

// ---------------------------------------------------------------------------
// Scene model

struct Vec3 {
    double x = 0, y = 0, z = 0;
    friend bool operator==(const Vec3&, const Vec3&) = default;
};

struct Quat {
    double x = 0, y = 0, z = 0, w = 1;
    friend bool operator==(const Quat&, const Quat&) = default;
    double norm() const { return std::sqrt(x * x + y * y + z * z + w * w); }
};

struct SceneObject {
    Vec3 position;       // center, meters
    Quat orientation;    // unit quaternion
    Vec3 half_extents;   // meters, positive
    std::string type;    // e.g. "red_block"
    std::string letter;  // single letter for spelling blocks, else empty

    friend bool operator==(const SceneObject&, const SceneObject&) = default;
};

struct Workspace {
    double xmin = -0.3, xmax = 0.3, ymin = -0.3, ymax = 0.3;
    friend bool operator==(const Workspace&, const Workspace&) = default;
    bool contains(double x, double y) const {
        return x >= xmin && x <= xmax && y >= ymin && y <= ymax;
    }
};

struct TableSpec {
    double height = 0.0;  // z of the table surface
    Workspace workspace;
    friend bool operator==(const TableSpec&, const TableSpec&) = default;
};

/// Geometric world snapshot: poses + bounding boxes, the table plane, and
/// what the hand holds ("air" = empty). Value-semantic; actions copy.
struct SceneState {
    std::map<std::string, SceneObject> objects;
    TableSpec table;
    std::string hand = "air";

    friend bool operator==(const SceneState&, const SceneState&) = default;

    bool holding() const { return hand != "air"; }
};

class SceneError : public Error {
public:
    explicit SceneError(const std::string& what) : Error("scene: " + what) {}
};

inline void check_scene(const SceneState& scene) {
    for (const auto& [id, obj] : scene.objects) {
        if (std::abs(obj.orientation.norm() - 1.0) > 1e-9)
            throw SceneError("object " + id + " has a non-unit quaternion");
        if (obj.half_extents.x <= 0 || obj.half_extents.y <= 0 || obj.half_extents.z <= 0)
            throw SceneError("object " + id + " has non-positive half extents");
    }
    if (scene.hand != "air" && !scene.objects.count(scene.hand))
        throw SceneError("hand holds unknown object " + scene.hand);
}

// World-frame AABB of a rotated box. Benchmark scenes are axis-aligned, but
// arbitrary orientations still yield a conservative, deterministic box.
struct Aabb {
    double xmin, xmax, ymin, ymax, zmin, zmax;
};

inline Aabb world_aabb(const SceneObject& o) {
    const Quat& q = o.orientation;
    // |R| * half_extents, rows of the rotation matrix from the quaternion
    const double r00 = 1 - 2 * (q.y * q.y + q.z * q.z);
    const double r01 = 2 * (q.x * q.y - q.z * q.w);
    const double r02 = 2 * (q.x * q.z + q.y * q.w);
    const double r10 = 2 * (q.x * q.y + q.z * q.w);
    const double r11 = 1 - 2 * (q.x * q.x + q.z * q.z);
    const double r12 = 2 * (q.y * q.z - q.x * q.w);
    const double r20 = 2 * (q.x * q.z - q.y * q.w);
    const double r21 = 2 * (q.y * q.z + q.x * q.w);
    const double r22 = 1 - 2 * (q.x * q.x + q.y * q.y);
    const double ex = std::abs(r00) * o.half_extents.x + std::abs(r01) * o.half_extents.y +
                      std::abs(r02) * o.half_extents.z;
    const double ey = std::abs(r10) * o.half_extents.x + std::abs(r11) * o.half_extents.y +
                      std::abs(r12) * o.half_extents.z;
    const double ez = std::abs(r20) * o.half_extents.x + std::abs(r21) * o.half_extents.y +
                      std::abs(r22) * o.half_extents.z;
    return {o.position.x - ex, o.position.x + ex, o.position.y - ey,
            o.position.y + ey, o.position.z - ez, o.position.z + ez};
}

// ---------------------------------------------------------------------------
// Predicate derivation

struct GeomThresholds {
    double contact_eps = 0.01;        // max vertical gap for support contact
    double support_overlap_min = 0.5; // min fraction of the upper footprint
};

struct Diagnostic {
    enum class Kind { AmbiguousSupport, Unsupported };
    Kind kind;
    std::string object;
    std::string message;
};

/// child id -> its chosen support ("table" or another instance id).
/// Held objects do not appear.
struct SupportGraph {
    std::map<std::string, std::string> parent_of;

    bool has_child(const std::string& support) const {
        for (const auto& [child, parent] : parent_of)
            if (parent == support) return true;
        return false;
    }
    std::vector<std::string> children_of(const std::string& support) const {
        std::vector<std::string> out;
        for (const auto& [child, parent] : parent_of)
            if (parent == support) out.push_back(child);
        return out;
    }
};

namespace detail {

inline double footprint_overlap(const Aabb& below, const Aabb& above) {
    const double ox = std::max(0.0, std::min(below.xmax, above.xmax) -
                                        std::max(below.xmin, above.xmin));
    const double oy = std::max(0.0, std::min(below.ymax, above.ymax) -
                                        std::max(below.ymin, above.ymin));
    const double area = (above.xmax - above.xmin) * (above.ymax - above.ymin);
    return area > 0 ? (ox * oy) / area : 0.0;
}

inline bool centroid_inside(const Aabb& below, const SceneObject& above) {
    return above.position.x >= below.xmin && above.position.x <= below.xmax &&
           above.position.y >= below.ymin && above.position.y <= below.ymax;
}

}  // namespace detail

/// Computes which object rests on which, using the vertical-contact and
/// footprint-overlap rules. Ambiguities (an object in contact with two
/// supports) are resolved toward the largest overlap and reported.
inline SupportGraph support_graph(const SceneState& scene, const GeomThresholds& thr = {},
                                  std::vector<Diagnostic>* diagnostics = nullptr) {
    SupportGraph g;
    for (const auto& [id, obj] : scene.objects) {
        if (id == scene.hand) continue;
        const Aabb box = world_aabb(obj);

        struct Support {
            std::string id;
            double overlap;
        };
        std::vector<Support> supports;
        if (std::abs(box.zmin - scene.table.height) <= thr.contact_eps)
            supports.push_back({"table", 1.0});
        for (const auto& [other_id, other] : scene.objects) {
            if (other_id == id || other_id == scene.hand) continue;
            const Aabb other_box = world_aabb(other);
            if (std::abs(box.zmin - other_box.zmax) > thr.contact_eps) continue;
            const double overlap = detail::footprint_overlap(other_box, box);
            if (overlap >= thr.support_overlap_min || detail::centroid_inside(other_box, obj))
                supports.push_back({other_id, overlap});
        }
        if (supports.empty()) {
            if (diagnostics)
                diagnostics->push_back({Diagnostic::Kind::Unsupported, id,
                                        id + " rests on nothing and is not held"});
            continue;
        }
        if (supports.size() > 1 && diagnostics)
            diagnostics->push_back({Diagnostic::Kind::AmbiguousSupport, id,
                                    id + " is within contact range of " +
                                        std::to_string(supports.size()) + " supports"});
        std::stable_sort(supports.begin(), supports.end(), [](const Support& a, const Support& b) {
            if (a.overlap != b.overlap) return a.overlap > b.overlap;
            return a.id < b.id;
        });
        g.parent_of[id] = supports.front().id;
    }
    return g;
}

/// Derives the object-centered predicate set from geometry:
///  - (on A B), (under B A) for every support pair A-below-B
///  - (on table X), (under X table) for objects resting on the table
///  - (on X air) for every clear top, including (on table air) for an empty table
///  - (in hand X), (on X hand), (under X air) for a held object, else (in hand air)
inline std::set<pddl::Atom> derive_predicates(const SceneState& scene,
                                              const GeomThresholds& thr = {},
                                              std::vector<Diagnostic>* diagnostics = nullptr) {
    check_scene(scene);
    std::set<pddl::Atom> out;
    const SupportGraph g = support_graph(scene, thr, diagnostics);

    for (const auto& [child, parent] : g.parent_of) {
        out.insert({"on", {parent, child}});
        out.insert({"under", {child, parent}});
    }
    for (const auto& [id, obj] : scene.objects) {
        if (id == scene.hand) continue;
        if (!g.has_child(id)) out.insert({"on", {id, "air"}});
    }
    if (!g.has_child("table")) out.insert({"on", {"table", "air"}});

    if (scene.holding()) {
        out.insert({"in", {"hand", scene.hand}});
        out.insert({"on", {scene.hand, "hand"}});
        out.insert({"under", {scene.hand, "air"}});
    } else {
        out.insert({"in", {"hand", "air"}});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Alias binding and FOON -> PDDL literals

/// Mapping from plan aliases ("first red block") to scene instance ids
/// ("red_block_1"). Injective and total over a plan's required objects.
struct AliasBinding {
    std::map<std::string, std::string> map;

    bool is_injective() const {
        std::set<std::string> seen;
        for (const auto& [alias, inst] : map)
            if (!seen.insert(inst).second) return false;
        return true;
    }
    const std::string* find(const std::string& alias) const {
        auto it = map.find(alias);
        return it == map.end() ? nullptr : &it->second;
    }
};

class UnboundAlias : public Error {
public:
    explicit UnboundAlias(const std::string& alias)
        : Error("alias \"" + alias + "\" is not bound to a scene instance"), alias(alias) {}
    std::string alias;
};

/// Compiles one object-state pair into task-level literals. With
/// X = binding[alias] and T = binding[target]:
///   "X on T"          -> (on T X), (under X T)
///   "X under T"       -> (on X T), (under T X)
///   "X under nothing" -> (on X air)           [clear top]
///   "X in T"          -> (in T X)
///   "X contains T"    -> (in X T)             [normalized to in]
///   "X contains nothing" -> (in X air)
/// "on nothing" / "in nothing" constrain nothing and compile to no literals.
inline std::vector<pddl::Literal> foon_state_to_literals(const std::string& alias,
                                                         const foon::StateRelation& rel,
                                                         const AliasBinding& binding) {
    auto resolve = [&](const std::string& name) -> std::string {
        if (name == "table") return "table";
        if (const std::string* inst = binding.find(name)) return *inst;
        throw UnboundAlias(name);
    };
    const bool target_is_nothing = (rel.target == "nothing" || rel.target == "air");
    const std::string x = resolve(alias);

    std::vector<pddl::Literal> out;
    if (rel.relation == "on") {
        if (target_is_nothing) return out;
        const std::string t = resolve(rel.target);
        out.push_back({{"on", {t, x}}, false});
        out.push_back({{"under", {x, t}}, false});
    } else if (rel.relation == "under") {
        if (target_is_nothing) {
            out.push_back({{"on", {x, "air"}}, false});
            return out;
        }
        const std::string t = resolve(rel.target);
        out.push_back({{"on", {x, t}}, false});
        out.push_back({{"under", {t, x}}, false});
    } else if (rel.relation == "in") {
        if (target_is_nothing) return out;
        out.push_back({{"in", {resolve(rel.target), x}}, false});
    } else if (rel.relation == "contains") {
        if (target_is_nothing) {
            out.push_back({{"in", {x, "air"}}, false});
            return out;
        }
        out.push_back({{"in", {x, resolve(rel.target)}}, false});
    } else {
        throw Error("unknown relation \"" + rel.relation + "\" reached the grounding layer");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Subgoal problem construction

/// Builds a problem from an explicit symbolic state. Used by the planner to
/// chain functional units without re-deriving geometry.
inline pddl::Problem make_subgoal_problem_from_atoms(
    const foon::FunctionalUnit& fu, const AliasBinding& binding,
    const std::set<pddl::Atom>& atoms, const std::vector<std::string>& instance_ids,
    const pddl::Domain& domain, std::vector<std::string>* warnings = nullptr) {
    pddl::Problem p;
    p.name = "olp_step_" + std::to_string(fu.step);
    p.domain_name = domain.name;
    for (const auto& id : instance_ids) p.objects.push_back({id, "object"});
    p.objects.push_back({"table", "object"});

    p.init = atoms;
    p.init.insert({"on", {"table", "air"}});  // table always placeable

    std::set<pddl::Literal> goal;  // set: dedupe + deterministic order
    for (const auto& [alias, node] : fu.outputs)
        for (const auto& st : node.states)
            for (const auto& lit : foon_state_to_literals(alias, st, binding)) goal.insert(lit);
    p.goal.assign(goal.begin(), goal.end());

    if (warnings) {
        std::set<pddl::Literal> expected;
        for (const auto& [alias, node] : fu.inputs)
            for (const auto& st : node.states)
                for (const auto& lit : foon_state_to_literals(alias, st, binding))
                    expected.insert(lit);
        for (const auto& lit : expected) {
            const bool holds = lit.negated ? !p.init.count(lit.atom) : p.init.count(lit.atom) > 0;
            if (!holds)
                warnings->push_back("PreconditionMismatch: unit " + std::to_string(fu.step) +
                                    " expects " + pddl::to_string(lit) +
                                    " but the scene does not satisfy it");
        }
    }
    return p;
}

/// Compiles a functional unit + binding + live scene into a PDDL problem:
/// init from derived predicates, goal from the unit's output states.
inline pddl::Problem make_subgoal_problem(const foon::FunctionalUnit& fu,
                                          const AliasBinding& binding, const SceneState& scene,
                                          const pddl::Domain& domain,
                                          const GeomThresholds& thr = {},
                                          std::vector<std::string>* warnings = nullptr,
                                          std::vector<Diagnostic>* diagnostics = nullptr) {
    const std::set<pddl::Atom> atoms = derive_predicates(scene, thr, diagnostics);
    std::vector<std::string> ids;
    for (const auto& [id, obj] : scene.objects) ids.push_back(id);
    return make_subgoal_problem_from_atoms(fu, binding, atoms, ids, domain, warnings);
}

// ---------------------------------------------------------------------------
// Scene file IO

inline SceneState scene_from_json(const nlohmann::json& doc) {
    SceneState scene;
    if (doc.contains("table")) {
        const auto& t = doc.at("table");
        scene.table.height = t.value("height", 0.0);
        if (t.contains("workspace")) {
            const auto& w = t.at("workspace");
            scene.table.workspace = {w.at("xmin").get<double>(), w.at("xmax").get<double>(),
                                     w.at("ymin").get<double>(), w.at("ymax").get<double>()};
        }
    }
    scene.hand = doc.value("hand", "air");
    for (const auto& [id, jo] : doc.at("objects").items()) {
        SceneObject obj;
        const auto& pos = jo.at("position");
        obj.position = {pos.at(0).get<double>(), pos.at(1).get<double>(), pos.at(2).get<double>()};
        if (jo.contains("quaternion")) {
            const auto& q = jo.at("quaternion");
            obj.orientation = {q.at(0).get<double>(), q.at(1).get<double>(), q.at(2).get<double>(),
                               q.at(3).get<double>()};
        }
        const auto& he = jo.at("half_extents");
        obj.half_extents = {he.at(0).get<double>(), he.at(1).get<double>(), he.at(2).get<double>()};
        obj.type = jo.value("type", "");
        obj.letter = jo.value("letter", "");
        scene.objects.emplace(id, std::move(obj));
    }
    check_scene(scene);
    return scene;
}

inline SceneState parse_scene(const std::string& text) {
    try {
        return scene_from_json(nlohmann::json::parse(text));
    } catch (const nlohmann::json::exception& e) {
        throw SceneError(e.what());
    }
}

inline nlohmann::ordered_json scene_to_json(const SceneState& scene) {
    nlohmann::ordered_json doc;
    doc["table"] = {{"height", scene.table.height},
                    {"workspace",
                     {{"xmin", scene.table.workspace.xmin},
                      {"xmax", scene.table.workspace.xmax},
                      {"ymin", scene.table.workspace.ymin},
                      {"ymax", scene.table.workspace.ymax}}}};
    doc["hand"] = scene.hand;
    nlohmann::ordered_json objs = nlohmann::ordered_json::object();
    for (const auto& [id, o] : scene.objects) {
        nlohmann::ordered_json jo;
        jo["position"] = {o.position.x, o.position.y, o.position.z};
        jo["quaternion"] = {o.orientation.x, o.orientation.y, o.orientation.z, o.orientation.w};
        jo["half_extents"] = {o.half_extents.x, o.half_extents.y, o.half_extents.z};
        jo["type"] = o.type;
        if (!o.letter.empty()) jo["letter"] = o.letter;
        objs[id] = std::move(jo);
    }
    doc["objects"] = std::move(objs);
    return doc;
}

inline std::string serialize_scene(const SceneState& scene) {
    return scene_to_json(scene).dump(4);
}

/// Stable content digest of a scene snapshot (used in execution traces).
inline std::string scene_digest(const SceneState& scene) {
    return olp::detail::hex64(olp::detail::fnv1a64(scene_to_json(scene).dump()));
}

}  // namespace olp::grounding
