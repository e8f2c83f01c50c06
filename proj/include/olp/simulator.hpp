#pragma once

#include <algorithm>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "olp/common.hpp"
#include "olp/grounding.hpp"
#include "olp/pddl.hpp"

namespace olp::sim {

// ---------------------------------------------------------------------------
// Task specifications

struct TaskSpec {
    enum class Kind { Tower, Spelling, Organize };
    Kind kind = Kind::Tower;
    int tower_height = 0;        // tower: 3..7
    std::string word;            // spelling: letters map to lettered blocks
    int instances_per_type = 0;  // organize: 2..4, over 3 block types

    static constexpr int kOrganizeTypes = 3;

    static TaskSpec tower(int n) {
        if (n < 3 || n > 7) throw Error("tower height must be within 3..7, got " + std::to_string(n));
        TaskSpec s;
        s.kind = Kind::Tower;
        s.tower_height = n;
        return s;
    }
    static TaskSpec spelling(std::string w) {
        if (w.empty()) throw Error("spelling word must be non-empty");
        for (char c : w)
            if (!std::isalpha(static_cast<unsigned char>(c)))
                throw Error("spelling word must be alphabetic");
        TaskSpec s;
        s.kind = Kind::Spelling;
        s.word = olp::detail::to_lower(w);
        return s;
    }
    static TaskSpec organize(int instances) {
        if (instances < 2 || instances > 4)
            throw Error("organize instance count must be within 2..4, got " +
                        std::to_string(instances));
        TaskSpec s;
        s.kind = Kind::Organize;
        s.instances_per_type = instances;
        return s;
    }

    std::string to_string() const {
        switch (kind) {
            case Kind::Tower: return "tower:" + std::to_string(tower_height);
            case Kind::Spelling: return "spelling:" + word;
            case Kind::Organize: return "organize:" + std::to_string(instances_per_type);
        }
        return "?";
    }

    /// Parses "tower:N", "spelling:WORD", "organize:M".
    static TaskSpec parse(const std::string& text) {
        auto colon = text.find(':');
        if (colon == std::string::npos) throw Error("task spec must look like kind:param");
        const std::string kind = olp::detail::to_lower(text.substr(0, colon));
        const std::string param = text.substr(colon + 1);
        if (kind == "tower") return tower(std::stoi(param));
        if (kind == "spelling") return spelling(param);
        if (kind == "organize") return organize(std::stoi(param));
        throw Error("unknown task kind \"" + kind + "\"");
    }
};

// ---------------------------------------------------------------------------
// Action outcomes

enum class Failure {
    HandOccupied,
    ObjectNotClear,
    NotOnSurface,
    OutOfWorkspace,
    NotHolding,
    SurfaceOccupied,
    NoFreeTableCell,
    UnknownObject,
    UnknownAction,
    MotionFailure,
};

inline std::string_view failure_name(Failure f) {
    switch (f) {
        case Failure::HandOccupied: return "HandOccupied";
        case Failure::ObjectNotClear: return "ObjectNotClear";
        case Failure::NotOnSurface: return "NotOnSurface";
        case Failure::OutOfWorkspace: return "OutOfWorkspace";
        case Failure::NotHolding: return "NotHolding";
        case Failure::SurfaceOccupied: return "SurfaceOccupied";
        case Failure::NoFreeTableCell: return "NoFreeTableCell";
        case Failure::UnknownObject: return "UnknownObject";
        case Failure::UnknownAction: return "UnknownAction";
        case Failure::MotionFailure: return "MotionFailure";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Pick / place kinematics

namespace detail {

using grounding::SceneState;

inline double effective_half_height(const grounding::SceneObject& o) {
    const auto box = grounding::world_aabb(o);
    return (box.zmax - box.zmin) / 2.0;
}

inline double effective_half_xy(const grounding::SceneObject& o) {
    const auto box = grounding::world_aabb(o);
    return std::max(box.xmax - box.xmin, box.ymax - box.ymin) / 2.0;
}

/// Deterministic free-cell scan over the table grid (row-major, y then x).
/// Cell pitch is the largest object footprint plus a margin so every object
/// fits any cell.
inline std::optional<std::pair<double, double>> find_free_table_cell(
    const SceneState& scene, const std::string& placing_id) {
    const auto& ws = scene.table.workspace;
    double max_half = 0.0;
    for (const auto& [id, o] : scene.objects) max_half = std::max(max_half, effective_half_xy(o));
    const double margin = 0.015;
    const double pitch = 2 * max_half + 2 * margin;
    const double place_half = effective_half_xy(scene.objects.at(placing_id));

    for (double cy = ws.ymin + pitch / 2; cy + pitch / 2 <= ws.ymax + 1e-12; cy += pitch) {
        for (double cx = ws.xmin + pitch / 2; cx + pitch / 2 <= ws.xmax + 1e-12; cx += pitch) {
            bool free = true;
            for (const auto& [id, o] : scene.objects) {
                if (id == placing_id || id == scene.hand) continue;
                const double gap = 1e-6;
                if (std::abs(cx - o.position.x) < place_half + effective_half_xy(o) - gap &&
                    std::abs(cy - o.position.y) < place_half + effective_half_xy(o) - gap) {
                    free = false;
                    break;
                }
            }
            if (free) return std::make_pair(cx, cy);
        }
    }
    return std::nullopt;
}

}  // namespace detail

/// Applies a pick in place. Succeeds exactly when the Fig.-5-style
/// preconditions hold on the derived predicates and the object is inside the
/// workspace; on failure the scene is left untouched.
inline std::optional<Failure> apply_pick(grounding::SceneState& scene, const std::string& obj,
                                         const std::string& surface,
                                         const grounding::GeomThresholds& thr = {}) {
    if (!scene.objects.count(obj)) return Failure::UnknownObject;
    if (surface != "table" && !scene.objects.count(surface)) return Failure::UnknownObject;
    if (scene.holding()) return Failure::HandOccupied;

    const grounding::SupportGraph g = grounding::support_graph(scene, thr);
    if (g.has_child(obj)) return Failure::ObjectNotClear;
    auto parent = g.parent_of.find(obj);
    if (parent == g.parent_of.end() || parent->second != surface) return Failure::NotOnSurface;

    const auto& o = scene.objects.at(obj);
    if (!scene.table.workspace.contains(o.position.x, o.position.y))
        return Failure::OutOfWorkspace;

    scene.hand = obj;
    scene.objects.at(obj).position.z = scene.table.height + 0.25;  // lifted straight up
    return std::nullopt;
}

/// Applies a place in place. The pose is deterministic: x,y at the surface
/// center (a free grid cell for the table), z resting on the surface top.
inline std::optional<Failure> apply_place(grounding::SceneState& scene, const std::string& obj,
                                          const std::string& surface,
                                          const grounding::GeomThresholds& thr = {}) {
    if (!scene.objects.count(obj)) return Failure::UnknownObject;
    if (surface != "table" && !scene.objects.count(surface)) return Failure::UnknownObject;
    if (scene.hand != obj) return Failure::NotHolding;
    if (surface == obj) return Failure::SurfaceOccupied;

    const double half_h = detail::effective_half_height(scene.objects.at(obj));
    if (surface == "table") {
        const auto cell = detail::find_free_table_cell(scene, obj);
        if (!cell) return Failure::NoFreeTableCell;
        auto& o = scene.objects.at(obj);
        o.position = {cell->first, cell->second, scene.table.height + half_h};
    } else {
        const grounding::SupportGraph g = grounding::support_graph(scene, thr);
        if (g.has_child(surface)) return Failure::SurfaceOccupied;
        const auto& s = scene.objects.at(surface);
        const auto sbox = grounding::world_aabb(s);
        auto& o = scene.objects.at(obj);
        o.position = {s.position.x, s.position.y, sbox.zmax + half_h};
    }
    scene.hand = "air";
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Plan execution

struct Action {
    std::string name;
    std::vector<std::string> args;

    std::string signature() const {
        std::string s = "(" + name;
        for (const auto& a : args) s += " " + a;
        return s + ")";
    }

    static Action from_ground(const pddl::GroundAction& ga) { return {ga.name, ga.args}; }
};

inline std::vector<Action> to_actions(const std::vector<pddl::GroundAction>& plan) {
    std::vector<Action> out;
    out.reserve(plan.size());
    for (const auto& ga : plan) out.push_back(Action::from_ground(ga));
    return out;
}

struct TraceEntry {
    Action action;
    std::optional<Failure> failure;  // nullopt == ok
    std::string scene_digest;        // snapshot after the attempt
};

struct ExecutionTrace {
    std::vector<TraceEntry> entries;
    bool completed = false;
    bool succeeded = false;
    grounding::SceneState final_scene;
};

struct ExecOptions {
    /// Probability that an action fails for motion-level reasons; stands in
    /// for trajectory-planning timeouts. 0 disables injection.
    double motion_failure_rate = 0.0;
    std::uint64_t seed = 0;
    grounding::GeomThresholds thresholds;
};

bool check_success(const grounding::SceneState& scene, const TaskSpec& spec,
                   const grounding::GeomThresholds& thr);

/// Applies the actions in order, stopping at the first failure. `spec`
/// drives the task-objective judgment; without one, succeeded stays false.
inline ExecutionTrace execute_plan(const grounding::SceneState& scene,
                                   const std::vector<Action>& actions,
                                   const TaskSpec* spec = nullptr, const ExecOptions& opt = {}) {
    ExecutionTrace trace;
    grounding::SceneState cur = scene;
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    bool failed = false;
    for (const auto& action : actions) {
        if (failed) break;
        std::optional<Failure> outcome;
        if (opt.motion_failure_rate > 0 && uniform(rng) < opt.motion_failure_rate) {
            outcome = Failure::MotionFailure;
        } else if (action.name == "pick" && action.args.size() == 2) {
            outcome = apply_pick(cur, action.args[0], action.args[1], opt.thresholds);
        } else if (action.name == "place" && action.args.size() == 2) {
            outcome = apply_place(cur, action.args[0], action.args[1], opt.thresholds);
        } else {
            outcome = Failure::UnknownAction;
        }
        trace.entries.push_back({action, outcome, grounding::scene_digest(cur)});
        if (outcome) failed = true;
    }
    trace.completed = !failed;
    trace.final_scene = cur;
    trace.succeeded = trace.completed && spec && check_success(cur, *spec, opt.thresholds);
    return trace;
}

// ---------------------------------------------------------------------------
// Task success

namespace detail {

/// Pure chains rooted on the table: bottom-up block lists. A component with a
/// branch (two blocks resting on one) yields nullopt for that root.
inline std::vector<std::optional<std::vector<std::string>>> table_stacks(
    const grounding::SceneState& scene, const grounding::SupportGraph& g) {
    std::vector<std::optional<std::vector<std::string>>> stacks;
    for (const auto& [child, parent] : g.parent_of) {
        if (parent != "table") continue;
        std::vector<std::string> chain{child};
        std::string cur = child;
        bool branched = false;
        for (;;) {
            auto kids = g.children_of(cur);
            if (kids.empty()) break;
            if (kids.size() > 1) {
                branched = true;
                break;
            }
            cur = kids[0];
            chain.push_back(cur);
        }
        if (branched)
            stacks.push_back(std::nullopt);
        else
            stacks.push_back(std::move(chain));
    }
    return stacks;
}

}  // namespace detail

/// Judges the task objective on the current scene.
///  - tower: some stack of exactly n blocks exists
///  - spelling: some stack of n lettered blocks reads the word top to bottom
///  - organize: every block is in a stack, stacks are type-homogeneous, and
///    there is exactly one stack per block type
inline bool check_success(const grounding::SceneState& scene, const TaskSpec& spec,
                          const grounding::GeomThresholds& thr = {}) {
    const grounding::SupportGraph g = grounding::support_graph(scene, thr);
    const auto stacks = detail::table_stacks(scene, g);

    switch (spec.kind) {
        case TaskSpec::Kind::Tower: {
            for (const auto& s : stacks)
                if (s && static_cast<int>(s->size()) == spec.tower_height) return true;
            return false;
        }
        case TaskSpec::Kind::Spelling: {
            for (const auto& s : stacks) {
                if (!s || s->size() != spec.word.size()) continue;
                std::string top_to_bottom;
                for (auto it = s->rbegin(); it != s->rend(); ++it) {
                    const auto& obj = scene.objects.at(*it);
                    if (obj.letter.empty()) {
                        top_to_bottom.clear();
                        break;
                    }
                    top_to_bottom += olp::detail::to_lower(obj.letter);
                }
                if (top_to_bottom == spec.word) return true;
            }
            return false;
        }
        case TaskSpec::Kind::Organize: {
            if (scene.holding()) return false;  // a held block is in no pile
            std::set<std::string> in_stack;
            std::set<std::string> stack_types;
            for (const auto& s : stacks) {
                if (!s) return false;  // branched pile is not a vertical stack
                const std::string type = scene.objects.at(s->front()).type;
                for (const auto& id : *s) {
                    if (scene.objects.at(id).type != type) return false;
                    in_stack.insert(id);
                }
                if (!stack_types.insert(type).second) return false;  // two piles of one type
            }
            if (in_stack.size() != scene.objects.size()) return false;
            std::set<std::string> all_types;
            for (const auto& [id, o] : scene.objects) all_types.insert(o.type);
            return stack_types == all_types;
        }
    }
    return false;
}

// ---------------------------------------------------------------------------
// Trace IO (JSON lines, one record per action outcome, then a summary line)

inline std::string trace_to_jsonl(const ExecutionTrace& trace) {
    std::string out;
    for (const auto& e : trace.entries) {
        nlohmann::ordered_json rec;
        rec["action"] = e.action.signature();
        rec["outcome"] = e.failure ? "failed:" + std::string(failure_name(*e.failure)) : "ok";
        rec["scene"] = e.scene_digest;
        out += rec.dump() + "\n";
    }
    nlohmann::ordered_json tail;
    tail["completed"] = trace.completed;
    tail["succeeded"] = trace.succeeded;
    out += tail.dump() + "\n";
    return out;
}

}  // namespace olp::sim
