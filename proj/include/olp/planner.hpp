#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "olp/foon.hpp"
#include "olp/grounding.hpp"
#include "olp/pddl.hpp"

namespace olp::planner {

struct SearchStats {
    std::size_t expanded = 0;
    std::size_t generated = 0;
    double wall_seconds = 0.0;

    SearchStats& operator+=(const SearchStats& o) {
        expanded += o.expanded;
        generated += o.generated;
        wall_seconds += o.wall_seconds;
        return *this;
    }
};

/// Actions solving one functional unit's subgoal.
struct PlanSegment {
    int unit_index = 0;  // 0-based index into the OLP's units
    std::vector<pddl::GroundAction> actions;
};

/// Concatenation of per-unit segments; cost counts actions (unit costs).
struct Plan {
    std::vector<PlanSegment> segments;
    int total_cost = 0;

    std::vector<pddl::GroundAction> flat() const {
        std::vector<pddl::GroundAction> out;
        for (const auto& seg : segments)
            out.insert(out.end(), seg.actions.begin(), seg.actions.end());
        return out;
    }

    /// One action per line: "(name arg1 arg2)".
    std::string to_text() const {
        std::string out;
        for (const auto& a : flat()) out += a.signature() + "\n";
        return out;
    }
};

class StateSpaceTooLarge : public Error {
public:
    explicit StateSpaceTooLarge(std::size_t limit)
        : Error("state space exceeds oracle guard of " + std::to_string(limit) + " states") {}
};

class SubgoalUnsolvable : public Error {
public:
    explicit SubgoalUnsolvable(int unit_index_)
        : Error("no plan exists for functional unit at index " + std::to_string(unit_index_)),
          unit_index(unit_index_) {}
    int unit_index;
};

// ---------------------------------------------------------------------------
// h_max

/// Dijkstra-style h_max evaluator over the delete relaxation. Negative
/// preconditions are treated as free under the relaxation, which only
/// lowers the estimate and so preserves admissibility.
class HmaxEvaluator {
public:
    explicit HmaxEvaluator(const pddl::StripsTask& task) : task_(&task) {
        consumers_.resize(task.facts.size());
        for (std::size_t a = 0; a < task.actions.size(); ++a)
            for (auto f : task.actions[a].pre_pos) consumers_[f].push_back(a);
    }

    /// Returns the h_max value, or nullopt when the goal is relaxed-unreachable.
    std::optional<int> operator()(const pddl::FactSet& state) const {
        if (task_->goal_unreachable) return std::nullopt;
        const auto& actions = task_->actions;
        constexpr int kInf = std::numeric_limits<int>::max();

        std::vector<int> cost(task_->facts.size(), kInf);
        std::vector<int> unsat(actions.size());
        std::vector<int> trigger(actions.size(), 0);  // max settled precondition cost

        using Entry = std::pair<int, std::uint32_t>;  // (cost, fact)
        std::priority_queue<Entry, std::vector<Entry>, std::greater<>> pq;

        for (std::size_t f = 0; f < cost.size(); ++f)
            if (state.test(f)) {
                cost[f] = 0;
                pq.push({0, static_cast<std::uint32_t>(f)});
            }
        for (std::size_t a = 0; a < actions.size(); ++a) {
            unsat[a] = static_cast<int>(actions[a].pre_pos.size());
            if (unsat[a] == 0) fire(a, 0, cost, pq);
        }
        while (!pq.empty()) {
            auto [c, f] = pq.top();
            pq.pop();
            if (c > cost[f]) continue;
            for (auto a : consumers_[f]) {
                trigger[a] = std::max(trigger[a], c);
                if (--unsat[a] == 0) fire(a, trigger[a], cost, pq);
            }
        }

        int h = 0;
        for (auto g : task_->goal_pos) {
            if (cost[g] == kInf) return std::nullopt;
            h = std::max(h, cost[g]);
        }
        return h;
    }

private:
    void fire(std::size_t a, int at_cost, std::vector<int>& cost,
              std::priority_queue<std::pair<int, std::uint32_t>,
                                  std::vector<std::pair<int, std::uint32_t>>,
                                  std::greater<>>& pq) const {
        const auto& act = task_->actions[a];
        const int c = at_cost + act.cost;
        for (auto f : act.add)
            if (c < cost[f]) {
                cost[f] = c;
                pq.push({c, f});
            }
    }

    const pddl::StripsTask* task_;
    std::vector<std::vector<std::size_t>> consumers_;
};

using Heuristic = std::function<std::optional<int>(const pddl::FactSet&)>;

/// One-off h_max of a single state.
inline std::optional<int> hmax(const pddl::FactSet& state, const pddl::StripsTask& task) {
    return HmaxEvaluator(task)(state);
}

// ---------------------------------------------------------------------------
// A*

namespace detail {

struct FactSetHash {
    std::size_t operator()(const pddl::FactSet& s) const { return s.hash(); }
};

}  // namespace detail

/// A* over the grounded task. Requires an admissible heuristic; ties broken
/// by lower h, then FIFO insertion order, so results are deterministic.
inline std::pair<std::optional<std::vector<pddl::GroundAction>>, SearchStats> astar(
    const pddl::StripsTask& task, const Heuristic& heuristic) {
    const auto t0 = std::chrono::steady_clock::now();
    SearchStats stats;
    auto finish = [&](std::optional<std::vector<pddl::GroundAction>> plan) {
        stats.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                                 .count();
        return std::make_pair(std::move(plan), stats);
    };
    if (task.goal_unreachable) return finish(std::nullopt);

    struct Node {
        int g = 0;
        int parent = -1;
        int via_action = -1;
        int h = 0;  // cached heuristic value; -1 marks a dead end
    };
    std::vector<pddl::FactSet> states;
    std::vector<Node> nodes;
    std::unordered_map<pddl::FactSet, int, detail::FactSetHash> index;

    struct Entry {
        int f;
        int h;
        std::uint64_t seq;
        int node;
        bool operator>(const Entry& o) const {
            if (f != o.f) return f > o.f;
            if (h != o.h) return h > o.h;
            return seq > o.seq;
        }
    };
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
    std::uint64_t seq = 0;

    const auto h0 = heuristic(task.init);
    if (!h0) return finish(std::nullopt);
    states.push_back(task.init);
    nodes.push_back({0, -1, -1, *h0});
    index.emplace(task.init, 0);
    open.push({*h0, *h0, seq++, 0});
    stats.generated = 1;

    while (!open.empty()) {
        const Entry e = open.top();
        open.pop();
        const int g = nodes[e.node].g;
        if (e.f != g + e.h) continue;  // superseded by a cheaper path
        const pddl::FactSet state = states[e.node];
        if (task.goal_satisfied(state)) {
            std::vector<pddl::GroundAction> plan;
            for (int n = e.node; nodes[n].via_action >= 0; n = nodes[n].parent)
                plan.push_back(task.actions[static_cast<std::size_t>(nodes[n].via_action)]);
            std::reverse(plan.begin(), plan.end());
            return finish(std::move(plan));
        }
        ++stats.expanded;
        for (std::size_t a = 0; a < task.actions.size(); ++a) {
            const auto& act = task.actions[a];
            if (!act.applicable(state)) continue;
            pddl::FactSet succ = state;
            act.apply(succ);
            const int tentative = g + act.cost;
            auto [it, inserted] = index.emplace(succ, static_cast<int>(states.size()));
            if (inserted) {
                const auto h = heuristic(succ);
                states.push_back(std::move(succ));
                nodes.push_back({tentative, e.node, static_cast<int>(a), h ? *h : -1});
            } else if (tentative < nodes[it->second].g) {
                const int h = nodes[it->second].h;
                nodes[it->second] = {tentative, e.node, static_cast<int>(a), h};
            } else {
                continue;
            }
            const Node& n = nodes[it->second];
            if (n.h < 0) continue;  // dead end
            ++stats.generated;
            open.push({tentative + n.h, n.h, seq++, it->second});
        }
    }
    return finish(std::nullopt);
}

// ---------------------------------------------------------------------------
// BFS oracle

/// Exhaustive uniform-cost optimum from an arbitrary state. Independent of
/// the heuristic search path; intended for tests on small tasks.
inline std::optional<int> bfs_cost_from(const pddl::StripsTask& task, const pddl::FactSet& start,
                                        std::size_t guard = 1'000'000) {
    if (task.goal_unreachable) return std::nullopt;
    if (task.goal_satisfied(start)) return 0;
    std::unordered_map<pddl::FactSet, int, detail::FactSetHash> dist;
    std::deque<pddl::FactSet> queue;
    dist.emplace(start, 0);
    queue.push_back(start);
    while (!queue.empty()) {
        const pddl::FactSet state = queue.front();
        queue.pop_front();
        const int d = dist.at(state);
        for (const auto& act : task.actions) {
            if (!act.applicable(state)) continue;
            pddl::FactSet succ = state;
            act.apply(succ);
            if (dist.count(succ)) continue;
            if (task.goal_satisfied(succ)) return d + 1;
            dist.emplace(succ, d + 1);
            if (dist.size() > guard) throw StateSpaceTooLarge(guard);
            queue.push_back(succ);
        }
    }
    return std::nullopt;
}

inline std::optional<int> bfs_oracle(const pddl::StripsTask& task,
                                     std::size_t guard = 1'000'000) {
    return bfs_cost_from(task, task.init, guard);
}

// ---------------------------------------------------------------------------
// Object-level plan solving

/// Solves an OLP unit by unit: builds each subgoal problem from the current
/// symbolic state, searches with A* + h_max, then applies the segment to
/// advance the state. Fails atomically on the first unsolvable unit.
inline std::pair<Plan, SearchStats> plan_olp(const foon::ObjectLevelPlan& olp,
                                             const grounding::AliasBinding& binding,
                                             const grounding::SceneState& scene,
                                             const pddl::Domain& domain,
                                             const grounding::GeomThresholds& thr = {},
                                             std::vector<std::string>* warnings = nullptr) {
    std::set<pddl::Atom> current = grounding::derive_predicates(scene, thr);
    std::vector<std::string> ids;
    for (const auto& [id, obj] : scene.objects) ids.push_back(id);

    pddl::GroundOptions opt;
    opt.table_always_clear = true;

    Plan plan;
    SearchStats total;
    for (std::size_t i = 0; i < olp.units.size(); ++i) {
        const pddl::Problem problem = grounding::make_subgoal_problem_from_atoms(
            olp.units[i], binding, current, ids, domain, warnings);
        const pddl::StripsTask task = pddl::ground(domain, problem, opt);
        HmaxEvaluator hmax_eval(task);
        auto [segment, stats] = astar(task, std::cref(hmax_eval));
        total += stats;
        if (!segment) throw SubgoalUnsolvable(static_cast<int>(i));

        pddl::FactSet state = task.init;
        for (const auto& act : *segment) act.apply(state);
        current.clear();
        for (std::size_t f = 0; f < task.facts.size(); ++f)
            if (state.test(f)) current.insert(task.facts[f]);

        plan.segments.push_back({static_cast<int>(i), std::move(*segment)});
        plan.total_cost += static_cast<int>(plan.segments.back().actions.size());
    }
    return {plan, total};
}

}  // namespace olp::planner
