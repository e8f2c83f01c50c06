#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "olp/chat.hpp"
#include "olp/common.hpp"
#include "olp/foon.hpp"
#include "olp/grounding.hpp"

namespace olp::pipeline {

// ---------------------------------------------------------------------------
// Errors

class BackendUnavailable : public Error {
public:
    explicit BackendUnavailable(const std::string& what) : Error("embedding backend: " + what) {}
};

class EmptyLibrary : public Error {
public:
    EmptyLibrary() : Error("exemplar library is empty") {}
};

class UnparsableSelection : public Error {
public:
    explicit UnparsableSelection(const std::string& reply)
        : Error("prototype selection reply contains no valid index: \"" + reply.substr(0, 80) +
                "\"") {}
};

class EmptySketch : public Error {
public:
    EmptySketch() : Error("stage-1 reply contains no numbered instructions") {}
};

class CodificationFailed : public Error {
public:
    explicit CodificationFailed(const std::string& why)
        : Error("stage-2 codification failed after repair: " + why) {}
};

class UnresolvableAlias : public Error {
public:
    explicit UnresolvableAlias(const std::string& alias)
        : Error("no scene instance matches alias \"" + alias + "\""), alias(alias) {}
    std::string alias;
};

/// Wraps a stage failure with the stage name for error reporting.
class StageError : public Error {
public:
    StageError(std::string stage_, const std::string& what)
        : Error("[" + stage_ + "] " + what), stage(std::move(stage_)) {}
    std::string stage;
};

// ---------------------------------------------------------------------------
// Embeddings

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::vector<double> embed(const std::string& text) const = 0;
};

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0, na = 0, nb = 0;
    const size_t n = std::min(a.size(), b.size());
    for (size_t i = 0; i < n; ++i) dot += a[i] * b[i];
    for (double v : a) na += v * v;
    for (double v : b) nb += v * v;
    if (na == 0 || nb == 0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

/// Offline bag-of-words embedder fit on the exemplar corpus. Weights are
/// tf * (ln((1+N)/(1+df)) + 1), L2-normalized; out-of-vocabulary tokens are
/// dropped.
class TfIdfEmbedder : public Embedder {
public:
    explicit TfIdfEmbedder(const std::vector<std::string>& corpus) {
        if (corpus.empty()) throw BackendUnavailable("empty corpus");
        std::map<std::string, int> df;
        for (const auto& doc : corpus) {
            std::set<std::string> seen;
            for (const auto& tok : olp::detail::word_tokens(doc)) seen.insert(tok);
            for (const auto& tok : seen) ++df[tok];
        }
        const double n_docs = static_cast<double>(corpus.size());
        for (const auto& [tok, count] : df) {  // std::map: deterministic dimension order
            vocab_.emplace(tok, vocab_.size());
            idf_.push_back(std::log((1.0 + n_docs) / (1.0 + count)) + 1.0);
        }
    }

    std::vector<double> embed(const std::string& text) const override {
        if (olp::detail::trim(text).empty()) throw Error("embed: text must be non-empty");
        std::vector<double> v(vocab_.size(), 0.0);
        for (const auto& tok : olp::detail::word_tokens(text)) {
            auto it = vocab_.find(tok);
            if (it != vocab_.end()) v[it->second] += 1.0;
        }
        double norm = 0;
        for (size_t i = 0; i < v.size(); ++i) {
            v[i] *= idf_[i];
            norm += v[i] * v[i];
        }
        if (norm > 0) {
            norm = std::sqrt(norm);
            for (auto& x : v) x /= norm;
        }
        return v;
    }

    size_t dimension() const { return vocab_.size(); }

private:
    std::map<std::string, size_t> vocab_;
    std::vector<double> idf_;
};

// ---------------------------------------------------------------------------
// Exemplar library

/// Renders a plan as its numbered step-by-step instructions (the form shown
/// to the LLM as a prototype and embedded for retrieval).
inline std::string render_instructions(const foon::ObjectLevelPlan& plan) {
    std::string out;
    for (size_t i = 0; i < plan.units.size(); ++i)
        out += std::to_string(i + 1) + ". " + plan.units[i].instruction + "\n";
    if (!out.empty()) out.pop_back();
    return out;
}

struct Exemplar {
    std::string name;
    foon::ObjectLevelPlan plan;
    std::string instruction_text;
    std::vector<double> embedding;
};

class ExemplarLibrary {
public:
    ExemplarLibrary(std::vector<std::pair<std::string, foon::ObjectLevelPlan>> plans, int k = 3)
        : k_(k) {
        if (plans.empty()) throw EmptyLibrary();
        if (k_ <= 0 || static_cast<size_t>(k_) > plans.size())
            throw Error("retrieval cutoff k must be within 1..|entries|");
        std::vector<std::string> corpus;
        for (auto& [name, plan] : plans) {
            Exemplar e;
            e.name = std::move(name);
            e.instruction_text = render_instructions(plan);
            e.plan = std::move(plan);
            corpus.push_back(e.instruction_text);
            entries_.push_back(std::move(e));
        }
        embedder_ = std::make_shared<TfIdfEmbedder>(corpus);
        for (auto& e : entries_) e.embedding = embedder_->embed(e.instruction_text);
    }

    static ExemplarLibrary from_json(const std::string& text) {
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& e) {
            throw Error(std::string("exemplar library: ") + e.what());
        }
        std::vector<std::pair<std::string, foon::ObjectLevelPlan>> plans;
        for (const auto& je : doc.at("entries")) {
            plans.emplace_back(je.value("name", "exemplar_" + std::to_string(plans.size() + 1)),
                               foon::parse_olp_json(je.at("plan").dump()));
        }
        return ExemplarLibrary(std::move(plans), doc.value("k", 3));
    }

    static ExemplarLibrary load_file(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw Error("cannot open exemplar library " + path.string());
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return from_json(text);
    }

    const std::vector<Exemplar>& entries() const { return entries_; }
    int k() const { return k_; }
    const Embedder& embedder() const { return *embedder_; }

private:
    std::vector<Exemplar> entries_;
    int k_;
    std::shared_ptr<TfIdfEmbedder> embedder_;
};

struct RankedExemplar {
    const Exemplar* exemplar;
    size_t index;       // position in the library
    double similarity;  // cosine against the task embedding
};

/// Top-k exemplars by cosine similarity, descending; ties keep library order.
inline std::vector<RankedExemplar> retrieve_exemplars(const std::string& task,
                                                      const ExemplarLibrary& lib,
                                                      std::optional<int> k_override = {}) {
    if (lib.entries().empty()) throw EmptyLibrary();
    const auto task_vec = lib.embedder().embed(task);
    std::vector<RankedExemplar> ranked;
    for (size_t i = 0; i < lib.entries().size(); ++i)
        ranked.push_back(
            {&lib.entries()[i], i, cosine(task_vec, lib.entries()[i].embedding)});
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.similarity > b.similarity;
    });
    const size_t k = static_cast<size_t>(k_override.value_or(lib.k()));
    if (ranked.size() > k) ranked.resize(k);
    return ranked;
}

// ---------------------------------------------------------------------------
// Prompt texts

inline std::string olp_system_prompt() {
    return
        "You are a helpful assistant that will generate plans for robots. You will be given the "
        "following:\n"
        "1. A simple plan sketch, with which you will generate an entirely new plan sketch "
        "describing object states before (preconditions) and after (effects) actions are "
        "executed.\n"
        "2. A list of objects available to the robot.\n"
        "\n"
        "Note the following rules:\n"
        "- Closely follow the task prompt. You must use all objects except any objects not "
        "related to the task.\n"
        "- Be consistent with object names throughout the plan.\n"
        "- All objects are on the table in front of the robot.\n"
        "- Use one action verb per step. However, any steps involving \"pick\" or \"place\" must "
        "be written as a single step with the action \"pick and place\".\n"
        "- Use as many states as possible to describe object preconditions and effects.\n"
        "- Only use the states \"in\", \"on\", \"under\", or \"contains\" for describing objects. "
        "List them in the format \"<relation> <obj>\", where <relation> is a state and <obj> is "
        "a single object.";
}

inline std::string render_intro_user(const std::string& task,
                                     const std::vector<std::string>& scene_objects) {
    std::string objects;
    for (size_t i = 0; i < scene_objects.size(); ++i)
        objects += (i ? ", " : "") + scene_objects[i];
    return "Your task will be to create a step-by-step plan for the following prompt: " + task +
           ". The following objects are available in the scene: " + objects +
           ". Say 'Okay!' if you understand the task.";
}

inline std::string render_prototype_user(const std::vector<std::string>& renderings) {
    std::string out =
        "Below are a list of prototype recipes. You must select the closest one that is the "
        "closest to the given task prompt. Simply provide the number corresponding to the "
        "closest prototype.\n";
    for (size_t i = 0; i < renderings.size(); ++i)
        out += "\nPrototype " + std::to_string(i + 1) + ":\n" + renderings[i] + "\n";
    return out;
}

inline std::string render_sketch_user(const std::string& task) {
    return "Generate a concise plan using the prototype as inspiration for the task: " + task +
           ". Follow all guidelines. Give evidence to support your plan logic.";
}

inline std::string render_objects_list_user() {
    return
        "Make a Python list of used objects in the following format: [\"object_1\", "
        "\"object_2\", ...]'. If there are several instances of an object type, list them "
        "individually (e.g., ['first apple', 'second apple'] if two apples are used). Do not "
        "add any explanation.";
}

inline std::string render_codify_user(const std::string& prototype_json) {
    return
        "Format your generated plan as a JSON dictionary. List as many states as possible when "
        "describing each object's preconditions and effects. Each required object should match "
        "a key in \"object_states\": Be consistent with object names across actions. Use this "
        "JSON prototype as reference:\n\n" +
        prototype_json;
}

inline std::string render_repair_user(const std::vector<std::string>& problems) {
    std::string out = "Your JSON plan was invalid for the following reasons:\n";
    for (const auto& p : problems) out += "- " + p + "\n";
    out += "Reply with a corrected JSON plan only, using the same format.";
    return out;
}

// ---------------------------------------------------------------------------
// Reply parsing

/// Extracts "1. text" style lines, numbering stripped, in order.
inline std::vector<std::string> parse_numbered_lines(const std::string& reply) {
    std::vector<std::string> out;
    std::istringstream in(reply);
    std::string line;
    while (std::getline(in, line)) {
        const std::string t = olp::detail::trim(line);
        size_t i = 0;
        while (i < t.size() && std::isdigit(static_cast<unsigned char>(t[i]))) ++i;
        if (i == 0 || i >= t.size()) continue;
        if (t[i] != '.' && t[i] != ')' && t[i] != ':') continue;
        const std::string body = olp::detail::trim(t.substr(i + 1));
        if (!body.empty()) out.push_back(body);
    }
    return out;
}

/// First integer within [1, n_candidates] wins; throws when none qualifies.
inline int parse_prototype_selection(const std::string& reply, int n_candidates) {
    size_t i = 0;
    while (i < reply.size()) {
        if (std::isdigit(static_cast<unsigned char>(reply[i]))) {
            size_t j = i;
            while (j < reply.size() && std::isdigit(static_cast<unsigned char>(reply[j]))) ++j;
            const int value = std::atoi(reply.substr(i, j - i).c_str());
            if (value >= 1 && value <= n_candidates) return value;
            i = j;
        } else {
            ++i;
        }
    }
    throw UnparsableSelection(reply);
}

/// First balanced JSON object in the reply, with markdown fences tolerated.
inline std::optional<std::string> extract_json_object(const std::string& reply) {
    const size_t start = reply.find('{');
    if (start == std::string::npos) return std::nullopt;
    int depth = 0;
    bool in_string = false;
    for (size_t i = start; i < reply.size(); ++i) {
        const char c = reply[i];
        if (in_string) {
            if (c == '\\')
                ++i;
            else if (c == '"')
                in_string = false;
        } else if (c == '"') {
            in_string = true;
        } else if (c == '{') {
            ++depth;
        } else if (c == '}') {
            if (--depth == 0) return reply.substr(start, i - start + 1);
        }
    }
    return std::nullopt;
}

/// Quoted strings from a Python-style list reply.
inline std::vector<std::string> parse_quoted_list(const std::string& reply) {
    std::vector<std::string> out;
    for (size_t i = 0; i < reply.size(); ++i) {
        const char q = reply[i];
        if (q != '"' && q != '\'') continue;
        const size_t end = reply.find(q, i + 1);
        if (end == std::string::npos) break;
        out.push_back(reply.substr(i + 1, end - i - 1));
        i = end;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Conversation

/// One growing message list. Stage functions append their turn, send the
/// whole history, and record the assistant reply plus reported usage.
class Conversation {
public:
    explicit Conversation(std::string system_prompt) {
        if (!system_prompt.empty())
            transcript_.append(chat::Role::System, std::move(system_prompt));
    }

    chat::ChatReply ask(chat::ChatProvider& provider, std::string user_turn) {
        transcript_.append(chat::Role::User, std::move(user_turn));
        chat::ChatReply reply = provider.complete(transcript_.messages);
        transcript_.append(chat::Role::Assistant, reply.content);
        transcript_.usage += reply.usage;
        return reply;
    }

    /// Appends a user turn without requesting a completion (some prompt
    /// shapes stack several user messages before the first reply).
    void add_user(std::string content) { transcript_.append(chat::Role::User, std::move(content)); }

    const chat::ChatTranscript& transcript() const { return transcript_; }
    chat::ChatUsage usage() const { return transcript_.usage; }

private:
    chat::ChatTranscript transcript_;
};

// ---------------------------------------------------------------------------
// Stages

/// Opening turn: task + available objects; the reply is an acknowledgement.
inline void stage_intro(Conversation& conv, chat::ChatProvider& provider, const std::string& task,
                        const std::vector<std::string>& scene_objects) {
    if (scene_objects.empty()) throw Error("scene_objects must be non-empty");
    conv.ask(provider, render_intro_user(task, scene_objects));
}

/// Asks the model to pick the closest prototype among the retrieved
/// candidates; falls back to the rank-1 candidate when the reply is
/// unparsable.
inline const RankedExemplar& select_prototype(Conversation& conv, chat::ChatProvider& provider,
                                              const std::vector<RankedExemplar>& candidates,
                                              bool* fell_back = nullptr) {
    if (candidates.empty()) throw EmptyLibrary();
    std::vector<std::string> renderings;
    for (const auto& c : candidates) renderings.push_back(c.exemplar->instruction_text);
    const chat::ChatReply reply = conv.ask(provider, render_prototype_user(renderings));
    if (fell_back) *fell_back = false;
    try {
        const int idx = parse_prototype_selection(reply.content,
                                                  static_cast<int>(candidates.size()));
        return candidates[static_cast<size_t>(idx - 1)];
    } catch (const UnparsableSelection&) {
        if (fell_back) *fell_back = true;
        return candidates.front();
    }
}

/// Stage 1: plan sketch as numbered natural-language instructions.
inline std::vector<std::string> stage1_sketch(Conversation& conv, chat::ChatProvider& provider,
                                              const std::string& task) {
    const chat::ChatReply reply = conv.ask(provider, render_sketch_user(task));
    std::vector<std::string> steps = parse_numbered_lines(reply.content);
    if (steps.empty()) throw EmptySketch();
    return steps;
}

/// Intermediate turn: the used-object list (informational; aliases are taken
/// from the codified plan itself).
inline std::vector<std::string> stage_objects_list(Conversation& conv,
                                                   chat::ChatProvider& provider) {
    const chat::ChatReply reply = conv.ask(provider, render_objects_list_user());
    return parse_quoted_list(reply.content);
}

/// Stage 2: codify the sketch as JSON. One automatic repair re-prompt with
/// the violation messages, then hard failure.
inline foon::ObjectLevelPlan stage2_codify(Conversation& conv, chat::ChatProvider& provider,
                                           const std::string& prototype_json, bool repair = true,
                                           std::vector<std::string>* warnings = nullptr) {
    auto try_parse = [&](const std::string& reply,
                         std::vector<std::string>& problems) -> std::optional<foon::ObjectLevelPlan> {
        const auto body = extract_json_object(reply);
        if (!body) {
            problems.push_back("the reply contains no JSON object");
            return std::nullopt;
        }
        try {
            foon::ObjectLevelPlan plan = foon::parse_olp_json(*body, warnings);
            const auto violations = foon::validate_olp(plan);
            if (violations.empty()) return plan;
            for (const auto& v : violations)
                problems.push_back(std::string(foon::violation_kind_name(v.kind)) + ": " +
                                   v.message);
        } catch (const Error& e) {
            problems.push_back(e.what());
        }
        return std::nullopt;
    };

    std::vector<std::string> problems;
    const chat::ChatReply reply = conv.ask(provider, render_codify_user(prototype_json));
    if (auto plan = try_parse(reply.content, problems)) return *plan;
    if (!repair) throw CodificationFailed(problems.empty() ? "invalid reply" : problems.front());

    const chat::ChatReply repaired = conv.ask(provider, render_repair_user(problems));
    std::vector<std::string> problems2;
    if (auto plan = try_parse(repaired.content, problems2)) return *plan;
    throw CodificationFailed(problems2.empty() ? "invalid reply" : problems2.front());
}

// ---------------------------------------------------------------------------
// Alias grounding

namespace detail {

inline bool is_ordinal(const std::string& tok) {
    static const std::set<std::string> kOrdinals = {
        "first", "second", "third", "fourth", "fifth",  "sixth",
        "seventh", "eighth", "ninth", "tenth", "a", "an", "the"};
    return kOrdinals.count(tok) > 0;
}

/// Type tokens of an alias: lowercase words minus ordinals/articles/digits.
inline std::set<std::string> alias_type_tokens(const std::string& alias) {
    std::set<std::string> out;
    for (const auto& tok : olp::detail::word_tokens(alias)) {
        if (is_ordinal(tok)) continue;
        if (std::isdigit(static_cast<unsigned char>(tok[0]))) continue;
        out.insert(tok);
    }
    return out;
}

/// Tokens of an instance id ("red_block_2" -> {red, block}).
inline std::set<std::string> instance_tokens(const std::string& id) {
    std::set<std::string> out;
    for (const auto& tok : olp::detail::word_tokens(id))
        if (!std::isdigit(static_cast<unsigned char>(tok[0]))) out.insert(tok);
    return out;
}

/// Natural order: split into (text, number) runs so red_block_2 < red_block_10.
inline bool natural_less(const std::string& a, const std::string& b) {
    size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        const bool da = std::isdigit(static_cast<unsigned char>(a[i]));
        const bool db = std::isdigit(static_cast<unsigned char>(b[j]));
        if (da && db) {
            size_t ia = i, jb = j;
            while (ia < a.size() && std::isdigit(static_cast<unsigned char>(a[ia]))) ++ia;
            while (jb < b.size() && std::isdigit(static_cast<unsigned char>(b[jb]))) ++jb;
            const long va = std::stol(a.substr(i, ia - i));
            const long vb = std::stol(b.substr(j, jb - j));
            if (va != vb) return va < vb;
            i = ia;
            j = jb;
        } else {
            if (a[i] != b[j]) return a[i] < b[j];
            ++i;
            ++j;
        }
    }
    return a.size() < b.size();
}

}  // namespace detail

/// Greedy alias grounding: each alias, in order of first appearance, binds
/// the lowest-indexed unbound instance whose tokens cover the alias's type
/// tokens. Always injective; throws when an alias matches nothing.
inline grounding::AliasBinding ground_aliases(const foon::ObjectLevelPlan& plan,
                                              const std::vector<std::string>& instances) {
    std::vector<std::string> aliases;
    std::set<std::string> seen;
    for (const auto& fu : plan.units)
        for (const auto& alias : fu.required_objects)
            if (seen.insert(alias).second) aliases.push_back(alias);

    std::vector<std::string> pool = instances;
    std::sort(pool.begin(), pool.end(), detail::natural_less);

    grounding::AliasBinding binding;
    for (const auto& alias : aliases) {
        const auto want = detail::alias_type_tokens(alias);
        bool bound = false;
        for (auto it = pool.begin(); it != pool.end(); ++it) {
            const auto have = detail::instance_tokens(*it);
            if (std::includes(have.begin(), have.end(), want.begin(), want.end())) {
                binding.map[alias] = *it;
                pool.erase(it);
                bound = true;
                break;
            }
        }
        if (!bound) throw UnresolvableAlias(alias);
    }
    return binding;
}

// ---------------------------------------------------------------------------
// Full pipeline

struct PipelineOptions {
    std::optional<int> k;  // retrieval cutoff override
    bool repair = true;
};

struct PipelineResult {
    foon::ObjectLevelPlan plan;
    grounding::AliasBinding binding;
    chat::ChatUsage tokens;
    std::vector<std::string> sketch;
    std::string prototype_name;
    chat::ChatTranscript transcript;
    std::vector<std::string> warnings;
};

/// retrieve -> select -> sketch -> codify -> ground, over one conversation.
/// Errors are rethrown tagged with the failing stage's name.
inline PipelineResult run_olp_pipeline(const std::string& task,
                                       const std::vector<std::string>& scene_objects,
                                       const ExemplarLibrary& lib, chat::ChatProvider& provider,
                                       const PipelineOptions& opt = {}) {
    if (scene_objects.empty()) throw StageError("intro", "scene_objects must be non-empty");

    auto guarded = [](const char* stage, auto&& fn) -> decltype(fn()) {
        try {
            return fn();
        } catch (const StageError&) {
            throw;
        } catch (const Error& e) {
            throw StageError(stage, e.what());
        }
    };

    PipelineResult result;
    Conversation conv(olp_system_prompt());

    guarded("intro", [&] { stage_intro(conv, provider, task, scene_objects); return 0; });
    const auto candidates =
        guarded("retrieve", [&] { return retrieve_exemplars(task, lib, opt.k); });
    const RankedExemplar& prototype = guarded(
        "select", [&]() -> const RankedExemplar& { return select_prototype(conv, provider, candidates); });
    result.prototype_name = prototype.exemplar->name;
    result.sketch = guarded("sketch", [&] { return stage1_sketch(conv, provider, task); });
    guarded("objects", [&] { return stage_objects_list(conv, provider); });
    const std::string prototype_json = foon::serialize_olp(prototype.exemplar->plan);
    result.plan = guarded("codify", [&] {
        return stage2_codify(conv, provider, prototype_json, opt.repair, &result.warnings);
    });
    result.binding =
        guarded("ground", [&] { return ground_aliases(result.plan, scene_objects); });

    result.tokens = conv.usage();
    result.transcript = conv.transcript();
    return result;
}

}  // namespace olp::pipeline
