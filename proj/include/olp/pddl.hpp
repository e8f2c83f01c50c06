#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "olp/common.hpp"

namespace olp::pddl {

// ---------------------------------------------------------------------------
// Errors

class ParseError : public Error {
public:
    ParseError(int line_, int col_, const std::string& what)
        : Error("parse error at " + std::to_string(line_) + ":" + std::to_string(col_) + ": " +
                what),
          line(line_),
          col(col_) {}
    int line;
    int col;
};

class UnsupportedRequirement : public Error {
public:
    explicit UnsupportedRequirement(const std::string& req)
        : Error("unsupported requirement " + req +
                " (supported: :strips :typing :negative-preconditions)"),
          requirement(req) {}
    std::string requirement;
};

class UndeclaredSymbol : public Error {
public:
    explicit UndeclaredSymbol(const std::string& sym, const std::string& context)
        : Error("undeclared symbol \"" + sym + "\" in " + context), symbol(sym) {}
    std::string symbol;
};

// ---------------------------------------------------------------------------
// Model

struct Atom {
    std::string predicate;
    std::vector<std::string> args;

    friend bool operator==(const Atom&, const Atom&) = default;
    friend auto operator<=>(const Atom&, const Atom&) = default;
};

struct Literal {
    Atom atom;
    bool negated = false;

    friend bool operator==(const Literal&, const Literal&) = default;
    friend auto operator<=>(const Literal&, const Literal&) = default;
};

struct TypedName {
    std::string name;
    std::string type = "object";

    friend bool operator==(const TypedName&, const TypedName&) = default;
};

struct PredicateDecl {
    std::string name;
    std::vector<TypedName> params;

    friend bool operator==(const PredicateDecl&, const PredicateDecl&) = default;
};

struct ActionSchema {
    std::string name;
    std::vector<TypedName> parameters;
    std::vector<Literal> preconditions;
    std::vector<Literal> effects;

    friend bool operator==(const ActionSchema&, const ActionSchema&) = default;
};

struct Domain {
    std::string name;
    std::vector<std::string> requirements;
    std::vector<std::string> types;
    std::vector<TypedName> constants;
    std::vector<PredicateDecl> predicates;
    std::vector<ActionSchema> actions;

    friend bool operator==(const Domain&, const Domain&) = default;

    const ActionSchema* find_action(std::string_view n) const {
        for (const auto& a : actions)
            if (a.name == n) return &a;
        return nullptr;
    }
    const PredicateDecl* find_predicate(std::string_view n) const {
        for (const auto& p : predicates)
            if (p.name == n) return &p;
        return nullptr;
    }
    bool is_constant(std::string_view n) const {
        for (const auto& c : constants)
            if (c.name == n) return true;
        return false;
    }
};

struct Problem {
    std::string name;
    std::string domain_name;
    std::vector<TypedName> objects;
    std::set<Atom> init;
    std::vector<Literal> goal;

    friend bool operator==(const Problem&, const Problem&) = default;

    bool has_object(std::string_view n) const {
        for (const auto& o : objects)
            if (o.name == n) return true;
        return false;
    }
};

inline std::string to_string(const Atom& a) {
    std::string out = "(" + a.predicate;
    for (const auto& arg : a.args) out += " " + arg;
    out += ")";
    return out;
}

inline std::string to_string(const Literal& l) {
    return l.negated ? "(not " + to_string(l.atom) + ")" : to_string(l.atom);
}

// ---------------------------------------------------------------------------
// Built-in pick/place domain

/// The block-world domain with the pick and place operators. `hand` and `air`
/// are domain constants: they appear in operator bodies independent of any
/// particular scene.
inline Domain builtin_blockworld_domain() {
    Domain d;
    d.name = "blockworld";
    d.requirements = {":strips", ":typing", ":negative-preconditions"};
    d.constants = {{"hand", "object"}, {"air", "object"}};
    d.predicates = {
        {"in", {{"?obj_1", "object"}, {"?obj_2", "object"}}},
        {"on", {{"?obj_1", "object"}, {"?obj_2", "object"}}},
        {"under", {{"?obj_1", "object"}, {"?obj_2", "object"}}},
    };

    auto lit = [](const char* pred, const char* a, const char* b, bool neg = false) {
        return Literal{Atom{pred, {a, b}}, neg};
    };

    ActionSchema pick;
    pick.name = "pick";
    pick.parameters = {{"?obj", "object"}, {"?surface", "object"}};
    pick.preconditions = {
        // collision-free constraints
        lit("in", "hand", "air"),
        lit("on", "?obj", "air"),
        // object is on a surface
        lit("on", "?surface", "?obj"),
        lit("under", "?obj", "?surface"),
    };
    pick.effects = {
        // hand contains target object
        lit("in", "hand", "?obj"),
        lit("in", "hand", "air", true),
        // object has been grasped
        lit("on", "?obj", "hand"),
        lit("under", "?obj", "air"),
        lit("on", "?obj", "air", true),
        // nothing is on surface
        lit("on", "?surface", "?obj", true),
        lit("under", "?obj", "?surface", true),
        lit("on", "?surface", "air"),
    };

    ActionSchema place;
    place.name = "place";
    place.parameters = {{"?obj", "object"}, {"?surface", "object"}};
    place.preconditions = {
        // collision-free constraints
        lit("on", "?surface", "air"),
        lit("under", "?obj", "air"),
        // hand contains object
        lit("in", "hand", "?obj"),
        lit("on", "?obj", "hand"),
    };
    place.effects = {
        // hand no longer contains object
        lit("in", "hand", "air"),
        lit("in", "hand", "?obj", true),
        // object is on surface
        lit("on", "?surface", "?obj"),
        lit("on", "?surface", "air", true),
        lit("under", "?obj", "?surface"),
        lit("under", "?obj", "air", true),
        // nothing is on object
        lit("on", "?obj", "hand", true),
        lit("on", "?obj", "air"),
    };

    d.actions = {pick, place};
    return d;
}

// ---------------------------------------------------------------------------
// S-expression reader

namespace detail {

struct Sx {
    bool is_list = false;
    std::string sym;
    std::vector<Sx> kids;
    int line = 0;
    int col = 0;
};

class Lexer {
public:
    explicit Lexer(std::string_view text) : text_(text) {}

    struct Token {
        enum Kind { LParen, RParen, Symbol, End } kind;
        std::string text;
        int line;
        int col;
    };

    Token next() {
        skip_ws_and_comments();
        Token t{Token::End, "", line_, col_};
        if (pos_ >= text_.size()) return t;
        char c = text_[pos_];
        if (c == '(') {
            t.kind = Token::LParen;
            advance();
            return t;
        }
        if (c == ')') {
            t.kind = Token::RParen;
            advance();
            return t;
        }
        t.kind = Token::Symbol;
        while (pos_ < text_.size()) {
            c = text_[pos_];
            if (c == '(' || c == ')' || c == ';' || std::isspace(static_cast<unsigned char>(c)))
                break;
            t.text.push_back(c);
            advance();
        }
        return t;
    }

private:
    void advance() {
        if (text_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }
    void skip_ws_and_comments() {
        while (pos_ < text_.size()) {
            char c = text_[pos_];
            if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else if (c == ';') {
                while (pos_ < text_.size() && text_[pos_] != '\n') advance();
            } else {
                break;
            }
        }
    }

    std::string_view text_;
    size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
};

inline Sx read_sx(Lexer& lex, const Lexer::Token& tok) {
    if (tok.kind == Lexer::Token::Symbol) {
        Sx s;
        s.sym = tok.text;
        s.line = tok.line;
        s.col = tok.col;
        return s;
    }
    if (tok.kind != Lexer::Token::LParen)
        throw ParseError(tok.line, tok.col, "expected '(' or symbol");
    Sx s;
    s.is_list = true;
    s.line = tok.line;
    s.col = tok.col;
    for (;;) {
        auto t = lex.next();
        if (t.kind == Lexer::Token::RParen) return s;
        if (t.kind == Lexer::Token::End)
            throw ParseError(t.line, t.col, "unexpected end of input, '(' not closed");
        s.kids.push_back(read_sx(lex, t));
    }
}

inline Sx read_single_sx(std::string_view text) {
    Lexer lex(text);
    auto t = lex.next();
    if (t.kind == Lexer::Token::End) throw ParseError(t.line, t.col, "empty input");
    Sx s = read_sx(lex, t);
    auto rest = lex.next();
    if (rest.kind != Lexer::Token::End)
        throw ParseError(rest.line, rest.col, "trailing content after top-level form");
    return s;
}

inline std::string lower(std::string_view s) { return olp::detail::to_lower(s); }

inline bool sym_is(const Sx& s, std::string_view kw) {
    return !s.is_list && lower(s.sym) == lower(kw);
}

// names* [- type] repeated; untyped names default to "object".
inline std::vector<TypedName> read_typed_list(const Sx& list) {
    std::vector<TypedName> out;
    std::vector<std::string> pending;
    for (size_t i = 0; i < list.kids.size(); ++i) {
        const Sx& k = list.kids[i];
        if (k.is_list) throw ParseError(k.line, k.col, "expected name in typed list");
        if (k.sym == "-") {
            if (i + 1 >= list.kids.size() || list.kids[i + 1].is_list)
                throw ParseError(k.line, k.col, "expected type after '-'");
            const std::string type = list.kids[i + 1].sym;
            for (auto& n : pending) out.push_back({std::move(n), type});
            pending.clear();
            ++i;
        } else {
            pending.push_back(k.sym);
        }
    }
    for (auto& n : pending) out.push_back({std::move(n), "object"});
    return out;
}

struct SymbolScope {
    const Domain* domain = nullptr;
    const std::vector<TypedName>* parameters = nullptr;  // action variables
    const Problem* problem = nullptr;                    // problem objects

    bool known_term(const std::string& t) const {
        if (domain && domain->is_constant(t)) return true;
        if (parameters)
            for (const auto& p : *parameters)
                if (p.name == t) return true;
        if (problem && problem->has_object(t)) return true;
        return false;
    }
};

inline Atom read_atom(const Sx& s, const SymbolScope& scope, const std::string& context) {
    if (!s.is_list || s.kids.empty() || s.kids[0].is_list)
        throw ParseError(s.line, s.col, "expected atom " + context);
    Atom a;
    a.predicate = lower(s.kids[0].sym);
    for (size_t i = 1; i < s.kids.size(); ++i) {
        if (s.kids[i].is_list) throw ParseError(s.kids[i].line, s.kids[i].col, "nested term");
        a.args.push_back(s.kids[i].sym);
    }
    if (scope.domain) {
        const PredicateDecl* decl = scope.domain->find_predicate(a.predicate);
        if (!decl) throw UndeclaredSymbol(a.predicate, context);
        if (decl->params.size() != a.args.size())
            throw ParseError(s.line, s.col,
                             "predicate " + a.predicate + " expects " +
                                 std::to_string(decl->params.size()) + " arguments, got " +
                                 std::to_string(a.args.size()));
    }
    for (const auto& arg : a.args)
        if (!scope.known_term(arg)) throw UndeclaredSymbol(arg, context);
    return a;
}

// atom | (not atom) | (and GD*), flattened to a literal conjunction.
inline void read_gd(const Sx& s, const SymbolScope& scope, const std::string& context,
                    std::vector<Literal>& out) {
    if (!s.is_list || s.kids.empty())
        throw ParseError(s.line, s.col, "expected condition " + context);
    if (sym_is(s.kids[0], "and")) {
        for (size_t i = 1; i < s.kids.size(); ++i) read_gd(s.kids[i], scope, context, out);
        return;
    }
    if (sym_is(s.kids[0], "not")) {
        if (s.kids.size() != 2)
            throw ParseError(s.line, s.col, "(not ...) takes exactly one atom");
        out.push_back({read_atom(s.kids[1], scope, context), true});
        return;
    }
    const std::string head = lower(s.kids[0].sym);
    if (head == "or" || head == "imply" || head == "exists" || head == "forall" ||
        head == "when" || head == "=")
        throw UnsupportedRequirement(":" + head + " condition");
    out.push_back({read_atom(s, scope, context), false});
}

inline void check_requirements(const Sx& s) {
    static const std::set<std::string> supported = {":strips", ":typing",
                                                    ":negative-preconditions"};
    for (size_t i = 1; i < s.kids.size(); ++i) {
        const std::string req = lower(s.kids[i].sym);
        if (!supported.count(req)) throw UnsupportedRequirement(req);
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Parsing

/// Parses a STRIPS-subset domain (:strips, :typing, :negative-preconditions).
/// Anything more expressive is rejected with UnsupportedRequirement.
inline Domain parse_domain(const std::string& text) {
    using detail::Sx;
    Sx root = detail::read_single_sx(text);
    if (!root.is_list || root.kids.size() < 2 || !detail::sym_is(root.kids[0], "define"))
        throw ParseError(root.line, root.col, "expected (define (domain ...) ...)");
    const Sx& head = root.kids[1];
    if (!head.is_list || head.kids.size() != 2 || !detail::sym_is(head.kids[0], "domain"))
        throw ParseError(head.line, head.col, "expected (domain NAME)");

    Domain d;
    d.name = head.kids[1].sym;
    for (size_t i = 2; i < root.kids.size(); ++i) {
        const Sx& sec = root.kids[i];
        if (!sec.is_list || sec.kids.empty() || sec.kids[0].is_list)
            throw ParseError(sec.line, sec.col, "expected domain section");
        const std::string kw = detail::lower(sec.kids[0].sym);
        if (kw == ":requirements") {
            detail::check_requirements(sec);
            for (size_t k = 1; k < sec.kids.size(); ++k)
                d.requirements.push_back(detail::lower(sec.kids[k].sym));
        } else if (kw == ":types") {
            for (size_t k = 1; k < sec.kids.size(); ++k) {
                if (sec.kids[k].sym == "-")
                    throw UnsupportedRequirement(":type-hierarchy");
                if (sec.kids[k].sym != "object") d.types.push_back(sec.kids[k].sym);
            }
        } else if (kw == ":constants") {
            Sx rest = sec;
            rest.kids.erase(rest.kids.begin());
            d.constants = detail::read_typed_list(rest);
        } else if (kw == ":predicates") {
            for (size_t k = 1; k < sec.kids.size(); ++k) {
                const Sx& p = sec.kids[k];
                if (!p.is_list || p.kids.empty())
                    throw ParseError(p.line, p.col, "expected predicate declaration");
                PredicateDecl decl;
                decl.name = detail::lower(p.kids[0].sym);
                Sx rest = p;
                rest.kids.erase(rest.kids.begin());
                decl.params = detail::read_typed_list(rest);
                d.predicates.push_back(std::move(decl));
            }
        } else if (kw == ":action") {
            if (sec.kids.size() < 2 || sec.kids[1].is_list)
                throw ParseError(sec.line, sec.col, "expected action name");
            ActionSchema a;
            a.name = detail::lower(sec.kids[1].sym);
            if (d.find_action(a.name))
                throw ParseError(sec.line, sec.col, "duplicate action " + a.name);
            size_t k = 2;
            while (k < sec.kids.size()) {
                const Sx& key = sec.kids[k];
                if (key.is_list) throw ParseError(key.line, key.col, "expected :keyword");
                const std::string akw = detail::lower(key.sym);
                if (k + 1 >= sec.kids.size())
                    throw ParseError(key.line, key.col, "missing value after " + akw);
                const Sx& val = sec.kids[k + 1];
                detail::SymbolScope scope{&d, &a.parameters, nullptr};
                if (akw == ":parameters") {
                    a.parameters = detail::read_typed_list(val);
                } else if (akw == ":precondition") {
                    detail::read_gd(val, scope, "precondition of " + a.name, a.preconditions);
                } else if (akw == ":effect") {
                    detail::read_gd(val, scope, "effect of " + a.name, a.effects);
                } else {
                    throw UnsupportedRequirement(akw);
                }
                k += 2;
            }
            d.actions.push_back(std::move(a));
        } else {
            throw UnsupportedRequirement(kw);
        }
    }
    return d;
}

/// Parses a problem and validates every symbol against `domain`.
inline Problem parse_problem(const std::string& text, const Domain& domain) {
    using detail::Sx;
    Sx root = detail::read_single_sx(text);
    if (!root.is_list || root.kids.size() < 2 || !detail::sym_is(root.kids[0], "define"))
        throw ParseError(root.line, root.col, "expected (define (problem ...) ...)");
    const Sx& head = root.kids[1];
    if (!head.is_list || head.kids.size() != 2 || !detail::sym_is(head.kids[0], "problem"))
        throw ParseError(head.line, head.col, "expected (problem NAME)");

    Problem p;
    p.name = head.kids[1].sym;
    for (size_t i = 2; i < root.kids.size(); ++i) {
        const Sx& sec = root.kids[i];
        if (!sec.is_list || sec.kids.empty() || sec.kids[0].is_list)
            throw ParseError(sec.line, sec.col, "expected problem section");
        const std::string kw = detail::lower(sec.kids[0].sym);
        if (kw == ":domain") {
            if (sec.kids.size() != 2)
                throw ParseError(sec.line, sec.col, "expected (:domain NAME)");
            p.domain_name = sec.kids[1].sym;
        } else if (kw == ":objects") {
            Sx rest = sec;
            rest.kids.erase(rest.kids.begin());
            for (auto& obj : detail::read_typed_list(rest)) {
                if (domain.is_constant(obj.name)) continue;  // already available
                if (!p.has_object(obj.name)) p.objects.push_back(std::move(obj));
            }
        } else if (kw == ":init") {
            detail::SymbolScope scope{&domain, nullptr, &p};
            for (size_t k = 1; k < sec.kids.size(); ++k) {
                const Sx& f = sec.kids[k];
                if (f.is_list && !f.kids.empty() && detail::sym_is(f.kids[0], "not"))
                    throw ParseError(f.line, f.col, "negated atom in :init");
                p.init.insert(detail::read_atom(f, scope, ":init"));
            }
        } else if (kw == ":goal") {
            if (sec.kids.size() != 2)
                throw ParseError(sec.line, sec.col, "expected (:goal GD)");
            detail::SymbolScope scope{&domain, nullptr, &p};
            detail::read_gd(sec.kids[1], scope, ":goal", p.goal);
        } else if (kw == ":requirements") {
            detail::check_requirements(sec);
        } else {
            throw UnsupportedRequirement(kw);
        }
    }
    return p;
}

// ---------------------------------------------------------------------------
// Printing (canonical: deterministic byte-stable output, parse(print(x)) == x)

namespace detail {

inline void print_typed_list(std::ostringstream& os, const std::vector<TypedName>& list) {
    for (size_t i = 0; i < list.size(); ++i) {
        if (i) os << " ";
        os << list[i].name;
        const bool run_end = (i + 1 == list.size()) || (list[i + 1].type != list[i].type);
        if (run_end) os << " - " << list[i].type;
    }
}

}  // namespace detail

inline std::string print_domain(const Domain& d) {
    std::ostringstream os;
    os << "(define (domain " << d.name << ")\n";
    if (!d.requirements.empty()) {
        os << "  (:requirements";
        for (const auto& r : d.requirements) os << " " << r;
        os << ")\n";
    }
    if (!d.types.empty()) {
        os << "  (:types";
        for (const auto& t : d.types) os << " " << t;
        os << ")\n";
    }
    if (!d.constants.empty()) {
        os << "  (:constants ";
        detail::print_typed_list(os, d.constants);
        os << ")\n";
    }
    if (!d.predicates.empty()) {
        os << "  (:predicates\n";
        for (size_t i = 0; i < d.predicates.size(); ++i) {
            os << "    (" << d.predicates[i].name;
            for (const auto& v : d.predicates[i].params) os << " " << v.name << " - " << v.type;
            os << ")";
            os << (i + 1 == d.predicates.size() ? ")\n" : "\n");
        }
    }
    for (const auto& a : d.actions) {
        os << "  (:action " << a.name << "\n";
        os << "    :parameters (";
        detail::print_typed_list(os, a.parameters);
        os << ")\n";
        os << "    :precondition (and\n";
        for (size_t i = 0; i < a.preconditions.size(); ++i)
            os << "      " << to_string(a.preconditions[i])
               << (i + 1 == a.preconditions.size() ? ")\n" : "\n");
        os << "    :effect (and\n";
        for (size_t i = 0; i < a.effects.size(); ++i)
            os << "      " << to_string(a.effects[i])
               << (i + 1 == a.effects.size() ? "))\n" : "\n");
    }
    os << ")\n";
    return os.str();
}

inline std::string print_problem(const Problem& p) {
    std::ostringstream os;
    os << "(define (problem " << p.name << ")\n";
    os << "  (:domain " << p.domain_name << ")\n";
    if (!p.objects.empty()) {
        os << "  (:objects ";
        detail::print_typed_list(os, p.objects);
        os << ")\n";
    }
    os << "  (:init\n";
    size_t i = 0;
    for (const auto& atom : p.init) {  // std::set: already sorted
        os << "    " << to_string(atom) << (++i == p.init.size() ? ")\n" : "\n");
    }
    if (p.init.empty()) os << "  )\n";
    os << "  (:goal (and\n";
    for (size_t g = 0; g < p.goal.size(); ++g)
        os << "    " << to_string(p.goal[g]) << (g + 1 == p.goal.size() ? "))\n" : "\n");
    if (p.goal.empty()) os << "  ))\n";
    os << ")\n";
    return os.str();
}

// ---------------------------------------------------------------------------
// Grounding to a propositional STRIPS task

/// Dense bitset over fact indices; value-semantic so search nodes can own one.
struct FactSet {
    std::vector<std::uint64_t> words;

    static FactSet of_size(size_t nfacts) {
        FactSet s;
        s.words.assign((nfacts + 63) / 64, 0);
        return s;
    }
    bool test(size_t i) const { return (words[i >> 6] >> (i & 63)) & 1; }
    void set(size_t i) { words[i >> 6] |= (std::uint64_t{1} << (i & 63)); }
    void reset(size_t i) { words[i >> 6] &= ~(std::uint64_t{1} << (i & 63)); }

    bool contains_all(const std::vector<std::uint32_t>& idx) const {
        for (auto i : idx)
            if (!test(i)) return false;
        return true;
    }
    bool contains_none(const std::vector<std::uint32_t>& idx) const {
        for (auto i : idx)
            if (test(i)) return false;
        return true;
    }

    friend bool operator==(const FactSet&, const FactSet&) = default;

    std::uint64_t hash() const {
        std::uint64_t h = 0xcbf29ce484222325ull;
        for (auto w : words) {
            h ^= w;
            h *= 0x100000001b3ull;
        }
        return h;
    }
};

struct GroundAction {
    std::string name;
    std::vector<std::string> args;
    std::vector<std::uint32_t> pre_pos;
    std::vector<std::uint32_t> pre_neg;
    std::vector<std::uint32_t> add;
    std::vector<std::uint32_t> del;
    int cost = 1;

    std::string signature() const {
        std::string s = "(" + name;
        for (const auto& a : args) s += " " + a;
        return s + ")";
    }

    bool applicable(const FactSet& s) const {
        return s.contains_all(pre_pos) && s.contains_none(pre_neg);
    }
    void apply(FactSet& s) const {
        for (auto i : del) s.reset(i);
        for (auto i : add) s.set(i);
    }
};

struct StripsTask {
    std::vector<Atom> facts;          // index -> atom
    std::map<Atom, std::uint32_t> fact_index;
    FactSet init;
    std::vector<std::uint32_t> goal_pos;
    std::vector<std::uint32_t> goal_neg;
    std::vector<GroundAction> actions;
    bool goal_unreachable = false;    // some positive goal atom is not reachable

    bool goal_satisfied(const FactSet& s) const {
        return !goal_unreachable && s.contains_all(goal_pos) && s.contains_none(goal_neg);
    }
};

struct GroundOptions {
    /// Treat `table_name` as having unbounded free area: placing onto it does
    /// not delete (on table air). Fig. 5's literal effects apply to every
    /// other surface.
    bool table_always_clear = false;
    std::string table_name = "table";
    std::string clear_token = "air";
};

namespace detail {

inline Atom substitute(const Atom& a, const std::map<std::string, std::string>& bind) {
    Atom out;
    out.predicate = a.predicate;
    for (const auto& arg : a.args) {
        auto it = bind.find(arg);
        out.args.push_back(it == bind.end() ? arg : it->second);
    }
    return out;
}

}  // namespace detail

/// Grounds `domain` x `problem` into a propositional task. Parameters range
/// over problem objects only (never the virtual constants), pairwise-distinct
/// per action. Facts and actions are closed under delete-relaxed reachability
/// from init, which prunes statically impossible instantiations.
inline StripsTask ground(const Domain& domain, const Problem& problem,
                         const GroundOptions& opt = {}) {
    struct Candidate {
        std::string name;
        std::vector<Literal> pre;
        std::vector<Literal> eff;
        std::vector<std::string> args;
    };
    std::vector<Candidate> candidates;

    for (const auto& schema : domain.actions) {
        const size_t arity = schema.parameters.size();
        std::vector<const TypedName*> pool;
        for (const auto& o : problem.objects) pool.push_back(&o);

        // enumerate pairwise-distinct assignments in declaration order
        std::function<void(size_t, std::map<std::string, std::string>&)> rec =
            [&](size_t depth, std::map<std::string, std::string>& bind) {
                if (depth == arity) {
                    Candidate c;
                    c.name = schema.name;
                    for (const auto& prm : schema.parameters) c.args.push_back(bind[prm.name]);
                    for (const auto& l : schema.preconditions)
                        c.pre.push_back({detail::substitute(l.atom, bind), l.negated});
                    for (const auto& l : schema.effects)
                        c.eff.push_back({detail::substitute(l.atom, bind), l.negated});
                    candidates.push_back(std::move(c));
                    return;
                }
                const TypedName& prm = schema.parameters[depth];
                for (const auto* obj : pool) {
                    if (prm.type != "object" && obj->type != prm.type) continue;
                    bool used = false;
                    for (const auto& [var, val] : bind)
                        if (val == obj->name) used = true;
                    if (used) continue;  // pairwise distinct (?obj != ?surface)
                    bind[prm.name] = obj->name;
                    rec(depth + 1, bind);
                    bind.erase(prm.name);
                }
            };
        std::map<std::string, std::string> bind;
        rec(0, bind);
    }

    // Delete-relaxed reachability from init over candidate actions.
    std::set<Atom> reachable(problem.init.begin(), problem.init.end());
    std::vector<bool> fired(candidates.size(), false);
    bool changed = true;
    while (changed) {
        changed = false;
        for (size_t i = 0; i < candidates.size(); ++i) {
            if (fired[i]) continue;
            bool ok = true;
            for (const auto& l : candidates[i].pre)
                if (!l.negated && !reachable.count(l.atom)) ok = false;
            if (!ok) continue;
            fired[i] = true;
            for (const auto& l : candidates[i].eff)
                if (!l.negated && reachable.insert(l.atom).second) changed = true;
            changed = true;
        }
    }

    StripsTask task;
    for (const auto& atom : reachable) {
        task.fact_index.emplace(atom, static_cast<std::uint32_t>(task.facts.size()));
        task.facts.push_back(atom);
    }

    task.init = FactSet::of_size(task.facts.size());
    for (const auto& atom : problem.init) task.init.set(task.fact_index.at(atom));

    const Atom table_air{"on", {opt.table_name, opt.clear_token}};
    for (size_t i = 0; i < candidates.size(); ++i) {
        if (!fired[i]) continue;
        GroundAction ga;
        ga.name = candidates[i].name;
        ga.args = candidates[i].args;
        std::set<std::uint32_t> add, del;
        bool reachable_ok = true;
        for (const auto& l : candidates[i].pre) {
            auto it = task.fact_index.find(l.atom);
            if (l.negated) {
                if (it != task.fact_index.end()) ga.pre_neg.push_back(it->second);
                // unreachable atom: (not atom) always true, drop
            } else {
                if (it == task.fact_index.end()) reachable_ok = false;
                else ga.pre_pos.push_back(it->second);
            }
        }
        if (!reachable_ok) continue;
        for (const auto& l : candidates[i].eff) {
            if (l.negated) {
                if (opt.table_always_clear && l.atom == table_air) continue;
                auto it = task.fact_index.find(l.atom);
                if (it != task.fact_index.end()) del.insert(it->second);
            } else {
                add.insert(task.fact_index.at(l.atom));
            }
        }
        for (auto a : add) del.erase(a);  // add wins; keeps add/del disjoint
        ga.add.assign(add.begin(), add.end());
        ga.del.assign(del.begin(), del.end());
        std::sort(ga.pre_pos.begin(), ga.pre_pos.end());
        std::sort(ga.pre_neg.begin(), ga.pre_neg.end());
        task.actions.push_back(std::move(ga));
    }

    for (const auto& l : problem.goal) {
        auto it = task.fact_index.find(l.atom);
        if (l.negated) {
            if (it != task.fact_index.end()) task.goal_neg.push_back(it->second);
        } else {
            if (it == task.fact_index.end()) task.goal_unreachable = true;
            else task.goal_pos.push_back(it->second);
        }
    }
    std::sort(task.goal_pos.begin(), task.goal_pos.end());
    std::sort(task.goal_neg.begin(), task.goal_neg.end());
    return task;
}

/// Parses a standalone goal condition ("(and ...)", an atom, or negations)
/// against a domain and problem's symbols.
inline std::vector<Literal> parse_condition(const std::string& text, const Domain& domain,
                                            const Problem& problem) {
    detail::Sx s = detail::read_single_sx(text);
    detail::SymbolScope scope{&domain, nullptr, &problem};
    std::vector<Literal> out;
    detail::read_gd(s, scope, "condition", out);
    return out;
}

/// Parses one "(name arg1 arg2 ...)" plan line.
inline std::pair<std::string, std::vector<std::string>> parse_action_line(const std::string& line) {
    detail::Sx s = detail::read_single_sx(line);
    if (!s.is_list || s.kids.empty() || s.kids[0].is_list)
        throw ParseError(s.line, s.col, "expected (name args...)");
    std::vector<std::string> args;
    for (size_t i = 1; i < s.kids.size(); ++i) {
        if (s.kids[i].is_list) throw ParseError(s.line, s.col, "nested term in action");
        args.push_back(s.kids[i].sym);
    }
    return {detail::lower(s.kids[0].sym), args};
}

}  // namespace olp::pddl
