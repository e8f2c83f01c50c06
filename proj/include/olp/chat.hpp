#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "olp/common.hpp"

namespace olp::chat {

enum class Role { System, User, Assistant };

inline std::string_view role_name(Role r) {
    switch (r) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
    }
    return "?";
}

inline Role role_from_name(std::string_view name) {
    if (name == "system") return Role::System;
    if (name == "user") return Role::User;
    if (name == "assistant") return Role::Assistant;
    throw Error("unknown chat role \"" + std::string(name) + "\"");
}

struct ChatMessage {
    Role role;
    std::string content;
};

struct ChatUsage {
    int prompt_tokens = 0;
    int completion_tokens = 0;

    int total() const { return prompt_tokens + completion_tokens; }
    ChatUsage& operator+=(const ChatUsage& o) {
        prompt_tokens += o.prompt_tokens;
        completion_tokens += o.completion_tokens;
        return *this;
    }
};

struct ChatReply {
    std::string content;
    ChatUsage usage;
};

class ProviderError : public Error {
public:
    explicit ProviderError(const std::string& what) : Error("provider: " + what) {}
};

/// Endpoint/model/temperature surface for live providers. Credentials are
/// named indirectly: `api_key_env` holds the environment variable to read.
struct ChatProviderConfig {
    std::string endpoint = "https://api.openai.com/v1/chat/completions";
    std::string model = "chatgpt-4o-latest";
    double temperature = 0.0;
    std::string api_key_env = "OPENAI_API_KEY";

    void check() const {
        if (temperature < 0) throw Error("temperature must be >= 0");
    }
};

/// The token-count approximation used wherever no real usage is reported.
inline int approx_tokens(std::string_view text) {
    return static_cast<int>((text.size() + 3) / 4);
}

inline int approx_tokens(const std::vector<ChatMessage>& messages) {
    int n = 0;
    for (const auto& m : messages) n += approx_tokens(m.content);
    return n;
}

/// Stable digest of a full message list: roles and whitespace-normalized
/// contents, FNV-1a hashed. Fixture files are keyed by this.
inline std::string prompt_digest(const std::vector<ChatMessage>& messages) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& m : messages) {
        h = olp::detail::fnv1a64(role_name(m.role), h);
        h = olp::detail::fnv1a64(":", h);
        h = olp::detail::fnv1a64(olp::detail::normalize_ws(m.content), h);
        h = olp::detail::fnv1a64("\n", h);
    }
    return olp::detail::hex64(h);
}

// ---------------------------------------------------------------------------
// Transcript

/// Ordered record of one conversation plus accumulated token usage.
struct ChatTranscript {
    std::vector<ChatMessage> messages;
    ChatUsage usage;

    void append(Role role, std::string content) { messages.push_back({role, std::move(content)}); }

    /// Structural sanity: a system message only leads, and assistant messages
    /// only ever answer a preceding user message. Consecutive user turns are
    /// legal (the LLM-Planner prompt shape uses them).
    bool well_formed() const {
        for (size_t i = 0; i < messages.size(); ++i) {
            if (messages[i].role == Role::System && i != 0) return false;
            if (messages[i].role == Role::Assistant &&
                (i == 0 || messages[i - 1].role != Role::User))
                return false;
        }
        return true;
    }

    /// Strict user/assistant alternation after the optional system prefix.
    bool strictly_alternating() const {
        Role expected = Role::User;
        for (size_t i = 0; i < messages.size(); ++i) {
            if (i == 0 && messages[i].role == Role::System) continue;
            if (messages[i].role != expected) return false;
            expected = expected == Role::User ? Role::Assistant : Role::User;
        }
        return true;
    }
};

// ---------------------------------------------------------------------------
// Provider interface

class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    virtual ChatReply complete(const std::vector<ChatMessage>& messages) = 0;
};

// ---------------------------------------------------------------------------
// Fixtures

struct FixtureEntry {
    std::string reply;
    int prompt_tokens = 0;
    int completion_tokens = 0;
};

/// Map from prompt digest to a canned assistant reply with recorded usage.
class Fixture {
public:
    void insert(const std::string& digest, FixtureEntry entry) {
        auto it = entries_.find(digest);
        if (it != entries_.end() && it->second.reply != entry.reply)
            throw Error("fixture digest collision for " + digest);
        entries_[digest] = std::move(entry);
    }

    const FixtureEntry* find(const std::string& digest) const {
        auto it = entries_.find(digest);
        return it == entries_.end() ? nullptr : &it->second;
    }

    size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    void merge(const Fixture& other) {
        for (const auto& [digest, entry] : other.entries_) insert(digest, entry);
    }

    static Fixture from_json(const std::string& text) {
        Fixture f;
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& e) {
            throw Error(std::string("fixture: ") + e.what());
        }
        for (const auto& [digest, je] : doc.items()) {
            FixtureEntry e;
            e.reply = je.at("reply").get<std::string>();
            e.prompt_tokens = je.value("prompt_tokens", 0);
            e.completion_tokens = je.value("completion_tokens", 0);
            f.insert(digest, std::move(e));
        }
        return f;
    }

    std::string to_json() const {
        nlohmann::ordered_json doc = nlohmann::ordered_json::object();
        for (const auto& [digest, e] : entries_) {
            doc[digest] = {{"reply", e.reply},
                           {"prompt_tokens", e.prompt_tokens},
                           {"completion_tokens", e.completion_tokens}};
        }
        return doc.dump(4) + "\n";
    }

    static Fixture load_file(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw Error("cannot open fixture file " + path.string());
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return from_json(text);
    }

    /// Loads and merges every *.json file in the directory.
    static Fixture load_dir(const std::filesystem::path& dir) {
        if (!std::filesystem::is_directory(dir))
            throw Error("fixture directory " + dir.string() + " does not exist");
        std::vector<std::filesystem::path> files;
        for (const auto& e : std::filesystem::directory_iterator(dir))
            if (e.path().extension() == ".json") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        Fixture f;
        for (const auto& p : files) f.merge(load_file(p));
        return f;
    }

    void save_file(const std::filesystem::path& path) const {
        std::ofstream out(path);
        if (!out) throw Error("cannot write fixture file " + path.string());
        out << to_json();
    }

private:
    std::map<std::string, FixtureEntry> entries_;
};

// ---------------------------------------------------------------------------
// Offline providers

/// Answers every prompt from recorded fixtures; misses are hard errors so a
/// stale fixture set fails loudly instead of silently diverging.
class ReplayProvider : public ChatProvider {
public:
    explicit ReplayProvider(Fixture fixture) : fixture_(std::move(fixture)) {}

    ChatReply complete(const std::vector<ChatMessage>& messages) override {
        const std::string digest = prompt_digest(messages);
        const FixtureEntry* e = fixture_.find(digest);
        if (!e) {
            std::string tail = messages.empty() ? "" : messages.back().content.substr(0, 80);
            throw ProviderError("no fixture for digest " + digest + " (last turn: \"" + tail +
                                "...\")");
        }
        return {e->reply, {e->prompt_tokens, e->completion_tokens}};
    }

private:
    Fixture fixture_;
};

/// Pass-through wrapper that records every exchange into a Fixture.
class RecordingProvider : public ChatProvider {
public:
    RecordingProvider(ChatProvider& inner, Fixture& sink) : inner_(inner), sink_(sink) {}

    ChatReply complete(const std::vector<ChatMessage>& messages) override {
        ChatReply reply = inner_.complete(messages);
        std::lock_guard<std::mutex> lock(mutex_);
        sink_.insert(prompt_digest(messages),
                     {reply.content, reply.usage.prompt_tokens, reply.usage.completion_tokens});
        return reply;
    }

private:
    ChatProvider& inner_;
    Fixture& sink_;
    std::mutex mutex_;
};

/// Replies from a fixed queue; used in tests and when authoring fixtures.
/// Token usage is approximated as ceil(chars/4).
class ScriptedProvider : public ChatProvider {
public:
    ScriptedProvider() = default;
    explicit ScriptedProvider(std::vector<std::string> replies) : replies_(std::move(replies)) {}

    void push(std::string reply) { replies_.push_back(std::move(reply)); }

    ChatReply complete(const std::vector<ChatMessage>& messages) override {
        std::lock_guard<std::mutex> lock(mutex_);
        calls_.push_back(messages);
        if (next_ >= replies_.size()) throw ProviderError("scripted reply queue exhausted");
        ChatReply reply;
        reply.content = replies_[next_++];
        reply.usage = {approx_tokens(messages), approx_tokens(reply.content)};
        return reply;
    }

    const std::vector<std::vector<ChatMessage>>& calls() const { return calls_; }

private:
    std::vector<std::string> replies_;
    size_t next_ = 0;
    std::vector<std::vector<ChatMessage>> calls_;
    std::mutex mutex_;
};

}  // namespace olp::chat
