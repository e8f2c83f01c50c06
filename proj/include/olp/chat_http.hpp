#pragma once

// Live chat-completions client. Kept out of chat.hpp so offline builds and
// tests never compile the HTTP stack.

#include <cstdlib>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "olp/chat.hpp"

namespace olp::chat {

/// JSON-over-HTTP chat-completions client (messages array in, choice 0 out).
class HttpChatProvider : public ChatProvider {
public:
    explicit HttpChatProvider(ChatProviderConfig config) : config_(std::move(config)) {
        config_.check();
        split_endpoint();
    }

    ChatReply complete(const std::vector<ChatMessage>& messages) override {
        nlohmann::json body;
        body["model"] = config_.model;
        body["temperature"] = config_.temperature;
        body["messages"] = nlohmann::json::array();
        for (const auto& m : messages)
            body["messages"].push_back(
                {{"role", std::string(role_name(m.role))}, {"content", m.content}});

        httplib::Headers headers;
        if (!config_.api_key_env.empty()) {
            const char* key = std::getenv(config_.api_key_env.c_str());
            if (!key)
                throw ProviderError("environment variable " + config_.api_key_env + " is not set");
            headers.emplace("Authorization", std::string("Bearer ") + key);
        }

        auto do_post = [&](auto& client) {
            client.set_read_timeout(120, 0);
            return client.Post(path_, headers, body.dump(), "application/json");
        };
        httplib::Result res = [&] {
            if (scheme_ == "https") {
#ifdef CPPHTTPLIB_OPENSSL_SUPPORT
                httplib::SSLClient client(host_, port_);
                return do_post(client);
#else
                throw ProviderError("https endpoint requires a TLS-enabled build");
#endif
            }
            httplib::Client client(host_, port_);
            return do_post(client);
        }();

        if (!res) throw ProviderError("request to " + config_.endpoint + " failed");
        if (res->status != 200)
            throw ProviderError("endpoint returned HTTP " + std::to_string(res->status) + ": " +
                                res->body.substr(0, 200));
        try {
            const auto doc = nlohmann::json::parse(res->body);
            ChatReply reply;
            reply.content = doc.at("choices").at(0).at("message").at("content").get<std::string>();
            if (doc.contains("usage")) {
                reply.usage.prompt_tokens = doc["usage"].value("prompt_tokens", 0);
                reply.usage.completion_tokens = doc["usage"].value("completion_tokens", 0);
            } else {
                reply.usage = {approx_tokens(messages), approx_tokens(reply.content)};
            }
            return reply;
        } catch (const nlohmann::json::exception& e) {
            throw ProviderError(std::string("malformed completion response: ") + e.what());
        }
    }

private:
    void split_endpoint() {
        std::string rest = config_.endpoint;
        auto scheme_end = rest.find("://");
        scheme_ = scheme_end == std::string::npos ? "http" : rest.substr(0, scheme_end);
        if (scheme_end != std::string::npos) rest = rest.substr(scheme_end + 3);
        auto slash = rest.find('/');
        std::string hostport = slash == std::string::npos ? rest : rest.substr(0, slash);
        path_ = slash == std::string::npos ? "/v1/chat/completions" : rest.substr(slash);
        auto colon = hostport.find(':');
        host_ = colon == std::string::npos ? hostport : hostport.substr(0, colon);
        port_ = colon == std::string::npos ? (scheme_ == "https" ? 443 : 80)
                                           : std::stoi(hostport.substr(colon + 1));
    }

    ChatProviderConfig config_;
    std::string scheme_;
    std::string host_;
    int port_ = 443;
    std::string path_;
};

}  // namespace olp::chat
