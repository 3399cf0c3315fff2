#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "mara/providers.hpp"

using json = nlohmann::json;

namespace mara {

namespace {

std::string base64_encode(std::string_view bytes) {
    static const char* alphabet =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    size_t i = 0;
    while (i + 3 <= bytes.size()) {
        uint32_t n = (static_cast<unsigned char>(bytes[i]) << 16) |
                     (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                     static_cast<unsigned char>(bytes[i + 2]);
        out.push_back(alphabet[(n >> 18) & 63]);
        out.push_back(alphabet[(n >> 12) & 63]);
        out.push_back(alphabet[(n >> 6) & 63]);
        out.push_back(alphabet[n & 63]);
        i += 3;
    }
    size_t rest = bytes.size() - i;
    if (rest == 1) {
        uint32_t n = static_cast<unsigned char>(bytes[i]) << 16;
        out.push_back(alphabet[(n >> 18) & 63]);
        out.push_back(alphabet[(n >> 12) & 63]);
        out += "==";
    } else if (rest == 2) {
        uint32_t n = (static_cast<unsigned char>(bytes[i]) << 16) |
                     (static_cast<unsigned char>(bytes[i + 1]) << 8);
        out.push_back(alphabet[(n >> 18) & 63]);
        out.push_back(alphabet[(n >> 12) & 63]);
        out.push_back(alphabet[(n >> 6) & 63]);
        out.push_back('=');
    }
    return out;
}

// endpoint = scheme://host[:port][/prefix]
struct Endpoint {
    std::string base;    // scheme://host:port
    std::string prefix;  // "" or "/something"
};

Endpoint split_endpoint(const std::string& endpoint) {
    auto scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos) {
        throw InvalidConfig("provider endpoint '" + endpoint + "' must include a scheme");
    }
    auto path_start = endpoint.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {endpoint, ""};
    std::string prefix = endpoint.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {endpoint.substr(0, path_start), prefix};
}

bool looks_like_context_overflow(const std::string& body) {
    json j = json::parse(body, nullptr, false);
    if (!j.is_discarded() && j.contains("error")) {
        const auto& e = j["error"];
        if (e.is_object()) {
            if (e.value("code", "") == "context_length_exceeded") return true;
            std::string msg = e.value("message", "");
            if (msg.find("context length") != std::string::npos ||
                msg.find("maximum context") != std::string::npos) {
                return true;
            }
        }
    }
    return body.find("context_length_exceeded") != std::string::npos;
}

// Shared POST-with-retry plumbing for both providers. Bounded in-flight
// requests via a simple counting gate.
class HttpClientBase {
public:
    explicit HttpClientBase(const ProviderConfig& config) : config_(config) {
        config_.validate();
        endpoint_ = split_endpoint(config_.endpoint);
        if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
            bearer_ = key;
        }
    }

protected:
    json post_json(const std::string& path, const json& body) const {
        InflightGate gate(inflight_, config_.max_inflight, inflight_mu_, inflight_cv_);
        std::string last_error;
        for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
            if (attempt > 0) {
                auto delay = std::chrono::milliseconds(
                    static_cast<long>(config_.retry_backoff_ms) * (1L << (attempt - 1)));
                std::this_thread::sleep_for(delay);
            }
            httplib::Client client(endpoint_.base);
            client.set_connection_timeout(std::chrono::duration<double>(config_.timeout_seconds));
            client.set_read_timeout(std::chrono::duration<double>(config_.timeout_seconds));
            httplib::Headers headers;
            if (!bearer_.empty()) headers.emplace("Authorization", "Bearer " + bearer_);
            auto res = client.Post(endpoint_.prefix + path, headers, body.dump(),
                                   "application/json");
            if (!res) {
                last_error = "transport error: " + httplib::to_string(res.error());
                continue;  // connection-level failure, retry
            }
            if (res->status >= 200 && res->status < 300) {
                json parsed = json::parse(res->body, nullptr, false);
                if (parsed.is_discarded()) {
                    throw ProviderUnavailable("provider returned unparseable JSON from " + path);
                }
                return parsed;
            }
            if (res->status == 400 && looks_like_context_overflow(res->body)) {
                throw ContextOverflow("provider rejected oversized input on " + path);
            }
            if (res->status >= 400 && res->status < 500) {
                throw ProviderUnavailable("provider returned HTTP " +
                                          std::to_string(res->status) + " on " + path + ": " +
                                          res->body.substr(0, 200));
            }
            last_error = "HTTP " + std::to_string(res->status);
        }
        throw ProviderUnavailable("provider unreachable after " +
                                  std::to_string(config_.max_retries + 1) + " attempts on " +
                                  path + " (" + last_error + ")");
    }

    ProviderConfig config_;
    Endpoint endpoint_;
    std::string bearer_;

private:
    struct InflightGate {
        InflightGate(int& count, int limit, std::mutex& mu, std::condition_variable& cv)
            : count_(count), mu_(mu), cv_(cv) {
            std::unique_lock<std::mutex> lock(mu_);
            cv_.wait(lock, [&] { return count_ < limit; });
            ++count_;
        }
        ~InflightGate() {
            {
                std::lock_guard<std::mutex> lock(mu_);
                --count_;
            }
            cv_.notify_one();
        }
        int& count_;
        std::mutex& mu_;
        std::condition_variable& cv_;
    };

    mutable int inflight_ = 0;
    mutable std::mutex inflight_mu_;
    mutable std::condition_variable inflight_cv_;
};

class HttpEmbedder : public Embedder, private HttpClientBase {
public:
    HttpEmbedder(const ProviderConfig& config, size_t expected_dim)
        : HttpClientBase(config), expected_dim_(expected_dim) {}

    EmbeddingVector embed(std::string_view content) override {
        if (content.empty()) throw EmptyContent("cannot embed empty content");
        json body;
        body["model"] = config_.model;
        body["input"] = json::array({std::string(content)});
        json resp = post_json("/v1/embeddings", body);
        if (!resp.contains("data") || !resp["data"].is_array() || resp["data"].empty() ||
            !resp["data"][0].contains("embedding")) {
            throw ProviderUnavailable("embeddings response missing data[0].embedding");
        }
        EmbeddingVector v;
        for (const auto& x : resp["data"][0]["embedding"]) {
            v.push_back(x.get<float>());
        }
        if (expected_dim_ != 0 && v.size() != expected_dim_) {
            throw DimensionMismatch("provider returned dim " + std::to_string(v.size()) +
                                    ", expected " + std::to_string(expected_dim_));
        }
        return v;
    }

    size_t dim() const override { return expected_dim_; }
    std::string id() const override { return "http:" + config_.model; }

private:
    size_t expected_dim_;
};

class HttpGenerator : public Generator, private HttpClientBase {
public:
    explicit HttpGenerator(const ProviderConfig& config) : HttpClientBase(config) {}

    std::string generate(const GenerationRequest& request) override {
        if (request.prompt.empty()) throw InvalidArgument("generation prompt must be non-empty");
        json content;
        if (request.attachments.empty()) {
            content = request.prompt;
        } else {
            content = json::array();
            content.push_back({{"type", "text"}, {"text", request.prompt}});
            for (const auto& ref : request.attachments) {
                content.push_back(
                    {{"type", "image_url"},
                     {"image_url", {{"url", "data:image/png;base64," + load_b64(ref)}}}});
            }
        }
        json body;
        body["model"] = config_.model;
        body["messages"] = json::array({json{{"role", "user"}, {"content", content}}});
        body["temperature"] = request.temperature;
        body["max_tokens"] = request.max_tokens;
        json resp = post_json("/v1/chat/completions", body);
        if (!resp.contains("choices") || !resp["choices"].is_array() || resp["choices"].empty()) {
            throw ProviderUnavailable("chat response missing choices");
        }
        std::string text = resp["choices"][0].value("message", json::object()).value("content", "");
        if (text.empty()) throw ProviderUnavailable("chat response has empty content");
        return text;
    }

private:
    static std::string load_b64(const std::string& ref) {
        auto hash_pos = ref.find('#');
        std::string path = ref.substr(0, hash_pos == std::string::npos ? ref.size() : hash_pos);
        std::ifstream in(path, std::ios::binary);
        if (!in.good()) throw UnresolvablePayload("cannot read attachment '" + path + "'");
        std::ostringstream buf;
        buf << in.rdbuf();
        return base64_encode(buf.str());
    }
};

}  // namespace

std::unique_ptr<Embedder> make_http_embedder(const ProviderConfig& config, size_t expected_dim) {
    return std::make_unique<HttpEmbedder>(config, expected_dim);
}

std::unique_ptr<Generator> make_http_generator(const ProviderConfig& config) {
    return std::make_unique<HttpGenerator>(config);
}

}  // namespace mara
