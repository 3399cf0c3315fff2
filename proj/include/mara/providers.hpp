#pragma once

#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mara/errors.hpp"

namespace mara {

// One dense embedding. All vectors inside one index share a dimension;
// that is enforced at the index layer.
using EmbeddingVector = std::vector<float>;

struct GenerationRequest {
    std::string prompt;
    std::vector<std::string> attachments;  // region payload refs, window order
    int max_tokens = 512;
    double temperature = 0.0;
};

struct ProviderConfig {
    std::string endpoint;
    std::string model;
    std::string api_key_env = "MARA_API_KEY";
    double timeout_seconds = 30.0;
    int max_retries = 2;
    int retry_backoff_ms = 200;
    int max_inflight = 4;

    void validate() const {
        if (timeout_seconds <= 0) throw InvalidConfig("provider timeout must be > 0");
        if (max_inflight <= 0) throw InvalidConfig("provider max_inflight must be >= 1");
    }
};

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual EmbeddingVector embed(std::string_view content) = 0;
    virtual size_t dim() const = 0;
    virtual std::string id() const = 0;
};

class Generator {
public:
    virtual ~Generator() = default;
    virtual std::string generate(const GenerationRequest& request) = 0;
};

// Deterministic embedder: a unit-norm pseudo-random vector derived from a
// stable hash of the content bytes. Pure function of (content, dim, seed).
class MockEmbedder : public Embedder {
public:
    explicit MockEmbedder(size_t dim = 64, uint64_t seed = 0);
    EmbeddingVector embed(std::string_view content) override;
    size_t dim() const override { return dim_; }
    std::string id() const override;

private:
    size_t dim_;
    uint64_t seed_;
};

// Lookup-table embedder for tests and planted fixtures: exact vectors for
// known contents, mock fallback for everything else.
class StaticEmbedder : public Embedder {
public:
    StaticEmbedder(size_t dim, std::unordered_map<std::string, EmbeddingVector> table,
                   uint64_t fallback_seed = 0);
    EmbeddingVector embed(std::string_view content) override;
    size_t dim() const override { return dim_; }
    std::string id() const override { return "static"; }

private:
    size_t dim_;
    std::unordered_map<std::string, EmbeddingVector> table_;
    MockEmbedder fallback_;
};

// Pops one scripted reply per generate() call; throws ScriptExhausted when
// the queue runs dry. Synchronized so concurrent tests see one queue.
class ScriptedGenerator : public Generator {
public:
    explicit ScriptedGenerator(std::vector<std::string> script);
    std::string generate(const GenerationRequest& request) override;
    size_t remaining() const;
    size_t calls() const;

private:
    mutable std::mutex mu_;
    std::deque<std::string> queue_;
    size_t calls_ = 0;
};

// Deterministic generator keyed off the prompt text: sufficiency prompts
// get "Sufficient", memory prompts an empty keep-list, anything else a
// digest-stamped answer. Lets end-to-end runs execute offline with stable
// output.
class MockGenerator : public Generator {
public:
    std::string generate(const GenerationRequest& request) override;
};

std::unique_ptr<Embedder> make_mock_embedder(size_t dim, uint64_t seed = 0);
std::unique_ptr<Generator> make_scripted_generator(std::vector<std::string> script);

// OpenAI-compatible HTTP providers (POST {endpoint}/v1/embeddings and
// /v1/chat/completions). Bearer token read from config.api_key_env.
std::unique_ptr<Embedder> make_http_embedder(const ProviderConfig& config, size_t expected_dim);
std::unique_ptr<Generator> make_http_generator(const ProviderConfig& config);

}  // namespace mara
