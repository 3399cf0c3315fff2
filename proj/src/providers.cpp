#include "mara/providers.hpp"

#include <cmath>

#include "mara/detail/hash.hpp"

namespace mara {

MockEmbedder::MockEmbedder(size_t dim, uint64_t seed) : dim_(dim), seed_(seed) {
    if (dim_ == 0) throw InvalidConfig("embedder dim must be >= 1");
}

EmbeddingVector MockEmbedder::embed(std::string_view content) {
    if (content.empty()) throw EmptyContent("cannot embed empty content");
    detail::SplitMix64 rng(detail::fnv1a64(content) ^ seed_);
    EmbeddingVector v(dim_);
    double norm_sq = 0.0;
    for (auto& x : v) {
        double u = rng.next_signed_unit();
        x = static_cast<float>(u);
        norm_sq += u * u;
    }
    // Unit-normalize so dot products stay in a controlled range. A zero
    // vector is unreachable for dim >= 1 short of astronomically unlikely
    // all-zero draws; guard anyway.
    double norm = std::sqrt(norm_sq);
    if (norm == 0.0) {
        v[0] = 1.0f;
        return v;
    }
    for (auto& x : v) x = static_cast<float>(x / norm);
    return v;
}

std::string MockEmbedder::id() const {
    return "mock-d" + std::to_string(dim_) + "-s" + std::to_string(seed_);
}

StaticEmbedder::StaticEmbedder(size_t dim, std::unordered_map<std::string, EmbeddingVector> table,
                               uint64_t fallback_seed)
    : dim_(dim), table_(std::move(table)), fallback_(dim, fallback_seed) {
    for (const auto& [key, vec] : table_) {
        if (vec.size() != dim_) {
            throw DimensionMismatch("static embedding for '" + key + "' has dim " +
                                    std::to_string(vec.size()) + ", expected " +
                                    std::to_string(dim_));
        }
    }
}

EmbeddingVector StaticEmbedder::embed(std::string_view content) {
    if (content.empty()) throw EmptyContent("cannot embed empty content");
    auto it = table_.find(std::string(content));
    if (it != table_.end()) return it->second;
    return fallback_.embed(content);
}

ScriptedGenerator::ScriptedGenerator(std::vector<std::string> script)
    : queue_(script.begin(), script.end()) {}

std::string ScriptedGenerator::generate(const GenerationRequest& request) {
    if (request.prompt.empty()) throw InvalidArgument("generation prompt must be non-empty");
    std::lock_guard<std::mutex> lock(mu_);
    if (queue_.empty()) throw ScriptExhausted("script exhausted");
    std::string next = std::move(queue_.front());
    queue_.pop_front();
    ++calls_;
    return next;
}

size_t ScriptedGenerator::remaining() const {
    std::lock_guard<std::mutex> lock(mu_);
    return queue_.size();
}

size_t ScriptedGenerator::calls() const {
    std::lock_guard<std::mutex> lock(mu_);
    return calls_;
}

std::string MockGenerator::generate(const GenerationRequest& request) {
    if (request.prompt.empty()) throw InvalidArgument("generation prompt must be non-empty");
    const std::string& p = request.prompt;
    if (p.find("Only output one word") != std::string::npos) {
        return "Sufficient";
    }
    if (p.find("retrieval memory buffer") != std::string::npos) {
        return "- **Keep in Memory:** []\n- **Remove from Memory:** []";
    }
    return "mock-answer-" + detail::hex64(detail::fnv1a64(p));
}

std::unique_ptr<Embedder> make_mock_embedder(size_t dim, uint64_t seed) {
    return std::make_unique<MockEmbedder>(dim, seed);
}

std::unique_ptr<Generator> make_scripted_generator(std::vector<std::string> script) {
    return std::make_unique<ScriptedGenerator>(std::move(script));
}

}  // namespace mara
