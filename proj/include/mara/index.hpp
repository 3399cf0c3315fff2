#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "mara/corpus.hpp"
#include "mara/providers.hpp"

namespace mara {

// Per-document embedding set at the three granularities. coarse has m
// entries, fine has m lists of k entries, region order matching decompose.
struct HierarchicalEmbeddings {
    std::string doc_id;
    EmbeddingVector global;
    std::vector<EmbeddingVector> coarse;
    std::vector<std::vector<EmbeddingVector>> fine;

    bool operator==(const HierarchicalEmbeddings&) const = default;
};

class EmbeddingIndex {
public:
    EmbeddingIndex(uint32_t dim, uint32_t m, uint32_t k, std::string embedder_id,
                   uint64_t built_unix_ms, std::vector<HierarchicalEmbeddings> docs);

    uint32_t dim() const { return dim_; }
    uint32_t m() const { return m_; }
    uint32_t k() const { return k_; }
    const std::string& embedder_id() const { return embedder_id_; }
    uint64_t built_unix_ms() const { return built_unix_ms_; }

    size_t size() const { return docs_.size(); }
    const std::vector<HierarchicalEmbeddings>& documents() const { return docs_; }
    const HierarchicalEmbeddings* find(const std::string& doc_id) const;

    // Stored-order scan.
    auto begin() const { return docs_.begin(); }
    auto end() const { return docs_.end(); }

    bool operator==(const EmbeddingIndex& other) const;

private:
    uint32_t dim_;
    uint32_t m_;
    uint32_t k_;
    std::string embedder_id_;
    uint64_t built_unix_ms_;
    std::vector<HierarchicalEmbeddings> docs_;
    std::unordered_map<std::string, size_t> by_id_;
};

// Embeds every region of every document (exactly (1+m+m*k) * |corpus|
// embed calls, canonical region order). Embedding calls fan out across
// threads bounded by max_inflight; output is independent of thread count.
EmbeddingIndex build_index(const Corpus& corpus, const DecompositionConfig& config,
                           Embedder& embedder, int max_inflight = 8);

// Binary format: magic "MARAIDX1"; u32 dim, m, k, doc_count; u32 embedder
// id length + bytes; u64 build timestamp (ms); per document u32 id length
// + bytes then (1+m+m*k)*dim little-endian f32s in canonical region
// order; trailing CRC32 of everything before it.
void save_index(const EmbeddingIndex& index, const std::string& path);
EmbeddingIndex load_index(const std::string& path);

std::string serialize_index(const EmbeddingIndex& index);
EmbeddingIndex deserialize_index(const std::string& bytes);

}  // namespace mara
