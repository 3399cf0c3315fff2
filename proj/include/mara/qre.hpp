#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mara/index.hpp"
#include "mara/providers.hpp"

namespace mara {

enum class Ablation { full, no_fine, no_coarse, global_only };

std::string to_string(Ablation a);
Ablation ablation_from_string(const std::string& s);

// Mixing weights and attention temperatures for the three granularities.
// The global level gets weight 1 - g_c - g_f, so g_c + g_f must not
// exceed 1.
struct FusionConfig {
    double g_c = 0.2;
    double g_f = 0.1;
    double tau_c = 1.0 / 20.0;
    double tau_f = 1.0 / 20.0;
    Ablation ablation = Ablation::full;

    void validate() const;

    // Gate values after applying the ablation switch.
    double effective_g_c() const {
        return (ablation == Ablation::no_coarse || ablation == Ablation::global_only) ? 0.0 : g_c;
    }
    double effective_g_f() const {
        return (ablation == Ablation::no_fine || ablation == Ablation::global_only) ? 0.0 : g_f;
    }

    bool operator==(const FusionConfig&) const = default;
};

struct AttentionResult {
    std::vector<double> weights;  // nonnegative, sums to 1
    EmbeddingVector attended;
};

struct FusionResult {
    EmbeddingVector fused;
    std::vector<double> coarse_attention;
    std::vector<double> fine_attention;  // flattened over all m*k patches
    double gate_c = 0.0;
    double gate_f = 0.0;
};

struct ScoredDocument {
    std::string doc_id;
    double score = 0.0;
    std::vector<double> coarse_attention;
    std::vector<double> fine_attention;
    double gate_c = 0.0;
    double gate_f = 0.0;
    EmbeddingVector fused;
};

struct RetrievalResult {
    std::string query_id;
    int k_requested = 0;
    std::vector<ScoredDocument> ranked;  // descending score, ties by ascending doc_id
};

// Softmax over dot(query, region_i) / tau (max-subtracted), then the
// weighted sum of the region vectors. Accumulation in double.
AttentionResult region_attention(const EmbeddingVector& query_vec,
                                 std::span<const EmbeddingVector> region_vecs, double tau);

// fused = g_c * coarse_attended + g_f * fine_attended + (1-g_c-g_f) * global,
// with fine attention pooled jointly over all m*k patches.
FusionResult fuse(const EmbeddingVector& query_vec, const HierarchicalEmbeddings& hier,
                  const FusionConfig& config);

// Cosine similarity, clamped to [-1, 1].
double score(const EmbeddingVector& query_vec, const EmbeddingVector& fused_vec);

// Embeds the query once, fuses and scores every indexed document, and
// returns the top-k. Scoring fans out across threads; the result is
// independent of worker count.
RetrievalResult retrieve(const std::string& query, const EmbeddingIndex& index, int k,
                         const FusionConfig& config, Embedder& embedder,
                         const std::string& query_id = "");

// Same, for a pre-embedded query.
RetrievalResult retrieve_with_vector(const EmbeddingVector& query_vec,
                                     const EmbeddingIndex& index, int k,
                                     const FusionConfig& config, const std::string& query_id = "");

// Learned-gate hook: sigmoid(W [query; mean of all region vectors]).
// Weights come from outside; there is no training path here.
struct GateModel {
    // Two rows of length 2*dim: row 0 -> g_c, row 1 -> g_f.
    std::vector<double> w_coarse;
    std::vector<double> w_fine;

    static GateModel load(const std::string& path);
};

std::pair<double, double> gate_predictor(const EmbeddingVector& query_vec,
                                         const HierarchicalEmbeddings& hier,
                                         const GateModel* model);

}  // namespace mara
