#include "mara/qre.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "json.hpp"

#include "mara/detail/parallel.hpp"

namespace mara {

std::string to_string(Ablation a) {
    switch (a) {
        case Ablation::full: return "full";
        case Ablation::no_fine: return "no_fine";
        case Ablation::no_coarse: return "no_coarse";
        case Ablation::global_only: return "global_only";
    }
    return "?";
}

Ablation ablation_from_string(const std::string& s) {
    if (s == "full") return Ablation::full;
    if (s == "no_fine") return Ablation::no_fine;
    if (s == "no_coarse") return Ablation::no_coarse;
    if (s == "global_only") return Ablation::global_only;
    throw InvalidConfig("unknown ablation '" + s + "'");
}

void FusionConfig::validate() const {
    if (!(g_c >= 0.0 && g_c <= 1.0)) throw InvalidConfig("g_c must be in [0,1]");
    if (!(g_f >= 0.0 && g_f <= 1.0)) throw InvalidConfig("g_f must be in [0,1]");
    if (g_c + g_f > 1.0) {
        throw InvalidConfig("gate sum g_c + g_f = " + std::to_string(g_c + g_f) +
                            " exceeds 1 (global weight would be negative)");
    }
    if (!(tau_c > 0.0)) throw NonPositiveTemperature("tau_c must be > 0");
    if (!(tau_f > 0.0)) throw NonPositiveTemperature("tau_f must be > 0");
}

namespace {

double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * b[i];
    return acc;
}

double norm(const EmbeddingVector& a) {
    double acc = 0.0;
    for (float x : a) acc += static_cast<double>(x) * x;
    return std::sqrt(acc);
}

}  // namespace

AttentionResult region_attention(const EmbeddingVector& query_vec,
                                 std::span<const EmbeddingVector> region_vecs, double tau) {
    if (region_vecs.empty()) throw InvalidArgument("region_attention needs at least one region");
    if (!(tau > 0.0)) throw NonPositiveTemperature("attention temperature must be > 0");
    for (const auto& r : region_vecs) {
        if (r.size() != query_vec.size()) {
            throw DimensionMismatch("region dim " + std::to_string(r.size()) +
                                    " != query dim " + std::to_string(query_vec.size()));
        }
    }

    const size_t n = region_vecs.size();
    std::vector<double> logits(n);
    double max_logit = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < n; ++i) {
        logits[i] = dot(query_vec, region_vecs[i]) / tau;
        max_logit = std::max(max_logit, logits[i]);
    }

    AttentionResult out;
    out.weights.resize(n);
    double denom = 0.0;
    for (size_t i = 0; i < n; ++i) {
        out.weights[i] = std::exp(logits[i] - max_logit);
        denom += out.weights[i];
    }
    for (auto& w : out.weights) w /= denom;

    std::vector<double> acc(query_vec.size(), 0.0);
    for (size_t i = 0; i < n; ++i) {
        const auto& r = region_vecs[i];
        for (size_t d = 0; d < acc.size(); ++d) acc[d] += out.weights[i] * r[d];
    }
    out.attended.resize(acc.size());
    for (size_t d = 0; d < acc.size(); ++d) out.attended[d] = static_cast<float>(acc[d]);
    return out;
}

FusionResult fuse(const EmbeddingVector& query_vec, const HierarchicalEmbeddings& hier,
                  const FusionConfig& config) {
    config.validate();
    if (hier.global.size() != query_vec.size()) {
        throw DimensionMismatch("document dim " + std::to_string(hier.global.size()) +
                                " != query dim " + std::to_string(query_vec.size()));
    }

    AttentionResult coarse = region_attention(query_vec, hier.coarse, config.tau_c);

    // Fine attention pools jointly over all m*k patches.
    std::vector<EmbeddingVector> flat_fine;
    flat_fine.reserve(hier.fine.size() * (hier.fine.empty() ? 0 : hier.fine[0].size()));
    for (const auto& group : hier.fine) {
        for (const auto& f : group) flat_fine.push_back(f);
    }
    AttentionResult fine = region_attention(query_vec, flat_fine, config.tau_f);

    const double gc = config.effective_g_c();
    const double gf = config.effective_g_f();
    const double gg = 1.0 - gc - gf;

    FusionResult out;
    out.coarse_attention = std::move(coarse.weights);
    out.fine_attention = std::move(fine.weights);
    out.gate_c = gc;
    out.gate_f = gf;
    out.fused.resize(query_vec.size());
    for (size_t d = 0; d < out.fused.size(); ++d) {
        double v = gc * coarse.attended[d] + gf * fine.attended[d] +
                   gg * static_cast<double>(hier.global[d]);
        out.fused[d] = static_cast<float>(v);
    }
    return out;
}

double score(const EmbeddingVector& query_vec, const EmbeddingVector& fused_vec) {
    if (query_vec.size() != fused_vec.size()) {
        throw DimensionMismatch("cosine needs equal dims, got " +
                                std::to_string(query_vec.size()) + " and " +
                                std::to_string(fused_vec.size()));
    }
    double nq = norm(query_vec);
    double nf = norm(fused_vec);
    if (nq == 0.0 || nf == 0.0) throw ZeroVector("cosine of a zero vector is undefined");
    double s = dot(query_vec, fused_vec) / (nq * nf);
    return std::clamp(s, -1.0, 1.0);
}

RetrievalResult retrieve_with_vector(const EmbeddingVector& query_vec,
                                     const EmbeddingIndex& index, int k,
                                     const FusionConfig& config, const std::string& query_id) {
    config.validate();
    if (k < 1) throw InvalidArgument("k must be >= 1");
    if (index.size() == 0) throw EmptyIndex("cannot retrieve from an empty index");
    if (query_vec.size() != index.dim()) {
        throw DimensionMismatch("query dim " + std::to_string(query_vec.size()) +
                                " != index dim " + std::to_string(index.dim()));
    }

    const auto& docs = index.documents();
    std::vector<ScoredDocument> scored(docs.size());
    detail::parallel_for(docs.size(), 0, [&](size_t i) {
        FusionResult f = fuse(query_vec, docs[i], config);
        ScoredDocument& sd = scored[i];
        sd.doc_id = docs[i].doc_id;
        sd.score = score(query_vec, f.fused);
        sd.coarse_attention = std::move(f.coarse_attention);
        sd.fine_attention = std::move(f.fine_attention);
        sd.gate_c = f.gate_c;
        sd.gate_f = f.gate_f;
        sd.fused = std::move(f.fused);
    });

    std::sort(scored.begin(), scored.end(), [](const ScoredDocument& a, const ScoredDocument& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    });
    if (scored.size() > static_cast<size_t>(k)) scored.resize(static_cast<size_t>(k));

    RetrievalResult out;
    out.query_id = query_id;
    out.k_requested = k;
    out.ranked = std::move(scored);
    return out;
}

RetrievalResult retrieve(const std::string& query, const EmbeddingIndex& index, int k,
                         const FusionConfig& config, Embedder& embedder,
                         const std::string& query_id) {
    if (query.empty()) throw EmptyContent("query must be non-empty");
    EmbeddingVector qv = embedder.embed(query);
    return retrieve_with_vector(qv, index, k, config, query_id);
}

GateModel GateModel::load(const std::string& path) {
    std::ifstream in(path);
    if (!in.good()) throw IoError("cannot open gate model '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("gate model: ") + e.what());
    }
    GateModel model;
    try {
        model.w_coarse = j.at("w_coarse").get<std::vector<double>>();
        model.w_fine = j.at("w_fine").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("gate model: ") + e.what());
    }
    if (model.w_coarse.size() != model.w_fine.size() || model.w_coarse.empty()) {
        throw InvalidConfig("gate model rows must be non-empty and equal length");
    }
    return model;
}

std::pair<double, double> gate_predictor(const EmbeddingVector& query_vec,
                                         const HierarchicalEmbeddings& hier,
                                         const GateModel* model) {
    if (!model) throw NoGateModel("no gate model configured; supply weights to use learned gates");

    // Mean pooling over all 1 + m + m*k region vectors.
    const size_t dim = hier.global.size();
    std::vector<double> agg(dim, 0.0);
    size_t count = 0;
    auto add = [&](const EmbeddingVector& v) {
        for (size_t d = 0; d < dim; ++d) agg[d] += v[d];
        ++count;
    };
    add(hier.global);
    for (const auto& c : hier.coarse) add(c);
    for (const auto& group : hier.fine) {
        for (const auto& f : group) add(f);
    }
    for (auto& x : agg) x /= static_cast<double>(count);

    if (model->w_coarse.size() != query_vec.size() + dim) {
        throw DimensionMismatch("gate model expects input dim " +
                                std::to_string(model->w_coarse.size()) + ", got " +
                                std::to_string(query_vec.size() + dim));
    }

    auto affine = [&](const std::vector<double>& w) {
        double acc = 0.0;
        for (size_t d = 0; d < query_vec.size(); ++d) acc += w[d] * query_vec[d];
        for (size_t d = 0; d < dim; ++d) acc += w[query_vec.size() + d] * agg[d];
        return 1.0 / (1.0 + std::exp(-acc));
    };
    return {affine(model->w_coarse), affine(model->w_fine)};
}

}  // namespace mara
