#include "mara/index.hpp"

#include <chrono>
#include <fstream>

#include "mara/detail/binio.hpp"
#include "mara/detail/hash.hpp"
#include "mara/detail/parallel.hpp"

namespace mara {

namespace {
constexpr char kMagic[8] = {'M', 'A', 'R', 'A', 'I', 'D', 'X', '1'};
}

EmbeddingIndex::EmbeddingIndex(uint32_t dim, uint32_t m, uint32_t k, std::string embedder_id,
                               uint64_t built_unix_ms, std::vector<HierarchicalEmbeddings> docs)
    : dim_(dim),
      m_(m),
      k_(k),
      embedder_id_(std::move(embedder_id)),
      built_unix_ms_(built_unix_ms),
      docs_(std::move(docs)) {
    if (dim_ == 0) throw InvalidArgument("index dim must be >= 1");
    if (m_ == 0 || k_ == 0) throw InvalidArgument("index m and k must be >= 1");
    for (size_t d = 0; d < docs_.size(); ++d) {
        const auto& h = docs_[d];
        if (h.doc_id.empty()) throw InvalidArgument("index entry " + std::to_string(d) + " has empty doc id");
        if (!by_id_.emplace(h.doc_id, d).second) {
            throw DuplicateId("duplicate doc id '" + h.doc_id + "' in index");
        }
        if (h.global.size() != dim_ || h.coarse.size() != m_ || h.fine.size() != m_) {
            throw DimensionMismatch("entry '" + h.doc_id + "' violates index shape (dim=" +
                                    std::to_string(dim_) + ", m=" + std::to_string(m_) + ")");
        }
        for (const auto& c : h.coarse) {
            if (c.size() != dim_) throw DimensionMismatch("coarse vector dim mismatch in '" + h.doc_id + "'");
        }
        for (const auto& group : h.fine) {
            if (group.size() != k_) throw DimensionMismatch("fine group size mismatch in '" + h.doc_id + "'");
            for (const auto& f : group) {
                if (f.size() != dim_) throw DimensionMismatch("fine vector dim mismatch in '" + h.doc_id + "'");
            }
        }
    }
}

const HierarchicalEmbeddings* EmbeddingIndex::find(const std::string& doc_id) const {
    auto it = by_id_.find(doc_id);
    return it == by_id_.end() ? nullptr : &docs_[it->second];
}

bool EmbeddingIndex::operator==(const EmbeddingIndex& other) const {
    return dim_ == other.dim_ && m_ == other.m_ && k_ == other.k_ &&
           embedder_id_ == other.embedder_id_ && built_unix_ms_ == other.built_unix_ms_ &&
           docs_ == other.docs_;
}

EmbeddingIndex build_index(const Corpus& corpus, const DecompositionConfig& config,
                           Embedder& embedder, int max_inflight) {
    config.validate();
    if (corpus.empty()) throw InvalidArgument("cannot build an index from an empty corpus");
    if (max_inflight <= 0) throw InvalidArgument("max_inflight must be >= 1");

    const uint32_t m = static_cast<uint32_t>(config.m());
    const uint32_t k = static_cast<uint32_t>(config.k());
    const size_t per_doc = static_cast<size_t>(config.regions_per_document());

    std::vector<HierarchicalEmbeddings> entries;
    entries.reserve(corpus.size());

    for (const auto& doc : corpus.documents()) {
        std::vector<Region> regions = decompose(doc, config);
        auto report = validate_hierarchy(regions, config);
        if (!report.ok()) {
            throw InvalidConfig("decomposition of '" + doc.id + "' is inconsistent: " +
                                report.violations.front());
        }

        std::vector<EmbeddingVector> vecs(per_doc);
        detail::parallel_for(per_doc, static_cast<size_t>(max_inflight), [&](size_t i) {
            const Region& region = regions[i];
            try {
                std::string content = resolve_payload(doc, region);
                vecs[i] = embedder.embed(content);
            } catch (const Error& e) {
                std::string where = to_string(region.level);
                if (region.level == RegionLevel::coarse) {
                    where += " " + std::to_string(region.coarse_index);
                } else if (region.level == RegionLevel::fine) {
                    where += " (" + std::to_string(region.coarse_index) + "," +
                             std::to_string(region.fine_index) + ")";
                }
                throw ProviderUnavailable("embedding failed for doc '" + doc.id + "' " + where +
                                          ": " + e.what());
            }
            if (vecs[i].size() != embedder.dim()) {
                throw DimensionMismatch("embedder returned dim " + std::to_string(vecs[i].size()) +
                                        " for doc '" + doc.id + "', expected " +
                                        std::to_string(embedder.dim()));
            }
        });

        HierarchicalEmbeddings h;
        h.doc_id = doc.id;
        h.global = std::move(vecs[0]);
        h.coarse.reserve(m);
        for (uint32_t i = 0; i < m; ++i) h.coarse.push_back(std::move(vecs[1 + i]));
        h.fine.resize(m);
        for (uint32_t i = 0; i < m; ++i) {
            h.fine[i].reserve(k);
            for (uint32_t l = 0; l < k; ++l) {
                h.fine[i].push_back(std::move(vecs[1 + m + static_cast<size_t>(i) * k + l]));
            }
        }
        entries.push_back(std::move(h));
    }

    uint64_t now_ms = static_cast<uint64_t>(
        std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::system_clock::now().time_since_epoch())
            .count());
    return EmbeddingIndex(static_cast<uint32_t>(embedder.dim()), m, k, embedder.id(), now_ms,
                          std::move(entries));
}

std::string serialize_index(const EmbeddingIndex& index) {
    std::string out;
    out.append(kMagic, sizeof(kMagic));
    detail::put_u32le(out, index.dim());
    detail::put_u32le(out, index.m());
    detail::put_u32le(out, index.k());
    detail::put_u32le(out, static_cast<uint32_t>(index.size()));
    detail::put_u32le(out, static_cast<uint32_t>(index.embedder_id().size()));
    out += index.embedder_id();
    detail::put_u64le(out, index.built_unix_ms());

    for (const auto& h : index.documents()) {
        detail::put_u32le(out, static_cast<uint32_t>(h.doc_id.size()));
        out += h.doc_id;
        for (float x : h.global) detail::put_f32le(out, x);
        for (const auto& c : h.coarse) {
            for (float x : c) detail::put_f32le(out, x);
        }
        for (const auto& group : h.fine) {
            for (const auto& f : group) {
                for (float x : f) detail::put_f32le(out, x);
            }
        }
    }
    detail::put_u32le(out, detail::Crc32::of(out.data(), out.size()));
    return out;
}

EmbeddingIndex deserialize_index(const std::string& bytes) {
    if (bytes.size() < sizeof(kMagic)) {
        throw Truncated("index file shorter than its magic");
    }
    if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
        throw BadMagic("not an index file (bad magic)");
    }
    detail::ByteReader r(bytes, sizeof(kMagic));
    uint32_t dim = r.u32le();
    uint32_t m = r.u32le();
    uint32_t k = r.u32le();
    uint32_t doc_count = r.u32le();
    uint32_t id_len = r.u32le();
    std::string embedder_id = r.bytes(id_len);
    uint64_t built_ms = r.u64le();

    std::vector<HierarchicalEmbeddings> docs;
    docs.reserve(doc_count);
    for (uint32_t d = 0; d < doc_count; ++d) {
        HierarchicalEmbeddings h;
        uint32_t doc_id_len = r.u32le();
        h.doc_id = r.bytes(doc_id_len);
        h.global.resize(dim);
        for (auto& x : h.global) x = r.f32le();
        h.coarse.resize(m);
        for (auto& c : h.coarse) {
            c.resize(dim);
            for (auto& x : c) x = r.f32le();
        }
        h.fine.resize(m);
        for (auto& group : h.fine) {
            group.resize(k);
            for (auto& f : group) {
                f.resize(dim);
                for (auto& x : f) x = r.f32le();
            }
        }
        docs.push_back(std::move(h));
    }
    if (r.remaining() < 4) {
        throw Truncated("index file missing checksum trailer");
    }
    if (r.remaining() > 4) {
        throw ParseError("index file has " + std::to_string(r.remaining() - 4) +
                         " unexpected trailing bytes");
    }
    // Trailing CRC covers every byte before it. Checked after structure so
    // a short file reports Truncated, not a checksum failure.
    uint32_t stored_crc = r.u32le();
    uint32_t actual_crc = detail::Crc32::of(bytes.data(), bytes.size() - 4);
    if (stored_crc != actual_crc) {
        throw ChecksumMismatch("index checksum mismatch (stored " + std::to_string(stored_crc) +
                               ", computed " + std::to_string(actual_crc) + ")");
    }
    return EmbeddingIndex(dim, m, k, std::move(embedder_id), built_ms, std::move(docs));
}

void save_index(const EmbeddingIndex& index, const std::string& path) {
    std::string bytes = serialize_index(index);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out.good()) throw IoError("cannot open '" + path + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out.good()) throw IoError("short write to '" + path + "'");
}

EmbeddingIndex load_index(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.good()) throw IoError("cannot open index '" + path + "'");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_index(bytes);
}

}  // namespace mara
