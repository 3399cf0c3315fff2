#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "mara/errors.hpp"

namespace mara {

enum class PayloadKind { image, text };

std::string to_string(PayloadKind kind);
PayloadKind payload_kind_from_string(const std::string& s);

enum class RegionLevel { global, coarse, fine };

std::string to_string(RegionLevel level);

// Normalized page rectangle, origin top-left, coordinates in [0, 1].
struct BBox {
    double x0 = 0.0;
    double y0 = 0.0;
    double x1 = 1.0;
    double y1 = 1.0;

    bool contains(const BBox& inner, double eps = 1e-9) const {
        return inner.x0 >= x0 - eps && inner.y0 >= y0 - eps &&
               inner.x1 <= x1 + eps && inner.y1 <= y1 + eps;
    }
    bool operator==(const BBox&) const = default;
};

struct Region {
    std::string doc_id;
    RegionLevel level = RegionLevel::global;
    int coarse_index = -1;  // 0-based, -1 for global
    int fine_index = -1;    // 0-based, -1 unless fine
    BBox bbox;
    std::string payload_ref;

    bool operator==(const Region&) const = default;
};

struct GridSpec {
    int rows = 0;
    int cols = 0;
    int cells() const { return rows * cols; }
    bool operator==(const GridSpec&) const = default;
};

struct DecompositionConfig {
    GridSpec coarse_grid{2, 2};  // m = rows*cols
    GridSpec fine_grid{2, 2};    // k = rows*cols, per coarse region

    int m() const { return coarse_grid.cells(); }
    int k() const { return fine_grid.cells(); }
    int regions_per_document() const { return 1 + m() + m() * k(); }
    void validate() const;
    bool operator==(const DecompositionConfig&) const = default;
};

struct Document {
    std::string id;
    std::string source_uri;
    PayloadKind payload_kind = PayloadKind::text;
    std::map<std::string, std::string> metadata;
    // Pre-supplied regions from the manifest (external segmenter output).
    // Empty means "use the grid decomposer".
    std::vector<Region> preset_regions;
};

class Corpus {
public:
    Corpus() = default;

    void add(Document doc);  // throws DuplicateId
    const std::vector<Document>& documents() const { return docs_; }
    const Document* find(const std::string& id) const;
    size_t size() const { return docs_.size(); }
    bool empty() const { return docs_.empty(); }

private:
    std::vector<Document> docs_;
    std::unordered_map<std::string, size_t> by_id_;
};

// Splits a document into 1 + m + m*k regions: global first, coarse cells
// row-major, then each coarse cell's fine cells row-major. Image payloads
// get media-fragment refs (#xywh=percent:...); text payloads are sliced
// into proportional character ranges (#char=start,end) whose bboxes map
// the range onto the x axis.
std::vector<Region> decompose(const Document& document, const DecompositionConfig& config);

struct HierarchyReport {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

HierarchyReport validate_hierarchy(const std::vector<Region>& regions,
                                   const DecompositionConfig& config);

// Reads a line-delimited JSON manifest: one object per line with fields
// id, source_uri, payload_kind, optional metadata, optional regions.
// Relative source_uris are resolved against the manifest's directory.
Corpus load_manifest(const std::string& path);

// Resolved content of one region, as handed to the embedder. For text
// payloads this is the sliced character range; for image payloads the raw
// file bytes, with the fragment appended on sub-regions so distinct crops
// have distinct content identity.
std::string resolve_payload(const Document& document, const Region& region);

// Ingested-corpus directory layout: corpus.jsonl + decomposition.json.
void save_corpus_dir(const Corpus& corpus, const DecompositionConfig& config,
                     const std::string& dir);
Corpus load_corpus_dir(const std::string& dir, DecompositionConfig* config_out = nullptr);

}  // namespace mara
