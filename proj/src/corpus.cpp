#include "mara/corpus.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace mara {

std::string to_string(PayloadKind kind) {
    return kind == PayloadKind::image ? "image" : "text";
}

PayloadKind payload_kind_from_string(const std::string& s) {
    if (s == "image") return PayloadKind::image;
    if (s == "text") return PayloadKind::text;
    throw ParseError("unknown payload_kind '" + s + "'");
}

std::string to_string(RegionLevel level) {
    switch (level) {
        case RegionLevel::global: return "global";
        case RegionLevel::coarse: return "coarse";
        case RegionLevel::fine: return "fine";
    }
    return "?";
}

void DecompositionConfig::validate() const {
    if (coarse_grid.rows <= 0 || coarse_grid.cols <= 0 ||
        fine_grid.rows <= 0 || fine_grid.cols <= 0) {
        throw InvalidConfig("decomposition grid dimensions must be positive");
    }
}

void Corpus::add(Document doc) {
    if (doc.id.empty()) throw InvalidArgument("document id must be non-empty");
    if (by_id_.count(doc.id)) throw DuplicateId("duplicate document id '" + doc.id + "'");
    by_id_.emplace(doc.id, docs_.size());
    docs_.push_back(std::move(doc));
}

const Document* Corpus::find(const std::string& id) const {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &docs_[it->second];
}

namespace {

std::string format_percent(double v) {
    // Stable short decimal form for fragment strings.
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v * 100.0);
    return buf;
}

std::string xywh_fragment(const BBox& b) {
    return "#xywh=percent:" + format_percent(b.x0) + "," + format_percent(b.y0) + "," +
           format_percent(b.x1 - b.x0) + "," + format_percent(b.y1 - b.y0);
}

std::string char_fragment(size_t begin, size_t end) {
    return "#char=" + std::to_string(begin) + "," + std::to_string(end);
}

bool payload_readable(const std::string& uri) {
    std::ifstream in(uri, std::ios::binary);
    return in.good();
}

std::string read_file(const std::string& uri) {
    std::ifstream in(uri, std::ios::binary);
    if (!in.good()) throw UnresolvablePayload("cannot read payload at '" + uri + "'");
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

BBox grid_cell(const BBox& outer, int rows, int cols, int row, int col) {
    double w = (outer.x1 - outer.x0) / cols;
    double h = (outer.y1 - outer.y0) / rows;
    return BBox{outer.x0 + col * w, outer.y0 + row * h,
                outer.x0 + (col + 1) * w, outer.y0 + (row + 1) * h};
}

// Proportional [begin, end) split of a character range into n pieces.
std::pair<size_t, size_t> char_span(size_t total, int pieces, int i) {
    auto lo = static_cast<size_t>((static_cast<unsigned long long>(total) * i) / pieces);
    auto hi = static_cast<size_t>((static_cast<unsigned long long>(total) * (i + 1)) / pieces);
    return {lo, hi};
}

std::vector<Region> decompose_image(const Document& doc, const DecompositionConfig& cfg) {
    std::vector<Region> out;
    out.reserve(static_cast<size_t>(cfg.regions_per_document()));

    out.push_back(Region{doc.id, RegionLevel::global, -1, -1, BBox{0, 0, 1, 1}, doc.source_uri});

    const BBox page{0, 0, 1, 1};
    for (int r = 0; r < cfg.coarse_grid.rows; ++r) {
        for (int c = 0; c < cfg.coarse_grid.cols; ++c) {
            int i = r * cfg.coarse_grid.cols + c;
            BBox cb = grid_cell(page, cfg.coarse_grid.rows, cfg.coarse_grid.cols, r, c);
            out.push_back(Region{doc.id, RegionLevel::coarse, i, -1, cb,
                                 doc.source_uri + xywh_fragment(cb)});
        }
    }
    for (int r = 0; r < cfg.coarse_grid.rows; ++r) {
        for (int c = 0; c < cfg.coarse_grid.cols; ++c) {
            int i = r * cfg.coarse_grid.cols + c;
            BBox cb = grid_cell(page, cfg.coarse_grid.rows, cfg.coarse_grid.cols, r, c);
            for (int fr = 0; fr < cfg.fine_grid.rows; ++fr) {
                for (int fc = 0; fc < cfg.fine_grid.cols; ++fc) {
                    int l = fr * cfg.fine_grid.cols + fc;
                    BBox fb = grid_cell(cb, cfg.fine_grid.rows, cfg.fine_grid.cols, fr, fc);
                    out.push_back(Region{doc.id, RegionLevel::fine, i, l, fb,
                                         doc.source_uri + xywh_fragment(fb)});
                }
            }
        }
    }
    return out;
}

std::vector<Region> decompose_text(const Document& doc, const DecompositionConfig& cfg,
                                   size_t length) {
    std::vector<Region> out;
    out.reserve(static_cast<size_t>(cfg.regions_per_document()));
    const int m = cfg.m();
    const int k = cfg.k();

    out.push_back(Region{doc.id, RegionLevel::global, -1, -1, BBox{0, 0, 1, 1},
                         doc.source_uri + char_fragment(0, length)});

    // Linear slicing: coarse cell i covers fraction [i/m, (i+1)/m) of the
    // blob, projected onto the x axis so bbox invariants carry over.
    for (int i = 0; i < m; ++i) {
        auto [lo, hi] = char_span(length, m, i);
        BBox b{static_cast<double>(i) / m, 0.0, static_cast<double>(i + 1) / m, 1.0};
        out.push_back(Region{doc.id, RegionLevel::coarse, i, -1, b,
                             doc.source_uri + char_fragment(lo, hi)});
    }
    for (int i = 0; i < m; ++i) {
        auto [clo, chi] = char_span(length, m, i);
        size_t span = chi - clo;
        for (int l = 0; l < k; ++l) {
            auto [flo, fhi] = char_span(span, k, l);
            double x0 = static_cast<double>(i) / m + static_cast<double>(l) / (m * k);
            double x1 = static_cast<double>(i) / m + static_cast<double>(l + 1) / (m * k);
            out.push_back(Region{doc.id, RegionLevel::fine, i, l, BBox{x0, 0.0, x1, 1.0},
                                 doc.source_uri + char_fragment(clo + flo, clo + fhi)});
        }
    }
    return out;
}

}  // namespace

std::vector<Region> decompose(const Document& document, const DecompositionConfig& config) {
    config.validate();

    if (!document.preset_regions.empty()) {
        auto report = validate_hierarchy(document.preset_regions, config);
        if (!report.ok()) {
            throw InvalidConfig("preset regions for '" + document.id +
                                "' do not match the decomposition config: " +
                                report.violations.front());
        }
        return document.preset_regions;
    }

    if (document.payload_kind == PayloadKind::text) {
        return decompose_text(document, config, read_file(document.source_uri).size());
    }
    if (!payload_readable(document.source_uri)) {
        throw UnresolvablePayload("cannot read payload at '" + document.source_uri + "'");
    }
    return decompose_image(document, config);
}

HierarchyReport validate_hierarchy(const std::vector<Region>& regions,
                                   const DecompositionConfig& config) {
    HierarchyReport report;
    const int m = config.m();
    const int k = config.k();

    const Region* global = nullptr;
    std::vector<const Region*> coarse(static_cast<size_t>(m), nullptr);
    std::vector<std::vector<const Region*>> fine(static_cast<size_t>(m));
    for (auto& f : fine) f.assign(static_cast<size_t>(k), nullptr);

    size_t expected = static_cast<size_t>(config.regions_per_document());
    if (regions.size() != expected) {
        report.violations.push_back("expected " + std::to_string(expected) + " regions, got " +
                                    std::to_string(regions.size()));
    }

    for (const auto& r : regions) {
        switch (r.level) {
            case RegionLevel::global:
                if (global) report.violations.push_back("duplicate global region");
                global = &r;
                break;
            case RegionLevel::coarse:
                if (r.coarse_index < 0 || r.coarse_index >= m) {
                    report.violations.push_back("coarse index " + std::to_string(r.coarse_index) +
                                                " out of range [0," + std::to_string(m) + ")");
                } else if (coarse[static_cast<size_t>(r.coarse_index)]) {
                    report.violations.push_back("duplicate coarse region " +
                                                std::to_string(r.coarse_index));
                } else {
                    coarse[static_cast<size_t>(r.coarse_index)] = &r;
                }
                break;
            case RegionLevel::fine:
                if (r.coarse_index < 0 || r.coarse_index >= m || r.fine_index < 0 ||
                    r.fine_index >= k) {
                    report.violations.push_back("fine region (" + std::to_string(r.coarse_index) +
                                                "," + std::to_string(r.fine_index) +
                                                ") out of range");
                } else if (fine[static_cast<size_t>(r.coarse_index)]
                               [static_cast<size_t>(r.fine_index)]) {
                    report.violations.push_back("duplicate fine region (" +
                                                std::to_string(r.coarse_index) + "," +
                                                std::to_string(r.fine_index) + ")");
                } else {
                    fine[static_cast<size_t>(r.coarse_index)][static_cast<size_t>(r.fine_index)] =
                        &r;
                }
                break;
        }
    }

    if (!global) {
        report.violations.push_back("missing global region");
    } else if (!(global->bbox == BBox{0, 0, 1, 1})) {
        report.violations.push_back("global region bbox is not (0,0,1,1)");
    }

    for (int i = 0; i < m; ++i) {
        if (!coarse[static_cast<size_t>(i)]) {
            report.violations.push_back("missing coarse region " + std::to_string(i));
        }
    }
    for (int i = 0; i < m; ++i) {
        for (int l = 0; l < k; ++l) {
            const Region* f = fine[static_cast<size_t>(i)][static_cast<size_t>(l)];
            if (!f) {
                report.violations.push_back("missing fine region (" + std::to_string(i) + "," +
                                            std::to_string(l) + ")");
                continue;
            }
            const Region* parent = coarse[static_cast<size_t>(i)];
            if (parent && !parent->bbox.contains(f->bbox)) {
                report.violations.push_back("fine region (" + std::to_string(i) + "," +
                                            std::to_string(l) +
                                            ") bbox escapes its coarse parent");
            }
        }
    }
    return report;
}

namespace {

Region region_from_json(const json& j, const std::string& doc_id, int line) {
    auto bad = [&](const std::string& msg) {
        return ParseError("manifest line " + std::to_string(line) + ": " + msg);
    };
    Region r;
    r.doc_id = doc_id;
    std::string level = j.value("level", "");
    if (level == "global") r.level = RegionLevel::global;
    else if (level == "coarse") r.level = RegionLevel::coarse;
    else if (level == "fine") r.level = RegionLevel::fine;
    else throw bad("region level '" + level + "' invalid");
    r.coarse_index = j.value("coarse_index", -1);
    r.fine_index = j.value("fine_index", -1);
    if (!j.contains("bbox") || !j["bbox"].is_array() || j["bbox"].size() != 4) {
        throw bad("region bbox must be [x0,y0,x1,y1]");
    }
    r.bbox = BBox{j["bbox"][0].get<double>(), j["bbox"][1].get<double>(),
                  j["bbox"][2].get<double>(), j["bbox"][3].get<double>()};
    r.payload_ref = j.value("payload_ref", "");
    return r;
}

json region_to_json(const Region& r) {
    json j;
    j["level"] = to_string(r.level);
    if (r.coarse_index >= 0) j["coarse_index"] = r.coarse_index;
    if (r.fine_index >= 0) j["fine_index"] = r.fine_index;
    j["bbox"] = {r.bbox.x0, r.bbox.y0, r.bbox.x1, r.bbox.y1};
    if (!r.payload_ref.empty()) j["payload_ref"] = r.payload_ref;
    return j;
}

Document document_from_json(const json& j, const fs::path& base_dir, int line) {
    auto bad = [&](const std::string& msg) {
        return ParseError("manifest line " + std::to_string(line) + ": " + msg);
    };
    if (!j.is_object()) throw bad("record is not a JSON object");
    Document doc;
    if (!j.contains("id") || !j["id"].is_string() || j["id"].get<std::string>().empty()) {
        throw bad("missing or empty 'id'");
    }
    doc.id = j["id"].get<std::string>();
    if (!j.contains("source_uri") || !j["source_uri"].is_string()) {
        throw bad("missing 'source_uri'");
    }
    fs::path uri = j["source_uri"].get<std::string>();
    if (uri.is_relative() && !base_dir.empty()) uri = base_dir / uri;
    doc.source_uri = uri.lexically_normal().string();
    if (!j.contains("payload_kind") || !j["payload_kind"].is_string()) {
        throw bad("missing 'payload_kind'");
    }
    try {
        doc.payload_kind = payload_kind_from_string(j["payload_kind"].get<std::string>());
    } catch (const ParseError& e) {
        throw bad(e.what());
    }
    if (j.contains("metadata")) {
        if (!j["metadata"].is_object()) throw bad("'metadata' must be an object");
        for (auto& [key, value] : j["metadata"].items()) {
            if (!value.is_string()) throw bad("metadata value for '" + key + "' must be a string");
            doc.metadata[key] = value.get<std::string>();
        }
    }
    if (j.contains("regions")) {
        if (!j["regions"].is_array()) throw bad("'regions' must be an array");
        for (const auto& rj : j["regions"]) {
            doc.preset_regions.push_back(region_from_json(rj, doc.id, line));
        }
    }
    return doc;
}

json document_to_json(const Document& doc) {
    json j;
    j["id"] = doc.id;
    j["source_uri"] = doc.source_uri;
    j["payload_kind"] = to_string(doc.payload_kind);
    if (!doc.metadata.empty()) j["metadata"] = doc.metadata;
    if (!doc.preset_regions.empty()) {
        json regions = json::array();
        for (const auto& r : doc.preset_regions) regions.push_back(region_to_json(r));
        j["regions"] = regions;
    }
    return j;
}

Corpus load_manifest_stream(std::istream& in, const fs::path& base_dir) {
    Corpus corpus;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError("manifest line " + std::to_string(line_no) + ": " + e.what());
        }
        corpus.add(document_from_json(j, base_dir, line_no));
    }
    return corpus;
}

}  // namespace

Corpus load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in.good()) throw IoError("cannot open manifest '" + path + "'");
    return load_manifest_stream(in, fs::path(path).parent_path());
}

std::string resolve_payload(const Document& document, const Region& region) {
    const std::string& ref = region.payload_ref.empty() ? document.source_uri : region.payload_ref;
    auto hash_pos = ref.find('#');
    std::string file_part = ref.substr(0, hash_pos == std::string::npos ? ref.size() : hash_pos);
    std::string fragment = hash_pos == std::string::npos ? "" : ref.substr(hash_pos);

    std::string bytes = read_file(file_part);
    if (document.payload_kind == PayloadKind::text) {
        if (fragment.rfind("#char=", 0) == 0) {
            size_t comma = fragment.find(',');
            if (comma != std::string::npos) {
                size_t begin = std::stoull(fragment.substr(6, comma - 6));
                size_t end = std::stoull(fragment.substr(comma + 1));
                begin = std::min(begin, bytes.size());
                end = std::min(end, bytes.size());
                return bytes.substr(begin, end - begin);
            }
        }
        return bytes;
    }
    // Image payloads are not cropped here; the fragment keeps each
    // sub-region's content identity distinct for the embedder.
    if (fragment.empty()) return bytes;
    return bytes + fragment;
}

void save_corpus_dir(const Corpus& corpus, const DecompositionConfig& config,
                     const std::string& dir) {
    config.validate();
    fs::create_directories(dir);
    {
        std::ofstream out(fs::path(dir) / "corpus.jsonl", std::ios::binary);
        if (!out.good()) throw IoError("cannot write corpus.jsonl under '" + dir + "'");
        for (const auto& doc : corpus.documents()) {
            out << document_to_json(doc).dump() << "\n";
        }
    }
    {
        json j;
        j["coarse_grid"] = {{"rows", config.coarse_grid.rows}, {"cols", config.coarse_grid.cols}};
        j["fine_grid"] = {{"rows", config.fine_grid.rows}, {"cols", config.fine_grid.cols}};
        std::ofstream out(fs::path(dir) / "decomposition.json", std::ios::binary);
        if (!out.good()) throw IoError("cannot write decomposition.json under '" + dir + "'");
        out << j.dump(2) << "\n";
    }
}

Corpus load_corpus_dir(const std::string& dir, DecompositionConfig* config_out) {
    fs::path manifest = fs::path(dir) / "corpus.jsonl";
    std::ifstream in(manifest);
    if (!in.good()) throw IoError("cannot open corpus dir '" + dir + "' (missing corpus.jsonl)");
    Corpus corpus = load_manifest_stream(in, fs::path(dir));

    if (config_out) {
        std::ifstream cfg_in(fs::path(dir) / "decomposition.json");
        if (!cfg_in.good()) throw IoError("corpus dir '" + dir + "' missing decomposition.json");
        json j;
        try {
            j = json::parse(cfg_in);
            config_out->coarse_grid = {j.at("coarse_grid").at("rows").get<int>(),
                                       j.at("coarse_grid").at("cols").get<int>()};
            config_out->fine_grid = {j.at("fine_grid").at("rows").get<int>(),
                                     j.at("fine_grid").at("cols").get<int>()};
        } catch (const json::exception& e) {
            throw ParseError(std::string("decomposition.json: ") + e.what());
        }
        config_out->validate();
    }
    return corpus;
}

}  // namespace mara
