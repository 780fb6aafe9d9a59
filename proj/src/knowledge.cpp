#include "bladekit/knowledge.hpp"

#include "bladekit/errors.hpp"
#include "bladekit/util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

namespace bladekit::knowledge {

using nlohmann::json;

std::vector<double> LexicalEmbedder::embed(const std::string& text) {
    std::vector<double> vec(kDimension, 0.0);
    for (const std::string& tok : util::tokenize(text)) {
        vec[util::fnv1a64(tok) % kDimension] += 1.0;
    }
    double norm_sq = 0.0;
    for (double v : vec) norm_sq += v * v;
    if (norm_sq > 0.0) {
        const double inv = 1.0 / std::sqrt(norm_sq);
        for (double& v : vec) v *= inv;
    }
    return vec;
}

const std::string& LexicalEmbedder::embedder_id() const {
    static const std::string id = "lexical-bow-384";
    return id;
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) {
        throw Error("cosine_similarity: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                    std::to_string(b.size()) + ")");
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

const ProcedureRecord* KnowledgeBase::find(std::string_view procedure_id) const {
    for (const ProcedureRecord& r : records) {
        if (r.procedure_id == procedure_id) return &r;
    }
    return nullptr;
}

KnowledgeBase load_knowledge_base(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("knowledge base is not valid JSON: ") + e.what());
    }
    if (!doc.is_array() || doc.empty()) {
        throw ParseError("knowledge base must be a non-empty JSON array");
    }

    KnowledgeBase kb;
    for (const auto& entry : doc) {
        ProcedureRecord rec;
        try {
            rec.procedure_id = entry.at("id").get<std::string>();
            for (const auto& c : entry.at("classes")) rec.class_tags.push_back(c.get<std::string>());
            rec.title = entry.at("title").get<std::string>();
            rec.body = entry.at("body").get<std::string>();
            rec.source = entry.value("source", std::string{});
        } catch (const json::exception& e) {
            throw ParseError(std::string("bad knowledge-base entry: ") + e.what());
        }
        if (rec.procedure_id.empty()) throw ParseError("procedure id is empty");
        if (rec.class_tags.empty()) {
            throw ParseError("procedure '" + rec.procedure_id + "' has no class tags");
        }
        if (rec.body.empty()) {
            throw ParseError("procedure '" + rec.procedure_id + "' has an empty body");
        }
        if (kb.find(rec.procedure_id) != nullptr) {
            throw ParseError("duplicate procedure id '" + rec.procedure_id + "'");
        }
        kb.records.push_back(std::move(rec));
    }
    return kb;
}

KnowledgeBase load_knowledge_base_file(const std::filesystem::path& file) {
    return load_knowledge_base(util::read_text_file(file));
}

VectorIndex build_index(const std::vector<ProcedureRecord>& records, EmbeddingProvider& provider) {
    if (records.empty()) throw Error("cannot index an empty record list");

    VectorIndex index;
    index.dimension = provider.dimension();
    index.embedder_id = provider.embedder_id();
    for (const ProcedureRecord& rec : records) {
        for (const IndexEntry& e : index.entries) {
            if (e.procedure_id == rec.procedure_id) {
                throw Error("duplicate procedure id '" + rec.procedure_id + "'");
            }
        }
        std::vector<double> embedding;
        try {
            embedding = provider.embed(rec.title + "\n" + rec.body);
        } catch (const std::exception& e) {
            throw Error("embedding failed for record '" + rec.procedure_id + "': " + e.what());
        }
        if (embedding.size() != index.dimension) {
            throw Error("embedding for record '" + rec.procedure_id + "' has dimension " +
                        std::to_string(embedding.size()) + ", expected " +
                        std::to_string(index.dimension));
        }
        index.entries.push_back({rec.procedure_id, std::move(embedding)});
    }
    std::sort(index.entries.begin(), index.entries.end(),
              [](const IndexEntry& a, const IndexEntry& b) { return a.procedure_id < b.procedure_id; });
    return index;
}

RetrievalResult retrieve_top1(const std::string& query, const VectorIndex& index,
                              EmbeddingProvider& provider) {
    if (util::trim(query).empty()) throw Error("retrieval query is empty");
    if (index.entries.empty()) throw Error("vector index is empty");
    if (provider.embedder_id() != index.embedder_id) {
        throw Error("embedder mismatch: index built with '" + index.embedder_id + "', provider is '" +
                    provider.embedder_id() + "'");
    }
    if (provider.dimension() != index.dimension) {
        throw Error("dimension mismatch: index " + std::to_string(index.dimension) + ", provider " +
                    std::to_string(provider.dimension()));
    }

    const std::vector<double> q = provider.embed(query);
    const bool all_zero = std::all_of(q.begin(), q.end(), [](double v) { return v == 0.0; });
    if (all_zero) throw Error("query '" + query + "' embeds to the zero vector");

    // entries are id-sorted, so strict > leaves ties on the smallest id
    const IndexEntry* best = &index.entries.front();
    double best_score = cosine_similarity(q, best->embedding);
    for (std::size_t i = 1; i < index.entries.size(); ++i) {
        const double score = cosine_similarity(q, index.entries[i].embedding);
        if (score > best_score) {
            best_score = score;
            best = &index.entries[i];
        }
    }
    return {best->procedure_id, best_score};
}

}  // namespace bladekit::knowledge
