#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace bladekit::knowledge {

// Deterministic text-to-vector contract. Implementations must return either a
// unit vector or the zero vector (empty text), identical for identical text.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::vector<double> embed(const std::string& text) = 0;
    virtual const std::string& embedder_id() const = 0;
    virtual std::size_t dimension() const = 0;
};

// Offline fallback: L2-normalized hashed bag-of-words over lowercased
// alphanumeric tokens, 384 buckets.
class LexicalEmbedder final : public EmbeddingProvider {
public:
    static constexpr std::size_t kDimension = 384;

    std::vector<double> embed(const std::string& text) override;
    const std::string& embedder_id() const override;
    std::size_t dimension() const override { return kDimension; }
};

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

struct ProcedureRecord {
    std::string procedure_id;
    std::vector<std::string> class_tags;
    std::string title;
    std::string body;
    std::string source;
};

struct KnowledgeBase {
    std::vector<ProcedureRecord> records;

    const ProcedureRecord* find(std::string_view procedure_id) const;
};

KnowledgeBase load_knowledge_base(const std::string& json_text);
KnowledgeBase load_knowledge_base_file(const std::filesystem::path& file);

struct IndexEntry {
    std::string procedure_id;
    std::vector<double> embedding;
};

// entries sorted by procedure_id; immutable after build
struct VectorIndex {
    std::vector<IndexEntry> entries;
    std::size_t dimension = 0;
    std::string embedder_id;
};

// Embeds title + "\n" + body per record.
VectorIndex build_index(const std::vector<ProcedureRecord>& records, EmbeddingProvider& provider);

struct RetrievalResult {
    std::string procedure_id;
    double score = 0.0;
};

// Argmax of cosine similarity; ties go to the lexicographically smallest id.
RetrievalResult retrieve_top1(const std::string& query, const VectorIndex& index,
                              EmbeddingProvider& provider);

}  // namespace bladekit::knowledge
