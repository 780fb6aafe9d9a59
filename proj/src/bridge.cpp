#include "bladekit/bridge.hpp"

#include "bladekit/errors.hpp"
#include "bladekit/util.hpp"

#include <algorithm>
#include <map>

namespace bladekit::bridge {

using geometry::Detection;

DetectionBlock encode_detection(const Detection& d, int ordinal) {
    if (ordinal < 1) throw Error("ordinal must be >= 1");

    DetectionBlock block;
    block.ordinal = ordinal;
    block.detection = d;
    block.grid = geometry::grid_cell(geometry::centroid(d.box));

    std::string& out = block.rendered;
    out = "Defect " + std::to_string(ordinal) + ": " + d.class_label +
          ". Confidence: " + util::format_fixed(d.confidence * 100.0, 1) +
          "%. Location: " + std::string(geometry::grid_cell_prompt_name(block.grid)) +
          ". OBB corners (normalized): [";
    for (int k = 0; k < 4; ++k) {
        if (k) out += ", ";
        out += "(" + util::format_fixed(d.box.corners[k].x, 2) + ", " +
               util::format_fixed(d.box.corners[k].y, 2) + ")";
    }
    out += "].";
    return block;
}

void attach_protocol(DetectionBlock& block, const knowledge::ProcedureRecord& record, int max_chars) {
    if (max_chars <= 0) throw Error("protocol_max_chars must be positive");

    std::string excerpt = record.body;
    if (excerpt.size() > static_cast<std::size_t>(max_chars)) {
        const std::string_view head = std::string_view(excerpt).substr(0, max_chars);
        const std::size_t cut = head.find_last_of(".!?");
        if (cut != std::string_view::npos) {
            excerpt.assign(head.substr(0, cut + 1));
        } else {
            excerpt = util::trim(head);
        }
    }
    if (excerpt.find(record.procedure_id) == std::string::npos) {
        excerpt = "procedure " + record.procedure_id + " applies: " + excerpt;
    }

    block.protocol = ProtocolLine{record.procedure_id, excerpt};
    block.rendered += "\nRetrieved Protocol: " + excerpt;
}

AssembledPrompt assemble_prompt(const std::vector<Detection>& detections,
                                const std::string& system_preamble, const std::string& query_suffix,
                                const RetrievalOptions* retrieval, double conf_floor) {
    if (retrieval != nullptr) {
        if (retrieval->kb == nullptr || retrieval->index == nullptr || retrieval->provider == nullptr) {
            throw Error("retrieval options must supply kb, index, and provider");
        }
        if (retrieval->provider->embedder_id() != retrieval->index->embedder_id) {
            throw Error("retrieval provider does not match the index embedder '" +
                        retrieval->index->embedder_id + "'");
        }
    }

    std::vector<const Detection*> kept;
    for (const Detection& d : detections) {
        if (d.confidence >= conf_floor) kept.push_back(&d);
    }
    std::stable_sort(kept.begin(), kept.end(), [](const Detection* a, const Detection* b) {
        if (a->confidence != b->confidence) return a->confidence > b->confidence;
        const auto ca = geometry::centroid(a->box);
        const auto cb = geometry::centroid(b->box);
        if (ca.y != cb.y) return ca.y < cb.y;
        return ca.x < cb.x;
    });

    AssembledPrompt prompt;
    prompt.system_preamble = system_preamble;
    prompt.query_suffix = query_suffix;

    // one retrieval per class, reused across blocks
    std::map<std::string, const knowledge::ProcedureRecord*> cache;
    for (std::size_t i = 0; i < kept.size(); ++i) {
        DetectionBlock block = encode_detection(*kept[i], static_cast<int>(i) + 1);
        if (retrieval != nullptr) {
            const std::string& cls = kept[i]->class_label;
            auto it = cache.find(cls);
            if (it == cache.end()) {
                std::string query = retrieval->query_template;
                if (query.empty()) {
                    query = cls;
                } else {
                    const std::size_t pos = query.find("{class}");
                    if (pos != std::string::npos) query.replace(pos, 7, cls);
                }
                const auto top = knowledge::retrieve_top1(query, *retrieval->index, *retrieval->provider);
                const knowledge::ProcedureRecord* rec = retrieval->kb->find(top.procedure_id);
                if (rec == nullptr) {
                    throw Error("retrieved id '" + top.procedure_id + "' not present in the knowledge base");
                }
                it = cache.emplace(cls, rec).first;
            }
            attach_protocol(block, *it->second, retrieval->protocol_max_chars);
        }
        prompt.blocks.push_back(std::move(block));
    }

    prompt.rendered = system_preamble;
    if (prompt.blocks.empty()) {
        prompt.rendered += "\n\n";
        prompt.rendered += kNoDefectsBlock;
    } else {
        for (const DetectionBlock& block : prompt.blocks) {
            prompt.rendered += "\n\n";
            prompt.rendered += block.rendered;
        }
    }
    prompt.rendered += "\n\n";
    prompt.rendered += query_suffix;
    return prompt;
}

}  // namespace bladekit::bridge
