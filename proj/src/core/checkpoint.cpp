#include "core/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "core/errors.hpp"

namespace mergerl {

using nlohmann::json;

bool operator==(const Checkpoint& a, const Checkpoint& b) {
    return a.version == b.version && a.tensors == b.tensors && a.metadata == b.metadata;
}

std::string checkpoint_to_json(const Checkpoint& ck) {
    json root;
    root["version"] = ck.version;
    json tensors = json::object();
    for (const auto& [name, t] : ck.tensors) {
        if (!t.all_finite())
            throw NumericError("checkpoint: tensor " + name + " contains non-finite values");
        json entry;
        entry["shape"] = t.shape;
        entry["data"] = t.data;
        tensors[name] = std::move(entry);
    }
    root["tensors"] = std::move(tensors);
    root["metadata"] = ck.metadata;
    return root.dump();
}

Checkpoint checkpoint_from_json(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("checkpoint: malformed JSON: ") + e.what());
    }
    try {
        if (!root.is_object() || !root.contains("version"))
            throw ParseError("checkpoint: missing version field");
        Checkpoint ck;
        ck.version = root.at("version").get<int>();
        if (ck.version != Checkpoint::kVersion)
            throw ParseError("checkpoint: unsupported version " + std::to_string(ck.version));
        for (const auto& [name, entry] : root.at("tensors").items()) {
            Tensor t;
            t.shape = entry.at("shape").get<std::vector<std::size_t>>();
            t.data = entry.at("data").get<std::vector<double>>();
            std::size_t expect = 1;
            for (std::size_t d : t.shape) expect *= d;
            if (t.data.size() != expect)
                throw ParseError("checkpoint: tensor " + name + " has " +
                                 std::to_string(t.data.size()) + " values, shape implies " +
                                 std::to_string(expect));
            ck.tensors[name] = std::move(t);
        }
        if (root.contains("metadata"))
            ck.metadata = root.at("metadata").get<std::map<std::string, std::string>>();
        return ck;
    } catch (const json::exception& e) {
        throw ParseError(std::string("checkpoint: invalid structure: ") + e.what());
    }
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    const std::string text = checkpoint_to_json(ck);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("checkpoint: cannot open " + path + " for writing");
    out << text << '\n';
    if (!out) throw IoError("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("checkpoint: cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return checkpoint_from_json(buf.str());
}

}  // namespace mergerl
