#pragma once

#include <map>
#include <string>

#include "core/tensor.hpp"

namespace mergerl {

// On-disk model container: UTF-8 JSON, doubles serialized with round-trip
// precision so load(save(ck)) is bit-exact.
//
//   { "version": 1,
//     "tensors": { "<name>": { "shape": [...], "data": [...] }, ... },
//     "metadata": { "<key>": "<value>", ... } }
struct Checkpoint {
    static constexpr int kVersion = 1;

    int version = kVersion;
    NamedTensors tensors;
    std::map<std::string, std::string> metadata;
};

bool operator==(const Checkpoint& a, const Checkpoint& b);

std::string checkpoint_to_json(const Checkpoint& ck);
Checkpoint checkpoint_from_json(const std::string& text);

// Errors: IoError (unreadable/unwritable path), ParseError (corrupted or
// truncated payload, bad tensor length, version mismatch).
void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace mergerl
