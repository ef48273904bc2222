#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "slu/models.hpp"

namespace slu {

inline constexpr int kCheckpointVersion = 1;

// {"format": "slu-model", "version": 1, "checksum": "<16 hex digits>",
//  "payload": {"config": {...}, "vocab": [...], "lexicon": {...},
//              "tensors": [{"name", "rows", "cols", "values"}]}}
// The checksum is FNV-1a (64 bit) over the compact dump of "payload".
std::string serialize_model(const TrainedModel& model);

// Unparseable or checksum-mismatched input raises an integrity error; an
// unknown version raises a version error before the checksum is examined.
TrainedModel deserialize_model(std::string_view text, const std::string& source);

void save_model(const TrainedModel& model, const std::string& path);
TrainedModel load_model(const std::string& path);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace slu
