#pragma once

#include <filesystem>
#include <string>

#include "flowguess/flow.hpp"

namespace flowguess {

inline constexpr int kCheckpointVersion = 1;

// File layout:
//   8 bytes   magic "FLOWGCKP"
//   8 bytes   header length H, little-endian u64
//   H bytes   UTF-8 header, one "key=value" per line
//   8*P bytes parameters as little-endian IEEE-754 doubles (P from the header)
//   32 bytes  SHA-256 of everything above
std::string serialize_checkpoint(const FlowModel& model);
FlowModel deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const FlowModel& model, const std::filesystem::path& path);
FlowModel load_checkpoint(const std::filesystem::path& path);

// Throws CharsetMismatch when the model was trained on a different alphabet.
void require_charset(const FlowModel& model, const Charset& charset);

}  // namespace flowguess
