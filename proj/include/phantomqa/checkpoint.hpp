#pragma once

#include <filesystem>
#include <vector>

#include "phantomqa/model.hpp"

namespace phantomqa {

// Model snapshot: architecture, donor flag and the named tensors. A donor
// checkpoint carries only the conv stack (the head it was trained with has
// been discarded); a full checkpoint restores a model exactly.
struct Checkpoint {
  ModelConfig arch;
  bool donor = false;
  std::vector<NamedTensor> tensors;
};

// Binary container: magic "PCKP", version, then a named-tensor list with
// explicit shapes and f32 payloads. The architecture and donor flag travel
// as reserved "meta.*" tensors inside the same list.
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& buf,
                             const std::string& origin = "checkpoint");

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// donor=true keeps only the conv stack tensors.
Checkpoint checkpoint_from_model(const Model& model, bool donor = false);

// Full checkpoints only; donor checkpoints have no head to restore.
Model model_from_checkpoint(const Checkpoint& ckpt);

// Copy the checkpoint's conv stack into an existing model (head untouched).
// Shape mismatches name the offending tensor.
void transfer_conv_stack(Model& model, const Checkpoint& ckpt);

}  // namespace phantomqa
