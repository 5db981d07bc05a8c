#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fxlab/mlp.hpp"
#include "fxlab/types.hpp"

namespace fxlab {

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;
inline constexpr std::uint32_t kSamplesFormatVersion = 1;

struct Checkpoint {
  MLPDenoiser model;
  std::uint64_t seed = 0;
  std::uint32_t format_version = kCheckpointFormatVersion;
};

// Layout: 8-byte magic "FXLABCK1", u32 format version, u32 header length,
// JSON header {format_version, arch, seed, vocab, tensors}, u64 scalar
// count, then little-endian float32 arrays: the vocabulary followed by the
// model tensors in declaration order, matrices row-major.
std::vector<char> encode_checkpoint(const MLPDenoiser& model, std::uint64_t seed);
Checkpoint decode_checkpoint(const std::vector<char>& bytes);

void save_checkpoint(const std::filesystem::path& path, const MLPDenoiser& model,
                     std::uint64_t seed);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// The model as it reads back from a checkpoint (float32 parameters,
// renormalized vocabulary rows).
MLPDenoiser quantize_like_checkpoint(const MLPDenoiser& model);

// 16-byte header {magic "FXSB", u32 version, u32 N, u32 d} followed by
// little-endian float32 values, row-major N x d.
void write_samples(const std::filesystem::path& path, const Matrix& points);
Matrix read_samples(const std::filesystem::path& path);

std::vector<char> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace fxlab
