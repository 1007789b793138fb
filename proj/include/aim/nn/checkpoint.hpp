#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "aim/nn/network.hpp"
#include "aim/nn/tape.hpp"

namespace aim::nn {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary layout, all integers little-endian:
///   8 bytes  magic "AIMCKPT\0"
///   u32      format version (1)
///   u32      scalar width in bytes (4 or 8)
///   u32      block count
///   per block: u32 name length, name bytes, u32 rows, u32 cols,
///              rows*cols scalars in row-major order
inline constexpr char kCheckpointMagic[8] = {'A', 'I', 'M', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const std::vector<Parameter*>& params);
void save_checkpoint(const std::filesystem::path& path, const std::vector<Parameter*>& params);

/// Loads blocks by name into `params`. Every parameter must be present with
/// a matching shape; extra blocks are ignored.
void read_checkpoint(std::istream& in, const std::vector<Parameter*>& params);
void load_checkpoint(const std::filesystem::path& path, const std::vector<Parameter*>& params);

/// Names stored in a checkpoint file.
std::vector<std::string> checkpoint_blocks(const std::filesystem::path& path);

/// Rows and columns of block `name`. Throws if absent.
std::pair<std::uint32_t, std::uint32_t> checkpoint_block_shape(const std::filesystem::path& path,
                                                               const std::string& name);

/// Actor whose width is read from the checkpoint, with its weights loaded.
std::unique_ptr<Actor> load_actor(const std::filesystem::path& path);

}  // namespace aim::nn
