#include "aim/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

namespace aim::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw CheckpointError("checkpoint truncated");
  return v;
}

struct Block {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<char> data;
};

std::map<std::string, Block> read_blocks(std::istream& in, std::uint32_t& width) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw CheckpointError("not a checkpoint file (bad magic)");
  }
  const auto version = get_u32(in);
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  width = get_u32(in);
  if (width != 4 && width != 8) throw CheckpointError("bad scalar width");
  const auto count = get_u32(in);
  std::map<std::string, Block> blocks;
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto len = get_u32(in);
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw CheckpointError("checkpoint truncated");
    Block b;
    b.rows = get_u32(in);
    b.cols = get_u32(in);
    b.data.resize(static_cast<std::size_t>(b.rows) * b.cols * width);
    if (!in.read(b.data.data(), static_cast<std::streamsize>(b.data.size()))) {
      throw CheckpointError("checkpoint truncated in block " + name);
    }
    blocks.emplace(std::move(name), std::move(b));
  }
  return blocks;
}

template <typename T>
void fill(Matrix& m, const std::vector<char>& data) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    T v;
    std::memcpy(&v, data.data() + static_cast<std::size_t>(i) * sizeof(T), sizeof(T));
    m.data()[i] = static_cast<Scalar>(v);
  }
}

}  // namespace

void write_checkpoint(std::ostream& out, const std::vector<Parameter*>& params) {
  out.write(kCheckpointMagic, 8);
  put_u32(out, kCheckpointVersion);
  put_u32(out, sizeof(Scalar));
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto* p : params) {
    put_u32(out, static_cast<std::uint32_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    put_u32(out, static_cast<std::uint32_t>(p->value.rows()));
    put_u32(out, static_cast<std::uint32_t>(p->value.cols()));
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(p->value.size() * sizeof(Scalar)));
  }
  if (!out) throw CheckpointError("checkpoint write failed");
}

void save_checkpoint(const std::filesystem::path& path, const std::vector<Parameter*>& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
  write_checkpoint(out, params);
}

void read_checkpoint(std::istream& in, const std::vector<Parameter*>& params) {
  std::uint32_t width = 0;
  const auto blocks = read_blocks(in, width);
  for (auto* p : params) {
    auto it = blocks.find(p->name);
    if (it == blocks.end()) throw CheckpointError("checkpoint lacks block " + p->name);
    const Block& b = it->second;
    if (b.rows != p->value.rows() || b.cols != p->value.cols()) {
      throw CheckpointError("shape mismatch for block " + p->name);
    }
    if (width == 8) fill<double>(p->value, b.data);
    else fill<float>(p->value, b.data);
    p->zero_grad();
  }
}

void load_checkpoint(const std::filesystem::path& path, const std::vector<Parameter*>& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  read_checkpoint(in, params);
}

std::vector<std::string> checkpoint_blocks(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::uint32_t width = 0;
  std::vector<std::string> names;
  for (auto& [name, b] : read_blocks(in, width)) names.push_back(name);
  return names;
}

std::pair<std::uint32_t, std::uint32_t> checkpoint_block_shape(const std::filesystem::path& path,
                                                               const std::string& name) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::uint32_t width = 0;
  const auto blocks = read_blocks(in, width);
  auto it = blocks.find(name);
  if (it == blocks.end()) throw CheckpointError("checkpoint lacks block " + name);
  return {it->second.rows, it->second.cols};
}

std::unique_ptr<Actor> load_actor(const std::filesystem::path& path) {
  NetworkConfig cfg;
  cfg.hidden = static_cast<int>(checkpoint_block_shape(path, "actor.dec1.W").first);
  auto actor = std::make_unique<Actor>(cfg);
  load_checkpoint(path, actor->parameters());
  return actor;
}

}  // namespace aim::nn
