#include "hgdr/checkpoint.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "binary_io.hpp"

namespace hgdr {

namespace {

constexpr char kMagic[4] = {'H', 'G', 'D', 'R'};
constexpr char kVersion = '1';

}  // namespace

void write_checkpoint(const ModelParams& params, std::ostream& out) {
  const ModelConfig& c = params.config;
  out.write(kMagic, 4);
  out.put(kVersion);
  detail::write_u32(out, c.num_domains());
  detail::write_u32(out, c.num_users);
  for (auto n : c.items_per_domain) detail::write_u32(out, n);
  detail::write_u32(out, c.dim);
  detail::write_u32(out, c.layers);
  detail::write_u32(out, static_cast<std::uint32_t>(c.mode));
  detail::write_u32(out, (c.tie_relation_weights ? 1u : 0u) | (c.mean_aggregation ? 2u : 0u));
  detail::write_u32(out, params.num_matrices());
  params.for_each([&](const std::string&, const Matrix& m) {
    detail::write_u32(out, m.rows());
    detail::write_u32(out, m.cols());
    for (double v : m.values()) detail::write_f64(out, v);
  });
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  write_checkpoint(params, out);
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

ModelParams read_checkpoint(std::istream& in) {
  char magic[5] = {};
  if (!in.read(magic, 5)) throw std::runtime_error("checkpoint: truncated header");
  if (std::string(magic, 4) != std::string(kMagic, 4))
    throw std::runtime_error("checkpoint: bad magic string");
  if (magic[4] != kVersion)
    throw std::runtime_error(std::string("checkpoint: unsupported version '") + magic[4] + "'");

  ModelConfig c;
  const std::uint32_t nd = detail::read_u32(in);
  c.num_users = detail::read_u32(in);
  c.items_per_domain.resize(nd);
  for (auto& n : c.items_per_domain) n = detail::read_u32(in);
  c.dim = detail::read_u32(in);
  c.layers = detail::read_u32(in);
  const std::uint32_t mode = detail::read_u32(in);
  if (mode > static_cast<std::uint32_t>(ModelMode::MF))
    throw std::runtime_error("checkpoint: unknown model mode " + std::to_string(mode));
  c.mode = static_cast<ModelMode>(mode);
  const std::uint32_t flags = detail::read_u32(in);
  if (flags > 3u) throw std::runtime_error("checkpoint: unknown flag bits");
  c.tie_relation_weights = (flags & 1u) != 0;
  c.mean_aggregation = (flags & 2u) != 0;

  ModelParams params;
  try {
    params = ModelParams::zeros(c);
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("checkpoint: invalid config: ") + e.what());
  }
  const std::uint32_t count = detail::read_u32(in);
  if (count != params.num_matrices())
    throw std::runtime_error("checkpoint: matrix count " + std::to_string(count) +
                             " does not match config (" +
                             std::to_string(params.num_matrices()) + ")");
  params.for_each([&](const std::string& name, Matrix& m) {
    const std::uint32_t rows = detail::read_u32(in);
    const std::uint32_t cols = detail::read_u32(in);
    if (rows != m.rows() || cols != m.cols())
      throw std::runtime_error("checkpoint: shape mismatch for " + name);
    for (double& v : m.values()) v = detail::read_f64(in);
  });
  if (in.peek() != std::char_traits<char>::eof())
    throw std::runtime_error("checkpoint: trailing bytes after last matrix");
  return params;
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace hgdr
