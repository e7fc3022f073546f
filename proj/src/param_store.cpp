#include "trajsv/param_store.hpp"

#include <cstring>
#include <fstream>

#include "trajsv/binary_io.hpp"
#include "trajsv/error.hpp"

namespace trajsv::tensor {

namespace {
constexpr char kMagic[8] = {'T', 'S', 'V', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

Tensor& ParamStore::add(const std::string& name, Matrix init) {
  auto [it, inserted] = params_.emplace(name, Tensor::parameter(std::move(init)));
  if (!inserted) throw InvalidArgument("duplicate parameter name '" + name + "'");
  return it->second;
}

Tensor& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw InvalidArgument("unknown parameter '" + name + "'");
  return it->second;
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw InvalidArgument("unknown parameter '" + name + "'");
  return it->second;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : params_) n += static_cast<std::size_t>(t.value().size());
  return n;
}

void ParamStore::clear_grads() {
  for (auto& [_, t] : params_) t.clear_grad();
}

ParamStore ParamStore::clone() const {
  ParamStore out;
  for (const auto& [name, t] : params_) out.add(name, t.value());
  return out;
}

void ParamStore::assign_values(const ParamStore& other) {
  if (other.params_.size() != params_.size()) throw InvalidArgument("parameter sets differ in size");
  for (auto& [name, t] : params_) {
    const auto& src = other.at(name).value();
    if (src.rows() != t.rows() || src.cols() != t.cols()) {
      throw InvalidArgument("shape mismatch for parameter '" + name + "'");
    }
    t.mutable_value() = src;
  }
}

void ParamStore::save(const std::filesystem::path& path, const std::string& metadata) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path.string());
  out.write(kMagic, sizeof kMagic);
  bin::write_u32(out, kVersion);
  bin::write_string(out, metadata);
  bin::write_u64(out, params_.size());
  for (const auto& [name, t] : params_) {
    bin::write_string(out, name);
    bin::write_u32(out, 2);
    bin::write_u64(out, static_cast<std::uint64_t>(t.rows()));
    bin::write_u64(out, static_cast<std::uint64_t>(t.cols()));
    out.write(reinterpret_cast<const char*>(t.value().data()),
              static_cast<std::streamsize>(t.value().size() * sizeof(double)));
  }
  if (!out) throw DataError("failed writing checkpoint: " + path.string());
}

ParamStore ParamStore::load(const std::filesystem::path& path, std::string* metadata) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw DataError("not a checkpoint file: " + path.string());
  }
  if (bin::read_u32(in) != kVersion) throw DataError("unsupported checkpoint version");
  std::string meta = bin::read_string(in);
  if (metadata) *metadata = std::move(meta);
  const auto count = bin::read_u64(in);
  ParamStore store;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name = bin::read_string(in, 4096);
    const auto rank = bin::read_u32(in);
    if (rank != 2) throw DataError("checkpoint parameter '" + name + "' has unsupported rank");
    const auto rows = bin::read_u64(in);
    const auto cols = bin::read_u64(in);
    if (rows > (1ULL << 28) || cols > (1ULL << 28) || rows * cols > (1ULL << 30)) {
      throw DataError("checkpoint parameter '" + name + "' has implausible shape");
    }
    Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!in) throw DataError("truncated checkpoint: " + path.string());
    store.add(name, std::move(m));
  }
  return store;
}

}  // namespace trajsv::tensor
