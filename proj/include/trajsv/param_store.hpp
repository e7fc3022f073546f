#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "trajsv/tensor.hpp"

namespace trajsv::tensor {

/// Named trainable parameters, iterated in name order.
class ParamStore {
 public:
  /// Registers a new parameter; throws InvalidArgument if the name exists.
  Tensor& add(const std::string& name, Matrix init);

  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  std::map<std::string, Tensor>& items() { return params_; }
  const std::map<std::string, Tensor>& items() const { return params_; }

  void clear_grads();

  /// Deep copy of the current values (fresh leaves, no grads).
  ParamStore clone() const;
  /// Copies values from `other`; names and shapes must match exactly.
  void assign_values(const ParamStore& other);

  /// Writes the checkpoint format: magic, version, metadata string, then each
  /// parameter as (name, rank, dims, raw little-endian float64 values).
  void save(const std::filesystem::path& path, const std::string& metadata = {}) const;
  /// Reads a checkpoint; `metadata` (optional) receives the header string.
  static ParamStore load(const std::filesystem::path& path, std::string* metadata = nullptr);

 private:
  std::map<std::string, Tensor> params_;
};

}  // namespace trajsv::tensor
