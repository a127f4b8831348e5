#pragma once

#include <json.hpp>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cutgan/core/tensor.hpp"

namespace cutgan {

// Self-describing binary container: magic + version, a JSON header holding
// arbitrary metadata plus a tensor index (name, dtype, shape, offset), then a
// raw float32 blob. Weight arrays are keyed by layer path; the same container
// carries optimizer state and counters so training can resume exactly.
class Checkpoint {
 public:
  nlohmann::json meta;

  void add(const std::string& name, Tensor<float> t);
  bool has(const std::string& name) const { return index_.count(name) > 0; }
  const Tensor<float>& get(const std::string& name) const;
  const std::vector<std::pair<std::string, Tensor<float>>>& tensors() const { return tensors_; }

  // atomic: writes to a temp file and renames over the target
  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

 private:
  std::vector<std::pair<std::string, Tensor<float>>> tensors_;
  std::map<std::string, size_t> index_;
};

}  // namespace cutgan
