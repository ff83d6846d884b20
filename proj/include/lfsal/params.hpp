#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "lfsal/tensor.hpp"

namespace lfsal {

// Named learnable tensors. Iteration order is the sorted name order, which
// makes initialization, optimizer stepping, and serialization deterministic.
class ParameterSet {
 public:
  bool contains(const std::string& name) const { return items_.count(name) != 0; }
  std::size_t size() const { return items_.size(); }
  std::vector<std::string> names() const;  // sorted

  // Inserting an existing name is a state error (parameter specs collide).
  void insert(const std::string& name, Tensor value);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;

  std::int64_t element_count() const;

  bool operator==(const ParameterSet& other) const { return items_ == other.items_; }

  void save(std::ostream& out) const;
  static ParameterSet load(std::istream& in);

  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

 private:
  std::map<std::string, Tensor> items_;
};

}  // namespace lfsal
