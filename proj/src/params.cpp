#include "lfsal/params.hpp"

#include <istream>
#include <ostream>
#include <utility>

#include "json.hpp"

namespace lfsal {

std::vector<std::string> ParameterSet::names() const {
  std::vector<std::string> out;
  out.reserve(items_.size());
  for (const auto& [name, _] : items_) out.push_back(name);
  return out;
}

void ParameterSet::insert(const std::string& name, Tensor value) {
  if (!items_.emplace(name, std::move(value)).second) {
    throw StateError("parameter '" + name + "' already exists");
  }
}

Tensor& ParameterSet::at(const std::string& name) {
  const auto it = items_.find(name);
  if (it == items_.end()) throw StateError("no parameter named '" + name + "'");
  return it->second;
}

const Tensor& ParameterSet::at(const std::string& name) const {
  const auto it = items_.find(name);
  if (it == items_.end()) throw StateError("no parameter named '" + name + "'");
  return it->second;
}

std::int64_t ParameterSet::element_count() const {
  std::int64_t total = 0;
  for (const auto& [_, t] : items_) total += t.size();
  return total;
}

void ParameterSet::save(std::ostream& out) const {
  nlohmann::json header = {{"kind", "params"}, {"count", items_.size()}};
  out << header.dump() << '\n';
  for (const auto& [name, t] : items_) {
    write_tensor_record(out, name, t, Dtype::f64);
  }
  if (!out) throw IoError("failed writing parameter set");
}

ParameterSet ParameterSet::load(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("missing parameter set header");
  nlohmann::json header = nlohmann::json::parse(line, nullptr, false);
  if (header.is_discarded() || header.value("kind", "") != "params") {
    throw IoError("malformed parameter set header");
  }
  ParameterSet params;
  const auto count = header["count"].get<std::size_t>();
  for (std::size_t i = 0; i < count; ++i) {
    auto rec = read_tensor_record(in);
    if (!rec) throw IoError("parameter set truncated after " + std::to_string(i) +
                            " of " + std::to_string(count) + " tensors");
    params.insert(rec->name, std::move(rec->tensor));
  }
  return params;
}

}  // namespace lfsal
