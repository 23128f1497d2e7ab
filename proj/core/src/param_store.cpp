#include "amore/ad/param_store.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace amore::ad {

int ParamStore::add(const std::string& name, std::vector<int> shape,
                    std::span<const double> init) {
  if (index_.count(name)) throw std::invalid_argument("param already registered: " + name);
  int size = 1;
  for (int d : shape) size *= d;
  if (static_cast<int>(init.size()) != size)
    throw std::invalid_argument("param init size mismatch: " + name);
  Entry e{name, std::move(shape), static_cast<int>(values_.size()), size};
  index_[name] = static_cast<int>(entries_.size());
  values_.insert(values_.end(), init.begin(), init.end());
  grads_.resize(values_.size(), 0.0);
  entries_.push_back(std::move(e));
  return entries_.back().offset;
}

int ParamStore::add(const std::string& name, std::vector<int> shape, double fill) {
  int size = 1;
  for (int d : shape) size *= d;
  std::vector<double> init(size, fill);
  return add(name, std::move(shape), init);
}

const ParamStore::Entry& ParamStore::entry(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::invalid_argument("unknown param: " + name);
  return entries_[it->second];
}

std::span<double> ParamStore::values_of(const std::string& name) {
  const Entry& e = entry(name);
  return {values_.data() + e.offset, static_cast<std::size_t>(e.size)};
}

std::span<const double> ParamStore::values_of(const std::string& name) const {
  const Entry& e = entry(name);
  return {values_.data() + e.offset, static_cast<std::size_t>(e.size)};
}

std::span<double> ParamStore::grads_of(const std::string& name) {
  const Entry& e = entry(name);
  return {grads_.data() + e.offset, static_cast<std::size_t>(e.size)};
}

void ParamStore::zero_grad() { std::memset(grads_.data(), 0, grads_.size() * sizeof(double)); }

void ParamStore::save_json(const std::string& path, const std::string& meta_json) const {
  nlohmann::json j;
  j["format_version"] = 1;
  j["params"] = nlohmann::json::array();
  for (const auto& e : entries_) {
    nlohmann::json jp;
    jp["name"] = e.name;
    jp["shape"] = e.shape;
    jp["values"] = std::vector<double>(values_.begin() + e.offset,
                                       values_.begin() + e.offset + e.size);
    j["params"].push_back(std::move(jp));
  }
  if (!meta_json.empty()) j["meta"] = nlohmann::json::parse(meta_json);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << j.dump(2) << "\n";
}

std::string ParamStore::load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  nlohmann::json j;
  in >> j;
  if (!j.contains("format_version") || j["format_version"].get<int>() != 1)
    throw std::runtime_error("unsupported checkpoint version in " + path);
  for (const auto& jp : j["params"]) {
    const std::string name = jp["name"].get<std::string>();
    const Entry& e = entry(name);
    const auto shape = jp["shape"].get<std::vector<int>>();
    if (shape != e.shape) throw std::runtime_error("checkpoint shape mismatch for " + name);
    const auto vals = jp["values"].get<std::vector<double>>();
    if (static_cast<int>(vals.size()) != e.size)
      throw std::runtime_error("checkpoint size mismatch for " + name);
    std::copy(vals.begin(), vals.end(), values_.begin() + e.offset);
  }
  return j.contains("meta") ? j["meta"].dump() : std::string();
}

}  // namespace amore::ad
