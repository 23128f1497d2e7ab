#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace amore::ad {

// Flat storage of named parameter arrays with shapes, plus a same-shaped
// gradient accumulator. Checkpoints round-trip bit-exactly through JSON.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    std::vector<int> shape;
    int offset = 0;
    int size = 0;
  };

  // Registers a named array and returns its offset into the flat buffer.
  int add(const std::string& name, std::vector<int> shape, std::span<const double> init);
  int add(const std::string& name, std::vector<int> shape, double fill = 0.0);

  bool has(const std::string& name) const { return index_.count(name) != 0; }
  const Entry& entry(const std::string& name) const;
  int offset(const std::string& name) const { return entry(name).offset; }
  int size() const { return static_cast<int>(values_.size()); }
  const std::vector<Entry>& entries() const { return entries_; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::span<double> grads() { return grads_; }
  std::span<const double> grads() const { return grads_; }

  std::span<double> values_of(const std::string& name);
  std::span<const double> values_of(const std::string& name) const;
  std::span<double> grads_of(const std::string& name);

  void zero_grad();

  // Checkpoint io. The JSON object holds a format_version field and one flat
  // array with shape per parameter; doubles serialize with shortest
  // round-trip representation, so save/load is bit-exact. `meta` is an
  // opaque JSON string stored alongside the arrays (may be empty).
  void save_json(const std::string& path, const std::string& meta_json = "") const;
  // Loads values into a store with identical layout (names and shapes must
  // match); returns the stored meta JSON string.
  std::string load_json(const std::string& path);

 private:
  std::vector<double> values_, grads_;
  std::vector<Entry> entries_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace amore::ad
