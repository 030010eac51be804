#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace vlmuq {

// CIFAR-10 category -> ImageNet class indices. Deer and horse have no exact
// ImageNet counterpart and are deliberately absent, so eight categories map.
class ClassMap {
 public:
  ClassMap() = default;
  explicit ClassMap(std::map<std::string, std::set<int>> mapping)
      : map_(std::move(mapping)) {
    rebuild_index();
  }

  static ClassMap default_cifar_imagenet() {
    // Dog: every 20th class from Chihuahua (151), plus the Mexican Hairless
    // (268) endpoint even though it falls off the 20-step.
    return ClassMap({
        {"airplane", {404, 895}},
        {"automobile", {436, 511, 661, 817}},
        {"bird", {10, 11, 12, 13, 92, 93, 94, 95, 96}},
        {"cat", {281, 283, 284, 285}},
        {"dog", {151, 171, 191, 211, 231, 251, 268}},
        {"frog", {30, 31}},
        {"ship", {510, 628, 724, 780, 833}},
        {"truck", {555, 569, 675, 717, 734, 864, 867}},
    });
  }

  // CIFAR category for a source class index; nullopt means anomaly.
  std::optional<std::string> lookup(int source_index) const {
    auto it = index_.find(source_index);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  bool contains(int source_index) const { return index_.count(source_index) > 0; }

  const std::map<std::string, std::set<int>>& categories() const { return map_; }

  size_t category_count() const { return map_.size(); }

 private:
  void rebuild_index() {
    index_.clear();
    for (const auto& [name, indices] : map_) {
      for (int idx : indices) {
        auto [it, inserted] = index_.emplace(idx, name);
        if (!inserted)
          throw std::invalid_argument("class map: index " + std::to_string(idx) +
                                      " assigned to both '" + it->second + "' and '" +
                                      name + "'");
      }
    }
  }

  std::map<std::string, std::set<int>> map_;
  std::map<int, std::string> index_;
};

// The ten CIFAR-10 class names, in the order the prompts spell them.
inline const std::vector<std::string>& cifar10_classes() {
  static const std::vector<std::string> classes = {
      "airplane", "automobile", "bird", "cat",  "deer",
      "dog",      "frog",       "horse", "ship", "truck"};
  return classes;
}

}  // namespace vlmuq
