#pragma once

#include <cstdint>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

namespace methyl {

// Process-wide interning of identifiers. Ids are only meaningful in memory;
// serialization always goes through the spelled name.
class Symbols {
 public:
  static int32_t intern(const std::string& name) {
    auto& self = instance();
    std::lock_guard<std::mutex> lock(self.mu_);
    auto it = self.ids_.find(name);
    if (it != self.ids_.end()) return it->second;
    int32_t id = static_cast<int32_t>(self.names_.size());
    self.names_.push_back(name);
    self.ids_.emplace(name, id);
    return id;
  }

  static const std::string& name(int32_t id) {
    auto& self = instance();
    std::lock_guard<std::mutex> lock(self.mu_);
    return self.names_.at(static_cast<size_t>(id));
  }

 private:
  static Symbols& instance() {
    static Symbols s;
    return s;
  }

  std::mutex mu_;
  std::vector<std::string> names_;
  std::unordered_map<std::string, int32_t> ids_;
};

}  // namespace methyl
