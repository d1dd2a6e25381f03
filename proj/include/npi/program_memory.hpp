#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "npi/observation.hpp"
#include "npi/tensor.hpp"

namespace npi {

struct ProgramInfo {
  std::string name;
  EnvKind env = EnvKind::addition;
  int generation = 0;
  friend bool operator==(const ProgramInfo&, const ProgramInfo&) = default;
};

// Key/embedding memory with an append-only registry. Row i of `keys` and
// `embeddings` belongs to registry entry i.
//
// Programs are registered in generations: the initial library is generation
// 0 and every later add_programs batch opens a new one. A program may call
// only programs of its own environment from its own or an older generation,
// so adding rows never changes what an existing program can select.
class ProgramMemory {
 public:
  ProgramMemory() = default;
  ProgramMemory(int key_dim, int embed_dim)
      : keys_("memory.key", 0, key_dim), embeddings_("memory.prog", 0, embed_dim) {}

  int size() const { return static_cast<int>(registry_.size()); }
  int key_dim() const { return static_cast<int>(keys_.cols()); }
  int embed_dim() const { return static_cast<int>(embeddings_.cols()); }
  int generation() const { return generation_; }

  const std::vector<ProgramInfo>& registry() const { return registry_; }
  const ProgramInfo& info(int row) const { return registry_.at(static_cast<std::size_t>(row)); }

  Parameter& keys() { return keys_; }
  Parameter& embeddings() { return embeddings_; }
  const Parameter& keys() const { return keys_; }
  const Parameter& embeddings() const { return embeddings_; }

  int find(const std::string& name, EnvKind env) const {
    for (int i = 0; i < size(); ++i)
      if (registry_[i].name == name && registry_[i].env == env) return i;
    return -1;
  }

  int row(const std::string& name, EnvKind env) const {
    const int r = find(name, env);
    if (r < 0) throw RegistrationError("unknown program " + name + " (" + to_string(env) + ")");
    return r;
  }

  // Appends one freshly initialized row to the current generation.
  int add_program(const std::string& name, EnvKind env, Rng& rng) {
    if (find(name, env) >= 0) throw RegistrationError("program " + name + " (" + to_string(env) + ") already registered");
    const Eigen::Index n = size();
    grow(keys_, n + 1);
    grow(embeddings_, n + 1);
    std::uniform_real_distribution<double> dk(-1.0 / std::sqrt(key_dim()), 1.0 / std::sqrt(key_dim()));
    std::uniform_real_distribution<double> dp(-1.0, 1.0);
    for (int j = 0; j < key_dim(); ++j) keys_.value(n, j) = dk(rng);
    for (int j = 0; j < embed_dim(); ++j) embeddings_.value(n, j) = dp(rng);
    registry_.push_back(ProgramInfo{name, env, generation_});
    visible_.clear();
    return static_cast<int>(n);
  }

  // Registers a batch of programs as a new generation. Returns the first row.
  int add_programs(const std::vector<std::string>& names, EnvKind env, Rng& rng) {
    if (size() > 0) ++generation_;
    const int first = size();
    for (const auto& n : names) {
      if (find(n, env) >= 0) {
        rollback(first);
        throw RegistrationError("program " + n + " (" + to_string(env) + ") already registered");
      }
      add_program(n, env, rng);
    }
    return first;
  }

  // Rows a program may select as its next program, in ascending order.
  const std::vector<int>& visible_rows(int row) const {
    if (visible_.size() != registry_.size()) {
      visible_.assign(registry_.size(), {});
      for (int r = 0; r < size(); ++r)
        for (int c = 0; c < size(); ++c)
          if (registry_[c].env == registry_[r].env && registry_[c].generation <= registry_[r].generation)
            visible_[r].push_back(c);
    }
    return visible_.at(static_cast<std::size_t>(row));
  }

  // Used when restoring a checkpoint.
  void restore(std::vector<ProgramInfo> registry, Tensor2 keys, Tensor2 embeddings) {
    if (static_cast<std::size_t>(keys.rows()) != registry.size() || keys.rows() != embeddings.rows())
      throw CheckpointError("program memory row counts disagree with the registry");
    registry_ = std::move(registry);
    keys_.value = std::move(keys);
    embeddings_.value = std::move(embeddings);
    keys_.grad = Tensor2::Zero(keys_.rows(), keys_.cols());
    embeddings_.grad = Tensor2::Zero(embeddings_.rows(), embeddings_.cols());
    generation_ = 0;
    for (const auto& p : registry_) generation_ = std::max(generation_, p.generation);
    visible_.clear();
  }

 private:
  static void grow(Parameter& p, Eigen::Index rows) {
    p.value.conservativeResize(rows, Eigen::NoChange);
    p.grad = Tensor2::Zero(rows, p.cols());
    p.value.row(rows - 1).setZero();
  }

  void rollback(int rows) {
    registry_.resize(static_cast<std::size_t>(rows));
    keys_.value.conservativeResize(rows, Eigen::NoChange);
    embeddings_.value.conservativeResize(rows, Eigen::NoChange);
    keys_.grad = Tensor2::Zero(rows, keys_.cols());
    embeddings_.grad = Tensor2::Zero(rows, embeddings_.cols());
    visible_.clear();
  }

  Parameter keys_;
  Parameter embeddings_;
  std::vector<ProgramInfo> registry_;
  int generation_ = 0;
  mutable std::vector<std::vector<int>> visible_;
};

// argmax_i keys(i,:) . k over the candidate rows; ties go to the lowest row.
inline int program_lookup(const Vec& k, const Tensor2& keys, const std::vector<int>& candidates) {
  if (candidates.empty()) throw ConfigError("program_lookup: no candidate programs");
  int best = -1;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int r : candidates) {
    const double s = keys.row(r).dot(k);
    if (best < 0 || s > best_score || (s == best_score && r < best)) {
      best = r;
      best_score = s;
    }
  }
  return best;
}

inline int program_lookup(const Vec& k, const Tensor2& keys) {
  if (keys.rows() == 0) throw ConfigError("program_lookup: program memory is empty");
  std::vector<int> all(static_cast<std::size_t>(keys.rows()));
  for (int i = 0; i < static_cast<int>(all.size()); ++i) all[i] = i;
  return program_lookup(k, keys, all);
}

}  // namespace npi
