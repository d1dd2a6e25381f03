#pragma once

#include <array>
#include <string>
#include <vector>

#include "npi/environment.hpp"
#include "npi/layers.hpp"
#include "npi/loss.hpp"
#include "npi/lstm.hpp"
#include "npi/oracles.hpp"
#include "npi/program_memory.hpp"

namespace npi {

struct ModelConfig {
  int layers = 2;         // L
  int hidden = 256;       // M
  int program_dim = 64;   // P
  int key_dim = 8;        // K
  int state_dim = 128;    // D
  int mlp_hidden = 128;
  int core_input = 128;   // width of the fused core input
  double init_gain = 1.0; // weights start uniform in +-init_gain/sqrt(fan_in)
  std::uint64_t seed = 1;

  void validate() const {
    if (layers < 1 || hidden < 1 || program_dim < 1 || key_dim < 1 || state_dim < 1 || mlp_hidden < 1 || core_input < 1)
      throw ConfigError("model dimensions must be positive");
    if (!(init_gain > 0.0)) throw ConfigError("init_gain must be positive");
  }
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct StepOutput {
  double end_logit = 0.0;
  double r = 0.5;
  Vec key;
  Vec scores;  // key scores over the candidate rows
  std::array<Vec, 3> arg_logits;
};

struct StepCache {
  EnvKind env = EnvKind::addition;
  int row = 0;
  const std::vector<int>* candidates = nullptr;
  Mlp2::Cache enc;
  Mlp2::Cache fuse;
  LstmStack::StepCache core;
  Vec h;
};

// Gradients of the step loss with respect to the step outputs.
struct StepGrad {
  double end_logit = 0.0;
  Vec scores;
  std::array<Vec, 3> args;
};

// The network: per-environment state encoders, input fusion, the shared LSTM
// core, the three decoders and the program memory.
class Npi {
 public:
  Npi() = default;
  explicit Npi(const ModelConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    for (EnvKind e : kAllEnvKinds)
      encoders_[static_cast<int>(e)] = Mlp2("encoder." + to_string(e), feature_width(e), cfg.mlp_hidden, cfg.state_dim);
    fuse_ = Mlp2("fuse", cfg.state_dim + cfg.program_dim, cfg.mlp_hidden, cfg.core_input);
    core_ = LstmStack("core", cfg.core_input, cfg.hidden, cfg.layers);
    end_head_ = Linear("head.end", cfg.hidden, 1);
    key_head_ = Linear("head.key", cfg.hidden, cfg.key_dim);
    for (int s = 0; s < 3; ++s) arg_heads_[s] = Linear("head.arg" + std::to_string(s), cfg.hidden, kArgVocab);
    memory_ = ProgramMemory(cfg.key_dim, cfg.program_dim);
  }

  // A model with the standard program library and randomly initialized weights.
  static Npi create(const ModelConfig& cfg) {
    Npi m(cfg);
    Rng rng(cfg.seed);
    m.init_weights(rng);
    for (EnvKind e : kAllEnvKinds)
      for (const auto& name : program_names(e)) m.memory_.add_program(name, e, rng);
    return m;
  }

  void init_weights(Rng& rng) {
    const double g = cfg_.init_gain;
    for (auto& e : encoders_) e.init(rng, g);
    fuse_.init(rng, g);
    core_.init(rng, g);
    end_head_.init(rng, g);
    key_head_.init(rng, g);
    for (auto& h : arg_heads_) h.init(rng, g);
  }

  void set_all_zero() {
    for (auto* p : parameters()) p->value.setZero();
  }

  const ModelConfig& config() const { return cfg_; }
  ProgramMemory& memory() { return memory_; }
  const ProgramMemory& memory() const { return memory_; }
  LstmStack& core() { return core_; }

  // Every parameter block, in a fixed order; the memory blocks come last.
  ParamList parameters() {
    ParamList out;
    for (auto& e : encoders_) e.collect(out);
    fuse_.collect(out);
    core_.collect(out);
    end_head_.collect(out);
    key_head_.collect(out);
    for (auto& h : arg_heads_) h.collect(out);
    out.push_back(&memory_.keys());
    out.push_back(&memory_.embeddings());
    return out;
  }

  LstmState zero_state() const { return core_.zero_state(); }

  // f_enc for one environment.
  Vec encode(const Vec& features, EnvKind env, Mlp2::Cache* cache = nullptr) const {
    return encoders_[static_cast<int>(env)].forward(features, cache);
  }

  // MLP over [s; p].
  Vec fuse_inputs(const Vec& s, const Vec& p, Mlp2::Cache* cache = nullptr) const {
    require_size(s, cfg_.state_dim, "state encoding");
    require_size(p, cfg_.program_dim, "program embedding");
    Vec joined(s.size() + p.size());
    joined << s, p;
    return fuse_.forward(joined, cache);
  }

  // One step of the core for program `row` given raw observation features.
  StepOutput step(const Vec& features, EnvKind env, int row, LstmState& state, const std::vector<int>& candidates,
                  StepCache* cache = nullptr) const {
    Mlp2::Cache* enc_cache = cache ? &cache->enc : nullptr;
    Mlp2::Cache* fuse_cache = cache ? &cache->fuse : nullptr;
    const Vec s = encode(features, env, enc_cache);
    const Vec p = memory_.embeddings().value.row(row).transpose();
    const Vec u = fuse_inputs(s, p, fuse_cache);
    Vec h = core_.step(u, state, cache ? &cache->core : nullptr);
    StepOutput out;
    out.end_logit = end_head_.forward(h)[0];
    out.r = sigmoid(out.end_logit);
    out.key = key_head_.forward(h);
    out.scores.resize(static_cast<Eigen::Index>(candidates.size()));
    const auto& keys = memory_.keys().value;
    for (std::size_t c = 0; c < candidates.size(); ++c) out.scores[c] = keys.row(candidates[c]).dot(out.key);
    for (int s2 = 0; s2 < 3; ++s2) out.arg_logits[s2] = arg_heads_[s2].forward(h);
    if (cache) {
      cache->env = env;
      cache->row = row;
      cache->candidates = &candidates;
      cache->h = std::move(h);
    }
    return out;
  }

  StepOutput step(const Observation& obs, const Arguments& args, int row, LstmState& state,
                  StepCache* cache = nullptr) const {
    return step(features(obs, args), obs.env, row, state, memory_.visible_rows(row), cache);
  }

  // Backpropagates one step. `carry` holds the recurrent gradient from the
  // following step and is replaced by the one for the preceding step.
  void backward_step(const StepCache& cache, const StepOutput& out, const StepGrad& g, LstmState& carry) {
    Vec dh = Vec::Zero(cfg_.hidden);
    if (g.end_logit != 0.0) dh += end_head_.backward(cache.h, Vec::Constant(1, g.end_logit));
    if (g.scores.size() > 0) {
      auto& keys = memory_.keys();
      Vec dk = Vec::Zero(cfg_.key_dim);
      for (std::size_t c = 0; c < cache.candidates->size(); ++c) {
        const double gs = g.scores[static_cast<Eigen::Index>(c)];
        if (gs == 0.0) continue;
        const int r = (*cache.candidates)[c];
        dk += gs * keys.value.row(r).transpose();
        if (!keys.frozen) keys.grad.row(r) += gs * out.key.transpose();
      }
      dh += key_head_.backward(cache.h, dk);
    }
    for (int s = 0; s < 3; ++s)
      if (g.args[s].size() > 0) dh += arg_heads_[s].backward(cache.h, g.args[s]);
    const Vec du = core_.backward_step(cache.core, dh, carry);
    const Vec djoined = fuse_.backward(cache.fuse, du);
    auto& emb = memory_.embeddings();
    if (!emb.frozen) emb.grad.row(cache.row) += djoined.segment(cfg_.state_dim, cfg_.program_dim).transpose();
    encoders_[static_cast<int>(cache.env)].backward(cache.enc, djoined.segment(0, cfg_.state_dim));
  }

  // Freezes every block except the memory; used for fixed-core learning.
  void freeze_core(bool frozen = true) {
    for (auto* p : parameters()) p->frozen = frozen;
    memory_.keys().frozen = false;
    memory_.embeddings().frozen = false;
  }

 private:
  ModelConfig cfg_;
  std::array<Mlp2, 3> encoders_;
  Mlp2 fuse_;
  LstmStack core_;
  Linear end_head_;
  Linear key_head_;
  std::array<Linear, 3> arg_heads_;
  ProgramMemory memory_;
};

inline int argmax(const Vec& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return static_cast<int>(best);
}

}  // namespace npi
