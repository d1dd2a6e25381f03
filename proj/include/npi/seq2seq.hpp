#pragma once

#include <algorithm>
#include <array>
#include <string>
#include <tuple>
#include <vector>

#include "npi/adam.hpp"
#include "npi/environment.hpp"
#include "npi/layers.hpp"
#include "npi/loss.hpp"
#include "npi/lstm.hpp"
#include "npi/trace_io.hpp"

namespace npi {

// ---- Tokens and formatters --------------------------------------------------

// Digits are their own tokens; 'X' separates or pads, 'E' ends a sequence.
// GO starts the decoder and never appears in data.
inline constexpr int kTokX = 10;
inline constexpr int kTokEnd = 11;
inline constexpr int kTokGo = 12;
inline constexpr int kSeqVocab = 13;

inline int token_of(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c == 'X') return kTokX;
  if (c == 'E') return kTokEnd;
  throw DataError(std::string("invalid sequence token '") + c + "'");
}

inline char char_of(int t) {
  if (t >= 0 && t <= 9) return static_cast<char>('0' + t);
  if (t == kTokX) return 'X';
  if (t == kTokEnd) return 'E';
  return '?';
}

inline std::vector<int> tokens_of(const std::string& s) {
  std::vector<int> t;
  for (char c : s) t.push_back(token_of(c));
  return t;
}

inline std::string text_of(const std::vector<int>& t) {
  std::string s;
  for (int v : t) s += char_of(v);
  return s;
}

// Array -> sorted array, both closed by the end token: [9,2,5] gives 925E -> 259E.
inline SeqRecord format_sort_seq(const std::vector<int>& array) {
  if (array.empty()) throw InputError("sort sequence needs at least one element");
  std::string in, out;
  for (int v : array) {
    if (v < 0 || v > 9) throw InputError("sort sequence values must be digits");
    in += static_cast<char>('0' + v);
  }
  std::vector<int> sorted = array;
  std::sort(sorted.begin(), sorted.end());
  for (int v : sorted) out += static_cast<char>('0' + v);
  return SeqRecord{"sort", {in + "E"}, out + "E"};
}

// "90X160X" continued by "250": the model reads both operands and emits the sum.
inline SeqRecord format_add_plain(const std::string& a, const std::string& b) {
  return SeqRecord{"add-plain", {a + "X" + b + "X"}, add_decimal(a, b) + "E"};
}

namespace detail {

inline std::string reversed_padded(const std::string& s, std::size_t width) {
  std::string r(s.rbegin(), s.rend());
  r.resize(width, '0');
  return r;
}

}  // namespace detail

// Digit-reversed operands zero-padded to the length L of the sum, followed by
// L+1 pad symbols; the output holds L+1 pad symbols and then the sum in
// natural order: (90, 160) gives 090XXXX / 061XXXX -> XXXX250.
inline SeqRecord format_add_stacked(const std::string& a, const std::string& b) {
  const std::string sum = add_decimal(a, b);
  const std::size_t L = sum.size();
  const std::string pad(L + 1, 'X');
  return SeqRecord{"add-stacked",
                   {detail::reversed_padded(a, L) + pad, detail::reversed_padded(b, L) + pad},
                   pad + sum};
}

// Digit-reversed operands and the reversed sum, one output per input column:
// (90, 160) gives 090 / 061 -> 052.
inline SeqRecord format_add_easy(const std::string& a, const std::string& b) {
  const std::string sum = add_decimal(a, b);
  const std::size_t L = sum.size();
  return SeqRecord{"add-easy", {detail::reversed_padded(a, L), detail::reversed_padded(b, L)},
                   std::string(sum.rbegin(), sum.rend())};
}

// Recovers (a, b, a+b) from a formatted addition record.
inline std::tuple<std::string, std::string, std::string> parse_add_record(const SeqRecord& r) {
  auto unreverse = [](std::string s) {
    s.erase(std::remove(s.begin(), s.end(), 'X'), s.end());
    std::reverse(s.begin(), s.end());
    return strip_leading_zeros(s);
  };
  if (r.format == "add-plain") {
    const std::string& in = r.channels.at(0);
    const auto x = in.find('X');
    if (x == std::string::npos || in.back() != 'X' || r.target.empty() || r.target.back() != 'E')
      throw DataError("malformed add-plain record");
    return {in.substr(0, x), in.substr(x + 1, in.size() - x - 2), r.target.substr(0, r.target.size() - 1)};
  }
  if (r.format == "add-stacked") {
    std::string sum = r.target;
    sum.erase(std::remove(sum.begin(), sum.end(), 'X'), sum.end());
    return {unreverse(r.channels.at(0)), unreverse(r.channels.at(1)), sum};
  }
  if (r.format == "add-easy") {
    return {unreverse(r.channels.at(0)), unreverse(r.channels.at(1)), std::string(r.target.rbegin(), r.target.rend())};
  }
  throw DataError("not an addition record: " + r.format);
}

inline SeqRecord format_record(const std::string& format, const Environment& env) {
  if (format == "sort") {
    if (const auto* pad = std::get_if<SortPad>(&env)) return format_sort_seq(pad->cells());
    throw InputError("the sort format needs a sorting instance");
  }
  const auto* pad = std::get_if<AdditionPad>(&env);
  if (format != "add-plain" && format != "add-stacked" && format != "add-easy")
    throw InputError("unknown sequence format '" + format + "'");
  if (!pad) throw InputError("format " + format + " needs an addition instance");
  const std::string a = pad->row_digits(0), b = pad->row_digits(1);
  if (format == "add-plain") return format_add_plain(a, b);
  if (format == "add-stacked") return format_add_stacked(a, b);
  return format_add_easy(a, b);
}

// ---- Model -------------------------------------------------------------------

struct Seq2SeqConfig {
  int layers = 2;
  int hidden = 256;
  int embed_dim = 32;
  std::uint64_t seed = 1;
  friend bool operator==(const Seq2SeqConfig&, const Seq2SeqConfig&) = default;
};

// Encoder-decoder LSTM for the sort and add-plain formats; a single
// synchronous LSTM over stacked channels for add-stacked and add-easy.
class Seq2SeqModel {
 public:
  Seq2SeqModel() = default;
  Seq2SeqModel(const Seq2SeqConfig& cfg, const std::string& format) : cfg_(cfg), format_(format) {
    if (format == "sort" || format == "add-plain") {
      synchronous_ = false;
      channels_ = 1;
    } else if (format == "add-stacked" || format == "add-easy") {
      synchronous_ = true;
      channels_ = 2;
    } else {
      throw ConfigError("unknown sequence format '" + format + "'");
    }
    embed_ = Parameter("s2s.embed", kSeqVocab, cfg.embed_dim);
    encoder_ = LstmStack("s2s.encoder", cfg.embed_dim * channels_, cfg.hidden, cfg.layers);
    if (!synchronous_) decoder_ = LstmStack("s2s.decoder", cfg.embed_dim, cfg.hidden, cfg.layers);
    out_ = Linear("s2s.out", cfg.hidden, kSeqVocab);
    Rng rng(cfg.seed);
    init_uniform(embed_.value, 1.0, rng);
    encoder_.init(rng);
    if (!synchronous_) decoder_.init(rng);
    out_.init(rng);
  }

  const Seq2SeqConfig& config() const { return cfg_; }
  const std::string& format() const { return format_; }
  bool synchronous() const { return synchronous_; }

  ParamList parameters() {
    ParamList p{&embed_};
    encoder_.collect(p);
    if (!synchronous_) decoder_.collect(p);
    out_.collect(p);
    return p;
  }

  // Teacher-forced cross-entropy summed over output positions.
  double loss(const SeqRecord& ex, bool backward) {
    check(ex);
    std::vector<std::vector<int>> in;
    for (const auto& c : ex.channels) in.push_back(tokens_of(c));
    const std::vector<int> target = tokens_of(ex.target);
    return synchronous_ ? sync_loss(in, target, backward) : encdec_loss(in[0], target, backward);
  }

  // Greedy decoding.
  std::string predict(const SeqRecord& ex) const {
    check(ex);
    std::vector<std::vector<int>> in;
    for (const auto& c : ex.channels) in.push_back(tokens_of(c));
    std::vector<int> out;
    if (synchronous_) {
      LstmState st = encoder_.zero_state();
      for (std::size_t t = 0; t < in[0].size(); ++t) out.push_back(argmax_token(out_.forward(encoder_.step(joint(in, t), st))));
      return text_of(out);
    }
    LstmState st = encoder_.zero_state();
    for (int tok : in[0]) encoder_.step(embedding(tok), st);
    int prev = kTokGo;
    const std::size_t limit = 2 * in[0].size() + 4;
    while (out.size() < limit) {
      const int tok = argmax_token(out_.forward(decoder_.step(embedding(prev), st)));
      out.push_back(tok);
      if (tok == kTokEnd) break;
      prev = tok;
    }
    return text_of(out);
  }

  bool correct(const SeqRecord& ex) const { return predict(ex) == ex.target; }

 private:
  void check(const SeqRecord& ex) const {
    if (ex.format != format_) throw DataError("record format " + ex.format + " given to a " + format_ + " model");
    if (static_cast<int>(ex.channels.size()) != channels_) throw DataError("record has the wrong number of channels");
    if (synchronous_)
      for (const auto& c : ex.channels)
        if (c.size() != ex.target.size()) throw DataError("synchronous record channels must match the output length");
  }

  static int argmax_token(const Vec& logits) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < logits.size(); ++i)
      if (logits[i] > logits[best]) best = i;
    return static_cast<int>(best);
  }

  Vec embedding(int tok) const { return embed_.value.row(tok).transpose(); }

  Vec joint(const std::vector<std::vector<int>>& in, std::size_t t) const {
    Vec x(cfg_.embed_dim * channels_);
    for (int c = 0; c < channels_; ++c) x.segment(c * cfg_.embed_dim, cfg_.embed_dim) = embedding(in[c][t]);
    return x;
  }

  void embed_backward(int tok, const Vec& dx) {
    if (!embed_.frozen) embed_.grad.row(tok) += dx.transpose();
  }

  double sync_loss(const std::vector<std::vector<int>>& in, const std::vector<int>& target, bool backward) {
    const std::size_t T = target.size();
    std::vector<LstmStack::StepCache> caches(T);
    std::vector<Vec> hs(T), dlogits(T);
    LstmState st = encoder_.zero_state();
    double total = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      hs[t] = encoder_.step(joint(in, t), st, &caches[t]);
      const auto x = softmax_xent(out_.forward(hs[t]), target[t]);
      total += x.loss;
      dlogits[t] = x.grad;
    }
    if (!backward) return total;
    LstmState carry = encoder_.zero_state();
    for (std::size_t t = T; t-- > 0;) {
      const Vec dx = encoder_.backward_step(caches[t], out_.backward(hs[t], dlogits[t]), carry);
      for (int c = 0; c < channels_; ++c) embed_backward(in[c][t], dx.segment(c * cfg_.embed_dim, cfg_.embed_dim));
    }
    return total;
  }

  double encdec_loss(const std::vector<int>& in, const std::vector<int>& target, bool backward) {
    const std::size_t S = in.size(), T = target.size();
    std::vector<LstmStack::StepCache> enc(S), dec(T);
    std::vector<Vec> hs(T), dlogits(T);
    LstmState st = encoder_.zero_state();
    for (std::size_t s = 0; s < S; ++s) encoder_.step(embedding(in[s]), st, &enc[s]);
    double total = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      const int prev = t == 0 ? kTokGo : target[t - 1];
      hs[t] = decoder_.step(embedding(prev), st, &dec[t]);
      const auto x = softmax_xent(out_.forward(hs[t]), target[t]);
      total += x.loss;
      dlogits[t] = x.grad;
    }
    if (!backward) return total;
    LstmState carry = decoder_.zero_state();
    for (std::size_t t = T; t-- > 0;) {
      const Vec dx = decoder_.backward_step(dec[t], out_.backward(hs[t], dlogits[t]), carry);
      embed_backward(t == 0 ? kTokGo : target[t - 1], dx);
    }
    const Vec none = Vec::Zero(cfg_.hidden);
    for (std::size_t s = S; s-- > 0;) embed_backward(in[s], encoder_.backward_step(enc[s], none, carry));
    return total;
  }

  Seq2SeqConfig cfg_;
  std::string format_;
  bool synchronous_ = false;
  int channels_ = 1;
  Parameter embed_;
  LstmStack encoder_;
  LstmStack decoder_;
  Linear out_;
};

// ---- Training and evaluation ---------------------------------------------------

struct S2STrainConfig {
  AdamConfig adam;
  int batch_size = 1;
  long max_steps = 20000;
  std::uint64_t seed = 1;
};

// Teacher-forced training on uniformly drawn examples. Returns the mean
// per-example loss over the final 1000 updates.
inline double s2s_train(Seq2SeqModel& model, const std::vector<SeqRecord>& data, const S2STrainConfig& cfg) {
  if (data.empty()) throw ConfigError("sequence training set is empty");
  const ParamList params = model.parameters();
  Adam adam(params, cfg.adam);
  Rng rng(cfg.seed);
  double recent = 0.0;
  long counted = 0;
  for (long step = 0; step < cfg.max_steps; ++step) {
    zero_grads(params);
    double l = 0.0;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const auto idx = std::min(data.size() - 1, static_cast<std::size_t>(static_cast<double>(rng() >> 11) * 0x1.0p-53 *
                                                                          static_cast<double>(data.size())));
      l += model.loss(data[idx], true);
    }
    adam.step(params);
    if (step >= cfg.max_steps - 1000) {
      recent += l / cfg.batch_size;
      ++counted;
    }
  }
  return counted ? recent / static_cast<double>(counted) : 0.0;
}

// Fraction of examples whose every emitted token matches.
inline double s2s_eval(const Seq2SeqModel& model, const std::vector<SeqRecord>& data) {
  if (data.empty()) return 0.0;
  std::size_t ok = 0;
  for (const auto& ex : data) ok += model.correct(ex);
  return static_cast<double>(ok) / static_cast<double>(data.size());
}

}  // namespace npi
