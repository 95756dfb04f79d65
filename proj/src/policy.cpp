#include "pcfgsr/policy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "json.hpp"

namespace pcfgsr {

namespace {

constexpr std::array<std::string_view, kBlockCount> kBlockNames{
    "embedding",  "past.W",   "past.b",        "parent.W",        "parent.b", "sibling.W",
    "sibling.b",  "depth.W",  "depth.b",       "symbol.W",        "symbol.b", "lstm.input_W",
    "lstm.hidden_W", "lstm.b", "head.W",       "head.b"};

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// y = W x + b, W column-major (rows x cols).
void affine(std::span<const double> w, std::span<const double> b, std::span<const double> x,
            std::span<double> y) {
  const std::size_t rows = y.size();
  std::copy(b.begin(), b.end(), y.begin());
  for (std::size_t c = 0; c < x.size(); ++c) {
    const double xc = x[c];
    if (xc == 0.0) continue;
    const double* col = w.data() + c * rows;
    for (std::size_t r = 0; r < rows; ++r) y[r] += col[r] * xc;
  }
}

// y += W x (no bias).
void accumulate(std::span<const double> w, std::span<const double> x, std::span<double> y) {
  const std::size_t rows = y.size();
  for (std::size_t c = 0; c < x.size(); ++c) {
    const double xc = x[c];
    if (xc == 0.0) continue;
    const double* col = w.data() + c * rows;
    for (std::size_t r = 0; r < rows; ++r) y[r] += col[r] * xc;
  }
}

// dx += W^T dy
void accumulate_transposed(std::span<const double> w, std::span<const double> dy, std::span<double> dx) {
  const std::size_t rows = dy.size();
  for (std::size_t c = 0; c < dx.size(); ++c) {
    const double* col = w.data() + c * rows;
    double s = 0.0;
    for (std::size_t r = 0; r < rows; ++r) s += col[r] * dy[r];
    dx[c] += s;
  }
}

// dW += dy x^T
void accumulate_outer(std::span<double> dw, std::span<const double> dy, std::span<const double> x) {
  const std::size_t rows = dy.size();
  for (std::size_t c = 0; c < x.size(); ++c) {
    const double xc = x[c];
    if (xc == 0.0) continue;
    double* col = dw.data() + c * rows;
    for (std::size_t r = 0; r < rows; ++r) col[r] += dy[r] * xc;
  }
}

std::size_t embedding_column(ActionId a, const PolicyShape& s) {
  if (a == kNullAction) return s.actions;
  if (a >= s.actions) throw std::out_of_range("action id outside the policy's action range");
  return a;
}

// Everything one step of the recurrence computes, kept for backprop.
struct StepCache {
  std::vector<std::size_t> past_ids, sibling_ids;
  std::size_t parent_id = 0;
  std::vector<double> x_past, x_parent, x_sibling, x_depth, x_symbol;
  std::vector<double> input;  // concatenated encoder outputs (tanh)
  std::vector<double> h_prev, c_prev;
  std::vector<double> gi, gf, gg, go, c, tanh_c, h;
  std::vector<double> probs, log_probs;
};

void gather(std::span<const double> emb, std::size_t e, std::span<const std::size_t> ids,
            std::vector<double>& out) {
  out.resize(ids.size() * e);
  for (std::size_t k = 0; k < ids.size(); ++k)
    std::copy_n(emb.data() + ids[k] * e, e, out.data() + k * e);
}

void step_forward(const PolicyParameters& p, const StateObservation& obs, const HiddenState& eta,
                  StepCache& s) {
  const auto& sh = p.shape();
  const std::size_t K = sh.encoder;
  const std::size_t D = sh.hidden;
  const std::size_t E = sh.embedding;
  if (obs.past_actions.size() != sh.past_window || obs.sibling_actions.size() != sh.sibling_window)
    throw std::invalid_argument("observation windows do not match the policy shape");
  if (obs.mask.size() != sh.actions) throw std::invalid_argument("mask length does not match action count");
  if (obs.symbol_count != sh.symbols) throw std::invalid_argument("symbol count does not match the policy");
  if (eta.h.size() != D || eta.c.size() != D) throw std::invalid_argument("hidden state has the wrong size");

  s.past_ids.resize(sh.past_window);
  for (std::size_t k = 0; k < sh.past_window; ++k) s.past_ids[k] = embedding_column(obs.past_actions[k], sh);
  s.sibling_ids.resize(sh.sibling_window);
  for (std::size_t k = 0; k < sh.sibling_window; ++k)
    s.sibling_ids[k] = embedding_column(obs.sibling_actions[k], sh);
  s.parent_id = embedding_column(obs.parent_action, sh);

  const auto emb = p.block(Block::Embedding);
  gather(emb, E, s.past_ids, s.x_past);
  gather(emb, E, std::span(&s.parent_id, 1), s.x_parent);
  gather(emb, E, s.sibling_ids, s.x_sibling);
  s.x_depth.assign(1, obs.depth_feature());
  s.x_symbol = obs.symbol_one_hot();

  s.input.assign(5 * K, 0.0);
  const std::array<std::pair<Block, const std::vector<double>*>, 5> enc{
      {{Block::PastW, &s.x_past},
       {Block::ParentW, &s.x_parent},
       {Block::SiblingW, &s.x_sibling},
       {Block::DepthW, &s.x_depth},
       {Block::SymbolW, &s.x_symbol}}};
  for (std::size_t k = 0; k < enc.size(); ++k) {
    const auto wb = enc[k].first;
    const auto bb = static_cast<Block>(static_cast<std::size_t>(wb) + 1);
    auto seg = std::span(s.input).subspan(k * K, K);
    affine(p.block(wb), p.block(bb), *enc[k].second, seg);
    for (auto& v : seg) v = std::tanh(v);
  }

  s.h_prev = eta.h;
  s.c_prev = eta.c;
  std::vector<double> z(4 * D);
  affine(p.block(Block::LstmInputW), p.block(Block::LstmB), s.input, z);
  accumulate(p.block(Block::LstmHiddenW), s.h_prev, z);

  s.gi.resize(D);
  s.gf.resize(D);
  s.gg.resize(D);
  s.go.resize(D);
  s.c.resize(D);
  s.tanh_c.resize(D);
  s.h.resize(D);
  for (std::size_t j = 0; j < D; ++j) {
    s.gi[j] = sigmoid(z[j]);
    s.gf[j] = sigmoid(z[D + j]);
    s.gg[j] = std::tanh(z[2 * D + j]);
    s.go[j] = sigmoid(z[3 * D + j]);
    s.c[j] = s.gf[j] * s.c_prev[j] + s.gi[j] * s.gg[j];
    s.tanh_c[j] = std::tanh(s.c[j]);
    s.h[j] = s.go[j] * s.tanh_c[j];
  }

  std::vector<double> logits(sh.actions);
  affine(p.block(Block::HeadW), p.block(Block::HeadB), s.h, logits);
  const auto& prior = p.prior_logits();
  for (std::size_t a = 0; a < sh.actions; ++a) logits[a] += prior[a];

  s.probs = masked_softmax(logits, obs.mask);
  // stable log-probabilities of the same masked logits
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < sh.actions; ++a) {
    logits[a] += obs.mask[a] ? 0.0 : kMaskPenalty;
    mx = std::max(mx, logits[a]);
  }
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - mx);
  const double lse = mx + std::log(sum);
  s.log_probs.resize(sh.actions);
  for (std::size_t a = 0; a < sh.actions; ++a) s.log_probs[a] = logits[a] - lse;
}

double cached_entropy(const StepCache& s, const Mask& mask) {
  double h = 0.0;
  for (std::size_t a = 0; a < s.probs.size(); ++a)
    if (mask[a] && s.probs[a] > 0.0) h -= s.probs[a] * s.log_probs[a];
  return h;
}

std::vector<StepCache> replay(const PolicyParameters& p, const PolicyEpisode& ep) {
  if (ep.observations.size() != ep.actions.size())
    throw std::invalid_argument("episode has mismatched observations and actions");
  std::vector<StepCache> caches(ep.actions.size());
  HiddenState eta = ep.initial;
  for (std::size_t t = 0; t < ep.actions.size(); ++t) {
    step_forward(p, ep.observations[t], eta, caches[t]);
    const ActionId a = ep.actions[t];
    if (a >= caches[t].probs.size() || caches[t].probs[a] <= 0.0)
      throw ReplayError("recorded action " + std::to_string(a + 1) + " at step " + std::to_string(t) +
                        " has zero probability under replay");
    eta.h = caches[t].h;
    eta.c = caches[t].c;
  }
  return caches;
}

}  // namespace

PolicyParameters::PolicyParameters(const PolicyShape& shape) : shape_(shape) {
  const std::size_t K = shape.encoder;
  const std::size_t D = shape.hidden;
  const std::size_t E = shape.embedding;
  const std::array<std::pair<std::size_t, std::size_t>, kBlockCount> dims{{
      {E, shape.actions + 1},
      {K, shape.past_window * E},
      {K, 1},
      {K, E},
      {K, 1},
      {K, shape.sibling_window * E},
      {K, 1},
      {K, 1},
      {K, 1},
      {K, shape.symbols},
      {K, 1},
      {4 * D, shape.lstm_input()},
      {4 * D, D},
      {4 * D, 1},
      {shape.actions, D},
      {shape.actions, 1},
  }};
  std::size_t offset = 0;
  for (std::size_t b = 0; b < kBlockCount; ++b) {
    blocks_[b] = {kBlockNames[b], offset, dims[b].first, dims[b].second};
    offset += blocks_[b].size();
  }
  values_.assign(offset, 0.0);
  prior_.assign(shape.actions, 0.0);
}

std::span<double> PolicyParameters::block(Block b) {
  const auto& i = info(b);
  return std::span(values_).subspan(i.offset, i.size());
}

std::span<const double> PolicyParameters::block(Block b) const {
  const auto& i = info(b);
  return std::span(values_).subspan(i.offset, i.size());
}

PolicyParameters PolicyParameters::zeros_like() const {
  PolicyParameters z = *this;
  std::fill(z.values_.begin(), z.values_.end(), 0.0);
  return z;
}

PolicyParameters init_policy(const PolicyShape& shape, std::uint64_t seed) {
  if (shape.hidden == 0) throw std::invalid_argument("hidden size must be at least 1");
  if (shape.actions == 0 || shape.symbols == 0 || shape.embedding == 0 || shape.encoder == 0)
    throw std::invalid_argument("policy shape has an empty dimension");
  PolicyParameters p(shape);
  for (std::size_t b = 0; b < kBlockCount; ++b) {
    const auto block = static_cast<Block>(b);
    // biases share the scale of the weight matrix they follow
    const bool is_bias = p.info(block).cols == 1 && b > 0 && p.info(static_cast<Block>(b - 1)).rows == p.info(block).rows &&
                         block != Block::DepthW;
    std::size_t fan_in = p.info(block).cols;
    if (is_bias) fan_in = p.info(static_cast<Block>(b - 1)).cols;
    const double scale = block == Block::Embedding ? 1.0 : 1.0 / std::sqrt(static_cast<double>(fan_in));
    Rng rng(derive_seed({seed, b}));
    for (auto& v : p.block(block)) v = scale * (2.0 * uniform01(rng) - 1.0);
  }
  return p;
}

PolicyParameters init_policy(std::size_t action_count, std::size_t nonterminal_count, std::size_t hidden,
                             std::uint64_t seed) {
  PolicyShape shape;
  shape.actions = action_count;
  shape.symbols = nonterminal_count;
  shape.hidden = hidden;
  return init_policy(shape, seed);
}

std::vector<double> grammar_prior_logits(const Grammar& g) {
  std::vector<double> out;
  out.reserve(g.action_count());
  for (const auto& r : g.rules()) out.push_back(r.probability > 0.0 ? std::log(r.probability) : kMaskPenalty);
  return out;
}

HiddenState initial_hidden(std::size_t hidden, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  HiddenState eta;
  eta.h.resize(hidden);
  eta.c.resize(hidden);
  for (auto& v : eta.h) v = 0.1 * normal(rng);
  for (auto& v : eta.c) v = 0.1 * normal(rng);
  return eta;
}

std::vector<double> masked_softmax(std::span<const double> logits, const Mask& mask) {
  if (mask.size() != logits.size()) throw std::invalid_argument("mask length does not match logits");
  if (std::find(mask.begin(), mask.end(), true) == mask.end())
    throw std::invalid_argument("mask allows no action");
  std::vector<double> out(logits.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = logits[i] + (mask[i] ? 0.0 : kMaskPenalty);
    mx = std::max(mx, out[i]);
  }
  double sum = 0.0;
  for (auto& v : out) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (auto& v : out) v /= sum;
  return out;
}

double step_entropy(std::span<const double> probs, const Mask& mask) {
  double h = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i)
    if (mask[i] && probs[i] > 0.0) h -= probs[i] * std::log(probs[i]);
  return std::max(h, 0.0);
}

ForwardResult forward(const PolicyParameters& p, const StateObservation& obs, const HiddenState& eta) {
  StepCache s;
  step_forward(p, obs, eta, s);
  return {std::move(s.probs), {std::move(s.h), std::move(s.c)}};
}

ActionId sample_action(std::span<const double> probs, Rng& rng) {
  double total = 0.0;
  for (double v : probs) total += v;
  const double u = uniform01(rng) * total;
  double cum = 0.0;
  ActionId last = kNullAction;
  for (ActionId a = 0; a < probs.size(); ++a) {
    if (probs[a] <= 0.0) continue;
    cum += probs[a];
    last = a;
    if (u < cum) return a;
  }
  if (last == kNullAction) throw std::invalid_argument("cannot sample from an all-zero distribution");
  return last;
}

LogProbEntropy episode_logprob_and_entropy(const PolicyParameters& p, const PolicyEpisode& episode) {
  const auto caches = replay(p, episode);
  LogProbEntropy out;
  for (std::size_t t = 0; t < caches.size(); ++t) {
    out.log_prob += caches[t].log_probs[episode.actions[t]];
    out.entropy += cached_entropy(caches[t], episode.observations[t].mask);
  }
  return out;
}

double objective(const PolicyParameters& p, std::span<const WeightedEpisode> batch, double entropy_weight) {
  if (batch.empty()) return 0.0;
  double total = 0.0;
  for (const auto& we : batch) {
    const auto le = episode_logprob_and_entropy(p, *we.episode);
    total += we.advantage * le.log_prob + entropy_weight * le.entropy;
  }
  return total / static_cast<double>(batch.size());
}

PolicyParameters gradient(const PolicyParameters& p, std::span<const WeightedEpisode> batch,
                          double entropy_weight) {
  PolicyParameters g = p.zeros_like();
  if (batch.empty()) return g;
  const auto& sh = p.shape();
  const std::size_t A = sh.actions;
  const std::size_t D = sh.hidden;
  const std::size_t K = sh.encoder;
  const std::size_t E = sh.embedding;
  const double scale = 1.0 / static_cast<double>(batch.size());

  std::vector<double> dlogits(A), dh(D), dc(D), dh_next(D), dc_next(D), dz(4 * D), dinput(5 * K), de(K),
      dx;

  for (const auto& we : batch) {
    if (!std::isfinite(we.advantage)) throw std::invalid_argument("advantage is not finite");
    const auto& ep = *we.episode;
    const auto caches = replay(p, ep);
    std::fill(dh_next.begin(), dh_next.end(), 0.0);
    std::fill(dc_next.begin(), dc_next.end(), 0.0);

    for (std::size_t t = caches.size(); t-- > 0;) {
      const auto& s = caches[t];
      const auto& mask = ep.observations[t].mask;
      const double entropy = cached_entropy(s, mask);
      const ActionId a = ep.actions[t];
      for (std::size_t k = 0; k < A; ++k) {
        double d = 0.0;
        if (mask[k] && s.probs[k] > 0.0) {
          d = we.advantage * ((k == a ? 1.0 : 0.0) - s.probs[k]);
          d += entropy_weight * (-s.probs[k] * (s.log_probs[k] + entropy));
        }
        dlogits[k] = scale * d;
      }

      accumulate_outer(g.block(Block::HeadW), dlogits, s.h);
      {
        auto hb = g.block(Block::HeadB);
        for (std::size_t k = 0; k < A; ++k) hb[k] += dlogits[k];
      }
      dh = dh_next;
      accumulate_transposed(p.block(Block::HeadW), dlogits, dh);

      for (std::size_t j = 0; j < D; ++j) {
        const double dcj = dh[j] * s.go[j] * (1.0 - s.tanh_c[j] * s.tanh_c[j]) + dc_next[j];
        dz[j] = dcj * s.gg[j] * s.gi[j] * (1.0 - s.gi[j]);
        dz[D + j] = dcj * s.c_prev[j] * s.gf[j] * (1.0 - s.gf[j]);
        dz[2 * D + j] = dcj * s.gi[j] * (1.0 - s.gg[j] * s.gg[j]);
        dz[3 * D + j] = dh[j] * s.tanh_c[j] * s.go[j] * (1.0 - s.go[j]);
        dc[j] = dcj * s.gf[j];
      }
      dc_next = dc;

      accumulate_outer(g.block(Block::LstmInputW), dz, s.input);
      accumulate_outer(g.block(Block::LstmHiddenW), dz, s.h_prev);
      {
        auto lb = g.block(Block::LstmB);
        for (std::size_t j = 0; j < 4 * D; ++j) lb[j] += dz[j];
      }
      std::fill(dh_next.begin(), dh_next.end(), 0.0);
      accumulate_transposed(p.block(Block::LstmHiddenW), dz, dh_next);
      std::fill(dinput.begin(), dinput.end(), 0.0);
      accumulate_transposed(p.block(Block::LstmInputW), dz, dinput);

      const std::array<std::pair<Block, const std::vector<double>*>, 5> enc{
          {{Block::PastW, &s.x_past},
           {Block::ParentW, &s.x_parent},
           {Block::SiblingW, &s.x_sibling},
           {Block::DepthW, &s.x_depth},
           {Block::SymbolW, &s.x_symbol}}};
      auto gemb = g.block(Block::Embedding);
      for (std::size_t k = 0; k < enc.size(); ++k) {
        const auto wb = enc[k].first;
        const auto bb = static_cast<Block>(static_cast<std::size_t>(wb) + 1);
        for (std::size_t r = 0; r < K; ++r) {
          const double y = s.input[k * K + r];
          de[r] = dinput[k * K + r] * (1.0 - y * y);
        }
        accumulate_outer(g.block(wb), de, *enc[k].second);
        auto gb = g.block(bb);
        for (std::size_t r = 0; r < K; ++r) gb[r] += de[r];

        // scatter into the embedding table for action-valued inputs
        const std::size_t* ids = nullptr;
        std::size_t count = 0;
        if (wb == Block::PastW) {
          ids = s.past_ids.data();
          count = s.past_ids.size();
        } else if (wb == Block::ParentW) {
          ids = &s.parent_id;
          count = 1;
        } else if (wb == Block::SiblingW) {
          ids = s.sibling_ids.data();
          count = s.sibling_ids.size();
        }
        if (count == 0) continue;
        dx.assign(count * E, 0.0);
        accumulate_transposed(p.block(wb), de, dx);
        for (std::size_t q = 0; q < count; ++q)
          for (std::size_t e = 0; e < E; ++e) gemb[ids[q] * E + e] += dx[q * E + e];
      }
    }
  }

  for (std::size_t b = 0; b < kBlockCount; ++b) {
    for (double v : g.block(static_cast<Block>(b)))
      if (!std::isfinite(v))
        throw std::runtime_error("non-finite gradient in block " + std::string(kBlockNames[b]));
  }
  return g;
}

PolicyParameters update(const PolicyParameters& p, const PolicyParameters& g, double alpha) {
  if (!(p.shape() == g.shape())) throw std::invalid_argument("gradient shape does not match parameters");
  PolicyParameters out = p;
  for (std::size_t i = 0; i < out.values().size(); ++i) out.values()[i] += alpha * g.values()[i];
  return out;
}

PolicyOptimizer::PolicyOptimizer(Kind kind, double learning_rate, double beta1, double beta2, double epsilon)
    : kind_(kind), lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

void PolicyOptimizer::step(PolicyParameters& p, const PolicyParameters& g) {
  if (!(p.shape() == g.shape())) throw std::invalid_argument("gradient shape does not match parameters");
  auto& x = p.values();
  const auto& d = g.values();
  if (kind_ == Kind::Plain) {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += lr_ * d[i];
    return;
  }
  if (m_.size() != x.size()) {
    m_.assign(x.size(), 0.0);
    v_.assign(x.size(), 0.0);
    t_ = 0;
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < x.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * d[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * d[i] * d[i];
    x[i] += lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

namespace {

constexpr char kMagic[8] = {'P', 'C', 'F', 'G', 'S', 'R', 'P', 'B'};
constexpr std::uint32_t kCheckpointVersion = 1;
static_assert(std::endian::native == std::endian::little, "checkpoint format assumes little-endian");

template <class T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw std::runtime_error("truncated policy checkpoint");
  return v;
}

std::array<std::uint64_t, 7> shape_fields(const PolicyShape& s) {
  return {s.actions, s.symbols, s.hidden, s.embedding, s.encoder, s.past_window, s.sibling_window};
}

PolicyShape shape_from(const std::array<std::uint64_t, 7>& f) {
  PolicyShape s;
  s.actions = f[0];
  s.symbols = f[1];
  s.hidden = f[2];
  s.embedding = f[3];
  s.encoder = f[4];
  s.past_window = f[5];
  s.sibling_window = f[6];
  return s;
}

}  // namespace

void save_policy_binary(const PolicyParameters& p, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(kMagic, sizeof kMagic);
  put(out, kCheckpointVersion);
  for (auto f : shape_fields(p.shape())) put(out, f);
  put(out, static_cast<std::uint64_t>(p.values().size()));
  out.write(reinterpret_cast<const char*>(p.values().data()),
            static_cast<std::streamsize>(p.values().size() * sizeof(double)));
  put(out, static_cast<std::uint64_t>(p.prior_logits().size()));
  out.write(reinterpret_cast<const char*>(p.prior_logits().data()),
            static_cast<std::streamsize>(p.prior_logits().size() * sizeof(double)));
  if (!out) throw std::runtime_error("write failed: " + path);
}

PolicyParameters load_policy_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw std::runtime_error(path + ": not a policy checkpoint");
  if (get<std::uint32_t>(in) != kCheckpointVersion) throw std::runtime_error(path + ": unsupported version");
  std::array<std::uint64_t, 7> f{};
  for (auto& v : f) v = get<std::uint64_t>(in);
  PolicyParameters p(shape_from(f));
  if (get<std::uint64_t>(in) != p.values().size()) throw std::runtime_error(path + ": parameter count mismatch");
  in.read(reinterpret_cast<char*>(p.values().data()), static_cast<std::streamsize>(p.values().size() * sizeof(double)));
  if (get<std::uint64_t>(in) != p.prior_logits().size()) throw std::runtime_error(path + ": prior size mismatch");
  in.read(reinterpret_cast<char*>(p.prior_logits().data()),
          static_cast<std::streamsize>(p.prior_logits().size() * sizeof(double)));
  if (!in) throw std::runtime_error("truncated policy checkpoint");
  return p;
}

std::string policy_to_json(const PolicyParameters& p) {
  const auto& s = p.shape();
  nlohmann::json j;
  j["format"] = "pcfgsr-policy";
  j["version"] = kCheckpointVersion;
  j["shape"] = {{"actions", s.actions},     {"symbols", s.symbols},         {"hidden", s.hidden},
                {"embedding", s.embedding}, {"encoder", s.encoder},         {"past_window", s.past_window},
                {"sibling_window", s.sibling_window}};
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : p.blocks())
    blocks.push_back({{"name", b.name}, {"offset", b.offset}, {"rows", b.rows}, {"cols", b.cols}});
  j["blocks"] = blocks;
  j["values"] = p.values();
  j["prior_logits"] = p.prior_logits();
  return j.dump();
}

PolicyParameters policy_from_json(std::string_view text) {
  const auto j = nlohmann::json::parse(text);
  if (j.at("format") != "pcfgsr-policy") throw std::runtime_error("not a policy checkpoint");
  if (j.at("version") != kCheckpointVersion) throw std::runtime_error("unsupported checkpoint version");
  const auto& js = j.at("shape");
  PolicyShape s;
  s.actions = js.at("actions");
  s.symbols = js.at("symbols");
  s.hidden = js.at("hidden");
  s.embedding = js.at("embedding");
  s.encoder = js.at("encoder");
  s.past_window = js.at("past_window");
  s.sibling_window = js.at("sibling_window");
  PolicyParameters p(s);
  auto values = j.at("values").get<std::vector<double>>();
  auto prior = j.at("prior_logits").get<std::vector<double>>();
  if (values.size() != p.values().size() || prior.size() != p.prior_logits().size())
    throw std::runtime_error("checkpoint sizes do not match its shape");
  p.values() = std::move(values);
  p.prior_logits() = std::move(prior);
  return p;
}

}  // namespace pcfgsr
