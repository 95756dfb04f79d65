#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pcfgsr/derivation.hpp"
#include "pcfgsr/grammar.hpp"
#include "pcfgsr/rng.hpp"

namespace pcfgsr {

// Added to the logit of every masked-out action before the softmax.
inline constexpr double kMaskPenalty = -1e9;

struct PolicyShape {
  std::size_t actions = 0;
  std::size_t symbols = 0;
  std::size_t hidden = 64;
  std::size_t embedding = 8;
  std::size_t encoder = 16;
  std::size_t past_window = 10;
  std::size_t sibling_window = 4;

  std::size_t lstm_input() const { return 5 * encoder; }
  friend bool operator==(const PolicyShape&, const PolicyShape&) = default;
};

enum class Block : std::size_t {
  Embedding,  // embedding x (actions + 1); last column is the null token
  PastW,
  PastB,
  ParentW,
  ParentB,
  SiblingW,
  SiblingB,
  DepthW,
  DepthB,
  SymbolW,
  SymbolB,
  LstmInputW,  // 4*hidden x lstm_input, gate order i, f, g, o
  LstmHiddenW,
  LstmB,
  HeadW,
  HeadB,
  Count
};

inline constexpr std::size_t kBlockCount = static_cast<std::size_t>(Block::Count);

struct BlockInfo {
  std::string_view name;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t size() const { return rows * cols; }
  bool operator==(const BlockInfo&) const = default;
};

// All trainable weights in one flat vector; matrices are column-major.
// Also used as the gradient container.
class PolicyParameters {
 public:
  PolicyParameters() = default;
  explicit PolicyParameters(const PolicyShape& shape);

  const PolicyShape& shape() const { return shape_; }
  const BlockInfo& info(Block b) const { return blocks_[static_cast<std::size_t>(b)]; }
  const std::array<BlockInfo, kBlockCount>& blocks() const { return blocks_; }

  std::span<double> block(Block b);
  std::span<const double> block(Block b) const;
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  // Fixed (untrained) log-prior added to the action logits; defaults to 0.
  std::vector<double>& prior_logits() { return prior_; }
  const std::vector<double>& prior_logits() const { return prior_; }

  PolicyParameters zeros_like() const;
  friend bool operator==(const PolicyParameters&, const PolicyParameters&) = default;

 private:
  PolicyShape shape_;
  std::array<BlockInfo, kBlockCount> blocks_{};
  std::vector<double> values_;
  std::vector<double> prior_;
};

struct HiddenState {
  std::vector<double> h;
  std::vector<double> c;
};

// Scaled-uniform initialization, deterministic in `seed`. Throws
// std::invalid_argument when hidden == 0 or the shape is empty.
PolicyParameters init_policy(const PolicyShape& shape, std::uint64_t seed);
PolicyParameters init_policy(std::size_t action_count, std::size_t nonterminal_count, std::size_t hidden,
                             std::uint64_t seed);

// Log of the grammar's rule probabilities, usable as prior logits.
std::vector<double> grammar_prior_logits(const Grammar& g);

// Seeded standard normal scaled by 0.1.
HiddenState initial_hidden(std::size_t hidden, Rng& rng);

// logits + (mask ? 0 : kMaskPenalty), then softmax. Throws on an empty mask.
std::vector<double> masked_softmax(std::span<const double> logits, const Mask& mask);
double step_entropy(std::span<const double> probs, const Mask& mask);

struct ForwardResult {
  std::vector<double> probs;
  HiddenState next;
};

ForwardResult forward(const PolicyParameters& p, const StateObservation& obs, const HiddenState& eta);

// Index drawn from `probs` using one uniform variate; never returns an
// index with zero probability.
ActionId sample_action(std::span<const double> probs, Rng& rng);

// What a replay needs: the observations seen, actions taken, and the
// initial memory.
struct PolicyEpisode {
  HiddenState initial;
  std::vector<StateObservation> observations;
  std::vector<ActionId> actions;
  std::vector<double> sampled_probs;  // probability of each action when sampled
};

struct LogProbEntropy {
  double log_prob = 0.0;
  double entropy = 0.0;
};

class ReplayError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

LogProbEntropy episode_logprob_and_entropy(const PolicyParameters& p, const PolicyEpisode& episode);

struct WeightedEpisode {
  const PolicyEpisode* episode = nullptr;
  double advantage = 0.0;
};

// Objective averaged over the batch:
//   mean_k [ advantage_k * sum_h log pi(a_h|s_h) + entropy_weight * sum_h H_h ]
double objective(const PolicyParameters& p, std::span<const WeightedEpisode> batch, double entropy_weight);

// Exact gradient of `objective` by backpropagation through time. Throws
// std::runtime_error naming the block if any entry is non-finite.
PolicyParameters gradient(const PolicyParameters& p, std::span<const WeightedEpisode> batch,
                          double entropy_weight);

// Plain ascent step: p + alpha * g.
PolicyParameters update(const PolicyParameters& p, const PolicyParameters& g, double alpha);

class PolicyOptimizer {
 public:
  enum class Kind { Adam, Plain };
  PolicyOptimizer(Kind kind, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                  double epsilon = 1e-8);
  // Ascent step on the objective whose gradient is `g`.
  void step(PolicyParameters& p, const PolicyParameters& g);

 private:
  Kind kind_;
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<double> m_, v_;
};

// Versioned checkpoints. The binary form round-trips bit-exactly.
void save_policy_binary(const PolicyParameters& p, const std::string& path);
PolicyParameters load_policy_binary(const std::string& path);
std::string policy_to_json(const PolicyParameters& p);
PolicyParameters policy_from_json(std::string_view json);

}  // namespace pcfgsr
