#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "scansnap/rng.hpp"

namespace scansnap {

using Token = std::size_t;

// One sequence class: context tokens are i.i.d. from cond_prob, the query
// (last) token is last_token, and the prediction target is next_token.
struct SequenceClassSpec {
  Token next_token = 0;
  Token last_token = 0;
  Eigen::VectorXd cond_prob;

  std::vector<Token> support() const;
};

struct DatasetSpec {
  std::size_t vocab_size = 0;
  std::vector<SequenceClassSpec> classes;
  Eigen::VectorXd class_prior;  // empty means uniform

  std::size_t num_classes() const { return classes.size(); }
  Eigen::VectorXd prior() const;
  // Throws std::invalid_argument describing the first violated invariant.
  void validate() const;
  // Class index whose next token is `next`; throws if none.
  std::size_t class_of_next(Token next) const;
  // Omega(l): class indices whose support contains l.
  std::vector<std::size_t> owners(Token l) const;
  // Distinct last tokens in first-appearance order.
  std::vector<Token> last_tokens() const;
  std::vector<std::size_t> classes_with_last(Token m) const;
};

struct SequenceSample {
  std::vector<Token> context;
  Token last = 0;
  Token next = 0;
};

enum class TokenKind { Distinct, Common, Unused };

struct TokenRole {
  TokenKind kind = TokenKind::Unused;
  std::vector<std::size_t> owners;  // class indices
};

// `class_idx` is the 0-based position in spec.classes.
SequenceSample sample_sequence(const DatasetSpec& spec, std::size_t class_idx, std::size_t seq_len,
                               std::uint64_t seed);
SequenceSample sample_sequence(const DatasetSpec& spec, std::size_t class_idx, std::size_t seq_len,
                               Rng& rng);

Eigen::VectorXd empirical_freq(const SequenceSample& sample, std::size_t vocab_size);

// Radius of the two-sided Hoeffding interval for a frequency estimated from
// `seq_len - 1` draws at confidence 1 - delta.
double hoeffding_radius(std::size_t seq_len, double delta);

// M=30, K=2. Tokens 0-9 are shared (0.025 each); 10-19 belong to class 0 and
// 20-29 to class 1, with masses 0.75 * k / 55 for rank k = 1..10. Next
// tokens are 0 and 1; each class's query token is the first distinct token
// of the other class, so it never appears in its own context.
DatasetSpec build_syn_small();

// M = num_common + K * num_distinct. Per class, every support token gets a
// uniform(0,1) draw and the class is normalized jointly. Query tokens follow
// the same convention as build_syn_small.
DatasetSpec build_syn_medium(std::size_t K, std::size_t num_common = 10,
                             std::size_t num_distinct = 10, std::uint64_t seed = 0);

std::vector<TokenRole> classify_tokens(const DatasetSpec& spec);

// Distinct tokens owned by class n, in increasing token order.
std::vector<Token> distinct_tokens(const DatasetSpec& spec, std::size_t n);
std::vector<Token> common_tokens(const DatasetSpec& spec);

}  // namespace scansnap
