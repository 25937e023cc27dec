#include "scansnap/seqgen.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace scansnap {

std::vector<Token> SequenceClassSpec::support() const {
  std::vector<Token> s;
  for (Eigen::Index l = 0; l < cond_prob.size(); ++l)
    if (cond_prob[l] > 0.0) s.push_back(static_cast<Token>(l));
  return s;
}

Eigen::VectorXd DatasetSpec::prior() const {
  if (class_prior.size() == 0)
    return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(classes.size()),
                                     1.0 / static_cast<double>(classes.size()));
  return class_prior;
}

void DatasetSpec::validate() const {
  const auto M = static_cast<Eigen::Index>(vocab_size);
  if (vocab_size == 0) throw std::invalid_argument("dataset: vocab_size must be positive");
  if (classes.empty()) throw std::invalid_argument("dataset: no classes");
  std::vector<bool> seen_next(vocab_size, false);
  for (std::size_t n = 0; n < classes.size(); ++n) {
    const auto& c = classes[n];
    const std::string where = "dataset: class " + std::to_string(n) + ": ";
    if (c.cond_prob.size() != M) throw std::invalid_argument(where + "cond_prob length != vocab_size");
    if (c.next_token >= vocab_size) throw std::invalid_argument(where + "next_token out of range");
    if (c.last_token >= vocab_size) throw std::invalid_argument(where + "last_token out of range");
    if (seen_next[c.next_token]) throw std::invalid_argument(where + "duplicate next_token");
    seen_next[c.next_token] = true;
    if ((c.cond_prob.array() < 0.0).any()) throw std::invalid_argument(where + "negative probability");
    if (!c.cond_prob.allFinite()) throw std::invalid_argument(where + "non-finite probability");
    if (std::abs(c.cond_prob.sum() - 1.0) > 1e-12)
      throw std::invalid_argument(where + "cond_prob does not sum to 1");
  }
  if (class_prior.size() != 0) {
    if (class_prior.size() != static_cast<Eigen::Index>(classes.size()))
      throw std::invalid_argument("dataset: class_prior length != number of classes");
    if ((class_prior.array() < 0.0).any() || std::abs(class_prior.sum() - 1.0) > 1e-12)
      throw std::invalid_argument("dataset: class_prior is not a probability vector");
  }
}

std::size_t DatasetSpec::class_of_next(Token next) const {
  for (std::size_t n = 0; n < classes.size(); ++n)
    if (classes[n].next_token == next) return n;
  throw std::out_of_range("dataset: no class with next token " + std::to_string(next));
}

std::vector<std::size_t> DatasetSpec::owners(Token l) const {
  std::vector<std::size_t> out;
  for (std::size_t n = 0; n < classes.size(); ++n)
    if (classes[n].cond_prob[static_cast<Eigen::Index>(l)] > 0.0) out.push_back(n);
  return out;
}

std::vector<Token> DatasetSpec::last_tokens() const {
  std::vector<Token> out;
  for (const auto& c : classes)
    if (std::find(out.begin(), out.end(), c.last_token) == out.end()) out.push_back(c.last_token);
  return out;
}

std::vector<std::size_t> DatasetSpec::classes_with_last(Token m) const {
  std::vector<std::size_t> out;
  for (std::size_t n = 0; n < classes.size(); ++n)
    if (classes[n].last_token == m) out.push_back(n);
  return out;
}

SequenceSample sample_sequence(const DatasetSpec& spec, std::size_t class_idx, std::size_t seq_len,
                               Rng& rng) {
  if (seq_len < 2) throw std::invalid_argument("sample_sequence: seq_len must be >= 2");
  if (class_idx >= spec.num_classes()) throw std::out_of_range("sample_sequence: invalid class index");
  const auto& c = spec.classes[class_idx];
  const CategoricalSampler draw({c.cond_prob.data(), static_cast<std::size_t>(c.cond_prob.size())});
  SequenceSample s;
  s.context.resize(seq_len - 1);
  for (auto& x : s.context) x = draw(rng);
  s.last = c.last_token;
  s.next = c.next_token;
  return s;
}

SequenceSample sample_sequence(const DatasetSpec& spec, std::size_t class_idx, std::size_t seq_len,
                               std::uint64_t seed) {
  Rng rng(seed);
  return sample_sequence(spec, class_idx, seq_len, rng);
}

Eigen::VectorXd empirical_freq(const SequenceSample& sample, std::size_t vocab_size) {
  if (sample.context.empty()) throw std::invalid_argument("empirical_freq: empty context");
  Eigen::VectorXd q = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(vocab_size));
  for (Token x : sample.context) {
    if (x >= vocab_size) throw std::out_of_range("empirical_freq: token out of range");
    q[static_cast<Eigen::Index>(x)] += 1.0;
  }
  return q / static_cast<double>(sample.context.size());
}

double hoeffding_radius(std::size_t seq_len, double delta) {
  return std::sqrt(std::log(2.0 / delta) / (2.0 * static_cast<double>(seq_len - 1)));
}

DatasetSpec build_syn_small() {
  DatasetSpec spec;
  spec.vocab_size = 30;
  for (std::size_t n = 0; n < 2; ++n) {
    SequenceClassSpec c;
    c.next_token = n;
    c.last_token = n == 0 ? 20 : 10;
    c.cond_prob = Eigen::VectorXd::Zero(30);
    c.cond_prob.head(10).setConstant(0.025);
    for (int k = 1; k <= 10; ++k)
      c.cond_prob[static_cast<Eigen::Index>(10 + 10 * n) + k - 1] = 0.75 * k / 55.0;
    spec.classes.push_back(std::move(c));
  }
  return spec;
}

DatasetSpec build_syn_medium(std::size_t K, std::size_t num_common, std::size_t num_distinct,
                             std::uint64_t seed) {
  if (K < 2) throw std::invalid_argument("build_syn_medium: K must be >= 2");
  if (num_distinct == 0) throw std::invalid_argument("build_syn_medium: num_distinct must be >= 1");
  DatasetSpec spec;
  spec.vocab_size = num_common + K * num_distinct;
  const auto M = static_cast<Eigen::Index>(spec.vocab_size);
  Rng rng(seed);
  for (std::size_t n = 0; n < K; ++n) {
    Rng cls = rng.split(n);
    SequenceClassSpec c;
    c.next_token = n;
    c.last_token = num_common + ((n + 1) % K) * num_distinct;
    c.cond_prob = Eigen::VectorXd::Zero(M);
    auto draw = [&cls] {
      double u = cls.uniform();
      while (u == 0.0) u = cls.uniform();
      return u;
    };
    for (std::size_t l = 0; l < num_common; ++l) c.cond_prob[static_cast<Eigen::Index>(l)] = draw();
    for (std::size_t j = 0; j < num_distinct; ++j)
      c.cond_prob[static_cast<Eigen::Index>(num_common + n * num_distinct + j)] = draw();
    c.cond_prob /= c.cond_prob.sum();
    spec.classes.push_back(std::move(c));
  }
  return spec;
}

std::vector<TokenRole> classify_tokens(const DatasetSpec& spec) {
  std::vector<TokenRole> roles(spec.vocab_size);
  for (Token l = 0; l < spec.vocab_size; ++l) {
    roles[l].owners = spec.owners(l);
    const auto k = roles[l].owners.size();
    roles[l].kind = k == 0 ? TokenKind::Unused : (k == 1 ? TokenKind::Distinct : TokenKind::Common);
  }
  return roles;
}

std::vector<Token> distinct_tokens(const DatasetSpec& spec, std::size_t n) {
  std::vector<Token> out;
  for (Token l : spec.classes.at(n).support())
    if (spec.owners(l).size() == 1) out.push_back(l);
  return out;
}

std::vector<Token> common_tokens(const DatasetSpec& spec) {
  std::vector<Token> out;
  for (Token l = 0; l < spec.vocab_size; ++l)
    if (spec.owners(l).size() > 1) out.push_back(l);
  return out;
}

}  // namespace scansnap
