#include "tutela/diffembed_reference.hpp"

#include <algorithm>
#include <cmath>

#include "tutela/error.hpp"

namespace tutela::embed::reference {

CooccurrenceFeatures cooccurrence_features(const WalkCorpus& corpus, std::size_t window) {
  if (window == 0) throw DomainError("window must be >= 1");
  const std::size_t n = corpus.vocabulary.size();
  if (n > kMaxNodes) throw DomainError("reference features limited to " + std::to_string(kMaxNodes) + " nodes");
  CooccurrenceFeatures y;
  y.window = window;
  y.node_count = n;
  y.counts.assign(n, std::vector<double>(2 * window * n, 0.0));
  for (const auto& seq : corpus.sequences) {
    for (std::size_t i = 0; i < seq.size(); ++i) {
      const NodeId v = seq[i];
      auto& row = y.counts[v];
      for (std::size_t o = 1; o <= window; ++o) {
        if (i >= o) row[(o - 1) * n + seq[i - o]] += 1.0;
        if (i + o < seq.size()) row[(window + o - 1) * n + seq[i + o]] += 1.0;
      }
    }
  }
  return y;
}

ReferenceModel train_reference(const WalkCorpus& corpus, const EmbedConfig& config, Loss loss) {
  config.validate();
  auto y = cooccurrence_features(corpus, config.window);
  const std::size_t n = y.node_count;
  const std::size_t d = config.dim;
  const std::size_t m = y.width();

  std::vector<char> occurs(n, 0);
  for (const auto& seq : corpus.sequences) {
    for (auto v : seq) occurs[v] = 1;
  }
  std::vector<NodeId> trainable;
  std::vector<std::vector<double>> target(n);
  for (NodeId v = 0; v < n; ++v) {
    if (!occurs[v]) continue;
    double total = 0.0;
    for (double c : y.counts[v]) total += c;
    if (total > 0.0) {
      target[v] = y.counts[v];
      for (auto& c : target[v]) c /= total;
      trainable.push_back(v);
    }
  }
  if (std::none_of(occurs.begin(), occurs.end(), [](char c) { return c != 0; })) {
    throw DomainError("empty corpus");
  }

  Rng rng = make_rng(config.seed, 0x0E1Full);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<double> w1(n * d);
  std::vector<double> w2(d * m);
  std::vector<double> b2(m, 0.0);
  for (auto& x : w1) x = (2.0 * uniform_unit(rng) - 1.0) * scale;
  for (auto& x : w2) x = (2.0 * uniform_unit(rng) - 1.0) * scale * 0.1;

  ReferenceModel model;
  std::vector<double> hidden(d), out(m), grad_out(m), grad_hidden(d);
  const double lr = config.learning_rate;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = trainable.size(); i > 1; --i) {
      std::swap(trainable[i - 1], trainable[uniform_below(rng, i)]);
    }
    double epoch_loss = 0.0;
    for (NodeId v : trainable) {
      const double* row = &w1[v * d];
      for (std::size_t k = 0; k < d; ++k) hidden[k] = std::max(0.0, row[k]);
      std::copy(b2.begin(), b2.end(), out.begin());
      for (std::size_t k = 0; k < d; ++k) {
        if (hidden[k] == 0.0) continue;
        const double* w = &w2[k * m];
        for (std::size_t j = 0; j < m; ++j) out[j] += hidden[k] * w[j];
      }
      const auto& t = target[v];
      if (loss == Loss::squared_euclidean) {
        double l = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
          double diff = out[j] - t[j];
          l += diff * diff;
          grad_out[j] = 2.0 * diff;
        }
        epoch_loss += l;
      } else {
        double mx = *std::max_element(out.begin(), out.end());
        double z = 0.0;
        for (std::size_t j = 0; j < m; ++j) z += std::exp(out[j] - mx);
        double log_z = mx + std::log(z);
        double l = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
          double p = std::exp(out[j] - log_z);
          if (t[j] > 0.0) l -= t[j] * (out[j] - log_z);
          grad_out[j] = p - t[j];
        }
        epoch_loss += l;
      }
      for (std::size_t k = 0; k < d; ++k) {
        double* w = &w2[k * m];
        double acc = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
          acc += w[j] * grad_out[j];
          if (hidden[k] != 0.0) w[j] -= lr * hidden[k] * grad_out[j];
        }
        grad_hidden[k] = row[k] > 0.0 ? acc : 0.0;
      }
      for (std::size_t j = 0; j < m; ++j) b2[j] -= lr * grad_out[j];
      double* w = &w1[v * d];
      for (std::size_t k = 0; k < d; ++k) w[k] -= lr * grad_hidden[k];
    }
    model.epoch_loss.push_back(trainable.empty() ? 0.0 : epoch_loss / static_cast<double>(trainable.size()));
  }

  model.table = EmbeddingTable(d);
  std::vector<float> vec(d);
  for (NodeId v = 0; v < n; ++v) {
    if (!occurs[v]) continue;
    for (std::size_t k = 0; k < d; ++k) vec[k] = static_cast<float>(w1[v * d + k]);
    model.table.add(corpus.vocabulary[v], vec);
  }
  return model;
}

}  // namespace tutela::embed::reference
