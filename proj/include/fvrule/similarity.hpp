#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "fvrule/text.hpp"

namespace fvrule {

class TextSimilarity {
 public:
  virtual ~TextSimilarity() = default;
  // Symmetric, in [0, 1]. Empty vs empty is 1, empty vs non-empty is 0.
  virtual double similarity(std::string_view a, std::string_view b) const = 0;
};

// Cosine over tf-idf vectors of lowercase word tokens. Document
// frequencies come from the corpus given at construction;
// idf(w) = ln((N + 1) / (df(w) + 1)) + 1, so unseen words still count.
class TfIdfSimilarity : public TextSimilarity {
 public:
  TfIdfSimilarity() = default;

  explicit TfIdfSimilarity(const std::vector<std::string>& corpus) : n_docs_(corpus.size()) {
    for (const auto& doc : corpus) {
      auto ws = text::words(doc);
      for (const auto& w : std::set<std::string>(ws.begin(), ws.end())) ++df_[w];
    }
  }

  double idf(const std::string& w) const {
    auto it = df_.find(w);
    const double df = it == df_.end() ? 0.0 : static_cast<double>(it->second);
    return std::log((static_cast<double>(n_docs_) + 1.0) / (df + 1.0)) + 1.0;
  }

  double similarity(std::string_view a, std::string_view b) const override {
    const auto wa = text::words(a);
    const auto wb = text::words(b);
    if (wa.empty() || wb.empty()) return wa.empty() && wb.empty() ? 1.0 : 0.0;
    auto va = vectorize(wa);
    auto vb = vectorize(wb);
    if (va == vb) return 1.0;
    double dot = 0.0;
    for (const auto& [w, x] : va) {
      auto it = vb.find(w);
      if (it != vb.end()) dot += x * it->second;
    }
    const double denom = norm(va) * norm(vb);
    if (denom == 0.0) return 0.0;
    return std::clamp(dot / denom, 0.0, 1.0);
  }

 private:
  std::map<std::string, double> vectorize(const std::vector<std::string>& ws) const {
    std::map<std::string, double> tf;
    for (const auto& w : ws) tf[w] += 1.0;
    for (auto& [w, x] : tf) x *= idf(w);
    return tf;
  }

  static double norm(const std::map<std::string, double>& v) {
    double s = 0.0;
    for (const auto& [w, x] : v) s += x * x;
    return std::sqrt(s);
  }

  std::size_t n_docs_ = 0;
  std::map<std::string, std::size_t> df_;
};

// Cosine over vectors from an embedding model; negative cosines clamp to 0.
class EmbeddingSimilarity : public TextSimilarity {
 public:
  using Embedder = std::function<std::vector<double>(std::string_view)>;

  explicit EmbeddingSimilarity(Embedder embed) : embed_(std::move(embed)) {}

  double similarity(std::string_view a, std::string_view b) const override {
    const bool ea = text::trim(a).empty();
    const bool eb = text::trim(b).empty();
    if (ea || eb) return ea && eb ? 1.0 : 0.0;
    if (a == b) return 1.0;
    const auto x = embed_(a);
    const auto y = embed_(b);
    if (x.size() != y.size() || x.empty()) return 0.0;
    double dot = 0.0, nx = 0.0, ny = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      dot += x[i] * y[i];
      nx += x[i] * x[i];
      ny += y[i] * y[i];
    }
    if (nx == 0.0 || ny == 0.0) return 0.0;
    return std::clamp(dot / std::sqrt(nx * ny), 0.0, 1.0);
  }

 private:
  Embedder embed_;
};

}  // namespace fvrule
