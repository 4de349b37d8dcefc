#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace oracle {

Mat to_rows(const Eigen::MatrixXd& m) {
  Mat out(static_cast<std::size_t>(m.rows()), Vec(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out[r][c] = m(r, c);
  return out;
}

Mat random_mat(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double stddev) {
  std::normal_distribution<double> n(0.0, stddev);
  Mat out(rows, Vec(cols));
  for (auto& row : out)
    for (auto& v : row) v = n(rng);
  return out;
}

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

double sim(const Vec& a, const Vec& b, bool cosine) {
  const double d = dot(a, b);
  return cosine ? d / (norm(a) * norm(b)) : d;
}

Vec mean_rows(const Mat& m, std::size_t begin, std::size_t end) {
  Vec out(m[begin].size(), 0.0);
  for (std::size_t r = begin; r < end; ++r)
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += m[r][c];
  for (auto& v : out) v /= static_cast<double>(end - begin);
  return out;
}

double infonce(const Mat& text, const Mat& images, double tau, bool cosine) {
  const std::size_t B = text.size();
  double total = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    const double pos = std::exp(sim(text[b], images[b], cosine) / tau);
    double denom = pos;
    for (std::size_t o = 0; o < B; ++o) {
      if (o == b) continue;
      denom += std::exp(sim(text[o], images[b], cosine) / tau);  // x' against y
      denom += std::exp(sim(text[b], images[o], cosine) / tau);  // x against y'
    }
    total += -std::log(pos / denom);
  }
  return total / static_cast<double>(B);
}

double milnce(const Mat& text, const Mat& images, const std::vector<std::size_t>& offsets, double tau, bool cosine) {
  const std::size_t B = text.size();
  double total = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    double num = 0.0;
    for (std::size_t i = offsets[b]; i < offsets[b + 1]; ++i) num += std::exp(sim(text[b], images[i], cosine) / tau);
    double neg = 0.0;
    for (std::size_t o = 0; o < B; ++o) {
      if (o == b) continue;
      for (std::size_t i = offsets[b]; i < offsets[b + 1]; ++i) neg += std::exp(sim(text[o], images[i], cosine) / tau);
      for (std::size_t i = offsets[o]; i < offsets[o + 1]; ++i) neg += std::exp(sim(text[b], images[i], cosine) / tau);
    }
    total += -std::log(num / (num + neg));
  }
  return total / static_cast<double>(B);
}

double pcme_prob(const Mat& zi, const Mat& zl, double alpha, double beta) {
  double total = 0.0;
  for (const auto& a : zi) {
    for (const auto& b : zl) {
      double d2 = 0.0;
      for (std::size_t c = 0; c < a.size(); ++c) d2 += (a[c] - b[c]) * (a[c] - b[c]);
      total += 1.0 / (1.0 + std::exp(alpha * std::sqrt(d2) - beta));
    }
  }
  return total / static_cast<double>(zi.size() * zl.size());
}

double soft_contrastive(const Mat& probs, const Mat& matches) {
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < probs.size(); ++r) {
    for (std::size_t c = 0; c < probs[r].size(); ++c) {
      const double p = std::min(std::max(probs[r][c], 1e-7), 1.0 - 1e-7);
      total += matches[r][c] != 0.0 ? -std::log(p) : -std::log(1.0 - p);
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

namespace {

Mat draw(const Mat& mu, const Mat& lv, const Mat& noise, std::size_t samples, std::size_t row) {
  Mat out(samples, Vec(mu[row].size()));
  for (std::size_t k = 0; k < samples; ++k)
    for (std::size_t c = 0; c < mu[row].size(); ++c)
      out[k][c] = mu[row][c] + std::exp(0.5 * lv[row][c]) * noise[row * samples + k][c];
  return out;
}

}  // namespace

double pcme_objective(const Mat& text_mu, const Mat& text_lv, const Mat& image_mu, const Mat& image_lv,
                      const Mat& text_noise, const Mat& image_noise, std::size_t samples, double alpha, double beta) {
  const std::size_t B = text_mu.size();
  Mat probs(B, Vec(B));
  Mat matches(B, Vec(B, 0.0));
  for (std::size_t i = 0; i < B; ++i) {
    const Mat zi = draw(image_mu, image_lv, image_noise, samples, i);
    for (std::size_t t = 0; t < B; ++t) {
      probs[i][t] = pcme_prob(zi, draw(text_mu, text_lv, text_noise, samples, t), alpha, beta);
    }
    matches[i][i] = 1.0;
  }
  return soft_contrastive(probs, matches);
}

double milsim(const MilSimInput& in, double lambda, double tau_sentence, bool cosine_sentence, double tau_article,
              bool cosine_article) {
  const std::size_t B = in.sentence_offsets.size() - 1;
  Mat pooled_text, pooled_images;
  for (std::size_t b = 0; b < B; ++b) {
    pooled_text.push_back(mean_rows(in.sentences, in.sentence_offsets[b], in.sentence_offsets[b + 1]));
    pooled_images.push_back(mean_rows(in.images, in.image_offsets[b], in.image_offsets[b + 1]));
  }
  // The article term is InfoNCE(I^f, L^f): images pooled on one side, text on the other.
  double article = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    const double pos = std::exp(sim(pooled_text[b], pooled_images[b], cosine_article) / tau_article);
    double denom = pos;
    for (std::size_t o = 0; o < B; ++o) {
      if (o == b) continue;
      denom += std::exp(sim(pooled_text[o], pooled_images[b], cosine_article) / tau_article);
      denom += std::exp(sim(pooled_text[b], pooled_images[o], cosine_article) / tau_article);
    }
    article += -std::log(pos / denom);
  }
  article /= static_cast<double>(B);
  if (lambda == 0.0) return article;

  double sentence = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t i = in.image_offsets[b]; i < in.image_offsets[b + 1]; ++i) {
      Vec best(B, -std::numeric_limits<double>::infinity());
      for (std::size_t a = 0; a < B; ++a)
        for (std::size_t l = in.sentence_offsets[a]; l < in.sentence_offsets[a + 1]; ++l)
          best[a] = std::max(best[a], sim(in.sentences[l], in.images[i], cosine_sentence));
      double denom = 0.0;
      for (std::size_t a = 0; a < B; ++a) denom += std::exp(best[a] / tau_sentence);
      sentence += -std::log(std::exp(best[b] / tau_sentence) / denom);
    }
  }
  return article + lambda * sentence / static_cast<double>(B);
}

std::vector<std::vector<std::size_t>> subsets(std::size_t n, std::size_t k) {
  std::vector<std::vector<std::size_t>> out;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcount(mask)) != k) continue;
    std::vector<std::size_t> s;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (1u << i)) s.push_back(i);
    out.push_back(std::move(s));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> argmax_subset(std::size_t n, std::size_t k,
                                       const std::function<double(const std::vector<std::size_t>&)>& score) {
  std::vector<std::size_t> best;
  double best_score = -std::numeric_limits<double>::infinity();
  for (const auto& s : subsets(n, k)) {
    const double v = score(s);
    if (best.empty() || v > best_score) {
      best = s;
      best_score = v;
    }
  }
  return best;
}

std::vector<std::size_t> min_intersection_subset(const std::vector<std::set<std::string>>& tags, std::size_t k) {
  return argmax_subset(tags.size(), k, [&](const std::vector<std::size_t>& s) {
    std::size_t common = 0;
    for (const auto& t : tags[s[0]]) {
      bool everywhere = true;
      for (auto i : s) everywhere = everywhere && tags[i].count(t) > 0;
      common += everywhere ? 1 : 0;
    }
    return -static_cast<double>(common);
  });
}

std::vector<std::vector<std::size_t>> agglomerate(const Mat& vectors, double threshold, bool complete) {
  const std::size_t n = vectors.size();
  auto dist = [&](std::size_t a, std::size_t b) { return 1.0 - sim(vectors[a], vectors[b], true); };
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) groups.push_back({i});

  while (groups.size() > 1) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < groups.size(); ++i) {
      for (std::size_t j = i + 1; j < groups.size(); ++j) {
        double link = complete ? -std::numeric_limits<double>::infinity() : 0.0;
        for (auto a : groups[i])
          for (auto b : groups[j]) link = complete ? std::max(link, dist(a, b)) : link + dist(a, b);
        if (!complete) link /= static_cast<double>(groups[i].size() * groups[j].size());
        if (link < best) {
          best = link;
          bi = i;
          bj = j;
        }
      }
    }
    if (!(best < threshold)) break;
    groups[bi].insert(groups[bi].end(), groups[bj].begin(), groups[bj].end());
    std::sort(groups[bi].begin(), groups[bi].end());
    groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(bj));
    std::sort(groups.begin(), groups.end());
  }
  return groups;
}

PlantedCorpus planted_two_groups(std::size_t n, std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  PlantedCorpus out;
  for (std::size_t i = 0; i < n; ++i) {
    // Group g lives near axis g; noise of 0.05 per coordinate keeps every
    // member within a few degrees of its axis for dim <= 64.
    const int g = i < 2 ? static_cast<int>(i) : (coin(rng) ? 1 : 0);
    Vec v(dim);
    for (auto& x : v) x = 0.05 * gauss(rng) / std::sqrt(static_cast<double>(dim));
    v[static_cast<std::size_t>(g)] += 1.0;
    const double len = norm(v);
    for (auto& x : v) x /= len;
    out.vectors.push_back(std::move(v));
    out.labels.push_back(g);
  }
  return out;
}

std::vector<int> labels_from_groups(const std::vector<std::vector<std::size_t>>& groups, std::size_t n) {
  std::vector<int> labels(n, -1);
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (auto i : groups[g]) labels[i] = static_cast<int>(g);
  return labels;
}

double adjusted_rand(const std::vector<int>& a, const std::vector<int>& b) {
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> ca, cb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1;
    ca[a[i]] += 1;
    cb[b[i]] += 1;
  }
  auto c2 = [](double x) { return x * (x - 1) / 2; };
  double index = 0, sa = 0, sb = 0;
  for (const auto& [k, v] : joint) index += c2(v);
  for (const auto& [k, v] : ca) sa += c2(v);
  for (const auto& [k, v] : cb) sb += c2(v);
  const double expected = sa * sb / c2(static_cast<double>(a.size()));
  const double max_index = (sa + sb) / 2;
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

}  // namespace oracle
