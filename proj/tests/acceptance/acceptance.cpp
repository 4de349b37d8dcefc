// Acceptance suite: prints one PASS/FAIL line per criterion and exits nonzero
// if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "oracles.hpp"
#include "storyalign/cli.hpp"
#include "storyalign/storyalign.hpp"

namespace fs = std::filesystem;
using namespace storyalign;
using diff::Matrix;
using diff::Tape;
using diff::Var;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

Matrix to_matrix(const oracle::Mat& m) {
  Matrix out(static_cast<Eigen::Index>(m.size()), static_cast<Eigen::Index>(m[0].size()));
  for (std::size_t r = 0; r < m.size(); ++r)
    for (std::size_t c = 0; c < m[r].size(); ++c) out(r, c) = m[r][c];
  return out;
}

std::vector<std::size_t> random_offsets(std::size_t groups, std::size_t max_size, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> len(1, max_size);
  std::vector<std::size_t> off{0};
  for (std::size_t g = 0; g < groups; ++g) off.push_back(off.back() + len(rng));
  return off;
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c);
  return buf;
}

// 1 ------------------------------------------------------------------------

Verdict gradient_correctness() {
  const auto start = Clock::now();
  GradCheckOptions opts;
  opts.batches = 20;
  opts.step = 1e-4;
  opts.seed = 2024;
  const auto results = run_gradcheck(opts);
  const double elapsed = seconds_since(start);
  bool ok = results.size() == 4 && elapsed < 30.0;
  std::string detail;
  for (const auto& r : results) {
    ok = ok && r.batches >= 20 && r.max_rel_error < 1e-4;
    detail += r.name + " " + fmt("%.2e", r.max_rel_error) + ", ";
  }
  return {ok, detail + fmt("%.2f s", elapsed)};
}

// 2 ------------------------------------------------------------------------

Verdict oracle_equivalence() {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<std::size_t> batch(2, 4), dim(2, 8);
  double worst[4] = {0, 0, 0, 0};
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t B = batch(rng), D = dim(rng);
    const bool cosine = trial % 2 == 0;
    const double tau = 0.05 + 0.01 * (trial % 10);
    {
      auto x = oracle::random_mat(B, D, rng), y = oracle::random_mat(B, D, rng);
      Tape t;
      const double got = infonce_loss(t.constant(to_matrix(x)), t.constant(to_matrix(y)), {tau, cosine}).scalar();
      worst[0] = std::max(worst[0], std::abs(got - oracle::infonce(x, y, tau, cosine)));
    }
    {
      auto off = random_offsets(B, 3, rng);
      auto x = oracle::random_mat(B, D, rng), y = oracle::random_mat(off.back(), D, rng);
      Tape t;
      const double got =
          milnce_loss(t.constant(to_matrix(x)), t.constant(to_matrix(y)), off, {tau, cosine}).scalar();
      worst[1] = std::max(worst[1], std::abs(got - oracle::milnce(x, y, off, tau, cosine)));
    }
    {
      const std::size_t K = 1 + trial % 4;
      auto tmu = oracle::random_mat(B, D, rng), tlv = oracle::random_mat(B, D, rng, 0.3);
      auto imu = oracle::random_mat(B, D, rng), ilv = oracle::random_mat(B, D, rng, 0.3);
      auto tn = oracle::random_mat(B * K, D, rng), in = oracle::random_mat(B * K, D, rng);
      const double alpha = 0.5 + 0.25 * (trial % 8), beta = 0.2 * (trial % 10);
      Tape t;
      Var ts = pcme_sample(t.constant(to_matrix(tmu)), t.constant(to_matrix(tlv)), to_matrix(tn), K);
      Var is = pcme_sample(t.constant(to_matrix(imu)), t.constant(to_matrix(ilv)), to_matrix(in), K);
      Var probs = pcme_match_probs(is, ts, K, t.constant(alpha), t.constant(beta));
      const auto Bi = static_cast<Eigen::Index>(B);
      const double got = soft_contrastive_loss(probs, Matrix::Identity(Bi, Bi)).scalar();
      worst[2] = std::max(worst[2],
                          std::abs(got - oracle::pcme_objective(tmu, tlv, imu, ilv, tn, in, K, alpha, beta)));
    }
    {
      oracle::MilSimInput in;
      in.sentence_offsets = random_offsets(B, 4, rng);
      in.image_offsets = random_offsets(B, 3, rng);
      in.sentences = oracle::random_mat(in.sentence_offsets.back(), D, rng);
      in.images = oracle::random_mat(in.image_offsets.back(), D, rng);
      const double lambda = 0.1 * (trial % 11);
      Tape t;
      BatchTensors bt{t.constant(to_matrix(in.sentences)), t.constant(to_matrix(in.images)), in.sentence_offsets,
                      in.image_offsets};
      const MilSimConfig cfg{{tau, true}, {2 * tau, cosine}};
      const double got = milsim_loss(bt, lambda, cfg).scalar();
      worst[3] = std::max(worst[3], std::abs(got - oracle::milsim(in, lambda, tau, true, 2 * tau, cosine)));
    }
  }
  const bool ok = std::all_of(std::begin(worst), std::end(worst), [](double w) { return w < 1e-10; });
  return {ok, fmt("max |diff| infonce %.1e, milnce %.1e, pcme %.1e", worst[0], worst[1], worst[2]) +
                  fmt(", milsim %.1e over 100 batches", worst[3])};
}

// 3 ------------------------------------------------------------------------

Verdict exact_reductions() {
  std::mt19937_64 rng(5);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t B = 1 + trial % 4, D = 2 + trial % 7;
    {
      auto x = to_matrix(oracle::random_mat(B, D, rng)), y = to_matrix(oracle::random_mat(B, D, rng));
      std::vector<std::size_t> off(B + 1);
      std::iota(off.begin(), off.end(), std::size_t{0});
      const SimilarityConfig cfg{0.07, trial % 2 == 0};
      Tape t;
      if (milnce_loss(t.constant(x), t.constant(y), off, cfg).scalar() !=
          infonce_loss(t.constant(x), t.constant(y), cfg).scalar())
        ++mismatches;
    }
    {
      auto so = random_offsets(B, 4, rng), io = random_offsets(B, 3, rng);
      Tape t;
      BatchTensors bt{t.constant(to_matrix(oracle::random_mat(so.back(), D, rng))),
                      t.constant(to_matrix(oracle::random_mat(io.back(), D, rng))), so, io};
      const MilSimConfig cfg{{0.07, true}, {0.07, trial % 2 == 0}};
      if (milsim_loss(bt, 0.0, cfg).scalar() != infonce_loss(bt.pooled_text(), bt.pooled_images(), cfg.article).scalar())
        ++mismatches;
    }
  }
  return {mismatches == 0, std::to_string(mismatches) + " bitwise mismatches in 200 comparisons"};
}

// 4 ------------------------------------------------------------------------

Verdict closed_form_fixtures() {
  Tape t;
  Var e = t.constant(Matrix::Identity(2, 2));
  const double info = infonce_loss(e, e, {1.0, true}).scalar();

  RowMatrix zi = RowMatrix::Zero(1, 2), zl = RowMatrix::Zero(1, 2);
  zl(0, 0) = 2.0;
  const double sig = pcme_match_prob(zi, zl, {1.0, 0.0, 1});

  const std::vector<double> p{0.5};
  const bool match[] = {true};
  const double soft = soft_contrastive_loss(p, match);

  const bool ok = std::abs(info - 0.55144) <= 1e-5 + 1e-6 && std::abs(info - std::log(1 + 2 / std::exp(1.0))) < 1e-6 &&
                  std::abs(sig - 1.0 / (1.0 + std::exp(2.0))) < 1e-6 && std::abs(sig - 0.11920) <= 1e-5 + 1e-6 &&
                  std::abs(soft - std::log(2.0)) < 1e-6 && std::abs(soft - 0.69315) <= 1e-5 + 1e-6;
  return {ok, fmt("infonce %.6f, sigma %.6f, soft %.6f", info, sig, soft)};
}

// 5 and 6 ------------------------------------------------------------------

Dataset benchmark_corpus(std::uint64_t seed) {
  SyntheticGenConfig g;  // 150 stories (100 train, 50 held out), 5 images, 8 sentences, D 32, noise 0.1
  g.num_stories = 150;
  g.num_heldout = 50;
  g.images_per_story = 5;
  g.sentences_per_article = 8;
  g.text_dim = g.image_dim = 32;
  g.noise_scale = 0.1;
  g.seed = seed;
  return generate_synthetic_corpus(g);
}

RetrievalReport train_and_eval(const Dataset& data, TrainConfig cfg, std::optional<SetScorer> scorer = {}) {
  TrainState state = init_train_state(data, cfg);
  train_loop(data, state, cfg.total_steps);
  EvalOptions opts;
  opts.protocol = EvalProtocol::fixed(5);
  opts.scorer = scorer.value_or(default_scorer(cfg));
  opts.similarity = scoring_similarity(cfg, opts.scorer);
  return evaluate(data, state.model, opts);
}

Verdict synthetic_training() {
  const auto start = Clock::now();
  const Dataset data = benchmark_corpus(0);
  TrainConfig cfg;  // MIL-SIM, 2000 steps, desk defaults
  const RetrievalReport trained = train_and_eval(data, cfg);
  const double elapsed = seconds_since(start);

  const double chance = 1.0 / static_cast<double>(trained.num_candidates);
  double random_r1 = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Model model = make_random_model(data.text.dim(), data.images.dim(), data.text.dim(), seed);
    EvalOptions opts;
    opts.scorer = default_scorer(cfg);
    opts.similarity = scoring_similarity(cfg, opts.scorer);
    random_r1 += evaluate(data, model, opts).r1() / 10.0;
  }
  const bool ok = trained.r1() >= 0.80 && trained.median_rank() == 1 && std::abs(random_r1 - chance) <= 0.03 &&
                  elapsed < 60.0;
  return {ok, fmt("trained R@1 %.3f, median %.0f, ", trained.r1(), static_cast<double>(trained.median_rank())) +
                  fmt("random R@1 %.3f vs chance %.3f, training+eval %.2f s", random_r1, chance, elapsed)};
}

Verdict directional_ordering() {
  std::size_t mean_wins = 0, milsim_wins = 0;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Dataset data = benchmark_corpus(seed);
    TrainConfig single;
    single.objective = Objective::InfoNCE;
    single.infonce_images = ImagePooling::Single;
    single.seed = seed;
    TrainConfig mean = single;
    mean.infonce_images = ImagePooling::Mean;
    TrainConfig milsim;
    milsim.seed = seed;

    const double r_single = train_and_eval(data, single, SetScorer::Single).r1();
    const double r_mean = train_and_eval(data, mean, SetScorer::Mean).r1();
    const double r_milsim = train_and_eval(data, milsim).r1();
    mean_wins += r_mean >= r_single ? 1 : 0;
    milsim_wins += r_milsim >= r_single ? 1 : 0;
    detail += fmt("[%.2f %.2f %.2f] ", r_single, r_mean, r_milsim);
  }
  return {mean_wins >= 4 && milsim_wins >= 4,
          "R@1 [single mean milsim] per seed " + detail + "; mean >= single in " + std::to_string(mean_wins) +
              "/5, milsim >= single in " + std::to_string(milsim_wins) + "/5"};
}

// 7 ------------------------------------------------------------------------

Verdict combinatorial_oracles() {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> pool_size(5, 12), set_size(1, 5);
  std::size_t diverse_ok = 0, best_ok = 0;
  static const std::vector<std::string> vocab{"flood", "police", "court", "election", "storm", "market", "news"};

  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = pool_size(rng), k = std::min(set_size(rng), n);
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back("im" + std::to_string(1000 + i * 7 % 13 + 13 * i));
    std::shuffle(ids.begin(), ids.end(), rng);
    std::bernoulli_distribution coin(0.55);
    std::vector<EntityTagSet> sets;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::string> tags;
      for (const auto& v : vocab)
        if (coin(rng)) tags.push_back(v);
      sets.push_back(EntityTagSet::make(ids[i], tags));
    }
    auto sorted = sets;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.owner < b.owner; });
    std::vector<std::set<std::string>> tags;
    for (const auto& s : sorted) tags.push_back(s.tags);
    std::vector<std::string> want;
    for (auto i : oracle::min_intersection_subset(tags, k)) want.push_back(sorted[i].owner);
    DiverseSetOptions opts;
    opts.k = k;
    opts.threads = 1 + trial % 3;
    diverse_ok += select_diverse_set(sets, opts) == want ? 1 : 0;
  }

  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = pool_size(rng), k = std::min(set_size(rng), n), d = 2 + trial % 7;
    const auto rows_o = oracle::random_mat(n, d, rng);
    const auto text_o = oracle::random_mat(1, d, rng);
    const RowMatrix rows = to_matrix(rows_o);
    const Eigen::VectorXd article = to_matrix(text_o).row(0).transpose();
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back("p" + std::to_string(100 + i));
    BestSetOptions opts;
    opts.set_size = k;
    opts.scorer = trial % 2 == 0 ? SetScorer::Mean : SetScorer::Single;
    opts.similarity = {0.07, trial % 3 == 0};
    opts.threads = 1 + trial % 2;
    const bool cosine = opts.similarity.normalize;
    const auto want = oracle::argmax_subset(n, k, [&](const std::vector<std::size_t>& s) {
      oracle::Mat chosen;
      for (auto i : s) chosen.push_back(rows_o[i]);
      if (opts.scorer == SetScorer::Mean) return oracle::sim(text_o[0], oracle::mean_rows(chosen, 0, chosen.size()), cosine);
      double total = 0;
      for (const auto& c : chosen) total += oracle::sim(text_o[0], c, cosine);
      return total / static_cast<double>(chosen.size());
    });
    std::vector<std::string> want_ids;
    for (auto i : want) want_ids.push_back(ids[i]);
    best_ok += best_image_set(article, ids, rows, opts).ids == want_ids ? 1 : 0;
  }
  return {diverse_ok == 100 && best_ok == 100, "select_diverse_set " + std::to_string(diverse_ok) +
                                                   "/100, best_image_set " + std::to_string(best_ok) + "/100"};
}

// 8 ------------------------------------------------------------------------

Verdict metrics_fixtures() {
  const std::vector<std::size_t> ranks{1, 3, 7};
  const auto m = aggregate(ranks);
  bool ok = m.r1 == 1.0 / 3.0 && m.r5 == 2.0 / 3.0 && m.r10 == 1.0 && m.median_rank == 3;
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<std::size_t> len(1, 200), rank(1, 60);
  std::size_t violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<std::size_t> r(len(rng));
    for (auto& x : r) x = rank(rng);
    const auto a = aggregate(r);
    violations += (a.r1 <= a.r5 && a.r5 <= a.r10) ? 0 : 1;
  }
  ok = ok && violations == 0;
  return {ok, fmt("R@1 %.6f, R@5 %.6f, R@10 %.1f, ", m.r1, m.r5, m.r10) +
                  "median " + std::to_string(m.median_rank) + ", " + std::to_string(violations) +
                  " monotonicity violations in 1000 vectors"};
}

// 9 ------------------------------------------------------------------------

std::vector<Eigen::VectorXd> to_vectors(const oracle::Mat& m) {
  std::vector<Eigen::VectorXd> out;
  for (const auto& row : m) {
    out.emplace_back(static_cast<Eigen::Index>(row.size()));
    for (std::size_t c = 0; c < row.size(); ++c) out.back()(static_cast<Eigen::Index>(c)) = row[c];
  }
  return out;
}

// Every group of `fine` lies inside one group of `coarse`.
bool nested(const std::vector<std::vector<std::size_t>>& fine, const std::vector<std::vector<std::size_t>>& coarse,
            std::size_t n) {
  const auto label = oracle::labels_from_groups(coarse, n);
  for (const auto& g : fine)
    for (auto i : g)
      if (label[i] != label[g.front()]) return false;
  return true;
}

Verdict clustering_recovery() {
  std::size_t recovered = 0, planted_valid = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t n = 20 + 4 * seed;  // up to 56
    const auto corpus = oracle::planted_two_groups(n, 24, rng);
    double min_intra = 1.0, max_inter = -1.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const double c = oracle::sim(corpus.vectors[i], corpus.vectors[j], true);
        if (corpus.labels[i] == corpus.labels[j]) min_intra = std::min(min_intra, c);
        else max_inter = std::max(max_inter, c);
      }
    planted_valid += (min_intra > 0.9 && max_inter < 0.2) ? 1 : 0;
    const auto groups = cluster_vectors(to_vectors(corpus.vectors), 0.5, Linkage::Average);
    recovered += oracle::adjusted_rand(oracle::labels_from_groups(groups, n), corpus.labels) == 1.0 ? 1 : 0;
  }

  std::size_t monotone = 0;
  std::mt19937_64 rng(404);
  for (int corpus = 0; corpus < 20; ++corpus) {
    const auto vs = to_vectors(oracle::random_mat(10 + static_cast<std::size_t>(corpus) * 2, 6, rng));
    const Linkage linkage = corpus % 2 == 0 ? Linkage::Average : Linkage::Complete;
    bool ok = true;
    auto prev = cluster_vectors(vs, 0.0, linkage);
    for (int step = 1; step <= 40; ++step) {
      auto now = cluster_vectors(vs, 0.05 * step, linkage);
      ok = ok && now.size() <= prev.size() && nested(prev, now, vs.size());
      prev = std::move(now);
    }
    monotone += ok ? 1 : 0;
  }
  return {recovered == 10 && planted_valid == 10 && monotone == 20,
          "ARI = 1 on " + std::to_string(recovered) + "/10 planted corpora (" + std::to_string(planted_valid) +
              "/10 meet the separation bounds), threshold monotone and nested on " + std::to_string(monotone) +
              "/20 corpora"};
}

// 10 -----------------------------------------------------------------------

int cli(std::vector<std::string> args, std::string& log) {
  args.insert(args.begin(), "storyalign");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::parse_and_dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  log += err.str();
  return code;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

bool run_pipeline(const fs::path& root, std::string& log) {
  const std::string r = root.string();
  return cli({"synth", "--out", r + "/synth", "--seed", "11"}, log) == 0 &&
         cli({"cluster", "--data", r + "/synth", "--out", r + "/clustered", "--seed", "11"}, log) == 0 &&
         cli({"select-sets", "--data", r + "/clustered", "--out", r + "/curated", "--seed", "11"}, log) == 0 &&
         cli({"train", "--data", r + "/curated", "--out", r + "/ckpt", "--seed", "11", "--total-steps", "500",
              "--warmup-steps", "50"},
             log) == 0 &&
         cli({"eval", "--data", r + "/curated", "--ckpt", r + "/ckpt", "--out", r + "/eval", "--seed", "11",
              "--protocol", "mixed", "--threads", "2"},
             log) == 0;
}

Verdict pipeline_determinism() {
  const fs::path base = fs::temp_directory_path() / ("storyalign_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(base);
  std::string log;
  const bool ran = run_pipeline(base / "a", log) && run_pipeline(base / "b", log);
  if (!ran) {
    fs::remove_all(base);
    return {false, "pipeline failed: " + log};
  }
  const std::string json_a = slurp(base / "a/eval/report.json"), json_b = slurp(base / "b/eval/report.json");
  const std::string txt_a = slurp(base / "a/eval/report.txt"), txt_b = slurp(base / "b/eval/report.txt");
  const bool ok = !json_a.empty() && !txt_a.empty() && json_a == json_b && txt_a == txt_b;
  fs::remove_all(base);
  return {ok, "report.json " + std::to_string(json_a.size()) + " bytes " + (json_a == json_b ? "identical" : "DIFFER") +
                  ", report.txt " + std::to_string(txt_a.size()) + " bytes " + (txt_a == txt_b ? "identical" : "DIFFER")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"gradient correctness", gradient_correctness},
      {"oracle equivalence", oracle_equivalence},
      {"exact reductions", exact_reductions},
      {"closed-form fixtures", closed_form_fixtures},
      {"end-to-end synthetic training", synthetic_training},
      {"directional ordering", directional_ordering},
      {"combinatorial oracles", combinatorial_oracles},
      {"metrics fixtures", metrics_fixtures},
      {"clustering recovery", clustering_recovery},
      {"pipeline determinism", pipeline_determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failures += v.pass ? 0 : 1;
    std::printf("[%s] criterion %zu: %s (%s)\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
