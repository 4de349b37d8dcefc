#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "commands.hpp"
#include "storyalign/error.hpp"
#include "storyalign/gradcheck.hpp"
#include "storyalign/illustrate.hpp"
#include "storyalign/retrieval_eval.hpp"
#include "storyalign/text.hpp"

namespace storyalign::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::Io, "cannot write " + path.string());
  f << text;
}

void check_dims(const Dataset& ds, std::size_t text_dim, std::size_t image_dim) {
  if (ds.text.dim() != text_dim || ds.images.dim() != image_dim) {
    throw Error(ErrorKind::DimensionMismatch,
                "checkpoint expects text/image dims " + std::to_string(text_dim) + "/" + std::to_string(image_dim) +
                    " but the dataset has " + std::to_string(ds.text.dim()) + "/" + std::to_string(ds.images.dim()));
  }
}

ordered_json validation_json(const ValidationMetrics& v) {
  return {{"r1", v.r1}, {"r5", v.r5}, {"r10", v.r10}, {"median_rank", v.median_rank}};
}

}  // namespace

int run_train(const Context& ctx, TrainOptions o) {
  const fs::path out = require_out(ctx);
  std::vector<fs::path> input_paths = dataset_files(o.data);
  if (!o.resume.empty()) {
    const auto ck = checkpoint_files(o.resume);
    input_paths.insert(input_paths.end(), ck.begin(), ck.end());
  }
  const InputChecksums inputs = checksum_inputs(input_paths);
  const Dataset ds = load_dataset(o.data);

  TrainState state = [&] {
    if (!o.resume.empty()) return load_checkpoint(o.resume);
    TrainConfig cfg = o.config;
    cfg.objective = parse_objective(o.objective);
    cfg.infonce_images = parse_image_pooling(o.infonce_images);
    if (o.images_per_story_sample == "all") {
      cfg.images_per_story_sample.reset();
    } else {
      try {
        cfg.images_per_story_sample = std::stoul(o.images_per_story_sample);
      } catch (const std::exception&) {
        throw Error(ErrorKind::InvalidArgument,
                    "--images-per-story-sample must be a count or 'all', got '" + o.images_per_story_sample + "'");
      }
    }
    cfg.seed = ctx.common.seed;
    return init_train_state(ds, cfg);
  }();
  check_dims(ds, state.text_dim, state.image_dim);
  const std::size_t until = o.until == 0 ? state.config.total_steps : o.until;

  fs::create_directories(out);
  const bool append = !o.resume.empty() && fs::equivalent(fs::path(o.resume), out);
  std::ofstream log(out / "train_log.jsonl", append ? std::ios::app : std::ios::trunc);
  if (!log) throw Error(ErrorKind::Io, "cannot write " + (out / "train_log.jsonl").string());

  const auto checksum_before = matrix_checksum(ds.text.data()) ^ matrix_checksum(ds.images.data());
  const auto entries = train_loop(ds, state, until, [&](const TrainLogEntry& e) {
    ordered_json line{{"step", e.step}, {"loss", e.loss}, {"lr", e.lr}};
    if (e.validation) line["validation"] = validation_json(*e.validation);
    log << line.dump() << "\n";
    if (ctx.common.verbose && (e.validation || (e.step + 1) % 100 == 0)) {
      ctx.err << "step " << e.step + 1 << " loss " << e.loss << " lr " << e.lr;
      if (e.validation) ctx.err << " val R@1 " << e.validation->r1;
      ctx.err << "\n";
    }
  });
  if ((matrix_checksum(ds.text.data()) ^ matrix_checksum(ds.images.data())) != checksum_before) {
    throw Error(ErrorKind::InvalidArgument, "base embeddings changed during training");
  }

  save_checkpoint(out, state);
  write_run_manifest(ctx, out, inputs);
  ctx.out << "trained " << to_string(state.config.objective) << " to step " << state.optimizer.step;
  if (!entries.empty()) ctx.out << ", final loss " << entries.back().loss;
  ctx.out << "; checkpoint in " << out.string() << "\n";
  return 0;
}

int run_eval(const Context& ctx, const EvalOptionsCli& o) {
  std::vector<fs::path> input_paths = dataset_files(o.data);
  const auto ck = checkpoint_files(o.ckpt);
  input_paths.insert(input_paths.end(), ck.begin(), ck.end());
  const InputChecksums inputs = checksum_inputs(input_paths);

  const Dataset ds = load_dataset(o.data);
  const TrainState state = load_checkpoint(o.ckpt);
  check_dims(ds, state.text_dim, state.image_dim);

  EvalOptions opts;
  opts.protocol = parse_protocol(o.protocol);
  opts.scorer = o.scorer.empty() ? default_scorer(state.config) : parse_scorer(o.scorer);
  opts.similarity = scoring_similarity(state.config, opts.scorer);
  opts.seed = ctx.common.seed;
  opts.threads = ctx.common.threads;
  opts.split = o.split;
  const RetrievalReport report = evaluate(ds, state.model, opts);

  const std::string json = report_to_json(report);
  const std::string table = report_to_table(report);
  if (!ctx.common.out.empty()) {
    const fs::path out = ctx.common.out;
    fs::create_directories(out);
    write_text(out / "report.json", json);
    write_text(out / "report.txt", table);
    write_run_manifest(ctx, out, inputs);
  }
  ctx.out << (o.format == "json" ? json : table);
  return 0;
}

int run_illustrate(const Context& ctx, const IllustrateOptions& o) {
  std::vector<fs::path> input_paths{o.article};
  const auto pool_files = dataset_files(o.pool);
  input_paths.insert(input_paths.end(), pool_files.begin(), pool_files.end());
  if (!o.ckpt.empty()) {
    const auto ck = checkpoint_files(o.ckpt);
    input_paths.insert(input_paths.end(), ck.begin(), ck.end());
  }
  const InputChecksums inputs = checksum_inputs(input_paths);
  const Dataset pool = load_dataset(o.pool);

  const SetScorer scorer = parse_scorer(o.scorer);
  Model model;
  SimilarityConfig set_similarity{0.07, scorer == SetScorer::Single};
  SimilarityConfig sentence_similarity{0.07, true};
  if (!o.ckpt.empty()) {
    TrainState state = load_checkpoint(o.ckpt);
    check_dims(pool, state.text_dim, state.image_dim);
    set_similarity = scoring_similarity(state.config, scorer);
    sentence_similarity = state.config.milsim_similarity().sentence;
    model = std::move(state.model);
  } else {
    model = make_model(pool.text.dim(), pool.images.dim(), pool.text.dim(), false, 0.07, ctx.common.seed);
  }

  std::ifstream in(o.article, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + o.article);
  nlohmann::json article;
  try {
    in >> article;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, o.article + ": " + e.what());
  }

  const std::string text = article.value("text", std::string());
  RowMatrix base;
  if (article.contains("sentence_embeddings")) {
    const auto& rows = article["sentence_embeddings"];
    if (!rows.is_array() || rows.empty()) throw Error(ErrorKind::EmptyInput, "sentence_embeddings is empty");
    base.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(pool.text.dim()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != pool.text.dim()) {
        throw Error(ErrorKind::DimensionMismatch, "sentence embedding " + std::to_string(r) + " has " +
                                                      std::to_string(rows[r].size()) + " values, expected " +
                                                      std::to_string(pool.text.dim()));
      }
      for (std::size_t c = 0; c < rows[r].size(); ++c) {
        base(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c].get<double>();
      }
    }
    if (!base.allFinite()) throw Error(ErrorKind::NonFinite, "sentence embeddings contain non-finite values");
  } else if (article.contains("sentences")) {
    base = pool.text.gather(article["sentences"].get<std::vector<std::string>>());
  } else {
    throw Error(ErrorKind::InvalidArgument, "article needs 'sentence_embeddings' or 'sentences'");
  }

  std::vector<std::string> entities;
  if (article.contains("entities")) {
    entities = article["entities"].get<std::vector<std::string>>();
  } else if (!text.empty()) {
    entities = extract_entities(text);
  }
  if (entities.empty()) throw Error(ErrorKind::EmptyInput, "no entities given or found in the article text");

  const TagIndexLookup lookup(pool.manifest.image_tags);
  const CandidatePool candidates = candidate_pool_from_entities(entities, lookup, o.per_entity);
  const Eigen::VectorXd article_vec = model.article_vector(base);
  const ImageSetChoice choice = best_image_set(
      article_vec, candidates, pool.images, model,
      BestSetOptions{o.x, scorer, set_similarity, o.budget, ctx.common.seed, ctx.common.threads});

  ordered_json j;
  j["article_id"] = article.value("article_id", std::string("article"));
  j["entities"] = entities;
  j["pool_size"] = candidates.pool.size();
  j["scorer"] = o.scorer;
  j["evaluated"] = choice.evaluated;
  j["exhaustive"] = choice.exhaustive;
  j["chosen"] = choice.ids;
  j["score"] = choice.score;
  if (o.attribution) {
    std::vector<std::string> sentence_text;
    if (!text.empty()) sentence_text = split_sentences(text);
    const bool have_text = sentence_text.size() == static_cast<std::size_t>(base.rows());
    const auto matches = sentence_attribution(model.project_images(pool.images.gather(choice.ids)),
                                              model.text.apply(base), sentence_similarity);
    ordered_json attribution = ordered_json::array();
    for (std::size_t i = 0; i < matches.size(); ++i) {
      ordered_json a{{"image", choice.ids[i]}, {"sentence", matches[i].index}, {"score", matches[i].score}};
      if (have_text) a["text"] = sentence_text[matches[i].index];
      attribution.push_back(std::move(a));
    }
    j["attribution"] = attribution;
  }

  const std::string rendered = j.dump(2) + "\n";
  if (!ctx.common.out.empty()) {
    const fs::path out = ctx.common.out;
    fs::create_directories(out);
    write_text(out / "illustration.json", rendered);
    write_run_manifest(ctx, out, inputs);
  }
  ctx.out << rendered;
  return 0;
}

int run_gradcheck(const Context& ctx, const GradcheckOptions& o) {
  const auto results = run_gradcheck(GradCheckOptions{ctx.common.seed, o.batches, o.step});

  ordered_json j;
  j["seed"] = ctx.common.seed;
  j["step"] = o.step;
  j["tolerance"] = o.tolerance;
  j["losses"] = ordered_json::array();
  bool ok = true;
  std::ostringstream table;
  table << std::left << std::setw(18) << "loss" << std::setw(9) << "batches" << std::setw(14) << "max rel err"
        << "worst parameter\n";
  for (const auto& r : results) {
    ok = ok && r.max_rel_error < o.tolerance;
    j["losses"].push_back({{"loss", r.name},
                           {"batches", r.batches},
                           {"evaluations", r.evaluations},
                           {"max_rel_error", r.max_rel_error},
                           {"worst_parameter", r.worst_parameter}});
    std::ostringstream err;
    err << std::scientific << std::setprecision(2) << r.max_rel_error;
    table << std::left << std::setw(18) << r.name << std::setw(9) << r.batches << std::setw(14) << err.str()
          << r.worst_parameter << "\n";
  }
  j["passed"] = ok;
  if (!ctx.common.out.empty()) {
    const fs::path out = ctx.common.out;
    fs::create_directories(out);
    write_text(out / "gradcheck.json", j.dump(2) + "\n");
    write_run_manifest(ctx, out, {});
  }
  ctx.out << table.str();
  if (!ok) {
    ordered_json e{{"error", "GradientMismatch"},
                   {"message", "relative error reached the tolerance " + std::to_string(o.tolerance)}};
    ctx.err << e.dump() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace storyalign::cli
