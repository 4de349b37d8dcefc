#include "storyalign/cli.hpp"

#include <algorithm>
#include <memory>
#include <string>
#include <vector>
#include <ostream>

#include <json.hpp>

#include "commands.hpp"
#include "config_json.hpp"
#include "storyalign/error.hpp"
#include "storyalign/version.hpp"

namespace storyalign::cli {

namespace {

CLI::App* add_command(CLI::App& app, const std::string& name, const std::string& description, CommonOptions& common,
                      bool needs_out) {
  CLI::App* sub = app.add_subcommand(name, description);
  sub->config_formatter(std::make_shared<ConfigJSON>());
  sub->add_option("--config", common.config, "JSON file with option values (keys use underscores)")
      ->configurable(false);
  auto* out = sub->add_option("--out", common.out, "Output directory")->envname("STORYALIGN_OUT");
  if (needs_out) out->description("Output directory (required)");
  sub->add_option("--seed", common.seed, "Random seed");
  sub->add_option("--threads", common.threads, "Worker thread cap")
      ->envname("STORYALIGN_THREADS")
      ->check(CLI::PositiveNumber);
  sub->add_flag("--verbose", common.verbose, "Log progress to stderr");
  return sub;
}

// CLI11 only reads configuration files registered on the top-level app, so a
// subcommand's `--config <file>` is forwarded there and its keys are scoped to
// that subcommand. Values given on the command line still win, and the file
// is applied before environment variables are consulted.
std::vector<std::string> forward_config(int argc, const char* const* argv, const CLI::App& app, ConfigJSON& formatter) {
  std::vector<std::string> args(argv, argv + argc);
  std::size_t sub = 0;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--") break;
    if (app.get_subcommand_no_throw(args[i]) != nullptr) {
      sub = i;
      break;
    }
  }
  if (sub == 0) return args;
  formatter.section = args[sub];
  for (std::size_t i = sub + 1; i < args.size(); ++i) {
    std::string path;
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    }
    if (!path.empty()) {
      args.insert(args.begin() + 1, {"--config", path});
      break;
    }
  }
  return args;
}

void report_error(std::ostream& err, std::string_view kind, const std::string& message) {
  nlohmann::ordered_json j{{"error", kind}, {"message", message}};
  err << j.dump() << "\n";
}

}  // namespace

int parse_and_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Article to image-set alignment: data preparation, training and evaluation", "storyalign"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1, 1);
  app.option_defaults()->always_capture_default();
  auto formatter = std::make_shared<ConfigJSON>();
  app.config_formatter(formatter);
  app.set_config("--config", "", "JSON file with option values for the chosen subcommand");

  CommonOptions common;

  SynthOptions synth;
  auto* c_synth = add_command(app, "synth", "Generate a seeded synthetic corpus", common, true);
  c_synth->add_option("--stories", synth.gen.num_stories, "Number of stories");
  c_synth->add_option("--heldout", synth.gen.num_heldout, "Trailing stories placed in the test split");
  c_synth->add_option("--images", synth.gen.images_per_story, "Images per story");
  c_synth->add_option("--sentences", synth.gen.sentences_per_article, "Sentences per article");
  c_synth->add_option("--articles", synth.gen.articles_per_story, "Articles per story");
  c_synth->add_option("--latent-dim", synth.gen.latent_dim, "Latent dimension");
  c_synth->add_option("--text-dim", synth.gen.text_dim, "Sentence embedding dimension");
  c_synth->add_option("--image-dim", synth.gen.image_dim, "Image embedding dimension");
  c_synth->add_option("--noise", synth.gen.noise_scale, "Noise scale added to each latent draw");
  c_synth->add_option("--entities", synth.gen.entities_per_story, "Entity vocabulary size per story");

  IngestOptions ingest;
  auto* c_ingest = add_command(app, "ingest", "Validate a dataset directory and report problems", common, false);
  c_ingest->add_option("--data", ingest.data, "Dataset directory holding manifest.json")->required();

  ClusterOptions cluster;
  auto* c_cluster = add_command(app, "cluster", "Re-form stories by windowed agglomerative clustering", common, true);
  c_cluster->add_option("--data", cluster.data, "Input dataset directory")->required();
  c_cluster->add_option("--window-days", cluster.window_days, "Window length in days")->check(CLI::PositiveNumber);
  c_cluster->add_option("--threshold", cluster.threshold, "Cosine distance threshold")->check(CLI::Range(0.0, 2.0));
  c_cluster->add_option("--linkage", cluster.linkage, "avg or complete")
      ->check(CLI::IsMember({"avg", "average", "complete"}));
  c_cluster->add_option("--entity-threshold", cluster.entity_threshold,
                        "Merge clusters whose entity pools have cosine similarity above this");
  c_cluster->add_flag("--no-entity-merge", cluster.no_entity_merge, "Skip the entity-based merge pass");
  c_cluster->add_option("--channels", cluster.channels, "Keep only articles from these channels");

  SelectSetsOptions select;
  auto* c_select = add_command(app, "select-sets", "Choose diverse ground-truth image sets", common, true);
  c_select->add_option("--data", select.data, "Input dataset directory")->required();
  c_select->add_option("--k", select.k, "Images per ground-truth set")->check(CLI::PositiveNumber);
  c_select->add_option("--budget", select.budget, "Maximum combinations scored per story")
      ->check(CLI::PositiveNumber);
  c_select->add_option("--min-images", select.min_images, "Minimum images for a story to qualify");
  c_select->add_option("--count", select.count, "Stories to keep (0 keeps every qualifying story)");
  c_select->add_option("--split", select.split, "Split to curate");

  TrainOptions train;
  TrainConfig& tc = train.config;
  auto* c_train = add_command(app, "train", "Train the projection heads and write a checkpoint", common, true);
  c_train->add_option("--data", train.data, "Dataset directory")->required();
  c_train->add_option("--objective", train.objective, "infonce, milnce, pcme or milsim")
      ->check(CLI::IsMember({"infonce", "milnce", "pcme", "milsim"}));
  c_train->add_option("--infonce-images", train.infonce_images, "single or mean")
      ->check(CLI::IsMember({"single", "mean"}));
  c_train->add_option("--base-lr", tc.base_lr, "Peak learning rate");
  c_train->add_option("--warmup-steps", tc.warmup_steps, "Linear warm-up steps");
  c_train->add_option("--total-steps", tc.total_steps, "Total optimizer steps");
  c_train->add_option("--batch-size", tc.batch_size, "Stories per batch");
  c_train->add_option("--lambda", tc.lambda, "Weight of the sentence-level term");
  c_train->add_option("--max-sentences-per-article", tc.max_sentences_per_article, "Sentence cap per article");
  c_train->add_option("--images-per-story-sample", train.images_per_story_sample, "Image sample size or 'all'");
  c_train->add_option("--joint-dim", tc.joint_dim, "Joint space size (0: text dimension)");
  c_train->add_option("--temperature", tc.temperature, "Softmax temperature");
  c_train->add_option("--trainable-temperature", tc.trainable_temperature, "Learn the temperature");
  c_train->add_option("--contrastive-normalize", tc.contrastive_normalize, "Cosine similarity in contrastive terms");
  c_train->add_option("--article-normalize", tc.article_normalize, "Cosine similarity in the article-level term");
  c_train->add_option("--pcme-samples", tc.pcme_samples, "Samples per instance for the probabilistic objective");
  c_train->add_option("--pcme-alpha", tc.pcme_alpha, "Initial match scale");
  c_train->add_option("--pcme-beta", tc.pcme_beta, "Initial match shift");
  c_train->add_option("--validate-every", tc.validate_every, "Validation interval in steps (0 disables)");
  c_train->add_option("--validation-splits", tc.validation_splits, "Random subsets averaged per validation");
  c_train->add_option("--validation-size", tc.validation_size, "Stories per validation subset");
  c_train->add_option("--resume", train.resume, "Continue from this checkpoint directory");
  c_train->add_option("--until", train.until, "Stop once this many steps are done (0: total steps)");

  EvalOptionsCli eval;
  auto* c_eval = add_command(app, "eval", "Article to image-set retrieval evaluation", common, false);
  c_eval->add_option("--data", eval.data, "Dataset directory")->required();
  c_eval->add_option("--ckpt", eval.ckpt, "Checkpoint directory")->required();
  c_eval->add_option("--protocol", eval.protocol, "fixed3, fixed4, fixed5 or mixed")
      ->check(CLI::IsMember({"fixed3", "fixed4", "fixed5", "mixed"}));
  c_eval->add_option("--scorer", eval.scorer, "single or mean (default follows the objective)")
      ->check(CLI::IsMember({"single", "mean"}));
  c_eval->add_option("--split", eval.split, "Split to evaluate");
  c_eval->add_option("--format", eval.format, "Report printed on stdout: table or json")
      ->check(CLI::IsMember({"table", "json"}));

  IllustrateOptions illus;
  auto* c_illus = add_command(app, "illustrate", "Pick an image set for a new article", common, false);
  c_illus->add_option("--article", illus.article, "Article JSON file")->required();
  c_illus->add_option("--pool", illus.pool, "Dataset directory providing images and tags")->required();
  c_illus->add_option("--ckpt", illus.ckpt, "Checkpoint directory (default: initial projections)");
  c_illus->add_option("--x", illus.x, "Images to choose")->check(CLI::PositiveNumber);
  c_illus->add_option("--scorer", illus.scorer, "single or mean")->check(CLI::IsMember({"single", "mean"}));
  c_illus->add_option("--budget", illus.budget, "Maximum combinations scored")->check(CLI::PositiveNumber);
  c_illus->add_option("--m", illus.per_entity, "Candidates looked up per entity")->check(CLI::PositiveNumber);
  c_illus->add_flag("--attribution", illus.attribution, "Report the best sentence for each chosen image");

  GradcheckOptions grad;
  auto* c_grad = add_command(app, "gradcheck", "Compare analytic and finite-difference gradients", common, false);
  c_grad->add_option("--batches", grad.batches, "Random batches per objective")->check(CLI::PositiveNumber);
  c_grad->add_option("--step", grad.step, "Central difference step");
  c_grad->add_option("--tolerance", grad.tolerance, "Largest accepted relative error");

  try {
    std::vector<std::string> args = forward_config(argc, argv, app, *formatter);
    std::reverse(args.begin(), args.end());
    args.pop_back();  // program name
    app.parse(std::move(args));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    err << app.help();
    return code;
  }

  CLI::App* chosen = app.get_subcommands().front();
  const Context ctx{*chosen, common, out, err};
  try {
    if (chosen == c_synth) return run_synth(ctx, synth);
    if (chosen == c_ingest) return run_ingest(ctx, ingest);
    if (chosen == c_cluster) return run_cluster(ctx, cluster);
    if (chosen == c_select) return run_select_sets(ctx, select);
    if (chosen == c_train) return run_train(ctx, train);
    if (chosen == c_eval) return run_eval(ctx, eval);
    if (chosen == c_illus) return run_illustrate(ctx, illus);
    if (chosen == c_grad) return run_gradcheck(ctx, grad);
  } catch (const Error& e) {
    report_error(err, to_string(e.kind()), e.what());
    return 2;
  } catch (const std::exception& e) {
    report_error(err, "Internal", e.what());
    return 3;
  }
  return 1;
}

}  // namespace storyalign::cli
