#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "storyalign/synthetic.hpp"
#include "storyalign/trainer.hpp"

namespace storyalign::cli {

struct CommonOptions {
  std::string out;
  std::string config;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  bool verbose = false;
};

struct Context {
  const CLI::App& command;
  const CommonOptions& common;
  std::ostream& out;
  std::ostream& err;
};

struct SynthOptions {
  SyntheticGenConfig gen;
};

struct IngestOptions {
  std::string data;
};

struct ClusterOptions {
  std::string data;
  std::size_t window_days = 7;
  double threshold = 0.15;
  std::string linkage = "avg";
  double entity_threshold = 0.8;
  bool no_entity_merge = false;
  std::vector<std::string> channels;
};

struct SelectSetsOptions {
  std::string data;
  std::size_t k = 5;
  std::uint64_t budget = 10000;
  std::size_t min_images = 5;
  std::size_t count = 0;  // 0: every qualifying story
  std::string split = "test";
};

struct TrainOptions {
  std::string data;
  TrainConfig config;
  std::string objective = "milsim";
  std::string infonce_images = "single";
  std::string images_per_story_sample = "all";
  std::string resume;
  std::size_t until = 0;  // 0: total_steps
};

struct EvalOptionsCli {
  std::string data;
  std::string ckpt;
  std::string protocol = "fixed5";
  std::string scorer;  // empty: the scorer matching the checkpoint's objective
  std::string split = "test";
  std::string format = "table";
};

struct IllustrateOptions {
  std::string article;
  std::string pool;
  std::string ckpt;
  std::size_t x = 5;
  std::string scorer = "mean";
  std::uint64_t budget = 10000;
  std::size_t per_entity = 5;
  bool attribution = false;
};

struct GradcheckOptions {
  std::size_t batches = 20;
  double step = 1e-4;
  double tolerance = 1e-4;
};

int run_synth(const Context& ctx, const SynthOptions& o);
int run_ingest(const Context& ctx, const IngestOptions& o);
int run_cluster(const Context& ctx, const ClusterOptions& o);
int run_select_sets(const Context& ctx, const SelectSetsOptions& o);
int run_train(const Context& ctx, TrainOptions o);
int run_eval(const Context& ctx, const EvalOptionsCli& o);
int run_illustrate(const Context& ctx, const IllustrateOptions& o);
int run_gradcheck(const Context& ctx, const GradcheckOptions& o);

/// Output directory from --out / STORYALIGN_OUT; throws InvalidArgument when unset.
std::filesystem::path require_out(const Context& ctx);

using InputChecksums = std::vector<std::pair<std::filesystem::path, std::uint64_t>>;

/// FNV-1a checksum of each file, taken now.
InputChecksums checksum_inputs(const std::vector<std::filesystem::path>& inputs);

/// run_manifest.json records the command with its seed and option values, plus input checksums.
void write_run_manifest(const Context& ctx, const std::filesystem::path& dir, const InputChecksums& inputs);

/// manifest.json plus both embedding files of a dataset directory.
std::vector<std::filesystem::path> dataset_files(const std::filesystem::path& dir);
/// checkpoint.json plus every parameter block of a checkpoint directory.
std::vector<std::filesystem::path> checkpoint_files(const std::filesystem::path& dir);

}  // namespace storyalign::cli
