#include <algorithm>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "commands.hpp"
#include "storyalign/dataset.hpp"
#include "storyalign/error.hpp"
#include "storyalign/version.hpp"

namespace storyalign::cli {

namespace fs = std::filesystem;

fs::path require_out(const Context& ctx) {
  if (ctx.common.out.empty()) {
    throw Error(ErrorKind::InvalidArgument, "an output directory is required (--out or STORYALIGN_OUT)");
  }
  return ctx.common.out;
}

std::vector<fs::path> dataset_files(const fs::path& dir) {
  const auto manifest = read_manifest(dir / kManifestFileName);
  return {dir / kManifestFileName, dir / manifest.text_embedding_file, dir / manifest.image_embedding_file};
}

std::vector<fs::path> checkpoint_files(const fs::path& dir) {
  std::vector<fs::path> files{dir / "checkpoint.json"};
  std::vector<fs::path> blocks;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".emb") blocks.push_back(entry.path());
  std::sort(blocks.begin(), blocks.end());
  files.insert(files.end(), blocks.begin(), blocks.end());
  return files;
}

InputChecksums checksum_inputs(const std::vector<fs::path>& inputs) {
  InputChecksums out;
  for (const auto& p : inputs) out.emplace_back(p, file_checksum(p));
  return out;
}

void write_run_manifest(const Context& ctx, const fs::path& dir, const InputChecksums& inputs) {
  nlohmann::ordered_json j;
  j["tool"] = "storyalign";
  j["version"] = kVersion;
  j["command"] = ctx.command.get_name();
  j["seed"] = ctx.common.seed;
  j["options"] = nlohmann::ordered_json::parse(ctx.command.config_to_str(true, false));
  nlohmann::ordered_json files = nlohmann::ordered_json::array();
  for (const auto& [p, sum] : inputs) {
    char hex[32];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(sum));
    files.push_back({{"path", p.generic_string()}, {"fnv1a64", hex}});
  }
  j["inputs"] = files;

  fs::create_directories(dir);
  std::ofstream f(dir / "run_manifest.json", std::ios::binary);
  if (!f) throw Error(ErrorKind::Io, "cannot write " + (dir / "run_manifest.json").string());
  f << j.dump(2) << "\n";
}

}  // namespace storyalign::cli
