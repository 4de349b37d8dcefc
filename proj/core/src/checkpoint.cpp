#include <filesystem>
#include <sstream>

#include "json_util.hpp"
#include "storyalign/error.hpp"
#include "storyalign/trainer.hpp"

namespace storyalign {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kFormat = "storyalign-checkpoint-1";

RowMatrix as_rows(const diff::Matrix& m) { return RowMatrix(m); }

void write_block(const fs::path& path, const diff::Matrix& m) {
  save_embedding_file(path, as_rows(m), DType::F64);
}

diff::Matrix read_block(const fs::path& path, const diff::Matrix& like) {
  return diff::Matrix(read_embedding_file(path, static_cast<std::size_t>(like.rows()),
                                          static_cast<std::size_t>(like.cols()), DType::F64));
}

}  // namespace

void save_checkpoint(const fs::path& dir, const TrainState& state) {
  fs::create_directories(dir);
  const auto params = state.model.parameters();
  const auto names = state.model.parameter_names();
  if (state.optimizer.first_moment.size() != params.size() || state.optimizer.second_moment.size() != params.size()) {
    throw Error(ErrorKind::ShapeMismatch, "optimizer state does not match the model parameters");
  }

  json entries = json::array();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string stem = names[i];
    write_block(dir / (stem + ".emb"), *params[i]);
    write_block(dir / (stem + ".m.emb"), state.optimizer.first_moment[i]);
    write_block(dir / (stem + ".v.emb"), state.optimizer.second_moment[i]);
    entries.push_back({{"name", names[i]}, {"rows", params[i]->rows()}, {"cols", params[i]->cols()}});
  }

  std::ostringstream rng;
  rng << state.rng;

  json doc;
  doc["format"] = kFormat;
  doc["config"] = json::parse(train_config_to_json(state.config));
  doc["text_dim"] = state.text_dim;
  doc["image_dim"] = state.image_dim;
  doc["joint_dim"] = state.model.joint_dim();
  doc["has_pcme"] = state.model.pcme.has_value();
  doc["step"] = state.optimizer.step;
  doc["adam"] = {{"beta1", state.optimizer.hyper.beta1},
                 {"beta2", state.optimizer.hyper.beta2},
                 {"eps", state.optimizer.hyper.eps}};
  doc["rng"] = rng.str();
  doc["parameters"] = entries;
  detail::write_text_file((dir / "checkpoint.json").string(), doc.dump(1) + "\n");
}

TrainState load_checkpoint(const fs::path& dir) {
  const json doc = detail::parse_json(detail::read_text_file((dir / "checkpoint.json").string()), "checkpoint.json");
  if (detail::get_or<std::string>(doc, "format", "") != kFormat) {
    throw Error(ErrorKind::Format, "unrecognised checkpoint format in " + dir.string());
  }
  try {
    TrainConfig cfg = train_config_from_json(doc.at("config").dump());
    const auto text_dim = doc.at("text_dim").get<std::size_t>();
    const auto image_dim = doc.at("image_dim").get<std::size_t>();
    const auto joint_dim = doc.at("joint_dim").get<std::size_t>();
    const bool has_pcme = doc.at("has_pcme").get<bool>();

    Model model = make_model(text_dim, image_dim, joint_dim, has_pcme, cfg.temperature, 0);
    auto params = model.parameters();
    const auto names = model.parameter_names();
    const auto& entries = doc.at("parameters");
    if (entries.size() != params.size()) {
      throw Error(ErrorKind::Format, "checkpoint holds " + std::to_string(entries.size()) + " parameters, expected " +
                                         std::to_string(params.size()));
    }

    OptimizerState opt;
    opt.hyper.beta1 = doc.at("adam").at("beta1").get<double>();
    opt.hyper.beta2 = doc.at("adam").at("beta2").get<double>();
    opt.hyper.eps = doc.at("adam").at("eps").get<double>();
    opt.step = doc.at("step").get<std::size_t>();
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (entries[i].at("name").get<std::string>() != names[i]) {
        throw Error(ErrorKind::Format, "parameter " + std::to_string(i) + " is " +
                                           entries[i].at("name").get<std::string>() + ", expected " + names[i]);
      }
      *params[i] = read_block(dir / (names[i] + ".emb"), *params[i]);
      opt.first_moment.push_back(read_block(dir / (names[i] + ".m.emb"), *params[i]));
      opt.second_moment.push_back(read_block(dir / (names[i] + ".v.emb"), *params[i]));
    }

    std::mt19937_64 rng;
    std::istringstream rng_in(doc.at("rng").get<std::string>());
    rng_in >> rng;
    if (rng_in.fail()) throw Error(ErrorKind::Format, "corrupt rng state in checkpoint");

    return TrainState{std::move(cfg), std::move(model), std::move(opt), rng, text_dim, image_dim};
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Format, std::string("checkpoint.json: ") + e.what());
  }
}

}  // namespace storyalign
