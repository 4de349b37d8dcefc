#pragma once

#include <CLI11.hpp>

namespace storyalign::cli {

/// Reads flat JSON objects as CLI11 configuration. Keys use underscores where
/// flags use dashes, so `"base_lr": 0.001` sets `--base-lr`.
///
/// When `section` names a subcommand, every key read is routed to that
/// subcommand's options.
class ConfigJSON : public CLI::Config {
 public:
  std::string section;

  std::string to_config(const CLI::App* app, bool default_also, bool write_description,
                        std::string prefix) const override;
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override;
};

}  // namespace storyalign::cli
