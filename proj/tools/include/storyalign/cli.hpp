#pragma once

#include <iosfwd>

namespace storyalign::cli {

/// Parses argv and runs one subcommand, returning the process exit status.
/// Usage and parse errors go to `err` with a nonzero status; library errors
/// are reported on `err` as a one-line JSON object.
int parse_and_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace storyalign::cli
