#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace medlink::cli {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;  // validation / parse failure
inline constexpr int kExitConfig = 2;      // configuration or usage error
inline constexpr int kExitBackend = 3;     // completion backend failure

// args excludes the program name.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace medlink::cli
