// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace scawave::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;  ///< usage, contract or config error
inline constexpr int kExitIo = 2;      ///< unreadable, unwritable or malformed file

/// Runs one command. `args` excludes the program name. Progress and errors
/// go to `log`; nothing is written to stdout except help text.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& log);

}  // namespace scawave::cli
