// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fstream>
#include <string>

namespace scawave::io {

/// Shortest decimal text that reads back to exactly `value`.
std::string format_double(double value);

/// Throws IoError when the file cannot be opened.
std::ofstream open_output(const std::string& path);
std::ifstream open_input(const std::string& path);

std::string read_file(const std::string& path);
/// Writes via a temporary sibling and renames, so readers never see half a file.
void write_file(const std::string& path, const std::string& contents);

}  // namespace scawave::io
