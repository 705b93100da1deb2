#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace graphnc::cli {

// Runs one command (argv without the program name). Returns the process exit
// code: 0 when all outputs were written, 2 for usage errors, 1 otherwise.
// Failures print a single "error: ..." line to stderr.
int run(const std::vector<std::string>& args);

int run_main(int argc, char** argv);

// Re-executes the command recorded in a run manifest with its --out redirected
// to new_out; used to demonstrate bitwise reproducibility.
int replay_manifest(const std::filesystem::path& manifest_path,
                    const std::filesystem::path& new_out);

}  // namespace graphnc::cli
