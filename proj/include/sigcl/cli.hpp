#pragma once

// Command-line front end: gen, pretrain, finetune, eval, ablate,
// export-embeddings. Exit codes: 0 ok, 2 bad flags or config, 3 missing
// inputs, 4 runtime failure.

#include <ostream>
#include <string>
#include <vector>

#include "sigcl/sigdata.hpp"

namespace sigcl::cli {

constexpr int kExitOk = 0;
constexpr int kExitBadFlags = 2;
constexpr int kExitMissingInput = 3;
constexpr int kExitRuntime = 4;

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// "lo:hi:step", "lo:hi" (step 1), "a,b,c" or a single value.
std::vector<int> parse_snr_list(const std::string& text);
// Comma-separated modulation names; duplicates are rejected.
std::vector<sigdata::Modulation> parse_class_list(const std::string& text);

const std::vector<std::string>& ablation_axes();

}  // namespace sigcl::cli
