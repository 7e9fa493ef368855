#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "uem/diffkit.hpp"
#include "uem/retrieval.hpp"

namespace uem::cli {

inline constexpr const char* kVersion = "1.0.0";

/// Runs one command line (argv[0] is the program name). Returns the process
/// exit code: 0 success, 2 usage/config, 3 data, 4 numeric failure, 1 other.
int execute(int argc, const char* const* argv);
int execute(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// closet / partial / openset from the two label sets; "mixed" otherwise.
std::string infer_setting(std::span<const int> query_labels, std::span<const int> retrieval_labels);

/// Metrics document with a fixed key order.
nlohmann::ordered_json metrics_json(const std::string& setting, const retrieval::Evaluation& ev, double percentile,
                                    std::uint64_t seed, const std::string& checkpoint_hash);

/// Projection of the rows onto their two leading principal axes (n x 2).
/// Axis signs are fixed so the largest-magnitude loading is positive.
diffkit::Tensor pca2(const diffkit::Tensor& x);

}  // namespace uem::cli
