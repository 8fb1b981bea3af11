#pragma once

#include "sae/mds.hpp"
#include "sae/network.hpp"
#include "sae/svm.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace sae {

/// Model file layout:
///   "SAE1\n", then "key=value" manifest lines up to "params=<count>\n",
///   then <count> little-endian float32 parameters (flatten() order),
///   then an optional text section starting with "svm\n" and ending with
///   "end\n". SVM numbers are written in shortest round-trip form.
struct Checkpoint {
    nn::SaeModel model;
    int epoch = 0;
    std::optional<mds::DistanceSpec> distance;
    std::optional<svm::SvmModel> svm;
    std::map<std::string, std::string> meta; ///< free-form manifest entries
};

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path);
/// Throws FormatError on a malformed file and IoError on a truncated one.
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace sae
