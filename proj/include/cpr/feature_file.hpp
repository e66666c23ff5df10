#pragma once

#include <filesystem>
#include <iosfwd>

#include "cpr/feature_store.hpp"

namespace cpr {

// Line format, one (instance, view) pair per line, whitespace-separated:
//
//   <instance id> <class label or -1> <view name> <v0,v1,...,vd-1>
//
// Blank lines and lines starting with '#' are ignored. Views appear in the
// order they are first seen. Label -1 means unknown.
Dataset read_feature_file(std::istream& in);
Dataset load_feature_file(const std::filesystem::path& path);

// Writes records in order, views in dataset order, full round-trip precision.
void write_feature_file(std::ostream& out, const Dataset& dataset);
void save_feature_file(const std::filesystem::path& path, const Dataset& dataset);

}  // namespace cpr
