#include "cpr/feature_file.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <unordered_map>

namespace cpr {
namespace {

FeatureVec parse_floats(const std::string& field, std::size_t line_no) {
  FeatureVec out;
  std::size_t start = 0;
  while (start <= field.size()) {
    std::size_t end = field.find(',', start);
    if (end == std::string::npos) end = field.size();
    const std::string token = field.substr(start, end - start);
    try {
      std::size_t used = 0;
      out.push_back(std::stod(token, &used));
      if (used != token.size()) throw std::invalid_argument(token);
    } catch (const std::exception&) {
      throw ValidationError("line " + std::to_string(line_no) + ": bad float '" + token + "'");
    }
    start = end + 1;
  }
  return out;
}

int parse_label(const std::string& field, std::size_t line_no) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw ValidationError("line " + std::to_string(line_no) + ": bad class label '" + field + "'");
  }
  return value;
}

}  // namespace

Dataset read_feature_file(std::istream& in) {
  Dataset ds;
  std::unordered_map<InstanceId, std::size_t> index;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string id, label, view, values, extra;
    if (!(fields >> id >> label >> view >> values)) {
      if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;
      throw ValidationError("line " + std::to_string(line_no) + ": expected 4 fields");
    }
    if (fields >> extra) throw ValidationError("line " + std::to_string(line_no) + ": trailing field");

    const int parsed_label = parse_label(label, line_no);
    if (parsed_label < -1) throw ValidationError("line " + std::to_string(line_no) + ": negative class label");
    std::optional<int> cls;
    if (parsed_label >= 0) cls = parsed_label;

    if (std::find(ds.views.begin(), ds.views.end(), view) == ds.views.end()) ds.views.push_back(view);

    auto [it, inserted] = index.emplace(id, ds.records.size());
    if (inserted) {
      ds.records.push_back({id, cls, {}});
    } else if (ds.records[it->second].class_label != cls) {
      throw ValidationError("line " + std::to_string(line_no) + ": conflicting label for " + id);
    }
    auto& rec = ds.records[it->second];
    if (!rec.features.emplace(view, parse_floats(values, line_no)).second) {
      throw ValidationError("line " + std::to_string(line_no) + ": duplicate view " + view + " for " + id);
    }
  }
  ds.validate();
  return ds;
}

Dataset load_feature_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open feature file: " + path.string());
  return read_feature_file(in);
}

void write_feature_file(std::ostream& out, const Dataset& dataset) {
  const auto old_precision = out.precision(17);
  for (const auto& rec : dataset.records) {
    for (const auto& view : dataset.views) {
      out << rec.id << '\t' << rec.class_label.value_or(-1) << '\t' << view << '\t';
      const FeatureVec& f = rec.features.at(view);
      for (std::size_t i = 0; i < f.size(); ++i) {
        if (i) out << ',';
        out << f[i];
      }
      out << '\n';
    }
  }
  out.precision(old_precision);
}

void save_feature_file(const std::filesystem::path& path, const Dataset& dataset) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write feature file: " + path.string());
  write_feature_file(out, dataset);
}

}  // namespace cpr
