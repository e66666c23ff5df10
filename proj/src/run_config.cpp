#include "cpr/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace cpr {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  T value{};
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw ValidationError("config " + key + ": cannot parse '" + text + "'");
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ValidationError("config " + key + ": expected boolean, got '" + text + "'");
}

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <typename T>
std::string join(const std::vector<T>& items) {
  std::ostringstream out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out << ',';
    out << items[i];
  }
  return out.str();
}

std::vector<std::size_t> parse_size_list(const std::string& key, const std::string& text) {
  std::vector<std::size_t> out;
  for (const auto& item : split(text, ',')) out.push_back(parse_number<std::size_t>(key, item));
  return out;
}

std::vector<ConfusablePair> parse_confusable(const std::string& key, const std::string& text) {
  std::vector<ConfusablePair> out;
  for (const auto& item : split(text, ',')) {
    const auto colon = item.find(':');
    const auto dash = item.find('-', colon == std::string::npos ? 0 : colon);
    if (colon == std::string::npos || dash == std::string::npos) {
      throw ValidationError("config " + key + ": expected view:a-b, got '" + item + "'");
    }
    out.push_back({trim(item.substr(0, colon)), parse_number<int>(key, item.substr(colon + 1, dash - colon - 1)),
                   parse_number<int>(key, item.substr(dash + 1))});
  }
  return out;
}

std::string format_confusable(const std::vector<ConfusablePair>& pairs) {
  std::ostringstream out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (i) out << ',';
    out << pairs[i].view << ':' << pairs[i].class_a << '-' << pairs[i].class_b;
  }
  return out.str();
}

struct Field {
  const char* key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    auto add = [&f](const char* key, auto set, auto get) { f.push_back({key, set, get}); };
    using C = RunConfig;
    using S = const std::string&;
    add("run.seed", [](C& c, S v) { c.seed = parse_number<std::uint64_t>("run.seed", v); },
        [](const C& c) { return std::to_string(c.seed); });
    add("run.out", [](C& c, S v) { c.out = trim(v); }, [](const C& c) { return c.out; });
    add("run.dataset", [](C& c, S v) { c.dataset = trim(v); }, [](const C& c) { return c.dataset; });
    add("run.test_dataset", [](C& c, S v) { c.test_dataset = trim(v); }, [](const C& c) { return c.test_dataset; });
    add("run.eval_ks", [](C& c, S v) { c.eval_ks = parse_size_list("run.eval_ks", v); },
        [](const C& c) { return join(c.eval_ks); });
    add("run.eval_view", [](C& c, S v) { c.eval_view = trim(v); }, [](const C& c) { return c.eval_view; });

    add("synthetic.num_classes", [](C& c, S v) { c.synthetic.num_classes = parse_number<int>("synthetic.num_classes", v); },
        [](const C& c) { return std::to_string(c.synthetic.num_classes); });
    add("synthetic.instances_per_class",
        [](C& c, S v) { c.synthetic.instances_per_class = parse_number<int>("synthetic.instances_per_class", v); },
        [](const C& c) { return std::to_string(c.synthetic.instances_per_class); });
    add("synthetic.test_instances_per_class",
        [](C& c, S v) { c.test_instances_per_class = parse_number<int>("synthetic.test_instances_per_class", v); },
        [](const C& c) { return std::to_string(c.test_instances_per_class); });
    add("synthetic.views", [](C& c, S v) { c.synthetic.views = split(v, ','); },
        [](const C& c) { return join(c.synthetic.views); });
    add("synthetic.dim", [](C& c, S v) { c.synthetic.dim = parse_number<std::size_t>("synthetic.dim", v); },
        [](const C& c) { return std::to_string(c.synthetic.dim); });
    add("synthetic.noise", [](C& c, S v) { c.synthetic.noise = parse_number<double>("synthetic.noise", v); },
        [](const C& c) { return fmt(c.synthetic.noise); });
    add("synthetic.confusable_offset",
        [](C& c, S v) { c.synthetic.confusable_offset = parse_number<double>("synthetic.confusable_offset", v); },
        [](const C& c) { return fmt(c.synthetic.confusable_offset); });
    add("synthetic.nuisance_rank",
        [](C& c, S v) { c.synthetic.nuisance_rank = parse_number<std::size_t>("synthetic.nuisance_rank", v); },
        [](const C& c) { return std::to_string(c.synthetic.nuisance_rank); });
    add("synthetic.nuisance_scale",
        [](C& c, S v) { c.synthetic.nuisance_scale = parse_number<double>("synthetic.nuisance_scale", v); },
        [](const C& c) { return fmt(c.synthetic.nuisance_scale); });
    add("synthetic.confusable", [](C& c, S v) { c.synthetic.confusable = parse_confusable("synthetic.confusable", v); },
        [](const C& c) { return format_confusable(c.synthetic.confusable); });

    add("cascade.num_stages", [](C& c, S v) { c.cascade.num_stages = parse_number<int>("cascade.num_stages", v); },
        [](const C& c) { return std::to_string(c.cascade.num_stages); });
    add("cascade.selection_ratio",
        [](C& c, S v) { c.cascade.selection_ratio = parse_number<double>("cascade.selection_ratio", v); },
        [](const C& c) { return fmt(c.cascade.selection_ratio); });
    add("cascade.view_schedule", [](C& c, S v) { c.cascade.view_schedule = split(v, ','); },
        [](const C& c) { return join(c.cascade.view_schedule); });

    add("train.cycles", [](C& c, S v) { c.cycles = parse_number<int>("train.cycles", v); },
        [](const C& c) { return std::to_string(c.cycles); });
    add("train.epochs_per_cycle", [](C& c, S v) { c.epochs_per_cycle = parse_number<int>("train.epochs_per_cycle", v); },
        [](const C& c) { return std::to_string(c.epochs_per_cycle); });
    add("train.topk_schedule", [](C& c, S v) { c.topk_schedule = parse_size_list("train.topk_schedule", v); },
        [](const C& c) { return join(c.topk_schedule); });
    add("train.train_views", [](C& c, S v) { c.train_views = split(v, ','); },
        [](const C& c) { return join(c.train_views); });
    add("train.batch_size", [](C& c, S v) { c.train.batch_size = parse_number<std::size_t>("train.batch_size", v); },
        [](const C& c) { return std::to_string(c.train.batch_size); });
    add("train.ema_momentum", [](C& c, S v) { c.train.ema_momentum = parse_number<double>("train.ema_momentum", v); },
        [](const C& c) { return fmt(c.train.ema_momentum); });
    add("train.learning_rate", [](C& c, S v) { c.train.learning_rate = parse_number<double>("train.learning_rate", v); },
        [](const C& c) { return fmt(c.train.learning_rate); });
    add("train.temperature", [](C& c, S v) { c.train.temperature = parse_number<double>("train.temperature", v); },
        [](const C& c) { return fmt(c.train.temperature); });
    add("train.bank_capacity",
        [](C& c, S v) { c.train.bank_capacity = parse_number<std::size_t>("train.bank_capacity", v); },
        [](const C& c) { return std::to_string(c.train.bank_capacity); });
    add("train.embedding_dim",
        [](C& c, S v) { c.train.embedding_dim = parse_number<std::size_t>("train.embedding_dim", v); },
        [](const C& c) { return std::to_string(c.train.embedding_dim); });
    add("train.augment_noise", [](C& c, S v) { c.train.augment_noise = parse_number<double>("train.augment_noise", v); },
        [](const C& c) { return fmt(c.train.augment_noise); });
    add("train.reset_bank_each_cycle",
        [](C& c, S v) { c.train.reset_bank_each_cycle = parse_bool("train.reset_bank_each_cycle", v); },
        [](const C& c) { return std::string(c.train.reset_bank_each_cycle ? "true" : "false"); });
    return f;
  }();
  return table;
}

const Field* find_field(const std::string& key) {
  for (const auto& f : fields()) {
    if (key == f.key) return &f;
  }
  return nullptr;
}

std::string sanitize(const std::string& s) {
  std::string out;
  for (char ch : s) out += (std::isalnum(static_cast<unsigned char>(ch)) || ch == '.' || ch == '-') ? ch : '_';
  return out;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  const Field* f = find_field(key);
  if (!f) throw ValidationError("unknown config key: " + key);
  f->set(*this, value);
}

Provenance RunConfig::provenance() const {
  Provenance out;
  for (const auto& f : fields()) out.emplace_back(f.key, f.get(*this));
  for (const auto& axis : sweep) {
    std::string joined;
    for (std::size_t i = 0; i < axis.values.size(); ++i) joined += (i ? " | " : "") + axis.values[i];
    out.emplace_back("sweep." + axis.key, joined);
  }
  return out;
}

std::string RunConfig::to_ini() const {
  std::ostringstream out;
  std::string section;
  for (const auto& [key, value] : provenance()) {
    const auto dot = key.find('.');
    const std::string sec = key.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) out << '\n';
      out << '[' << sec << "]\n";
      section = sec;
    }
    out << key.substr(dot + 1) << " = " << value << '\n';
  }
  return out.str();
}

void RunConfig::validate() const {
  synthetic.validate();
  cascade.validate();
  if (test_instances_per_class < 0) throw ValidationError("test_instances_per_class must be >= 0");
  if (cycles < 1) throw ValidationError("cycles must be >= 1");
  if (epochs_per_cycle < 1) throw ValidationError("epochs_per_cycle must be >= 1");
  if (topk_schedule.empty()) throw ValidationError("topk_schedule must not be empty");
  if (topk_schedule.size() != 1 && topk_schedule.size() != static_cast<std::size_t>(cycles)) {
    throw ValidationError("topk_schedule length must be 1 or equal cycles");
  }
  for (auto k : topk_schedule) {
    if (k < 1) throw ValidationError("topk_schedule entries must be >= 1");
  }
  if (eval_ks.empty()) throw ValidationError("eval_ks must not be empty");
  for (auto k : eval_ks) {
    if (k < 1) throw ValidationError("eval_ks entries must be >= 1");
  }
  TrainSchedule probe = train;
  probe.cycles = {{1, 1, "probe"}};
  probe.validate();
  for (const auto& axis : sweep) {
    if (!find_field(axis.key)) throw ValidationError("sweep names unknown key: " + axis.key);
    if (axis.values.empty()) throw ValidationError("sweep axis " + axis.key + " has no values");
    for (const auto& v : axis.values) {
      RunConfig copy = *this;
      copy.sweep.clear();
      copy.set(axis.key, v);
      copy.validate();
    }
  }
}

TrainSchedule RunConfig::schedule(const std::vector<ViewId>& dataset_views) const {
  TrainSchedule s = train;
  const std::vector<ViewId>& views = train_views.empty() ? dataset_views : train_views;
  for (const auto& v : views) {
    if (std::find(dataset_views.begin(), dataset_views.end(), v) == dataset_views.end()) {
      throw ValidationError("train view not in dataset: " + v);
    }
  }
  s.cycles = make_cycles(cycles, epochs_per_cycle, topk_schedule, views);
  s.validate();
  return s;
}

ViewId RunConfig::resolved_eval_view(const std::vector<ViewId>& dataset_views) const {
  ViewId v = !eval_view.empty() ? eval_view : (!train_views.empty() ? train_views.front() : dataset_views.front());
  if (std::find(dataset_views.begin(), dataset_views.end(), v) == dataset_views.end()) {
    throw ValidationError("eval view not in dataset: " + v);
  }
  return v;
}

RunConfig parse_run_config(std::istream& in) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  RunConfig cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw ValidationError("config key outside a section: " + section);
    if (section == "sweep") {
      for (const auto& [key, value] : body) {
        std::vector<std::string> values;
        for (const auto& v : split(value.data(), '|')) values.push_back(v);
        cfg.sweep.push_back({key, values});
      }
      continue;
    }
    if (section != "run" && section != "synthetic" && section != "cascade" && section != "train") {
      throw ValidationError("unknown config section: " + section);
    }
    for (const auto& [key, value] : body) cfg.set(section + "." + key, value.data());
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config: " + path.string());
  return parse_run_config(in);
}

std::vector<SweepPoint> expand_sweep(const RunConfig& config) {
  RunConfig base = config;
  base.sweep.clear();
  std::vector<SweepPoint> points{{"", base}};
  for (const auto& axis : config.sweep) {
    std::vector<SweepPoint> next;
    for (const auto& p : points) {
      for (const auto& v : axis.values) {
        SweepPoint q = p;
        q.config.set(axis.key, v);
        const std::string leaf = axis.key.substr(axis.key.find('.') + 1);
        q.name += (q.name.empty() ? "" : "__") + sanitize(leaf + "-" + v);
        next.push_back(std::move(q));
      }
    }
    points = std::move(next);
  }
  if (points.size() == 1 && points.front().name.empty()) points.front().name = "base";
  for (auto& p : points) p.config.validate();
  return points;
}

}  // namespace cpr
