// cpr: command-line front end for cascade positive retrieval.
//
//   cpr synth  --config run.ini             synthetic train/test feature files
//   cpr ingest --input feats.txt            validate a feature file
//   cpr train  --config run.ini             train every sweep point
//   cpr mine   --checkpoint ck --query ID   one-shot cascade mining
//   cpr eval   --checkpoint ck              retrieval R@k
//   cpr report --out dir                    collect run summaries into CSV
//
// Exit status: 0 success, 1 invalid input or usage, 2 runtime failure.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cpr/cascade_miner.hpp"
#include "cpr/checkpoint.hpp"
#include "cpr/errors.hpp"
#include "cpr/evaluator.hpp"
#include "cpr/feature_file.hpp"
#include "cpr/run_config.hpp"
#include "cpr/synthetic.hpp"
#include "cpr/trainer.hpp"

namespace fs = std::filesystem;
using namespace cpr;

namespace {

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool dry_run = false;
};

RunConfig resolve_config(const CommonOptions& opts) {
  RunConfig cfg = opts.config_path.empty() ? RunConfig{} : load_run_config(opts.config_path);
  if (opts.seed) cfg.seed = *opts.seed;
  if (!opts.out.empty()) cfg.out = opts.out;
  cfg.validate();
  return cfg;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

bool fully_labeled(const Dataset& ds) {
  return std::all_of(ds.records.begin(), ds.records.end(), [](const auto& r) { return r.class_label.has_value(); });
}

Dataset held_out_split(const RunConfig& cfg) {
  SyntheticSpec spec = cfg.synthetic;
  spec.instances_per_class = cfg.test_instances_per_class;
  return generate_synthetic(spec, cfg.seed, 1);
}

Dataset train_dataset(const RunConfig& cfg) {
  return cfg.dataset.empty() ? generate_synthetic(cfg.synthetic, cfg.seed) : load_feature_file(cfg.dataset);
}

// Held-out data: an explicit file, else a fresh synthetic split when training
// data is synthetic too.
std::optional<Dataset> test_dataset(const RunConfig& cfg) {
  if (!cfg.test_dataset.empty()) return load_feature_file(cfg.test_dataset);
  if (cfg.dataset.empty()) return held_out_split(cfg);
  return std::nullopt;
}

std::string join(const std::vector<std::string>& parts, const char* sep) {
  std::string s;
  for (std::size_t i = 0; i < parts.size(); ++i) s += (i ? sep : "") + parts[i];
  return s;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::size_t> parse_ks(const std::string& text) {
  std::vector<std::size_t> ks;
  for (const auto& item : split_list(text)) {
    std::size_t used = 0;
    long long k = 0;
    try {
      k = std::stoll(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || k < 1) throw ValidationError("bad k in --ks: " + item);
    ks.push_back(static_cast<std::size_t>(k));
  }
  if (ks.empty()) throw ValidationError("--ks is empty");
  return ks;
}

int cmd_synth(const CommonOptions& opts) {
  const RunConfig cfg = resolve_config(opts);
  const fs::path dir = cfg.out;
  if (opts.dry_run) {
    std::cout << cfg.to_ini() << "# would write " << (dir / "train.feat").string() << " and "
              << (dir / "test.feat").string() << '\n';
    return 0;
  }
  const Dataset train = generate_synthetic(cfg.synthetic, cfg.seed);
  const Dataset test = held_out_split(cfg);
  fs::create_directories(dir);
  save_feature_file(dir / "train.feat", train);
  save_feature_file(dir / "test.feat", test);
  std::cout << "wrote " << train.records.size() << " records to " << (dir / "train.feat").string() << '\n'
            << "wrote " << test.records.size() << " records to " << (dir / "test.feat").string() << '\n';
  return 0;
}

int cmd_ingest(const std::string& input, const std::string& output) {
  const Dataset ds = load_feature_file(input);
  std::size_t labeled = 0;
  for (const auto& r : ds.records) labeled += r.class_label.has_value();
  std::cout << "records " << ds.records.size() << '\n';
  for (const auto& v : ds.views) std::cout << "view " << v << " dim " << ds.dim(v) << '\n';
  std::cout << "labeled " << labeled << '\n';
  std::set<int> classes;
  for (const auto& r : ds.records) {
    if (r.class_label) classes.insert(*r.class_label);
  }
  std::cout << "classes " << classes.size() << '\n';
  if (!output.empty()) {
    save_feature_file(output, ds);
    std::cout << "wrote " << output << '\n';
  }
  return 0;
}

void write_text(const fs::path& path, const std::string& text) { open_out(path) << text; }

template <typename Writer>
void write_with(const fs::path& path, Writer&& writer) {
  auto out = open_out(path);
  writer(out);
}

void train_one(const SweepPoint& point, const fs::path& dir) {
  const RunConfig& cfg = point.config;
  const Dataset train = train_dataset(cfg);
  const auto test = test_dataset(cfg);
  const TrainSchedule schedule = cfg.schedule(train.views);
  const ViewId eval_view = cfg.resolved_eval_view(train.views);
  const bool labeled = fully_labeled(train);

  fs::create_directories(dir);
  write_text(dir / "config.ini", cfg.to_ini());

  Trainer trainer(strip_labels(train), cfg.cascade, schedule, cfg.seed);
  std::vector<EpochMetrics> epochs;
  std::ostringstream loss_log;
  trainer.run([&](const EpochLog& log) {
    std::printf("[%s] epoch %d cycle %d view %s top%zu loss %.6f\n", point.name.c_str(), log.epoch, log.cycle,
                log.train_view.c_str(), log.final_topk, log.loss_mean);
    char line[96];
    std::snprintf(line, sizeof line, "epoch %d loss %.6f\n", log.epoch, log.loss_mean);
    loss_log << line;
    if (labeled) epochs.push_back(summarize_epoch(log, label_map(train), class_sizes(train)));
  });
  save_checkpoint(dir / "checkpoint.txt", trainer.state());

  if (!labeled) {
    write_text(dir / "run_log.txt", loss_log.str());
    std::cerr << "note: training data is unlabeled; mining metrics and reports skipped\n";
    return;
  }
  std::map<std::size_t, double> recalls;
  if (test && fully_labeled(*test)) {
    const ToyEncoder& enc = trainer.encoders().at(eval_view).live;
    recalls = retrieval_recall(embed(*test, enc, eval_view), embed(train, enc, eval_view), cfg.eval_ks);
  }
  const MetricsReport report = build_report(std::move(epochs), recalls);
  auto provenance = cfg.provenance();
  provenance.emplace_back("run.name", point.name);
  write_with(dir / "report.jsonl", [&](std::ostream& o) { write_report_jsonl(o, report, provenance); });
  write_with(dir / "cmr_table.csv", [&](std::ostream& o) { write_cmr_table(o, report, class_sizes(train)); });
  write_with(dir / "pmr_series.csv", [&](std::ostream& o) { write_pmr_series(o, report); });
  write_with(dir / "run_log.txt", [&](std::ostream& o) { write_run_log(o, report); });

  std::printf("[%s] last-epoch PMR %.4f, CMR median %.4f, mining R@1 %.4f", point.name.c_str(),
              report.pmr_series.empty() ? 0.0 : report.pmr_series.back(), report.cmr_median, report.mining_r_at_1);
  for (const auto& [k, v] : recalls) std::printf(", R@%zu %.4f", k, v);
  std::printf("\n");
}

int cmd_train(const CommonOptions& opts) {
  const RunConfig cfg = resolve_config(opts);
  const auto points = expand_sweep(cfg);
  const bool single = points.size() == 1;
  for (const auto& point : points) {
    const fs::path dir = single ? fs::path(point.config.out) : fs::path(point.config.out) / point.name;
    point.config.validate();
    if (opts.dry_run) {
      std::cout << "# run " << point.name << " -> " << dir.string() << '\n' << point.config.to_ini() << '\n';
      continue;
    }
    train_one(point, dir);
  }
  return 0;
}

struct MineOptions {
  std::string checkpoint;
  std::string dataset;
  std::string query;
  std::string view;
  std::size_t topk = 0;
};

int cmd_mine(const CommonOptions& common, const MineOptions& opts) {
  RunConfig cfg = resolve_config(common);
  if (!opts.dataset.empty()) cfg.dataset = opts.dataset;
  const Dataset data = train_dataset(cfg);
  const auto rec = std::find_if(data.records.begin(), data.records.end(),
                                [&](const auto& r) { return r.id == opts.query; });
  if (rec == data.records.end()) throw ValidationError("unknown query id: " + opts.query);

  const TrainerState state = load_checkpoint(opts.checkpoint);
  if (!state.bank) throw ValidationError("checkpoint has no memory bank");
  const ViewId view = opts.view.empty() ? cfg.resolved_eval_view(data.views) : opts.view;
  if (std::find(data.views.begin(), data.views.end(), view) == data.views.end()) {
    throw ValidationError("unknown view: " + view);
  }
  CascadeConfig cascade = cfg.cascade;
  cascade.final_topk = opts.topk ? opts.topk : cfg.topk_schedule.back();
  cascade = resolve_schedule(std::move(cascade), view, data.views);
  if (common.dry_run) {
    std::cout << "# mine " << opts.query << " in view " << view << " with stages " << join(cascade.view_schedule, ",")
              << " top" << cascade.final_topk << '\n';
    return 0;
  }

  const MemoryBank& bank = *state.bank;
  const ViewFeatures query = encode_variant(state.encoders, rec->features, view);
  const MiningResult mined = cascade_mine(query, bank, cascade, bank.slots_of(rec->id));
  write_stage_trace(std::cout, opts.query, mined, bank);
  std::vector<std::string> ids;
  for (Slot t : mined.positives) ids.push_back(bank.slot_id(t));
  std::cout << "positives " << join(ids, ",") << "\nnegatives " << mined.negatives.size() << "\nexcluded "
            << mined.excluded.size() << '\n';
  return 0;
}

struct EvalOptions {
  std::string checkpoint;
  std::string dataset;
  std::string test;
  std::string ks;
  std::string view;
};

int cmd_eval(const CommonOptions& common, const EvalOptions& opts) {
  RunConfig cfg = resolve_config(common);
  if (!opts.dataset.empty()) cfg.dataset = opts.dataset;
  if (!opts.test.empty()) cfg.test_dataset = opts.test;
  if (!opts.ks.empty()) cfg.eval_ks = parse_ks(opts.ks);
  if (!fs::exists(opts.checkpoint)) throw ValidationError("checkpoint not found: " + opts.checkpoint);
  if (common.dry_run) {
    std::cout << cfg.to_ini() << "# would evaluate " << opts.checkpoint << '\n';
    return 0;
  }

  const Dataset train = train_dataset(cfg);
  const auto test = test_dataset(cfg);
  if (!test) throw ValidationError("no test data: pass --test or set run.test_dataset");
  if (!fully_labeled(train) || !fully_labeled(*test)) throw ValidationError("retrieval needs labeled data");
  const ViewId view = opts.view.empty() ? cfg.resolved_eval_view(train.views) : opts.view;

  const TrainerState state = load_checkpoint(opts.checkpoint);
  const auto enc = state.encoders.find(view);
  if (enc == state.encoders.end()) throw ValidationError("checkpoint has no encoder for view: " + view);
  const auto recalls =
      retrieval_recall(embed(*test, enc->second.live, view), embed(train, enc->second.live, view), cfg.eval_ks);

  auto provenance = cfg.provenance();
  provenance.emplace_back("eval.checkpoint", opts.checkpoint);
  provenance.emplace_back("eval.view", view);
  const fs::path dir = cfg.out;
  fs::create_directories(dir);
  auto out = open_out(dir / "eval.jsonl");
  write_report_jsonl(out, build_report({}, recalls), provenance);

  for (const auto& [k, v] : recalls) std::printf("R@%zu %.4f\n", k, v);
  const bool same = !cfg.test_dataset.empty() && !cfg.dataset.empty() &&
                    fs::weakly_canonical(cfg.test_dataset) == fs::weakly_canonical(cfg.dataset);
  if (same && recalls.count(1)) {
    const double r1 = recalls.at(1);
    std::printf("sanity: train=test R@1 %.4f (expected 1.0) %s\n", r1, r1 == 1.0 ? "ok" : "MISMATCH");
  }
  std::cout << "wrote " << (dir / "eval.jsonl").string() << '\n';
  return 0;
}

// Summary CSV across every run directory holding a report.jsonl.
int cmd_report(const CommonOptions& common) {
  const fs::path root = common.out.empty() ? fs::path("cpr_out") : fs::path(common.out);
  if (!fs::is_directory(root)) throw ValidationError("not a directory: " + root.string());
  std::vector<fs::path> reports;
  if (fs::exists(root / "report.jsonl")) reports.push_back(root / "report.jsonl");
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && fs::exists(entry.path() / "report.jsonl")) reports.push_back(entry.path() / "report.jsonl");
  }
  std::sort(reports.begin(), reports.end());
  if (reports.empty()) throw ValidationError("no report.jsonl under " + root.string());

  std::set<std::size_t> ks;
  struct Row {
    std::string run;
    nlohmann::json summary;
    std::size_t epochs = 0;
  };
  std::vector<Row> rows;
  for (const auto& path : reports) {
    std::ifstream in(path);
    Row row{path.parent_path() == root ? "." : path.parent_path().filename().string(), {}, 0};
    for (std::string line; std::getline(in, line);) {
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line);
      const std::string type = j.at("type");
      if (type == "epoch") ++row.epochs;
      if (type == "summary") row.summary = j;
    }
    if (row.summary.is_null()) throw std::runtime_error("report without summary line: " + path.string());
    for (const auto& [k, v] : row.summary.at("retrieval_recalls").items()) ks.insert(std::stoul(k));
    rows.push_back(std::move(row));
  }

  std::ostringstream csv;
  csv << "run,epochs,last_pmr,cmr_median,mining_r_at_1";
  for (auto k : ks) csv << ",r_at_" << k;
  csv << '\n';
  csv.precision(17);
  for (const auto& row : rows) {
    const auto& s = row.summary;
    const auto& series = s.at("pmr_series");
    csv << row.run << ',' << row.epochs << ',';
    if (!series.empty()) csv << series.back().get<double>();
    csv << ',' << s.at("cmr_median").get<double>() << ',' << s.at("mining_r_at_1").get<double>();
    for (auto k : ks) {
      csv << ',';
      const auto& rr = s.at("retrieval_recalls");
      if (rr.contains(std::to_string(k))) csv << rr.at(std::to_string(k)).get<double>();
    }
    csv << '\n';
  }
  if (!common.dry_run) write_text(root / "summary.csv", csv.str());
  std::cout << csv.str();
  return 0;
}

void add_common(CLI::App* cmd, CommonOptions& opts, bool with_config = true) {
  if (with_config) {
    cmd->add_option("--config", opts.config_path, "INI run configuration")->check(CLI::ExistingFile);
    cmd->add_option("--seed", opts.seed, "override run.seed");
  }
  cmd->add_option("--out", opts.out, "output directory (overrides run.out)");
  cmd->add_flag("--dry-run", opts.dry_run, "print the resolved configuration and stop");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cascade positive retrieval: staged multi-view positive mining and contrastive training"};
  app.require_subcommand(1);

  CommonOptions common;
  MineOptions mine;
  EvalOptions eval;
  std::string ingest_input, ingest_output;

  auto* synth = app.add_subcommand("synth", "write synthetic train/test feature files");
  add_common(synth, common);

  auto* ingest = app.add_subcommand("ingest", "validate a feature file and print a summary");
  ingest->add_option("--input", ingest_input, "feature file")->required()->check(CLI::ExistingFile);
  ingest->add_option("--output", ingest_output, "write a canonical copy here");

  auto* train = app.add_subcommand("train", "train every sweep point and write run artifacts");
  add_common(train, common);

  auto* mine_cmd = app.add_subcommand("mine", "cascade-mine positives for one instance against a checkpoint bank");
  add_common(mine_cmd, common);
  mine_cmd->add_option("--checkpoint", mine.checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  mine_cmd->add_option("--query", mine.query, "instance id")->required();
  mine_cmd->add_option("--dataset", mine.dataset, "feature file holding the query");
  mine_cmd->add_option("--view", mine.view, "query view");
  mine_cmd->add_option("--topk", mine.topk, "final-stage Top-k")->check(CLI::PositiveNumber);

  auto* eval_cmd = app.add_subcommand("eval", "retrieval R@k of a checkpoint's encoder");
  add_common(eval_cmd, common);
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "checkpoint file")->required();
  eval_cmd->add_option("--dataset", eval.dataset, "gallery feature file");
  eval_cmd->add_option("--test", eval.test, "query feature file");
  eval_cmd->add_option("--ks", eval.ks, "comma-separated k list (default 1,5,10,20)");
  eval_cmd->add_option("--view", eval.view, "view whose encoder is evaluated");

  auto* report = app.add_subcommand("report", "collect run summaries into summary.csv");
  add_common(report, common, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*synth) return cmd_synth(common);
    if (*ingest) return cmd_ingest(ingest_input, ingest_output);
    if (*train) return cmd_train(common);
    if (*mine_cmd) return cmd_mine(common, mine);
    if (*eval_cmd) return cmd_eval(common, eval);
    if (*report) return cmd_report(common);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
