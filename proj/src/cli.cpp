#include "adlgen/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "adlgen/downstream.hpp"
#include "adlgen/fixtures.hpp"
#include "adlgen/ingest.hpp"
#include "adlgen/llm_client.hpp"
#include "adlgen/metrics.hpp"
#include "adlgen/model.hpp"
#include "adlgen/sampler.hpp"
#include "adlgen/semantic.hpp"

namespace adlgen {

namespace {

namespace fs = std::filesystem;

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return buf.str();
}

void spit(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << content;
}

// The floorplan spec is the single source of truth for the sensor vocabulary.
SensorVocabulary vocab_from_floorplan(const std::string& spec_text) {
  std::vector<std::string> ids;
  std::istringstream in(spec_text);
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream is(line);
    std::string kw, id;
    if ((is >> kw) && kw == "sensor" && (is >> id)) ids.push_back(id);
  }
  std::sort(ids.begin(), ids.end());
  return SensorVocabulary(ids);
}

// Every command drops its resolved settings and the tool version next to its
// outputs so a run can be regenerated from the directory alone.
void write_effective_config(const fs::path& out_dir,
                            const std::vector<std::pair<std::string, std::string>>& kv) {
  std::string text = "version=" ADLGEN_VERSION "\n";
  for (const auto& [k, v] : kv) text += k + "=" + v + "\n";
  spit(out_dir / "effective.conf", text);
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

struct CommonOpts {
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string format = "csv";
  std::string llm_endpoint;
};

void add_common(CLI::App* cmd, CommonOpts& c) {
  cmd->add_option("--seed", c.seed, "Master seed");
  cmd->add_option("--jobs", c.jobs, "Worker threads for generation/metrics")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--format", c.format, "Output format")
      ->check(CLI::IsMember({"csv", "text"}));
  cmd->add_option("--llm-endpoint", c.llm_endpoint,
                  "HTTP endpoint for external scoring/refinement (key via ADLGEN_LLM_KEY)");
}

// ---------------------------------------------------------------------------

int cmd_ingest(const std::string& log_path, const std::string& floorplan_path,
               const std::string& out_dir, int k, const CommonOpts& common) {
  const std::string floorplan_text = slurp(floorplan_path);
  const auto vocab = vocab_from_floorplan(floorplan_text);
  load_floorplan(floorplan_text, vocab);  // validates the spec

  const RawLog log = parse_event_log(slurp(log_path), fs::path(log_path).filename().string());
  std::vector<std::string> unknown;
  for (const auto& e : log.events)
    if (!vocab.contains(e.sensor_id)) unknown.push_back(e.sensor_id);
  if (!unknown.empty()) {
    std::sort(unknown.begin(), unknown.end());
    unknown.erase(std::unique(unknown.begin(), unknown.end()), unknown.end());
    std::string msg = "log sensors missing from floorplan:";
    for (const auto& id : unknown) msg += " " + id;
    throw std::runtime_error(msg);
  }

  ExtractionReport report;
  const auto sequences = extract_activity_sequences(log, vocab, &report);
  if (sequences.empty()) throw std::runtime_error("no activity sequences extracted");
  const auto folds = stratified_kfold(sequences, k, common.seed);

  spit(fs::path(out_dir) / "sequences.txt", render_interchange_corpus(sequences, vocab));
  std::string fold_csv = "sample_id,fold\n";
  for (const auto& [id, fold] : folds.assignments)
    fold_csv += id + "," + std::to_string(fold) + "\n";
  spit(fs::path(out_dir) / "folds.csv", fold_csv);

  std::ostringstream rep;
  rep << "sequences," << sequences.size() << "\n"
      << "events_parsed," << log.events.size() << "\n"
      << "parse_issues," << log.issues.size() << "\n"
      << "dropped_temperature," << log.dropped_temperature << "\n"
      << "timestamp_inversions," << log.timestamp_inversions << "\n"
      << "dropped_unterminated," << report.dropped_unterminated << "\n"
      << "dropped_stray_end," << report.dropped_stray_end << "\n"
      << "dropped_other_activity," << report.dropped_other_activity << "\n"
      << "dropped_short," << report.dropped_short << "\n"
      << "truncated," << report.truncated << "\n"
      << "overlapping," << report.overlapping << "\n";
  for (const auto& w : folds.warnings) rep << "warning," << w << "\n";
  spit(fs::path(out_dir) / "ingest_report.csv", rep.str());

  write_effective_config(out_dir, {{"command", "ingest"},
                                   {"log", log_path},
                                   {"floorplan", floorplan_path},
                                   {"k", std::to_string(k)},
                                   {"seed", std::to_string(common.seed)}});
  std::cout << "ingest: " << sequences.size() << " sequences -> " << out_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainCliOpts {
  std::string sequences, floorplan, folds_file, out_dir;
  int test_fold = -1;
  ModelConfig mcfg;
  TrainConfig tcfg;
};

int cmd_train(const TrainCliOpts& opt, const CommonOpts& common) {
  const std::string floorplan_text = slurp(opt.floorplan);
  const auto vocab = vocab_from_floorplan(floorplan_text);
  load_floorplan(floorplan_text, vocab);

  auto parsed = parse_interchange(slurp(opt.sequences), vocab);
  if (!parsed.errors.empty()) {
    std::cerr << "warning: " << parsed.errors.size() << " malformed interchange lines skipped\n";
  }
  std::vector<ActivitySequence> dataset = std::move(parsed.sequences);

  if (opt.test_fold >= 0) {
    if (opt.folds_file.empty()) throw std::runtime_error("--test-fold requires --folds");
    std::map<std::string, int> fold_of;
    std::istringstream in(slurp(opt.folds_file));
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      const auto c = line.find(',');
      if (c != std::string::npos)
        fold_of[line.substr(0, c)] = std::stoi(line.substr(c + 1));
    }
    std::vector<ActivitySequence> kept;
    for (auto& s : dataset) {
      const auto it = fold_of.find(s.sample_id);
      if (it == fold_of.end() || it->second != opt.test_fold) kept.push_back(std::move(s));
    }
    dataset = std::move(kept);
  }
  if (dataset.empty()) throw std::runtime_error("no training sequences after fold filtering");

  ModelConfig mcfg = opt.mcfg;
  mcfg.vocab_size = static_cast<int>(vocab.size());
  mcfg.seed = common.seed;
  TrainConfig tcfg = opt.tcfg;
  tcfg.seed = common.seed;

  const auto [weights, report] = train(dataset, vocab, mcfg, tcfg);
  fs::create_directories(opt.out_dir);
  save_checkpoint_file(weights, tcfg, (fs::path(opt.out_dir) / "checkpoint.bin").string());
  spit(fs::path(opt.out_dir) / "train_report.csv", train_report_csv(report));

  write_effective_config(opt.out_dir,
                         {{"command", "train"},
                          {"sequences", opt.sequences},
                          {"floorplan", opt.floorplan},
                          {"test_fold", std::to_string(opt.test_fold)},
                          {"d_model", std::to_string(mcfg.d_model)},
                          {"n_heads", std::to_string(mcfg.n_heads)},
                          {"n_layers", std::to_string(mcfg.n_layers)},
                          {"dropout", fmt(mcfg.dropout)},
                          {"base_lr", fmt(tcfg.base_lr)},
                          {"weight_decay", fmt(tcfg.weight_decay)},
                          {"batch_size", std::to_string(tcfg.batch_size)},
                          {"max_epochs", std::to_string(tcfg.max_epochs)},
                          {"patience", std::to_string(tcfg.early_stop_patience)},
                          {"seed", std::to_string(common.seed)}});
  std::cout << "train: best epoch " << report.best_epoch << " val " << fmt(report.best_val)
            << " -> " << opt.out_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct GenerateCliOpts {
  std::string checkpoint, floorplan, activity, out_dir, exemplar, start_clock;
  int count = 0;
  SamplerConfig cfg;
};

int cmd_generate(const GenerateCliOpts& opt, const CommonOpts& common) {
  auto [weights, tcfg] = load_checkpoint_file(opt.checkpoint);
  (void)tcfg;
  const SensorVocabulary vocab(weights.sensor_ids);
  const auto graph = load_floorplan(slurp(opt.floorplan), vocab);

  std::optional<ActivitySequence> prefix;
  if (!opt.exemplar.empty()) {
    auto parsed = parse_interchange(slurp(opt.exemplar), vocab);
    if (parsed.sequences.empty()) throw std::runtime_error("exemplar file has no sequences");
    prefix = parsed.sequences.front();
  }
  Micros clock = parse_timestamp("2011-03-07 09:00:00").value();
  if (!opt.start_clock.empty()) {
    const auto t = parse_timestamp(opt.start_clock);
    if (!t) throw std::runtime_error("bad --start-clock timestamp");
    clock = *t;
  }

  SamplerConfig cfg = opt.cfg;
  cfg.seed = common.seed;
  const auto out = generate(weights, opt.activity, opt.count, prefix, clock, graph, cfg,
                            common.jobs);

  std::vector<ActivitySequence> seqs;
  seqs.reserve(out.size());
  for (const auto& g : out) seqs.push_back(g.seq);
  spit(fs::path(opt.out_dir) / "generated.txt", render_interchange_corpus(seqs, vocab));
  spit(fs::path(opt.out_dir) / "provenance.csv", provenance_csv(out));

  write_effective_config(opt.out_dir,
                         {{"command", "generate"},
                          {"checkpoint", opt.checkpoint},
                          {"floorplan", opt.floorplan},
                          {"activity", opt.activity},
                          {"count", std::to_string(opt.count)},
                          {"tau_base", fmt(cfg.tau_base)},
                          {"nucleus_p", fmt(cfg.nucleus_p)},
                          {"r_p", fmt(cfg.r_p)},
                          {"beta_literal", cfg.beta_literal ? "1" : "0"},
                          {"enforce_adjacency", cfg.enforce_adjacency ? "1" : "0"},
                          {"max_len", std::to_string(cfg.max_len)},
                          {"seed", std::to_string(common.seed)},
                          {"jobs", std::to_string(common.jobs)}});
  std::cout << "generate: " << out.size() << " sequences -> " << opt.out_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

double bootstrap_stderr_mmd(const std::vector<FeatureVector>& x,
                            const std::vector<FeatureVector>& y, const KernelConfig& k,
                            std::uint64_t seed, int resamples) {
  if (x.size() < 2 || y.size() < 2) return 0.0;
  Rng rng(mix_seed(seed, 0xb007ULL));
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(resamples));
  for (int r = 0; r < resamples; ++r) {
    std::vector<FeatureVector> xs, ys;
    for (std::size_t i = 0; i < x.size(); ++i)
      xs.push_back(x[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(x.size()) - 1))]);
    for (std::size_t i = 0; i < y.size(); ++i)
      ys.push_back(y[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(y.size()) - 1))]);
    values.push_back(mmd2_unbiased(xs, ys, k));
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return std::sqrt(var / static_cast<double>(values.size() - 1));
}

int cmd_evaluate(const std::string& real_path, const std::string& synth_path,
                 const std::string& floorplan_path, const std::string& out_dir,
                 double bandwidth, const CommonOpts& common) {
  const std::string floorplan_text = slurp(floorplan_path);
  const auto vocab = vocab_from_floorplan(floorplan_text);
  const auto graph = load_floorplan(floorplan_text, vocab);

  const auto real = parse_interchange(slurp(real_path), vocab);
  const auto synth = parse_interchange(slurp(synth_path), vocab);
  if (real.sequences.empty() || synth.sequences.empty())
    throw std::runtime_error("evaluate: empty real or synthetic corpus");

  const KernelConfig kernel{bandwidth};
  const auto xf = featurize_corpus(real.sequences, vocab);
  const auto yf = featurize_corpus(synth.sequences, vocab);

  std::ostringstream csv;
  csv << "metric,value,stderr\n";
  csv.precision(10);
  auto row = [&](const std::string& name, double value, double se = 0.0) {
    csv << name << ',' << value << ',' << se << '\n';
  };

  row("mmd2_unbiased", mmd2_unbiased(xf, yf, kernel),
      bootstrap_stderr_mmd(xf, yf, kernel, common.seed, 100));
  row("mmd2_biased", mmd2_biased(xf, yf, kernel));
  row("diversity_real", diversity_score(real.sequences));
  row("diversity_synth", diversity_score(synth.sequences));
  if (synth.sequences.size() >= 2) {
    const auto st = intra_set_similarity(synth.sequences, vocab);
    row("intra_mean", st.mean);
    row("intra_median", st.median);
    row("intra_min", st.min);
    row("intra_max", st.max);
    row("intra_std", st.std);
    row("intra_p25", st.p25);
    row("intra_p75", st.p75);
  }
  const auto vr = validity_rate(synth.sequences, graph);
  row("validity_sequence", vr.sequence_level);
  row("validity_transition", vr.transition_level);

  const auto profiles = build_profiles(real.sequences, vocab);
  double score_sum = 0.0, score_sq = 0.0;
  for (const auto& s : synth.sequences) {
    const auto a = assess(s, s.label, profiles, graph, vocab);
    score_sum += a.score;
    score_sq += static_cast<double>(a.score) * a.score;
  }
  const double n = static_cast<double>(synth.sequences.size());
  const double mean_score = score_sum / n;
  const double var_score = std::max(0.0, score_sq / n - mean_score * mean_score);
  row("semantic_mean", mean_score, n > 1 ? std::sqrt(var_score / (n - 1)) : 0.0);

  // Per-activity breakdown.
  std::map<std::string, std::vector<const ActivitySequence*>> by_real, by_synth;
  for (const auto& s : real.sequences) by_real[s.label].push_back(&s);
  for (const auto& s : synth.sequences) by_synth[s.label].push_back(&s);
  for (const auto& [label, synth_ptrs] : by_synth) {
    const auto it = by_real.find(label);
    if (it == by_real.end() || it->second.size() < 2 || synth_ptrs.size() < 2) continue;
    std::vector<FeatureVector> xa, ya;
    for (const auto* p : it->second) xa.push_back(featurize(*p, vocab));
    for (const auto* p : synth_ptrs) ya.push_back(featurize(*p, vocab));
    row("mmd2_unbiased/" + label, mmd2_unbiased(xa, ya, kernel));
    double s_sum = 0.0;
    for (const auto* p : synth_ptrs)
      s_sum += assess(*p, label, profiles, graph, vocab).score;
    row("semantic_mean/" + label, s_sum / static_cast<double>(synth_ptrs.size()));
  }

  spit(fs::path(out_dir) / "evaluation.csv", csv.str());
  write_effective_config(out_dir, {{"command", "evaluate"},
                                   {"real", real_path},
                                   {"synth", synth_path},
                                   {"floorplan", floorplan_path},
                                   {"bandwidth", fmt(bandwidth)},
                                   {"seed", std::to_string(common.seed)}});
  std::cout << "evaluate: report -> " << out_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_refine(const std::string& synth_path, const std::string& floorplan_path,
               const std::string& real_path, const std::string& out_dir, bool use_llm,
               const std::string& prompt_path, const CommonOpts& common) {
  const std::string floorplan_text = slurp(floorplan_path);
  const auto vocab = vocab_from_floorplan(floorplan_text);
  const auto graph = load_floorplan(floorplan_text, vocab);

  const auto synth = parse_interchange(slurp(synth_path), vocab);
  const auto real = parse_interchange(slurp(real_path), vocab);
  if (synth.sequences.empty()) throw std::runtime_error("refine: empty synthetic corpus");
  const auto profiles = build_profiles(real.sequences, vocab);

  std::vector<ActivitySequence> refined;
  std::string rule_log = "activity,sample_id,rule,target,explanation\n";
  std::size_t pass_before = 0, pass_after = 0;

  if (use_llm) {
    if (common.llm_endpoint.empty())
      throw std::runtime_error("refine --llm requires --llm-endpoint");
    LlmClientConfig ccfg;
    ccfg.endpoint = common.llm_endpoint;
    const LlmClient client(ccfg);
    // One request carrying every sequence in the two-block input convention.
    std::string body = slurp(prompt_path);
    body += "\n\n";
    for (const auto& s : synth.sequences) {
      const auto a = assess(s, s.label, profiles, graph, vocab);
      if (a.tier_a_pass) ++pass_before;
      body += render_interchange(s, vocab);
      body += "\nscore: " + std::to_string(a.score) + "\n\n";
    }
    const auto parsed = parse_llm_refinement(client.post(body), vocab);
    for (const auto& e : parsed.errors)
      std::cerr << "warning: refinement sample " << e.sample_id << ": " << e.message << "\n";
    for (const auto& sample : parsed.samples) {
      refined.push_back(sample.refined);
      for (const auto& r : sample.rules) rule_log += render_rule(r, vocab) + "\n";
      if (check_fundamental(sample.refined, graph).tier_a_pass) ++pass_after;
    }
  } else {
    for (const auto& s : synth.sequences) {
      const auto a = assess(s, s.label, profiles, graph, vocab);
      if (a.tier_a_pass) ++pass_before;
      const auto rules = generate_refinement_rules(s, a, graph, vocab);
      for (const auto& r : rules) rule_log += render_rule(r, vocab) + "\n";
      auto fixed = rules.empty() ? s : apply_rules(s, rules, vocab);
      if (check_fundamental(fixed, graph).tier_a_pass) ++pass_after;
      refined.push_back(std::move(fixed));
    }
  }

  spit(fs::path(out_dir) / "refined.txt", render_interchange_corpus(refined, vocab));
  spit(fs::path(out_dir) / "rules.csv", rule_log);
  std::ostringstream summary;
  summary << "metric,value\n"
          << "sequences," << synth.sequences.size() << "\n"
          << "tier_a_pass_before," << pass_before << "\n"
          << "tier_a_pass_after," << pass_after << "\n";
  spit(fs::path(out_dir) / "refine_report.csv", summary.str());

  write_effective_config(out_dir, {{"command", "refine"},
                                   {"synth", synth_path},
                                   {"floorplan", floorplan_path},
                                   {"real", real_path},
                                   {"llm", use_llm ? "1" : "0"},
                                   {"seed", std::to_string(common.seed)}});
  std::cout << "refine: " << refined.size() << " sequences, tier A " << pass_before << " -> "
            << pass_after << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_classify(const std::string& train_path, const std::string& test_path,
                 const std::string& floorplan_path, const std::string& out_dir,
                 const std::string& setting, const CommonOpts& common) {
  const std::string floorplan_text = slurp(floorplan_path);
  const auto vocab = vocab_from_floorplan(floorplan_text);
  load_floorplan(floorplan_text, vocab);

  const auto train_set = parse_interchange(slurp(train_path), vocab);
  const auto test_set = parse_interchange(slurp(test_path), vocab);
  if (train_set.sequences.empty() || test_set.sequences.empty())
    throw std::runtime_error("classify: empty train or test corpus");

  const auto r = evaluate_setting(train_set.sequences, test_set.sequences, setting, vocab,
                                  common.seed);
  std::string csv = "training_data,test_data,macro_acc,macro_f1\n";
  csv += recognition_csv_row(fs::path(train_path).stem().string(),
                             fs::path(test_path).stem().string(), r);
  spit(fs::path(out_dir) / "recognition.csv", csv);
  spit(fs::path(out_dir) / "per_class.csv", per_class_csv(r));

  write_effective_config(out_dir, {{"command", "classify"},
                                   {"train", train_path},
                                   {"test", test_path},
                                   {"floorplan", floorplan_path},
                                   {"setting", setting},
                                   {"seed", std::to_string(common.seed)}});
  std::cout << "classify: " << setting << " macro_acc " << fmt(r.macro_accuracy)
            << " macro_f1 " << fmt(r.macro_f1) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_report(const std::string& run_dir, const std::string& out_path,
               const std::string& format) {
  // Every subdirectory (or the directory itself) holding an evaluation.csv is
  // one method row; columns mirror the standard summary table.
  struct Row {
    std::string method;
    std::map<std::string, double> values;
  };
  std::vector<Row> rows;
  auto read_eval = [&](const fs::path& file, const std::string& method) {
    Row row;
    row.method = method;
    std::istringstream in(slurp(file.string()));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      const auto c1 = line.find(',');
      if (c1 == std::string::npos) continue;
      const auto c2 = line.find(',', c1 + 1);
      row.values[line.substr(0, c1)] =
          std::stod(line.substr(c1 + 1, c2 == std::string::npos ? std::string::npos
                                                                : c2 - c1 - 1));
    }
    rows.push_back(std::move(row));
  };
  if (fs::exists(fs::path(run_dir) / "evaluation.csv"))
    read_eval(fs::path(run_dir) / "evaluation.csv", fs::path(run_dir).filename().string());
  std::vector<fs::path> subdirs;
  for (const auto& entry : fs::directory_iterator(run_dir))
    if (entry.is_directory() && fs::exists(entry.path() / "evaluation.csv"))
      subdirs.push_back(entry.path());
  std::sort(subdirs.begin(), subdirs.end());
  for (const auto& dir : subdirs) read_eval(dir / "evaluation.csv", dir.filename().string());
  if (rows.empty()) throw std::runtime_error("report: no evaluation.csv found under " + run_dir);

  static const char* kCols[] = {"mmd2_unbiased", "intra_mean", "diversity_synth",
                                "validity_sequence", "semantic_mean"};
  std::ostringstream out;
  if (format == "csv") {
    out << "method,mmd2,intra_set,diversity,validity,semantic\n";
    out.precision(6);
    for (const auto& row : rows) {
      out << row.method;
      for (const char* c : kCols) {
        out << ',';
        if (row.values.count(c)) out << std::fixed << row.values.at(c);
      }
      out << '\n';
    }
  } else {
    out << "Method            MMD2      Intra-Set  Diversity  Validity  Semantic\n";
    out.precision(4);
    out << std::fixed;
    for (const auto& row : rows) {
      out << row.method;
      for (std::size_t pad = row.method.size(); pad < 18; ++pad) out << ' ';
      for (const char* c : kCols) {
        if (row.values.count(c)) {
          out << row.values.at(c) << "    ";
        } else {
          out << "   n/a    ";
        }
      }
      out << '\n';
    }
  }
  if (out_path.empty()) {
    std::cout << out.str();
  } else {
    spit(out_path, out.str());
    std::cout << "report -> " << out_path << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_sample_world(const std::string& world_path, const std::string& out_dir, int count,
                     const CommonOpts& common) {
  const auto world = load_world_file(world_path);
  std::map<std::string, int> per_activity;
  for (const auto& a : world.activities) per_activity[a.label] = count;
  const auto corpus =
      sample_world_corpus(world, per_activity, common.seed ? common.seed : world.seed);

  spit(fs::path(out_dir) / "sequences.txt", render_interchange_corpus(corpus, world.vocab));
  spit(fs::path(out_dir) / "floorplan.txt", world.floorplan_text);
  write_effective_config(out_dir, {{"command", "sample-world"},
                                   {"world", world_path},
                                   {"count", std::to_string(count)},
                                   {"seed", std::to_string(common.seed)}});
  std::cout << "sample-world: " << corpus.size() << " sequences -> " << out_dir << "\n";
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Activity-conditioned sensor-sequence synthesis and evaluation"};
  app.set_config("--config", "", "Flat key=value config file with [section] headers");
  app.require_subcommand(1);

  CommonOpts common;

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Parse a raw event log into sequences + folds");
  std::string log_path, floorplan_path, out_dir;
  int kfold = 5;
  ingest->add_option("--log", log_path, "Raw event log")->required();
  ingest->add_option("--floorplan", floorplan_path, "Floorplan spec")->required();
  ingest->add_option("--out", out_dir, "Output directory")->required();
  ingest->add_option("--k", kfold, "Stratified fold count")->check(CLI::Range(2, 100));
  add_common(ingest, common);
  ingest->callback([&] { cmd_ingest(log_path, floorplan_path, out_dir, kfold, common); });

  // train
  auto* train_cmd = app.add_subcommand("train", "Train the sequence model");
  TrainCliOpts topt;
  train_cmd->add_option("--sequences", topt.sequences, "Interchange sequence file")->required();
  train_cmd->add_option("--floorplan", topt.floorplan, "Floorplan spec")->required();
  train_cmd->add_option("--out", topt.out_dir, "Output directory")->required();
  train_cmd->add_option("--folds", topt.folds_file, "folds.csv from ingest");
  train_cmd->add_option("--test-fold", topt.test_fold, "Fold excluded from training");
  train_cmd->add_option("--d-model", topt.mcfg.d_model);
  train_cmd->add_option("--n-heads", topt.mcfg.n_heads);
  train_cmd->add_option("--n-layers", topt.mcfg.n_layers);
  train_cmd->add_option("--dropout", topt.mcfg.dropout);
  train_cmd->add_option("--base-lr", topt.tcfg.base_lr);
  train_cmd->add_option("--weight-decay", topt.tcfg.weight_decay);
  train_cmd->add_option("--batch-size", topt.tcfg.batch_size);
  train_cmd->add_option("--max-epochs", topt.tcfg.max_epochs);
  train_cmd->add_option("--patience", topt.tcfg.early_stop_patience);
  train_cmd->add_option("--val-fraction", topt.tcfg.val_fraction);
  add_common(train_cmd, common);
  train_cmd->callback([&] { cmd_train(topt, common); });

  // generate
  auto* gen = app.add_subcommand("generate", "Sample sequences from a checkpoint");
  GenerateCliOpts gopt;
  gen->add_option("--checkpoint", gopt.checkpoint)->required();
  gen->add_option("--floorplan", gopt.floorplan)->required();
  gen->add_option("--activity", gopt.activity)->required();
  gen->add_option("--count", gopt.count)->required()->check(CLI::NonNegativeNumber);
  gen->add_option("--out", gopt.out_dir)->required();
  gen->add_option("--exemplar", gopt.exemplar, "Interchange file; first line used as prefix");
  gen->add_option("--start-clock", gopt.start_clock, "Start timestamp");
  gen->add_option("--tau-base", gopt.cfg.tau_base);
  gen->add_option("--tau-min", gopt.cfg.tau_min);
  gen->add_option("--tau-max", gopt.cfg.tau_max);
  gen->add_option("--nucleus-p", gopt.cfg.nucleus_p);
  gen->add_option("--r-p", gopt.cfg.r_p);
  gen->add_option("--max-len", gopt.cfg.max_len);
  gen->add_flag("--beta-literal", gopt.cfg.beta_literal,
                "Use the literal denominator placement of the diversity factor");
  bool no_adjacency = false;
  gen->add_flag("--no-adjacency", no_adjacency, "Disable layout constraints (ablation)");
  add_common(gen, common);
  gen->callback([&] {
    gopt.cfg.enforce_adjacency = !no_adjacency;
    cmd_generate(gopt, common);
  });

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Statistical + semantic evaluation report");
  std::string real_path, synth_path;
  double bandwidth = 0.0;
  eval->add_option("--real", real_path)->required();
  eval->add_option("--synth", synth_path)->required();
  eval->add_option("--floorplan", floorplan_path)->required();
  eval->add_option("--out", out_dir)->required();
  eval->add_option("--bandwidth", bandwidth, "Gaussian kernel sigma; 0 = median heuristic");
  add_common(eval, common);
  eval->callback(
      [&] { cmd_evaluate(real_path, synth_path, floorplan_path, out_dir, bandwidth, common); });

  // refine
  auto* refine = app.add_subcommand("refine", "Detect violations and apply repair rules");
  bool use_llm = false;
  std::string prompt_path = "prompts/refinement_prompt.txt";
  refine->add_option("--synth", synth_path)->required();
  refine->add_option("--floorplan", floorplan_path)->required();
  refine->add_option("--real", real_path, "Training-fold sequences for profiles")->required();
  refine->add_option("--out", out_dir)->required();
  refine->add_flag("--llm", use_llm, "Use the external LLM endpoint instead of built-in rules");
  refine->add_option("--prompt", prompt_path, "Refinement prompt template");
  add_common(refine, common);
  refine->callback([&] {
    cmd_refine(synth_path, floorplan_path, real_path, out_dir, use_llm, prompt_path, common);
  });

  // classify
  auto* classify = app.add_subcommand("classify", "Train/test the downstream recognizer");
  std::string train_path, test_path, setting = "custom";
  classify->add_option("--train", train_path)->required();
  classify->add_option("--test", test_path)->required();
  classify->add_option("--floorplan", floorplan_path)->required();
  classify->add_option("--out", out_dir)->required();
  classify->add_option("--setting", setting, "Row label, e.g. TSTR/TRTR/TRTS/TSTS");
  add_common(classify, common);
  classify->callback(
      [&] { cmd_classify(train_path, test_path, floorplan_path, out_dir, setting, common); });

  // report
  auto* report = app.add_subcommand("report", "Consolidated summary of a run directory");
  std::string run_dir, report_out;
  report->add_option("--run", run_dir)->required();
  report->add_option("--out", report_out, "Write here instead of stdout");
  add_common(report, common);
  report->callback([&] { cmd_report(run_dir, report_out, common.format); });

  // sample-world
  auto* world = app.add_subcommand("sample-world", "Sample a fixture world corpus");
  std::string world_path;
  int count = 100;
  world->add_option("--world", world_path)->required();
  world->add_option("--out", out_dir)->required();
  world->add_option("--count", count, "Sequences per activity")->check(CLI::PositiveNumber);
  add_common(world, common);
  world->callback([&] { cmd_sample_world(world_path, out_dir, count, common); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace adlgen
