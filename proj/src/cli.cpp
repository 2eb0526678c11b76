#include "defproj/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "defproj/checkpoint.hpp"
#include "defproj/dictionary.hpp"
#include "defproj/encoder.hpp"
#include "defproj/entry_matrix.hpp"
#include "defproj/errors.hpp"
#include "defproj/geometry.hpp"
#include "defproj/sts.hpp"
#include "defproj/train.hpp"
#include "defproj/world.hpp"

namespace defproj::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---- small helpers ----

std::string resolve_out_dir(const std::string& given) {
  if (!given.empty()) return given;
  if (const char* env = std::getenv("DEFPROJ_OUT")) return env;
  throw usage_error("no output directory: pass --out or set DEFPROJ_OUT");
}

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw data_error("cannot create directory " + p.string());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write " + path.string());
  out << text;
  if (!out) throw data_error("failed writing " + path.string());
}

void write_json(const fs::path& path, const json& j) {
  write_text(path, j.dump(2) + "\n");
}

std::string config_hash(const json& resolved) {
  Fingerprint fp;
  fp.mix(resolved.dump());
  return fp.hex();
}

DictionaryDataset load_dataset(const std::string& path, DictFormat format,
                               ParseReport* report = nullptr) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open dataset " + path);
  DictionaryDataset d = parse_dictionary(
      in, format, fs::path(path).filename().string(), report);
  if (d.empty()) throw data_error("no records in " + path);
  return d;
}

DictFormat parse_format(const std::string& s) {
  if (s == "jsonl") return DictFormat::Jsonl;
  if (s == "wordnet-gloss-tsv") return DictFormat::WordnetGlossTsv;
  throw usage_error("unknown format " + s);
}

EntryPooling parse_entry_pooling(const std::string& s) {
  if (s == "ac") return EntryPooling::AC;
  if (s == "amp") return EntryPooling::AMP;
  throw usage_error("unknown entry pooling " + s);
}

EncodingCombination parse_combination(const std::string& s) {
  for (const EncodingCombination c : all_combinations()) {
    std::string key = c.sentence_pooling == Pooling::Cls ? "cls" : "mean";
    key += "-";
    key += c.entry_type == EntryPooling::AC ? "ac" : "amp";
    if (s == key) return c;
  }
  throw usage_error("unknown combination " + s +
                    " (want cls-amp|mean-amp|cls-ac|mean-ac)");
}

json stats_json(const DictionaryDataset& dataset, int skipped_empty) {
  const DatasetStats st = stats(dataset, [](const std::string& def) {
    return static_cast<int>(tokenize_words(def).size());
  });
  return {{"n_entries", st.n_entries},
          {"n_definitions", st.n_definitions},
          {"max_length_tokens", st.max_length_tokens},
          {"median_length_tokens", st.median_length_tokens},
          {"skipped_empty_definitions", skipped_empty}};
}

json geometry_json(const GeometryReport& g) {
  return {{"mean_pairwise_cosine", g.mean_pairwise_cosine},
          {"covariance_condition_number", g.covariance_condition_number},
          {"top2_variance_ratio", g.top2_variance_ratio},
          {"is_centered", g.is_centered}};
}

json eval_json(const EvalResult& r) {
  json sets = json::object();
  for (const auto& [name, rho] : r.per_set_rho_x100) sets[name] = rho;
  return {{"per_set_rho_x100", sets}, {"average", r.average}};
}

void write_projection_csv(const fs::path& path, const Eigen::MatrixXd& coords,
                          const std::string& hash) {
  std::ostringstream os;
  os.precision(17);
  os << "# config_hash=" << hash << "\n";
  os << "x,y\n";
  for (Eigen::Index i = 0; i < coords.rows(); ++i)
    os << coords(i, 0) << ',' << coords(i, 1) << '\n';
  write_text(path, os.str());
}

std::vector<StsSet> load_sts_sets(const std::vector<std::string>& specs) {
  std::vector<StsSet> sets;
  for (const std::string& spec : specs) {
    const std::size_t eq = spec.find('=');
    if (eq == std::string::npos)
      throw usage_error("STS set must be name=path, got " + spec);
    std::ifstream in(spec.substr(eq + 1));
    if (!in) throw data_error("cannot open STS file " + spec.substr(eq + 1));
    sets.emplace_back(spec.substr(0, eq), read_sts_tsv(in));
  }
  return sets;
}

PoolingStrategy pooling_strategy_for(const std::string& name, Vocab& vocab,
                                     Pooling training_pooling) {
  PoolingStrategy s;
  if (name == "train") {
    s.kind = training_pooling;
  } else if (name == "cls") {
    s.kind = Pooling::Cls;
  } else if (name == "mean") {
    s.kind = Pooling::Mean;
  } else if (name == "prompt") {
    return default_prompt_strategy(vocab);
  } else {
    throw usage_error("unknown pooling " + name);
  }
  return s;
}

// base encoder: load a checkpoint, or a fresh seeded init sized to the vocab
EncoderParams make_base_encoder(const std::string& checkpoint_path,
                                const EncoderConfig& cfg, const Vocab& vocab,
                                std::uint64_t model_seed, bool surgery) {
  EncoderParams base;
  if (!checkpoint_path.empty()) {
    base = load_encoder(checkpoint_path);
    if (base.config.vocab_size < vocab.size())
      throw data_error("checkpoint vocabulary is smaller than the dataset's");
  } else {
    EncoderConfig c = cfg;
    c.vocab_size = std::max(c.vocab_size, vocab.size());
    base = init_encoder(c, model_seed);
  }
  if (base.config.family == ModelFamily::RobertaLike && surgery)
    base = apply_roberta_pooler_surgery(std::move(base));
  return base;
}

// ---- subcommand implementations ----

struct IngestArgs {
  std::vector<std::string> inputs;
  std::string format = "jsonl";
  std::string output;
  std::string stats_out;
};

void cmd_ingest(const IngestArgs& a) {
  ParseReport report;
  std::vector<DictionaryDataset> parts;
  for (const std::string& in_path : a.inputs) {
    std::ifstream in(in_path);
    if (!in) throw data_error("cannot open " + in_path);
    parts.push_back(parse_dictionary(in, parse_format(a.format),
                                     fs::path(in_path).filename().string(),
                                     &report));
  }
  const DictionaryDataset merged = merge(parts);
  if (merged.empty()) throw data_error("no records");
  std::ofstream out(a.output);
  if (!out) throw data_error("cannot write " + a.output);
  serialize_dictionary(merged, out);

  json resolved = {{"command", "ingest"},
                   {"inputs", a.inputs},
                   {"format", a.format},
                   {"output", a.output}};
  json st = stats_json(merged, report.skipped_empty);
  st["sources"] = merged.source_tags();
  st["config_hash"] = config_hash(resolved);
  if (!a.stats_out.empty()) write_json(a.stats_out, st);
  std::cout << st.dump(2) << "\n";
}

struct StatsArgs {
  std::string input;
  std::string format = "jsonl";
  std::string report_out;
};

void cmd_stats(const StatsArgs& a) {
  ParseReport report;
  const DictionaryDataset d = load_dataset(a.input, parse_format(a.format),
                                           &report);
  json resolved = {{"command", "stats"}, {"input", a.input}};
  json st = stats_json(d, report.skipped_empty);
  st["config_hash"] = config_hash(resolved);
  if (!a.report_out.empty()) write_json(a.report_out, st);
  std::cout << st.dump(2) << "\n";
}

struct BuildEmbedsArgs {
  std::string dataset;
  std::string encoder;
  std::string entry_pooling = "amp";
  std::string output;
  std::uint64_t model_seed = 1;
  int vocab_min_freq = 1;
};

void cmd_build_embeds(const BuildEmbedsArgs& a) {
  const DictionaryDataset d = load_dataset(a.dataset, DictFormat::Jsonl);
  const Vocab vocab = build_vocab(d, a.vocab_min_freq);
  const EncoderParams base = make_base_encoder(a.encoder, EncoderConfig{},
                                               vocab, a.model_seed, true);
  BuildReport report;
  const EntryEmbeddingMatrix m = build_entry_matrix(
      base, d, vocab, parse_entry_pooling(a.entry_pooling), &report);
  save_entry_matrix(a.output, m);
  std::cout << json({{"entries", m.entry_count()},
                     {"dim", m.dim()},
                     {"builder_tag", m.builder_tag()},
                     {"source_encoder_fingerprint",
                      m.source_encoder_fingerprint()},
                     {"truncated_definitions", report.truncated_definitions}})
                   .dump(2)
            << "\n";
}

struct GeometryArgs {
  std::string matrix;
  std::string report_out;
};

void cmd_geometry(const GeometryArgs& a) {
  const EntryEmbeddingMatrix m = load_entry_matrix(a.matrix);
  json j = geometry_json(anisotropy_report(m.weights()));
  j["builder_tag"] = m.builder_tag();
  j["matrix_fingerprint"] = m.fingerprint();
  if (!a.report_out.empty()) write_json(a.report_out, j);
  std::cout << j.dump(2) << "\n";
}

struct ExportPlotArgs {
  std::string matrix;
  std::string mode = "svd_raw";
  std::string output;
};

void cmd_export_plot(const ExportPlotArgs& a) {
  const EntryEmbeddingMatrix m = load_entry_matrix(a.matrix);
  ProjectionMode mode;
  if (a.mode == "svd_raw")
    mode = ProjectionMode::SvdRaw;
  else if (a.mode == "pca_whitened")
    mode = ProjectionMode::PcaWhitened;
  else
    throw usage_error("unknown projection mode " + a.mode);
  json resolved = {{"command", "export-plot"},
                   {"matrix", a.matrix},
                   {"mode", a.mode}};
  write_projection_csv(a.output, top2_projection(m.weights(), mode),
                       config_hash(resolved));
}

struct GenWorldArgs {
  std::string out;
  std::uint64_t seed = 7;
  int entries = 256;
  int vocab = 2000;
  int pairs = 400;
  int defs_min = 2;
  int defs_max = 4;
  double tilt = 8.0;
  int stopwords = 40;
  double stopword_prob = 0.25;
};

void cmd_gen_world(const GenWorldArgs& a) {
  SyntheticWorldConfig cfg;
  cfg.seed = a.seed;
  cfg.n_entries = a.entries;
  cfg.vocab_size = a.vocab;
  cfg.n_sts_pairs = a.pairs;
  cfg.defs_min = a.defs_min;
  cfg.defs_max = a.defs_max;
  cfg.concept_tilt = a.tilt;
  cfg.n_stopwords = a.stopwords;
  cfg.stopword_prob = a.stopword_prob;
  const SyntheticWorld world = make_synthetic_world(cfg);

  const fs::path dir = resolve_out_dir(a.out);
  ensure_dir(dir);
  {
    std::ofstream out(dir / "train.jsonl");
    serialize_dictionary(world.dictionary, out);
  }
  {
    std::ofstream out(dir / "sts_dev.tsv");
    write_sts_tsv(world.dev_pairs, out);
  }
  {
    std::ofstream out(dir / "sts_test.tsv");
    write_sts_tsv(world.test_pairs, out);
  }
  json resolved = {{"command", "gen-world"},
                   {"seed", cfg.seed},
                   {"n_entries", cfg.n_entries},
                   {"vocab_size", cfg.vocab_size},
                   {"n_sts_pairs", cfg.n_sts_pairs},
                   {"defs_min", cfg.defs_min},
                   {"defs_max", cfg.defs_max},
                   {"concept_tilt", cfg.concept_tilt},
                   {"n_stopwords", cfg.n_stopwords},
                   {"stopword_prob", cfg.stopword_prob},
                   {"latent_dim", cfg.latent_dim}};
  resolved["config_hash"] = config_hash(resolved);
  resolved["n_definitions"] = world.dictionary.definition_count();
  resolved["dev_pairs"] = world.dev_pairs.size();
  resolved["test_pairs"] = world.test_pairs.size();
  write_json(dir / "world.json", resolved);
  std::cout << resolved.dump(2) << "\n";
}

struct TrainArgs {
  std::string dataset;
  std::string encoder;
  std::string combination = "cls-amp";
  double lr = 5e-3;
  int batch_size = 16;
  std::uint64_t seed = 1;
  std::uint64_t model_seed = 1;
  int vocab_min_freq = 1;
  std::string out;
};

void cmd_train(const TrainArgs& a) {
  const DictionaryDataset d = load_dataset(a.dataset, DictFormat::Jsonl);
  Vocab vocab = build_vocab(d, a.vocab_min_freq);
  const EncoderParams base = make_base_encoder(a.encoder, EncoderConfig{},
                                               vocab, a.model_seed, true);
  const EncodingCombination combo = parse_combination(a.combination);
  const EntryEmbeddingMatrix matrix =
      build_entry_matrix(base, d, vocab, combo.entry_type);

  TrainConfig cfg;
  cfg.learning_rate = a.lr;
  cfg.batch_size = a.batch_size;
  cfg.seed = a.seed;
  const TrainResult r = train_one_epoch(base, matrix, d, vocab, combo, cfg);

  const fs::path dir = resolve_out_dir(a.out);
  ensure_dir(dir);
  save_encoder((dir / "trained.dpak").string(), r.params);
  save_entry_matrix((dir / "entry_matrix.dpak").string(), matrix);

  json resolved = {{"command", "train"},      {"dataset", a.dataset},
                   {"combination", a.combination}, {"lr", a.lr},
                   {"batch_size", a.batch_size},   {"seed", a.seed},
                   {"model_seed", a.model_seed}};
  json record = {{"config_hash", config_hash(resolved)},
                 {"combination", to_string(combo)},
                 {"base_fingerprint", fingerprint_params(base)},
                 {"trained_fingerprint", fingerprint_params(r.params)},
                 {"matrix_fingerprint", matrix.fingerprint()},
                 {"n_batches", r.batch_losses.size()},
                 {"first_loss", r.batch_losses.front()},
                 {"last_loss", r.batch_losses.back()},
                 {"batch_losses", r.batch_losses}};
  write_json(dir / "record.json", record);
  std::cout << record.dump(2) << "\n";
}

struct EvalArgs {
  std::string encoder;
  std::string dataset;
  std::vector<std::string> sts;
  std::string pooling = "mean";
  int vocab_min_freq = 1;
  std::string report_out;
};

void cmd_eval(const EvalArgs& a) {
  const DictionaryDataset d = load_dataset(a.dataset, DictFormat::Jsonl);
  Vocab vocab = build_vocab(d, a.vocab_min_freq);
  const EncoderParams params = load_encoder(a.encoder);
  const PoolingStrategy pooling =
      pooling_strategy_for(a.pooling, vocab, Pooling::Mean);
  const std::vector<StsSet> sets = load_sts_sets(a.sts);
  const EvalResult r = sts_evaluate(params, vocab, pooling, sets);
  json resolved = {{"command", "eval"},
                   {"encoder", a.encoder},
                   {"pooling", a.pooling},
                   {"sts", a.sts}};
  json j = eval_json(r);
  j["config_hash"] = config_hash(resolved);
  j["encoder_fingerprint"] = fingerprint_params(params);
  if (!a.report_out.empty()) write_json(a.report_out, j);
  std::cout << j.dump(2) << "\n";
}

struct PstArgs {
  std::string dataset;
  std::vector<std::string> dev_sts;
  std::vector<std::string> test_sts;
  std::string encoder;  // optional checkpoint
  std::string family = "bert-like";
  int total_steps = 3;
  std::vector<double> learning_rates;
  std::string combination = "auto";
  bool research_at_step2 = false;
  bool no_branch_compare = false;
  std::vector<std::uint64_t> seeds;
  int batch_size = 16;
  std::uint64_t master_seed = 42;
  int vocab_min_freq = 1;
  int d_model = 64;
  int n_layers = 2;
  int n_heads = 4;
  int d_ff = 256;
  int max_position = 64;
  int vocab_size = 4096;
  std::string eval_pooling = "train";
  int jobs = 1;
  int ica_max_iterations = 1000;
  std::uint64_t ica_random_state = 42;
  double ica_rescale = 100.0;
  std::string out;
};

json resolved_pst_config(const PstArgs& a) {
  return {{"command", "pst"},
          {"dataset", a.dataset},
          {"dev_sts", a.dev_sts},
          {"test_sts", a.test_sts},
          {"encoder", a.encoder},
          {"family", a.family},
          {"total_steps", a.total_steps},
          {"learning_rates", a.learning_rates},
          {"combination", a.combination},
          {"research_at_step2", a.research_at_step2},
          {"compare_final_branches", !a.no_branch_compare},
          {"seeds", a.seeds},
          {"batch_size", a.batch_size},
          {"master_seed", a.master_seed},
          {"vocab_min_freq", a.vocab_min_freq},
          {"d_model", a.d_model},
          {"n_layers", a.n_layers},
          {"n_heads", a.n_heads},
          {"d_ff", a.d_ff},
          {"max_position", a.max_position},
          {"vocab_size", a.vocab_size},
          {"eval_pooling", a.eval_pooling},
          {"ica_max_iterations", a.ica_max_iterations},
          {"ica_random_state", a.ica_random_state},
          {"ica_rescale", a.ica_rescale},
          {"format_version", kContainerVersion}};
}

void cmd_pst(const PstArgs& a) {
  const DictionaryDataset dataset = load_dataset(a.dataset, DictFormat::Jsonl);
  Vocab vocab = build_vocab(dataset, a.vocab_min_freq);

  EncoderConfig cfg;
  cfg.d_model = a.d_model;
  cfg.n_layers = a.n_layers;
  cfg.n_heads = a.n_heads;
  cfg.d_ff = a.d_ff;
  cfg.max_position = a.max_position;
  cfg.vocab_size = a.vocab_size;
  if (a.family == "bert-like")
    cfg.family = ModelFamily::BertLike;
  else if (a.family == "roberta-like")
    cfg.family = ModelFamily::RobertaLike;
  else
    throw usage_error("unknown model family " + a.family);

  const EncoderParams base = make_base_encoder(
      a.encoder, cfg, vocab, derive_seed(a.master_seed, "base-model"), true);

  PSTPlan plan;
  plan.total_steps = a.total_steps;
  plan.learning_rates = a.learning_rates.empty()
                            ? std::vector<double>{5e-3, 4e-3, 3e-3}
                            : a.learning_rates;
  plan.learning_rates.resize(static_cast<std::size_t>(a.total_steps),
                             plan.learning_rates.empty()
                                 ? 5e-3
                                 : plan.learning_rates.back());
  if (a.combination != "auto")
    plan.combination = parse_combination(a.combination);
  plan.research_at_step2 = a.research_at_step2;
  plan.compare_final_branches = !a.no_branch_compare;
  if (!a.seeds.empty()) {
    plan.seeds = a.seeds;
  } else {
    plan.seeds.clear();
    for (std::uint64_t i = 0; i < 5; ++i)
      plan.seeds.push_back(derive_seed(a.master_seed, "train-seed", i));
  }
  plan.batch_size = a.batch_size;
  plan.from_checkpoint = !a.encoder.empty();
  plan.jobs = a.jobs;
  plan.ica.max_iterations = a.ica_max_iterations;
  plan.ica.random_state = a.ica_random_state;
  plan.ica.rescale_factor = a.ica_rescale;
  plan.validate();  // reject a bad plan before any compute

  const std::vector<StsSet> dev_sets = load_sts_sets(a.dev_sts);
  const std::vector<StsSet> test_sets = load_sts_sets(a.test_sts);
  if (dev_sets.empty() || test_sets.empty())
    throw usage_error("pst needs --dev-sts and --test-sts");

  PstEvaluators eval;
  eval.dev = [&](const EncoderParams& p, EncodingCombination c) {
    const PoolingStrategy s =
        pooling_strategy_for(a.eval_pooling, vocab, c.sentence_pooling);
    return sts_evaluate(p, vocab, s, dev_sets).average;
  };
  eval.test = [&](const EncoderParams& p, EncodingCombination c) {
    const PoolingStrategy s =
        pooling_strategy_for(a.eval_pooling, vocab, c.sentence_pooling);
    return sts_evaluate(p, vocab, s, test_sets);
  };

  const json resolved = resolved_pst_config(a);
  const std::string hash = config_hash(resolved);

  const fs::path dir = resolve_out_dir(a.out);
  ensure_dir(dir / "records");
  ensure_dir(dir / "checkpoints");
  ensure_dir(dir / "geometry");
  {
    json with_hash = resolved;
    with_hash["config_hash"] = hash;
    write_json(dir / "config_used.json", with_hash);
  }

  const PSTState state = pst_run(plan, base, dataset, vocab, eval);

  json summary;
  summary["config_hash"] = hash;
  summary["base_fingerprint"] = state.base_fingerprint;
  summary["steps"] = json::array();
  for (const StepRecord& step : state.steps) {
    json js;
    js["step"] = step.step_index + 1;
    js["learning_rate"] = step.learning_rate;
    js["combination"] = to_string(step.combination);
    js["trainable_init_fingerprint"] = step.trainable_init_fingerprint;
    js["matrix_source_fingerprint"] = step.matrix_source_fingerprint;
    if (step.grid) {
      json scores = json::object();
      for (const auto& [combo, score] : step.grid->scores)
        scores[to_string(combo)] = score;
      js["grid_search"] = {{"scores", scores},
                           {"best", to_string(step.grid->best)}};
    }
    js["branches"] = json::array();
    for (const BranchRecord& br : step.branches) {
      json jb;
      jb["branch"] = to_string(br.branch);
      jb["builder_tag"] = br.builder_tag;
      jb["matrix_fingerprint"] = br.matrix_fingerprint;
      jb["ica_converged"] = br.ica_converged;
      jb["geometry"] = geometry_json(br.geometry);
      jb["dev"] = {{"scores", br.dev_summary.scores},
                   {"mean", br.dev_summary.mean},
                   {"std", br.dev_summary.stddev},
                   {"best_seed", br.dev_summary.best_seed}};
      jb["mean_test_average"] = br.mean_test_average;
      jb["best_encoder_fingerprint"] = fingerprint_params(br.best_params);
      js["branches"].push_back(std::move(jb));

      const std::string stem = "step" + std::to_string(step.step_index + 1) +
                               "_" + to_string(br.branch);
      save_entry_matrix((dir / "geometry" / (stem + ".dpak")).string(),
                        br.matrix);
      write_projection_csv(dir / "geometry" / (stem + "_svd.csv"),
                           top2_projection(br.matrix.weights(),
                                           ProjectionMode::SvdRaw),
                           hash);
      write_projection_csv(dir / "geometry" / (stem + "_pca.csv"),
                           top2_projection(br.matrix.weights(),
                                           ProjectionMode::PcaWhitened),
                           hash);
      for (const SeedRunRecord& run : br.runs) {
        json jr;
        jr["config_hash"] = hash;
        jr["step"] = step.step_index + 1;
        jr["branch"] = to_string(br.branch);
        jr["seed"] = run.seed;
        jr["combination"] = to_string(step.combination);
        jr["learning_rate"] = step.learning_rate;
        jr["dev_score"] = run.dev_score;
        jr["test"] = eval_json(run.test_result);
        jr["trainable_init_fingerprint"] = step.trainable_init_fingerprint;
        jr["matrix_fingerprint"] = br.matrix_fingerprint;
        jr["matrix_source_fingerprint"] = step.matrix_source_fingerprint;
        const std::string name = stem + "_seed" + std::to_string(run.seed) +
                                 ".json";
        write_json(dir / "records" / name, jr);
      }
    }
    js["chosen_branch"] =
        to_string(step.branches[step.chosen_branch].branch);
    summary["steps"].push_back(std::move(js));

    save_encoder((dir / "checkpoints" /
                  ("step" + std::to_string(step.step_index + 1) +
                   "_best.dpak"))
                     .string(),
                 step.branches[step.chosen_branch].best_params);
  }
  summary["final"] = {{"test_average", state.final_test_average},
                      {"encoder_fingerprint",
                       fingerprint_params(state.final_params)},
                      {"chosen_branch",
                       to_string(state.steps.back()
                                     .branches[state.steps.back().chosen_branch]
                                     .branch)}};
  save_encoder((dir / "checkpoints" / "final_best.dpak").string(),
               state.final_params);
  write_json(dir / "summary.json", summary);
  std::cout << summary.dump(2) << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"definition-projection sentence encoder workbench"};
  app.require_subcommand(1);

  IngestArgs ingest;
  auto* cmd_ingest_p = app.add_subcommand(
      "ingest", "parse and merge dictionary files into one dataset");
  cmd_ingest_p->add_option("--input", ingest.inputs)->required();
  cmd_ingest_p->add_option("--format", ingest.format);
  cmd_ingest_p->add_option("--output", ingest.output)->required();
  cmd_ingest_p->add_option("--stats", ingest.stats_out);

  StatsArgs st;
  auto* cmd_stats_p =
      app.add_subcommand("stats", "token-length and count statistics");
  cmd_stats_p->add_option("--input", st.input)->required();
  cmd_stats_p->add_option("--format", st.format);
  cmd_stats_p->add_option("--report", st.report_out);

  BuildEmbedsArgs be;
  auto* cmd_be_p = app.add_subcommand(
      "build-embeds", "build the frozen entry-embedding matrix");
  cmd_be_p->add_option("--dataset", be.dataset)->required();
  cmd_be_p->add_option("--encoder", be.encoder);
  cmd_be_p->add_option("--entry-pooling", be.entry_pooling);
  cmd_be_p->add_option("--output", be.output)->required();
  cmd_be_p->add_option("--model-seed", be.model_seed);
  cmd_be_p->add_option("--vocab-min-freq", be.vocab_min_freq);

  GeometryArgs ge;
  auto* cmd_geo_p =
      app.add_subcommand("geometry", "anisotropy report for a matrix");
  cmd_geo_p->add_option("--matrix", ge.matrix)->required();
  cmd_geo_p->add_option("--report", ge.report_out);

  ExportPlotArgs ep;
  auto* cmd_plot_p = app.add_subcommand(
      "export-plot", "2-d projection of a matrix as CSV");
  cmd_plot_p->add_option("--matrix", ep.matrix)->required();
  cmd_plot_p->add_option("--mode", ep.mode);
  cmd_plot_p->add_option("--output", ep.output)->required();

  GenWorldArgs gw;
  auto* cmd_world_p = app.add_subcommand(
      "gen-world", "generate the synthetic dictionary and similarity sets");
  cmd_world_p->add_option("--out", gw.out);
  cmd_world_p->add_option("--seed", gw.seed);
  cmd_world_p->add_option("--entries", gw.entries);
  cmd_world_p->add_option("--vocab", gw.vocab);
  cmd_world_p->add_option("--pairs", gw.pairs);
  cmd_world_p->add_option("--defs-min", gw.defs_min);
  cmd_world_p->add_option("--defs-max", gw.defs_max);
  cmd_world_p->add_option("--tilt", gw.tilt);
  cmd_world_p->add_option("--stopwords", gw.stopwords);
  cmd_world_p->add_option("--stopword-prob", gw.stopword_prob);

  TrainArgs tr;
  auto* cmd_train_p =
      app.add_subcommand("train", "one training epoch for one combination");
  cmd_train_p->add_option("--dataset", tr.dataset)->required();
  cmd_train_p->add_option("--encoder", tr.encoder);
  cmd_train_p->add_option("--combination", tr.combination);
  cmd_train_p->add_option("--lr", tr.lr);
  cmd_train_p->add_option("--batch-size", tr.batch_size);
  cmd_train_p->add_option("--seed", tr.seed);
  cmd_train_p->add_option("--model-seed", tr.model_seed);
  cmd_train_p->add_option("--vocab-min-freq", tr.vocab_min_freq);
  cmd_train_p->add_option("--out", tr.out);

  EvalArgs ev;
  auto* cmd_eval_p =
      app.add_subcommand("eval", "similarity evaluation for a checkpoint");
  cmd_eval_p->add_option("--encoder", ev.encoder)->required();
  cmd_eval_p->add_option("--dataset", ev.dataset)->required();
  cmd_eval_p->add_option("--sts", ev.sts)->required();
  cmd_eval_p->add_option("--pooling", ev.pooling);
  cmd_eval_p->add_option("--vocab-min-freq", ev.vocab_min_freq);
  cmd_eval_p->add_option("--report", ev.report_out);

  PstArgs ps;
  auto* cmd_pst_p = app.add_subcommand(
      "pst", "progressive separate training, multi-seed, with records");
  cmd_pst_p->set_config("--config");
  cmd_pst_p->add_option("--dataset", ps.dataset);
  cmd_pst_p->add_option("--dev-sts", ps.dev_sts);
  cmd_pst_p->add_option("--test-sts", ps.test_sts);
  cmd_pst_p->add_option("--encoder", ps.encoder);
  cmd_pst_p->add_option("--family", ps.family);
  cmd_pst_p->add_option("--total-steps", ps.total_steps);
  cmd_pst_p->add_option("--learning-rates", ps.learning_rates);
  cmd_pst_p->add_option("--combination", ps.combination);
  cmd_pst_p->add_flag("--research-at-step2", ps.research_at_step2);
  cmd_pst_p->add_flag("--no-branch-compare", ps.no_branch_compare);
  cmd_pst_p->add_option("--seeds", ps.seeds);
  cmd_pst_p->add_option("--batch-size", ps.batch_size);
  cmd_pst_p->add_option("--master-seed", ps.master_seed);
  cmd_pst_p->add_option("--vocab-min-freq", ps.vocab_min_freq);
  cmd_pst_p->add_option("--d-model", ps.d_model);
  cmd_pst_p->add_option("--n-layers", ps.n_layers);
  cmd_pst_p->add_option("--n-heads", ps.n_heads);
  cmd_pst_p->add_option("--d-ff", ps.d_ff);
  cmd_pst_p->add_option("--max-position", ps.max_position);
  cmd_pst_p->add_option("--vocab-size", ps.vocab_size);
  cmd_pst_p->add_option("--eval-pooling", ps.eval_pooling);
  cmd_pst_p->add_option("--jobs", ps.jobs);
  cmd_pst_p->add_option("--ica-max-iterations", ps.ica_max_iterations);
  cmd_pst_p->add_option("--ica-random-state", ps.ica_random_state);
  cmd_pst_p->add_option("--ica-rescale", ps.ica_rescale);
  cmd_pst_p->add_option("--out", ps.out);

  std::vector<const char*> argv;
  argv.push_back("defproj");
  for (const std::string& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
    if (cmd_ingest_p->parsed()) cmd_ingest(ingest);
    else if (cmd_stats_p->parsed()) cmd_stats(st);
    else if (cmd_be_p->parsed()) cmd_build_embeds(be);
    else if (cmd_geo_p->parsed()) cmd_geometry(ge);
    else if (cmd_plot_p->parsed()) cmd_export_plot(ep);
    else if (cmd_world_p->parsed()) cmd_gen_world(gw);
    else if (cmd_train_p->parsed()) cmd_train(tr);
    else if (cmd_eval_p->parsed()) cmd_eval(ev);
    else if (cmd_pst_p->parsed()) cmd_pst(ps);
  } catch (const CLI::ParseError& e) {
    // CLI11 prints its own message via exit(); keep streams consistent
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const usage_error& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const numeric_error& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const data_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace defproj::cli
