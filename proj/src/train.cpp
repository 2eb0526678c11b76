#include "defproj/train.hpp"

#include <algorithm>
#include <cmath>

namespace defproj {

std::string to_string(EncodingCombination c) {
  std::string s = "(";
  s += c.sentence_pooling == Pooling::Cls ? "CLS" : "Mean";
  s += ", ";
  s += to_string(c.entry_type);
  s += ")";
  return s;
}

namespace {

bool matrix_matches_entry_type(const EntryEmbeddingMatrix& m,
                               EntryPooling type) {
  const std::string tag = to_string(type);
  return m.builder_tag() == tag || m.builder_tag() == "ICA(" + tag + ")";
}

}  // namespace

TrainResult train_one_epoch(const EncoderParams& base,
                            const EntryEmbeddingMatrix& entry_matrix,
                            const DictionaryDataset& dataset,
                            const Vocab& vocab,
                            EncodingCombination combination,
                            const TrainConfig& config) {
  config.validate();
  if (combination.sentence_pooling == Pooling::Prompt)
    throw data_error("training pools with CLS or Mean only");
  if (!matrix_matches_entry_type(entry_matrix, combination.entry_type))
    throw data_error("entry matrix was built as " + entry_matrix.builder_tag() +
                     " but the combination expects " +
                     std::string(to_string(combination.entry_type)));
  if (entry_matrix.entry_count() != static_cast<Eigen::Index>(dataset.size()))
    throw data_error("entry matrix rows do not match the dataset");
  if (entry_matrix.dim() != base.config.d_model)
    throw data_error("entry matrix dimension does not match the encoder");

  TrainResult result;
  result.params = base;  // every step trains a fresh copy of the base model
  EncoderParams& params = result.params;

  const std::vector<TrainingPair> pairs = pair_iterator(dataset, config.seed);
  const int n_pairs = static_cast<int>(pairs.size());
  const int batch = config.batch_size;
  const int n_steps = (n_pairs + batch - 1) / batch;

  // transposed float head, shared by every step as a tape constant
  Tensor weights = entry_matrix.to_float_tensor();
  const int n_entries = weights.shape[0], d = weights.shape[1];
  Tensor weights_t({d, n_entries});
  for (int i = 0; i < n_entries; ++i)
    for (int j = 0; j < d; ++j) weights_t.at(j, i) = weights.at(i, j);

  AdamW optimizer(config.optimizer);
  std::vector<std::pair<std::string, Tensor*>> param_ptrs;
  params.for_each([&](const std::string& name, Tensor& t) {
    param_ptrs.emplace_back(name, &t);
  });

  for (int step = 0; step < n_steps; ++step) {
    const int begin = step * batch;
    const int end = std::min(n_pairs, begin + batch);
    const int count = end - begin;

    Tape tape;
    EncoderVarsT<float> vars = lift(tape, params, true);
    const Tape::Var head = tape.constant(weights_t);

    Tape::Var total{};
    for (int i = begin; i < end; ++i) {
      const TrainingPair& pair = pairs[static_cast<std::size_t>(i)];
      const Entry& entry =
          dataset.entries()[static_cast<std::size_t>(pair.entry_id)];
      const std::string& definition =
          entry.definitions[static_cast<std::size_t>(pair.definition_index)];
      const std::vector<int> ids =
          encode_sentence(vocab, definition, params.config.max_position);
      const std::vector<int> mask(ids.size(), 1);
      Tape::Var hidden = encode(tape, vars, ids, mask);
      Tape::Var pooled =
          pool_on_tape(tape, hidden, mask, combination.sentence_pooling);
      Tape::Var projected = pooler_forward(tape, vars, pooled);
      Tape::Var loss = defsent_loss(tape, head, projected, pair.entry_id);
      total = total.valid() ? tape.add(total, loss) : loss;
    }
    const Tape::Var mean_loss =
        tape.scale(total, 1.0f / static_cast<float>(count));
    const double loss_value =
        static_cast<double>(tape.value(mean_loss).data[0]);
    if (!std::isfinite(loss_value))
      throw numeric_error("loss became non-finite at step " +
                          std::to_string(step));
    tape.backward(mean_loss);

    std::vector<ParamUpdate> updates;
    updates.reserve(param_ptrs.size());
    std::size_t k = 0;
    vars.for_each([&](const std::string& name, Tape::Var v) {
      updates.push_back(
          ParamUpdate{name, param_ptrs[k].second, &tape.grad(v)});
      ++k;
    });

    // linear decay to zero over the single epoch
    const float lr = static_cast<float>(
        config.learning_rate * static_cast<double>(n_steps - step) /
        static_cast<double>(n_steps));
    optimizer.step(updates, lr);
    result.batch_losses.push_back(loss_value);
  }
  return result;
}

GridSearchResult grid_search_combination(
    const EncoderParams& base, const DictionaryDataset& dataset,
    const Vocab& vocab, const EntryEmbeddingMatrix& ac_matrix,
    const EntryEmbeddingMatrix& amp_matrix,
    const CombinationEvaluator& dev_eval, const TrainConfig& config) {
  GridSearchResult result;
  double best_score = -1e300;
  bool first = true;
  for (const EncodingCombination combo : all_combinations()) {
    const EntryEmbeddingMatrix& matrix =
        combo.entry_type == EntryPooling::AC ? ac_matrix : amp_matrix;
    // identical seed for all four candidates
    const TrainResult trained =
        train_one_epoch(base, matrix, dataset, vocab, combo, config);
    const double score = dev_eval(trained.params, combo);
    result.scores.emplace_back(combo, score);
    if (first || score > best_score) {  // strict: ties keep the earlier combo
      best_score = score;
      result.best = combo;
      first = false;
    }
  }
  return result;
}

MultiSeedSummary summarize_scores(std::span<const double> scores,
                                  std::span<const std::uint64_t> seeds) {
  if (scores.empty() || scores.size() != seeds.size())
    throw data_error("summarize_scores needs matching non-empty inputs");
  MultiSeedSummary s;
  s.scores.assign(scores.begin(), scores.end());
  double sum = 0.0;
  for (double v : scores) sum += v;
  s.mean = sum / static_cast<double>(scores.size());
  double ss = 0.0;
  for (double v : scores) ss += (v - s.mean) * (v - s.mean);
  s.stddev = scores.size() > 1
                 ? std::sqrt(ss / static_cast<double>(scores.size() - 1))
                 : 0.0;
  s.best_index = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[s.best_index]) s.best_index = i;
  s.best_seed = seeds[s.best_index];
  return s;
}

void PSTPlan::validate() const {
  const int max_steps = from_checkpoint ? 2 : 3;
  if (total_steps < 1 || total_steps > max_steps)
    throw data_error("plan allows 1.." + std::to_string(max_steps) +
                     " steps, got " + std::to_string(total_steps));
  if (static_cast<int>(learning_rates.size()) != total_steps)
    throw data_error("plan needs one learning rate per step");
  for (std::size_t i = 0; i < learning_rates.size(); ++i) {
    if (learning_rates[i] <= 0)
      throw data_error("learning rates must be positive");
    if (i > 0 && learning_rates[i] > learning_rates[i - 1])
      throw data_error("learning rate may not increase across steps");
  }
  if (seeds.empty()) throw data_error("plan needs at least one seed");
  for (std::size_t i = 0; i < seeds.size(); ++i)
    for (std::size_t j = i + 1; j < seeds.size(); ++j)
      if (seeds[i] == seeds[j]) throw data_error("plan seeds must be distinct");
  if (batch_size < 1) throw data_error("batch size must be positive");
  if (jobs < 1) throw data_error("jobs must be positive");
}

PSTState pst_run(const PSTPlan& plan, const EncoderParams& base,
                 const DictionaryDataset& dataset, const Vocab& vocab,
                 const PstEvaluators& eval) {
  plan.validate();
  if (!eval.dev || !eval.test)
    throw data_error("pst_run needs dev and test evaluators");

  PSTState state;
  state.base_fingerprint = fingerprint_params(base);
  // `source` points into steps once training starts; no reallocation allowed
  state.steps.reserve(static_cast<std::size_t>(plan.total_steps));

  const EncoderParams* source = &base;  // encoder that builds the next matrix
  std::optional<EncodingCombination> combination = plan.combination;

  for (int step = 0; step < plan.total_steps; ++step) {
    StepRecord record;
    record.step_index = step;
    record.learning_rate =
        plan.learning_rates[static_cast<std::size_t>(step)];
    record.trainable_init_fingerprint = state.base_fingerprint;
    record.matrix_source_fingerprint = fingerprint_params(*source);

    TrainConfig cfg;
    cfg.learning_rate = record.learning_rate;
    cfg.batch_size = plan.batch_size;
    cfg.optimizer = plan.optimizer;

    const bool search = (step == 0 && !combination.has_value()) ||
                        (step == 1 && plan.research_at_step2);
    EntryEmbeddingMatrix ac, amp;
    if (search || (combination && combination->entry_type == EntryPooling::AC))
      ac = build_entry_matrix(*source, dataset, vocab, EntryPooling::AC);
    if (search || (combination && combination->entry_type == EntryPooling::AMP))
      amp = build_entry_matrix(*source, dataset, vocab, EntryPooling::AMP);
    if (search) {
      TrainConfig search_cfg = cfg;
      search_cfg.seed = plan.seeds.front();
      record.grid = grid_search_combination(base, dataset, vocab, ac, amp,
                                            eval.dev, search_cfg);
      combination = record.grid->best;
    }
    record.combination = *combination;
    const EntryEmbeddingMatrix& raw_matrix =
        combination->entry_type == EntryPooling::AC ? ac : amp;

    const bool final_step = step == plan.total_steps - 1;
    std::vector<SpaceBranch> branches = {SpaceBranch::QuasiIsotropic};
    if (final_step && plan.compare_final_branches)
      branches.push_back(SpaceBranch::IcaTransformed);

    for (const SpaceBranch branch : branches) {
      BranchRecord br;
      br.branch = branch;
      if (branch == SpaceBranch::IcaTransformed) {
        const IcaResult ica = ica_transform(raw_matrix.weights(), plan.ica);
        br.ica_converged = ica.converged;
        br.matrix = EntryEmbeddingMatrix(
            ica.transformed,
            "ICA(" + std::string(to_string(combination->entry_type)) + ")",
            raw_matrix.source_encoder_fingerprint());
      } else {
        br.matrix = raw_matrix;
      }
      const EntryEmbeddingMatrix& matrix = br.matrix;
      br.builder_tag = matrix.builder_tag();
      br.matrix_fingerprint = matrix.fingerprint();
      br.geometry = anisotropy_report(matrix.weights());

      std::vector<EncoderParams> trained(plan.seeds.size());
      std::vector<EvalResult> tests(plan.seeds.size());
      auto runner = [&](std::uint64_t seed) {
        // index lookup keeps results aligned when running threaded
        std::size_t idx = 0;
        for (; idx < plan.seeds.size(); ++idx)
          if (plan.seeds[idx] == seed) break;
        TrainConfig run_cfg = cfg;
        run_cfg.seed = seed;
        TrainResult r = train_one_epoch(base, matrix, dataset, vocab,
                                        *combination, run_cfg);
        const double dev = eval.dev(r.params, *combination);
        tests[idx] = eval.test(r.params, *combination);
        trained[idx] = std::move(r.params);
        return dev;
      };
      br.dev_summary = multi_seed(runner, plan.seeds, plan.jobs);

      double test_sum = 0.0;
      for (std::size_t i = 0; i < plan.seeds.size(); ++i) {
        SeedRunRecord run;
        run.seed = plan.seeds[i];
        run.dev_score = br.dev_summary.scores[i];
        run.test_result = tests[i];
        test_sum += tests[i].average;
        br.runs.push_back(std::move(run));
      }
      br.mean_test_average =
          test_sum / static_cast<double>(plan.seeds.size());
      br.best_params = std::move(trained[br.dev_summary.best_index]);
      record.branches.push_back(std::move(br));
    }

    record.chosen_branch = 0;
    for (std::size_t b = 1; b < record.branches.size(); ++b)
      if (record.branches[b].mean_test_average >
          record.branches[record.chosen_branch].mean_test_average)
        record.chosen_branch = b;

    state.steps.push_back(std::move(record));
    source = &state.steps.back()
                  .branches[state.steps.back().chosen_branch]
                  .best_params;
  }

  const BranchRecord& final_branch =
      state.steps.back().branches[state.steps.back().chosen_branch];
  state.final_params = final_branch.best_params;
  state.final_test_average = final_branch.mean_test_average;
  return state;
}

}  // namespace defproj
