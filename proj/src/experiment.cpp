#include "domaincraft/experiment.hpp"

#include <algorithm>
#include <sstream>

#include "domaincraft/error.hpp"
#include "domaincraft/mixing.hpp"

namespace domaincraft {

std::string describe(const TrainConfig& c) {
  std::ostringstream s;
  s.precision(17);
  s << "epochs=" << c.epochs << ";lr=" << c.learning_rate << ";batch=" << c.batch_size
    << ";seed=" << c.seed << ";dropout=" << (c.dropout ? std::to_string(*c.dropout) : "model")
    << ";attention_dropout="
    << (c.attention_dropout ? std::to_string(*c.attention_dropout) : "model")
    << ";betas=" << c.adam_beta1 << "," << c.adam_beta2 << ";eps=" << c.adam_epsilon
    << ";clip=" << c.clip_norm << ";warmup=" << c.warmup_steps;
  return s.str();
}

std::string describe(const ModelConfig& c) {
  std::ostringstream s;
  s.precision(17);
  s << "layers=" << c.layers << ";heads=" << c.heads << ";width=" << c.width
    << ";ff_width=" << c.ff_width << ";max_len=" << c.max_len << ";dropout=" << c.dropout
    << ";attention_dropout=" << c.attention_dropout << ";vocab=" << c.vocab_size;
  return s.str();
}

std::string describe(const NoiseConfig& c) {
  std::ostringstream s;
  s.precision(17);
  s << "mask_ratio=" << c.mask_ratio << ";mean_span=" << c.mean_span;
  return s.str();
}

ParallelCorpus dataset_corpus(const MixedDataset& data, const DomainId& label,
                              const LangPair& lang) {
  if (data.pairs.empty()) throw Error(ErrorKind::kSize, "empty dataset");
  std::vector<SentencePair> pairs;
  pairs.reserve(data.size());
  for (const auto& p : data.pairs) pairs.push_back(p.pair);
  return ParallelCorpus(label, lang, Split::kTrain, std::move(pairs));
}

RunResult RunOutcome::result(const Schedule& s) const {
  RunResult r;
  r.schedule_id = s.id;
  r.strategy = s.strategy;
  r.mode = s.mode;
  r.im_size = s.im_size;
  r.fi_size = s.fi_size;
  r.test_domain = s.test.domain;
  r.metric = evaluation.result.metric;
  r.score = evaluation.result.score;
  r.jsd_final_to_test = jsd_final_to_test;
  return r;
}

Runner::Runner(ExperimentContext context) : ctx_(std::move(context)), init_{} {
  ctx_.model.vocab_size = ctx_.subword.vocab_size();
  ctx_.model.validate();
  ctx_.train_cfg.validate();
  ctx_.noise.validate();
  init_ = ModelParams::initialize(ctx_.model, ctx_.init_seed);
}

const ParallelCorpus& Runner::test_corpus(const DomainId& domain) const {
  for (const auto& c : ctx_.test) {
    if (c.domain() == domain) return c;
  }
  throw Error(ErrorKind::kUnknownDomain, "no test corpus for domain " + domain.name());
}

std::vector<std::shared_ptr<const StageOutput>> Runner::train(
    const Schedule& schedule,
    const std::function<void(std::size_t, const StageOutput&, bool)>& on_stage) {
  schedule.validate();
  std::vector<std::shared_ptr<const StageOutput>> out;
  std::string key = "init=" + std::to_string(ctx_.init_seed) + "|" + describe(ctx_.model) + "|" +
                    describe(ctx_.noise);
  const ModelParams* current = &init_;
  for (std::size_t i = 0; i < schedule.stages.size(); ++i) {
    const Stage& stage = schedule.stages[i];
    const TrainConfig cfg = stage.train.value_or(ctx_.train_cfg);
    key += "||" + stage.data.str() + "@" + std::to_string(stage.data.seed) + "/" +
           std::string(to_string(stage.objective)) + "/" + describe(cfg);
    auto it = cache_.find(key);
    const bool cached = it != cache_.end();
    if (!cached) {
      const MixedDataset data = mix(ctx_.train, stage.data);
      const auto tokens = tokenize_pairs(ctx_.subword, data);
      auto result = train_stage(*current, tokens, stage.objective, cfg, ctx_.noise);
      auto output = std::make_shared<StageOutput>(
          StageOutput{std::move(result.params), std::move(result.log), key});
      it = cache_.emplace(key, std::move(output)).first;
    }
    if (on_stage) on_stage(i, *it->second, cached);
    out.push_back(it->second);
    current = &it->second->params;
  }
  return out;
}

RunOutcome Runner::run(const Schedule& schedule,
                       const std::function<void(std::size_t, const StageOutput&, bool)>& on_stage) {
  RunOutcome outcome;
  outcome.schedule_id = schedule.id;
  outcome.stages = train(schedule, on_stage);
  const ParallelCorpus& test = test_corpus(schedule.test.domain);
  outcome.evaluation =
      evaluate(outcome.params(), ctx_.subword, test, ctx_.tokenizer, schedule.id);
  const MixedDataset final_data = mix(ctx_.train, schedule.stages.back().data);
  outcome.jsd_final_to_test = corpus_jsd(dataset_corpus(final_data, DomainId("final-stage"), test.lang()),
                                         test, ctx_.side_policy, ctx_.stopwords);
  return outcome;
}

}  // namespace domaincraft
