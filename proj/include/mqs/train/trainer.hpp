#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mqs/chunk/focus.hpp"
#include "mqs/chunk/hard_negatives.hpp"
#include "mqs/chunk/lexicon.hpp"
#include "mqs/chunk/phrase_dict.hpp"
#include "mqs/common/error.hpp"
#include "mqs/common/rng.hpp"
#include "mqs/common/strings.hpp"
#include "mqs/contrast/losses.hpp"
#include "mqs/contrast/memory_queue.hpp"
#include "mqs/contrast/momentum.hpp"
#include "mqs/eval/focus_accuracy.hpp"
#include "mqs/eval/rouge.hpp"
#include "mqs/nn/checkpoint.hpp"
#include "mqs/nn/generate.hpp"
#include "mqs/nn/model.hpp"
#include "mqs/nn/ops.hpp"
#include "mqs/nn/tape.hpp"
#include "mqs/nn/transformer.hpp"
#include "mqs/text/corpus.hpp"
#include "mqs/text/tokenizer.hpp"
#include "mqs/text/vocab.hpp"
#include "mqs/train/adam.hpp"

namespace mqs::train {

enum class TrainMode { kCeOnly, kQfcl };

inline const char* mode_name(TrainMode m) {
  return m == TrainMode::kCeOnly ? "ce_only" : "qfcl";
}

inline TrainMode mode_from_name(const std::string& name) {
  if (name == "ce_only") return TrainMode::kCeOnly;
  if (name == "qfcl") return TrainMode::kQfcl;
  throw ConfigError("unknown training mode \"" + name + "\" (expected ce_only or qfcl)");
}

struct TrainConfig {
  TrainMode mode = TrainMode::kQfcl;
  double learning_rate = 0.0;  // 0 -> per-mode default
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 16;
  int epochs = 20;
  std::uint64_t seed = 0;
  double grad_clip_norm = 1.0;
  int eval_every = 1;  // dev evaluation cadence in epochs; the last epoch always runs
  contrast::ContrastiveConfig contrastive;

  double effective_learning_rate() const {
    if (learning_rate > 0.0) return learning_rate;
    return mode == TrainMode::kQfcl ? 1e-5 : 3e-5;
  }

  void validate() const {
    MQS_CHECK(learning_rate >= 0.0, ConfigError, "train: learning rate must be >= 0");
    MQS_CHECK(batch_size >= 1, ConfigError, "train: batch size must be >= 1");
    MQS_CHECK(epochs >= 1, ConfigError, "train: epochs must be >= 1");
    MQS_CHECK(eval_every >= 1, ConfigError, "train: eval cadence must be >= 1");
    contrastive.validate();
  }
};

// One TrainLog record: per-step batch means of every loss term.
struct TrainLogRow {
  std::uint64_t step = 0;
  int epoch = 0;
  double ce = 0.0;
  double ctrCS = 0.0;
  double ctrCH = 0.0;
  double ctrGS = 0.0;
  double ctrGH = 0.0;
  double total = 0.0;
};

inline constexpr const char* kTrainLogHeader = "step,epoch,ce,ctrCS,ctrCH,ctrGS,ctrGH,total";

struct DevMetricsRow {
  int epoch = 0;
  double rouge1_f = 0.0;
  double rouge2_f = 0.0;
  double rougeL_f = 0.0;
  double focus_accuracy = 0.0;
};

inline constexpr const char* kDevMetricsHeader =
    "epoch,rouge1_f,rouge2_f,rougeL_f,focus_accuracy";

inline std::string format_row(const TrainLogRow& r) {
  return std::to_string(r.step) + "," + std::to_string(r.epoch) + "," + format_double(r.ce) +
         "," + format_double(r.ctrCS) + "," + format_double(r.ctrCH) + "," +
         format_double(r.ctrGS) + "," + format_double(r.ctrGH) + "," + format_double(r.total);
}

inline std::string format_row(const DevMetricsRow& r) {
  return std::to_string(r.epoch) + "," + format_double(r.rouge1_f) + "," +
         format_double(r.rouge2_f) + "," + format_double(r.rougeL_f) + "," +
         format_double(r.focus_accuracy);
}

// Order-sensitive fingerprint of everything that must match for a resumed run
// to be bit-compatible with the original.
inline std::uint64_t train_fingerprint(const TrainConfig& t, const nn::ModelConfig& m) {
  std::string s;
  s += std::string(mode_name(t.mode)) + "|";
  s += format_double(t.effective_learning_rate()) + "|";
  s += format_double(t.beta1) + "|" + format_double(t.beta2) + "|";
  s += format_double(t.adam_eps) + "|";
  s += std::to_string(t.batch_size) + "|" + std::to_string(t.epochs) + "|";
  s += std::to_string(t.seed) + "|" + format_double(t.grad_clip_norm) + "|";
  s += std::to_string(t.eval_every) + "|";
  s += format_double(t.contrastive.tau) + "|";
  s += std::to_string(t.contrastive.queue_capacity) + "|";
  s += std::to_string(t.contrastive.n_h) + "|";
  s += format_double(t.contrastive.alpha) + "|" + format_double(t.contrastive.beta) + "|";
  s += format_double(t.contrastive.momentum) + "|";
  s += std::to_string(m.vocab_size) + "|" + std::to_string(m.d_model) + "|";
  s += std::to_string(m.n_heads) + "|" + std::to_string(m.n_enc_layers) + "|";
  s += std::to_string(m.n_dec_layers) + "|" + std::to_string(m.d_ff) + "|";
  s += std::to_string(m.max_len) + "|" + format_double(m.dropout_rate);
  return fnv1a(s);
}

struct TrainSummary {
  std::vector<TrainLogRow> log;
  std::vector<DevMetricsRow> dev;
  int best_epoch = -1;
  double best_rouge_l = -1.0;
  std::uint64_t steps = 0;
};

class Trainer {
 public:
  Trainer(TrainConfig tcfg, nn::ModelConfig mcfg, std::vector<text::QAPair> train_pairs,
          std::vector<text::QAPair> dev_pairs, text::Vocab vocab,
          chunk::PosLexicon lexicon = chunk::PosLexicon::builtin())
      : tcfg_(std::move(tcfg)),
        mcfg_(std::move(mcfg)),
        vocab_(std::move(vocab)),
        lexicon_(std::move(lexicon)) {
    tcfg_.validate();
    mcfg_.validate();
    MQS_CHECK(mcfg_.vocab_size == static_cast<int>(vocab_.size()), ConfigError,
              "train: model vocab_size does not match the vocabulary");
    MQS_CHECK(!train_pairs.empty(), UsageError, "train: training corpus is empty");
    if (qfcl()) {
      MQS_CHECK(tcfg_.contrastive.queue_capacity >= tcfg_.batch_size, ConfigError,
                "train: queue capacity must be >= batch size");
    }

    for (const auto& p : train_pairs) train_.push_back(prepare_pair(p));
    for (const auto& p : dev_pairs) dev_.push_back(prepare_pair(p));

    if (qfcl()) {
      std::vector<std::vector<std::string>> faqs;
      faqs.reserve(train_.size());
      for (const auto& pd : train_) faqs.push_back(pd.faq_words);
      dict_ = chunk::build_phrase_dictionary(faqs, lexicon_);
    }

    params_ = nn::init_params<double>(mcfg_, tcfg_.seed);
    if (qfcl()) {
      key_params_ = nn::encoder_subset(params_);
      queue_.emplace(tcfg_.contrastive.queue_capacity, mcfg_.d_model);
    }
    AdamConfig ac;
    ac.learning_rate = tcfg_.effective_learning_rate();
    ac.beta1 = tcfg_.beta1;
    ac.beta2 = tcfg_.beta2;
    ac.eps = tcfg_.adam_eps;
    ac.clip_norm = tcfg_.grad_clip_norm;
    adam_.emplace(ac, params_);
  }

  // Restores full training state from an epoch checkpoint; run() then
  // continues from the next epoch, bit-identical to an uninterrupted run.
  void resume_from(const std::string& checkpoint_path) {
    const auto c = nn::load_checkpoint<double>(checkpoint_path);
    MQS_CHECK(c.config == mcfg_, ConfigError, "resume: model configuration mismatch");
    MQS_CHECK(c.vocab_tokens == vocab_.tokens(), ConfigError, "resume: vocabulary mismatch");
    auto fp = c.meta.find("fingerprint");
    MQS_CHECK(fp != c.meta.end() &&
                  fp->second == std::to_string(train_fingerprint(tcfg_, mcfg_)),
              ConfigError, "resume: training configuration mismatch");
    auto ep = c.meta.find("epoch");
    MQS_CHECK(ep != c.meta.end(), ConfigError, "resume: checkpoint lacks an epoch marker");
    MQS_CHECK(c.has_optim, ConfigError, "resume: checkpoint lacks optimizer state");

    params_ = c.model;
    nn::validate_params(mcfg_, params_);
    adam_->restore(c.optim_step, c.optim_m, c.optim_v);
    if (qfcl()) {
      MQS_CHECK(!c.key.empty() && c.has_queue, ConfigError,
                "resume: checkpoint lacks key encoder or queue state");
      key_params_ = c.key;
      queue_ = contrast::MemoryQueue<double>::from_matrix(c.queue_capacity, c.queue);
      MQS_CHECK(queue_->capacity() == tcfg_.contrastive.queue_capacity, ConfigError,
                "resume: queue capacity mismatch");
    }
    start_epoch_ = std::stoi(ep->second);
    MQS_CHECK(start_epoch_ >= 0 && start_epoch_ <= tcfg_.epochs, ConfigError,
              "resume: checkpoint epoch outside the configured range");
    resumed_ = true;
  }

  TrainSummary run(const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    MQS_CHECK(!ec, IoError, "cannot create output directory: " + out_dir);

    std::ofstream log_file(fs::path(out_dir) / "train_log.csv", std::ios::binary);
    MQS_CHECK(log_file.good(), IoError, "cannot open train log for writing");
    log_file << kTrainLogHeader << "\n";
    std::ofstream dev_file(fs::path(out_dir) / "dev_metrics.csv", std::ios::binary);
    MQS_CHECK(dev_file.good(), IoError, "cannot open dev metrics for writing");
    dev_file << kDevMetricsHeader << "\n";

    TrainSummary summary;
    if (!resumed_) save_epoch_checkpoint(out_dir, 0);

    for (int epoch = start_epoch_ + 1; epoch <= tcfg_.epochs; ++epoch) {
      std::vector<std::size_t> order(train_.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      Rng shuffle_rng(derive_seed(tcfg_.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
      shuffle_rng.shuffle(order);

      std::size_t step_in_epoch = 0;
      for (std::size_t at = 0; at < order.size(); at += tcfg_.batch_size) {
        const std::size_t end = std::min(order.size(), at + tcfg_.batch_size);
        const std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(at),
                                             order.begin() + static_cast<std::ptrdiff_t>(end));
        TrainLogRow row = run_step(batch, epoch, step_in_epoch);
        log_file << format_row(row) << "\n";
        summary.log.push_back(row);
        ++step_in_epoch;
      }
      log_file.flush();

      save_epoch_checkpoint(out_dir, epoch);

      if (epoch % tcfg_.eval_every == 0 || epoch == tcfg_.epochs) {
        const DevMetricsRow dm = evaluate_dev(epoch);
        dev_file << format_row(dm) << "\n";
        dev_file.flush();
        summary.dev.push_back(dm);
        if (dm.rougeL_f > summary.best_rouge_l) {
          summary.best_rouge_l = dm.rougeL_f;
          summary.best_epoch = epoch;
          save_inference_checkpoint(
              (fs::path(out_dir) / "best.ckpt").string(), epoch);
        }
        std::cerr << "epoch " << epoch << ": rougeL_f=" << dm.rougeL_f
                  << " focus_acc=" << dm.focus_accuracy << "\n";
      }
    }

    save_inference_checkpoint((fs::path(out_dir) / "model.ckpt").string(), tcfg_.epochs);
    summary.steps = adam_->step_count();
    return summary;
  }

  const nn::ModelParams<double>& params() const { return params_; }
  const nn::ModelParams<double>& key_params() const { return key_params_; }
  std::size_t queue_size() const { return queue_ ? queue_->size() : 0; }
  const text::Vocab& vocab() const { return vocab_; }

 private:
  struct PairData {
    text::TokenSequence chq_seq;     // encoder input, EOS-terminated
    text::TokenSequence faq_seq;     // key-encoder input, EOS-terminated
    text::TokenSequence prefix_seq;  // BOS + summary ids (EOS dropped)
    std::vector<int> targets;        // summary ids including EOS
    std::vector<std::string> chq_words;
    std::vector<std::string> faq_words;
    std::vector<std::string> gold_phrases;  // for focus accuracy
    std::vector<chunk::Phrase> focuses;     // FAQ spans; empty means no hard negatives
  };

  bool qfcl() const { return tcfg_.mode == TrainMode::kQfcl; }

  PairData prepare_pair(const text::QAPair& p) const {
    PairData pd;
    pd.chq_words = text::normalize(p.chq);
    pd.faq_words = text::normalize(p.faq);
    pd.chq_seq = text::tokenize(p.chq, vocab_, static_cast<std::size_t>(mcfg_.max_len));
    // The summary keeps one slot free so BOS + ids still fits the window.
    pd.faq_seq = text::tokenize(p.faq, vocab_, static_cast<std::size_t>(mcfg_.max_len) - 1);
    std::vector<text::TokenId> prefix = {text::Vocab::kBos};
    for (std::size_t i = 0; i + 1 < pd.faq_seq.ids.size(); ++i) {
      prefix.push_back(pd.faq_seq.ids[i]);
    }
    pd.prefix_seq = text::make_sequence(std::move(prefix));
    pd.targets.assign(pd.faq_seq.ids.begin(), pd.faq_seq.ids.end());
    if (p.gold_focuses) {
      pd.gold_phrases = *p.gold_focuses;
    } else {
      for (const auto& f : chunk::identify_focus(pd.chq_words, pd.faq_words, lexicon_)) {
        pd.gold_phrases.push_back(f.text);
      }
    }
    pd.focuses = chunk::identify_focus(pd.chq_words, pd.faq_words, lexicon_);
    return pd;
  }

  TrainLogRow run_step(const std::vector<std::size_t>& batch, int epoch,
                       std::size_t step_in_epoch) {
    nn::Tape<double> t;
    const auto qm = nn::stage_model(t, mcfg_, params_, true);

    // Key-side forwards run with gradients disabled: representations come out
    // as plain values and the key encoder can never receive gradient.
    struct KeySide {
      nn::Mat<double> positive;    // 1 x d
      nn::Mat<double> hard_bank;   // n_h x d (0 x d when masked)
      bool hard_mask = false;
    };
    std::vector<KeySide> keys(batch.size());
    nn::Mat<double> queue_bank(0, mcfg_.d_model);
    if (qfcl()) {
      t.set_grad_enabled(false);
      const auto km = nn::stage_encoder(t, mcfg_, key_params_, false);
      queue_bank = queue_->as_matrix();  // negatives predate this step
      const std::uint64_t epoch_seed =
          derive_seed(tcfg_.seed, "epoch-negatives", static_cast<std::uint64_t>(epoch));
      for (std::size_t b = 0; b < batch.size(); ++b) {
        const PairData& pd = train_[batch[b]];
        keys[b].positive = t.value(nn::encode(t, km, pd.faq_seq).pooled);
        const auto negs = chunk::generate_hard_negatives(
            pd.faq_words, pd.focuses, dict_, tcfg_.contrastive.n_h, epoch_seed, batch[b]);
        if (negs && !negs->negatives.empty()) {
          keys[b].hard_mask = true;
          keys[b].hard_bank.resize(static_cast<Eigen::Index>(negs->negatives.size()),
                                   mcfg_.d_model);
          for (std::size_t k = 0; k < negs->negatives.size(); ++k) {
            const auto seq = text::tokenize(negs->negatives[k], vocab_,
                                            static_cast<std::size_t>(mcfg_.max_len) - 1);
            keys[b].hard_bank.row(static_cast<Eigen::Index>(k)) =
                t.value(nn::encode(t, km, seq).pooled);
          }
        } else {
          keys[b].hard_bank.resize(0, mcfg_.d_model);
        }
      }
      t.set_grad_enabled(true);
    }

    // Query-side forwards and the batch loss.
    std::optional<Rng> dropout_rng;
    nn::Forward fwd;
    if (mcfg_.dropout_rate > 0.0) {
      dropout_rng.emplace(derive_seed(tcfg_.seed, "dropout",
                                      static_cast<std::uint64_t>(epoch), step_in_epoch));
      fwd.train = true;
      fwd.rng = &*dropout_rng;
    }

    const double tau = tcfg_.contrastive.tau;
    const double alpha = tcfg_.contrastive.alpha;
    const double beta = tcfg_.contrastive.beta;
    TrainLogRow row;
    row.epoch = epoch;
    int batch_total = -1;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const PairData& pd = train_[batch[b]];
      const auto enc = nn::encode(t, qm, pd.chq_seq, fwd);
      const auto dec = nn::decode_teacher_forced(t, qm, enc.states, pd.prefix_seq, fwd);
      const int ce = nn::cross_entropy_mean(t, dec.logits, pd.targets);

      int pair_total = ce;
      double v_cs = 0.0, v_ch = 0.0, v_gs = 0.0, v_gh = 0.0;
      if (qfcl()) {
        const KeySide& ks = keys[b];
        const int cs = contrast::info_nce_node(t, enc.pooled, ks.positive, queue_bank, tau);
        const int gs = contrast::info_nce_node(t, dec.pooled, ks.positive, queue_bank, tau);
        v_cs = t.value(cs)(0, 0);
        v_gs = t.value(gs)(0, 0);
        int ctr_c = nn::scale(t, cs, alpha);
        int ctr_g = nn::scale(t, gs, alpha);
        if (ks.hard_mask) {
          const int ch = contrast::info_nce_node(t, enc.pooled, ks.positive, ks.hard_bank, tau);
          const int gh = contrast::info_nce_node(t, dec.pooled, ks.positive, ks.hard_bank, tau);
          v_ch = t.value(ch)(0, 0);
          v_gh = t.value(gh)(0, 0);
          ctr_c = nn::add(t, ctr_c, nn::scale(t, ch, beta));
          ctr_g = nn::add(t, ctr_g, nn::scale(t, gh, beta));
        }
        pair_total = nn::add(t, ce, nn::add(t, nn::scale(t, ctr_c, 0.5),
                                            nn::scale(t, ctr_g, 0.5)));
      }

      contrast::LossBundle bundle;
      try {
        bundle = contrast::compose_losses(t.value(ce)(0, 0), v_cs, v_ch, v_gs, v_gh,
                                          tcfg_.contrastive, keys[b].hard_mask);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " (epoch " + std::to_string(epoch) +
                           ", pair " + std::to_string(batch[b]) + ")");
      }
      const double pair_total_value = qfcl() ? bundle.total : bundle.ce;
      MQS_CHECK(std::isfinite(pair_total_value), NumericError,
                "train: non-finite loss at epoch " + std::to_string(epoch) + ", pair " +
                    std::to_string(batch[b]));
      row.ce += bundle.ce;
      row.ctrCS += bundle.ctrCS;
      row.ctrCH += bundle.ctrCH;
      row.ctrGS += bundle.ctrGS;
      row.ctrGH += bundle.ctrGH;
      row.total += pair_total_value;

      batch_total = batch_total < 0 ? pair_total : nn::add(t, batch_total, pair_total);
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    row.ce *= inv;
    row.ctrCS *= inv;
    row.ctrCH *= inv;
    row.ctrGS *= inv;
    row.ctrGH *= inv;
    row.total *= inv;

    t.backward(nn::scale(t, batch_total, inv));
    nn::ModelParams<double> grads;
    for (const auto& [path, node] : qm.nodes) grads.emplace(path, t.grad(node));
    adam_->step(params_, std::move(grads));

    if (qfcl()) {
      contrast::momentum_update(key_params_, params_, tcfg_.contrastive.momentum);
      std::vector<nn::Mat<double>> fresh;
      fresh.reserve(batch.size());
      for (const auto& ks : keys) fresh.push_back(ks.positive);
      contrast::step_queue(*queue_, fresh);
    }

    row.step = adam_->step_count();
    return row;
  }

  DevMetricsRow evaluate_dev(int epoch) const {
    DevMetricsRow dm;
    dm.epoch = epoch;
    if (dev_.empty()) return dm;
    std::vector<std::vector<std::string>> cands, refs, golds;
    cands.reserve(dev_.size());
    for (const auto& pd : dev_) {
      const auto ids = nn::generate_greedy(mcfg_, params_, pd.chq_seq);
      cands.push_back(text::detokenize(ids, vocab_));
      refs.push_back(pd.faq_words);
      golds.push_back(pd.gold_phrases);
    }
    const auto mean = eval::rouge_corpus(cands, refs);
    dm.rouge1_f = mean.r1.f;
    dm.rouge2_f = mean.r2.f;
    dm.rougeL_f = mean.rl.f;
    dm.focus_accuracy = eval::focus_accuracy(golds, cands);
    return dm;
  }

  nn::Checkpoint<double> base_checkpoint(int epoch) const {
    nn::Checkpoint<double> c;
    c.config = mcfg_;
    c.model = params_;
    c.vocab_tokens = vocab_.tokens();
    c.meta["mode"] = mode_name(tcfg_.mode);
    c.meta["epoch"] = std::to_string(epoch);
    c.meta["seed"] = std::to_string(tcfg_.seed);
    c.meta["fingerprint"] = std::to_string(train_fingerprint(tcfg_, mcfg_));
    return c;
  }

  void save_epoch_checkpoint(const std::string& out_dir, int epoch) const {
    auto c = base_checkpoint(epoch);
    if (qfcl()) {
      c.key = key_params_;
      c.has_queue = true;
      c.queue_capacity = queue_->capacity();
      c.queue = queue_->as_matrix();
    }
    c.has_optim = true;
    c.optim_step = adam_->step_count();
    c.optim_m = adam_->first_moments();
    c.optim_v = adam_->second_moments();
    const auto path =
        std::filesystem::path(out_dir) / ("epoch_" + std::to_string(epoch) + ".ckpt");
    nn::save_checkpoint(path.string(), c);
  }

  // Key encoder, queue, and optimizer state are deliberately left out: the
  // artifact answers queries and nothing else.
  void save_inference_checkpoint(const std::string& path, int epoch) const {
    nn::save_checkpoint(path, base_checkpoint(epoch));
  }

  TrainConfig tcfg_;
  nn::ModelConfig mcfg_;
  text::Vocab vocab_;
  chunk::PosLexicon lexicon_;
  std::vector<PairData> train_, dev_;
  chunk::PhraseDictionary dict_;

  nn::ModelParams<double> params_;
  nn::ModelParams<double> key_params_;
  std::optional<contrast::MemoryQueue<double>> queue_;
  std::optional<Adam<double>> adam_;
  int start_epoch_ = 0;
  bool resumed_ = false;
};

}  // namespace mqs::train
