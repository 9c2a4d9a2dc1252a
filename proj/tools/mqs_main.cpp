// mqs — train, probe, and run momentum-contrast summarizers for consumer
// health questions. Subcommands cover corpus synthesis, hard-negative
// generation, training, evaluation, and representation analysis.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <regex>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mqs/chunk/focus.hpp"
#include "mqs/chunk/hard_negatives.hpp"
#include "mqs/chunk/lexicon.hpp"
#include "mqs/chunk/phrase_dict.hpp"
#include "mqs/cli/config.hpp"
#include "mqs/cli/manifest.hpp"
#include "mqs/common/error.hpp"
#include "mqs/eval/focus_accuracy.hpp"
#include "mqs/eval/rouge.hpp"
#include "mqs/eval/similarity.hpp"
#include "mqs/nn/checkpoint.hpp"
#include "mqs/nn/generate.hpp"
#include "mqs/text/corpus.hpp"
#include "mqs/text/synth.hpp"
#include "mqs/train/trainer.hpp"

namespace {

using nlohmann::json;
using namespace mqs;

struct CommonArgs {
  std::string config_path;
  std::uint64_t seed = 0;
};

cli::AppConfig resolve_config(const CommonArgs& a) {
  cli::AppConfig cfg;
  if (!a.config_path.empty()) cfg = cli::load_config(a.config_path);
  cfg.train.seed = a.seed;
  return cfg;
}

cli::RunManifest base_manifest(const std::string& command, const CommonArgs& a,
                               const cli::AppConfig& cfg) {
  cli::RunManifest m;
  m.command = command;
  m.seed = a.seed;
  m.config_hash = cli::config_fingerprint(cfg);
  if (!a.config_path.empty()) m.inputs["config"] = a.config_path;
  return m;
}

int cmd_gen_corpus(const CommonArgs& a, const std::string& out_path, std::size_t count) {
  auto cfg = resolve_config(a);
  if (count > 0) cfg.synth.pair_count = count;

  auto manifest = base_manifest("gen-corpus", a, cfg);
  manifest.outputs["corpus"] = out_path;
  cli::write_manifest(out_path + ".manifest.json", manifest);

  const auto pairs = text::synth_corpus(cfg.synth, a.seed);
  text::save_pairs(pairs, out_path);
  std::cout << json{{"pairs", pairs.size()}, {"path", out_path}}.dump() << "\n";
  return 0;
}

int cmd_gen_negatives(const CommonArgs& a, const std::string& corpus_path,
                      const std::string& out_path, std::size_t n_h_override) {
  auto cfg = resolve_config(a);
  const std::size_t n_h = n_h_override > 0 ? n_h_override : cfg.train.contrastive.n_h;

  auto manifest = base_manifest("gen-negatives", a, cfg);
  manifest.inputs["corpus"] = corpus_path;
  manifest.outputs["negatives"] = out_path;
  manifest.extra["n_h"] = std::to_string(n_h);
  cli::write_manifest(out_path + ".manifest.json", manifest);

  const auto pairs = text::load_pairs(corpus_path);
  const auto lexicon = chunk::PosLexicon::builtin();
  std::vector<std::vector<std::string>> faq_words(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) faq_words[i] = text::normalize(pairs[i].faq);
  const auto dict = chunk::build_phrase_dictionary(faq_words, lexicon);

  std::ofstream out(out_path, std::ios::binary);
  MQS_CHECK(out.good(), IoError, "cannot open output file: " + out_path);
  std::size_t with_negatives = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto chq_words = text::normalize(pairs[i].chq);
    const auto focuses = chunk::identify_focus(chq_words, faq_words[i], lexicon);
    const auto negs = chunk::generate_hard_negatives(faq_words[i], focuses, dict, n_h,
                                                     a.seed, i);
    json row;
    row["pair_id"] = i;
    row["focuses"] = json::array();
    for (const auto& f : focuses) row["focuses"].push_back(f.text);
    row["negatives"] = negs ? json(negs->negatives) : json::array();
    if (negs && !negs->negatives.empty()) ++with_negatives;
    out << row.dump() << "\n";
  }
  MQS_CHECK(out.good(), IoError, "failed writing output file: " + out_path);
  std::cout << json{{"pairs", pairs.size()}, {"with_negatives", with_negatives}}.dump()
            << "\n";
  return 0;
}

int cmd_train(const CommonArgs& a, const std::string& mode_override,
              const std::string& corpus_path, const std::string& dev_path,
              const std::string& out_dir, const std::string& resume_path) {
  auto cfg = resolve_config(a);
  if (!mode_override.empty()) cfg.train.mode = train::mode_from_name(mode_override);

  const auto train_pairs = text::load_pairs(corpus_path);
  std::vector<text::QAPair> dev_pairs;
  if (!dev_path.empty()) dev_pairs = text::load_pairs(dev_path);

  const auto vocab = text::build_vocab(train_pairs, cfg.vocab_min_freq);
  cfg.model.vocab_size = static_cast<int>(vocab.size());

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  MQS_CHECK(!ec, IoError, "cannot create output directory: " + out_dir);
  auto manifest = base_manifest("train", a, cfg);
  manifest.inputs["corpus"] = corpus_path;
  if (!dev_path.empty()) manifest.inputs["dev"] = dev_path;
  if (!resume_path.empty()) manifest.inputs["resume"] = resume_path;
  manifest.outputs["run_dir"] = out_dir;
  manifest.extra["mode"] = train::mode_name(cfg.train.mode);
  manifest.extra["vocab_size"] = std::to_string(vocab.size());
  cli::write_manifest((std::filesystem::path(out_dir) / "manifest.json").string(), manifest);

  train::Trainer trainer(cfg.train, cfg.model, train_pairs, dev_pairs, vocab);
  if (!resume_path.empty()) trainer.resume_from(resume_path);
  const auto summary = trainer.run(out_dir);

  json report;
  report["mode"] = train::mode_name(cfg.train.mode);
  report["steps"] = summary.steps;
  report["best_epoch"] = summary.best_epoch;
  report["best_rougeL_f"] = summary.best_rouge_l;
  if (!summary.dev.empty()) {
    const auto& last = summary.dev.back();
    report["final"] = {{"epoch", last.epoch},
                       {"rouge1_f", last.rouge1_f},
                       {"rouge2_f", last.rouge2_f},
                       {"rougeL_f", last.rougeL_f},
                       {"focus_accuracy", last.focus_accuracy}};
  }
  std::cout << report.dump() << "\n";
  return 0;
}

int cmd_evaluate(const std::string& checkpoint_path, const std::string& corpus_path) {
  const auto ckpt = nn::load_checkpoint<double>(checkpoint_path);
  MQS_CHECK(!ckpt.vocab_tokens.empty(), ConfigError,
            "checkpoint carries no vocabulary and cannot serve text");
  const auto vocab = text::Vocab::from_tokens(ckpt.vocab_tokens);
  const auto pairs = text::load_pairs(corpus_path);
  MQS_CHECK(!pairs.empty(), UsageError, "evaluation corpus is empty");

  const auto lexicon = chunk::PosLexicon::builtin();
  std::vector<std::vector<std::string>> cands, refs, golds;
  for (const auto& p : pairs) {
    const auto source =
        text::tokenize(p.chq, vocab, static_cast<std::size_t>(ckpt.config.max_len));
    const auto ids = nn::generate_greedy(ckpt.config, ckpt.model, source);
    cands.push_back(text::detokenize(ids, vocab));
    refs.push_back(text::normalize(p.faq));
    if (p.gold_focuses) {
      golds.push_back(*p.gold_focuses);
    } else {
      std::vector<std::string> found;
      for (const auto& f :
           chunk::identify_focus(text::normalize(p.chq), refs.back(), lexicon)) {
        found.push_back(f.text);
      }
      golds.push_back(std::move(found));
    }
  }
  const auto mean = eval::rouge_corpus(cands, refs);
  json report;
  report["pairs"] = pairs.size();
  report["rouge1_f"] = mean.r1.f;
  report["rouge2_f"] = mean.r2.f;
  report["rougeL_f"] = mean.rl.f;
  report["focus_accuracy"] = eval::focus_accuracy(golds, cands);
  std::cout << report.dump() << "\n";
  return 0;
}

int cmd_analyze(const CommonArgs& a, const std::string& ckpt_dir,
                const std::string& dev_path, const std::string& out_path,
                std::size_t n_h_override) {
  auto cfg = resolve_config(a);
  const std::size_t n_h = n_h_override > 0 ? n_h_override : cfg.train.contrastive.n_h;

  MQS_CHECK(std::filesystem::is_directory(ckpt_dir), IoError,
            "not a directory: " + ckpt_dir);
  // Epoch checkpoints only; the inference artifacts carry duplicate weights.
  const std::regex name_re("epoch_([0-9]+)\\.ckpt");
  std::map<int, std::filesystem::path> found;
  for (const auto& entry : std::filesystem::directory_iterator(ckpt_dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, name_re)) found[std::stoi(m[1])] = entry.path();
  }
  MQS_CHECK(!found.empty(), UsageError,
            "no epoch_<N>.ckpt checkpoints under: " + ckpt_dir);

  auto manifest = base_manifest("analyze", a, cfg);
  manifest.inputs["checkpoints"] = ckpt_dir;
  manifest.inputs["dev"] = dev_path;
  manifest.outputs["similarity"] = out_path;
  manifest.extra["n_h"] = std::to_string(n_h);
  cli::write_manifest(out_path + ".manifest.json", manifest);

  const auto pairs = text::load_pairs(dev_path);
  const auto first = nn::load_checkpoint<double>(found.begin()->second.string());
  MQS_CHECK(!first.vocab_tokens.empty(), ConfigError,
            "checkpoint carries no vocabulary and cannot serve text");
  const auto vocab = text::Vocab::from_tokens(first.vocab_tokens);
  const auto inputs = eval::prepare_analysis_inputs(pairs, vocab, first.config, n_h, a.seed);

  std::ofstream out(out_path, std::ios::binary);
  MQS_CHECK(out.good(), IoError, "cannot open output file: " + out_path);
  out << eval::kSimilarityHeader << "\n";
  for (const auto& [epoch, path] : found) {
    const auto ckpt = nn::load_checkpoint<double>(path.string());
    MQS_CHECK(ckpt.config == first.config && ckpt.vocab_tokens == first.vocab_tokens,
              ConfigError, "checkpoints in " + ckpt_dir + " disagree on config or vocab");
    const auto row = eval::similarity_row(ckpt.config, ckpt.model, inputs, epoch);
    out << eval::format_row(row) << "\n";
  }
  MQS_CHECK(out.good(), IoError, "failed writing output file: " + out_path);
  std::cout << json{{"checkpoints", found.size()}, {"path", out_path}}.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"momentum-contrast summarization of consumer health questions"};
  app.require_subcommand(1);

  CommonArgs common;

  auto* gen_corpus = app.add_subcommand("gen-corpus", "synthesize a CHQ/FAQ corpus");
  std::string gc_out;
  std::size_t gc_count = 0;
  gen_corpus->add_option("--out", gc_out, "output JSONL path")->required();
  gen_corpus->add_option("--config", common.config_path, "config file");
  gen_corpus->add_option("--seed", common.seed, "random seed");
  gen_corpus->add_option("--count", gc_count, "override the configured pair count");

  auto* gen_neg = app.add_subcommand("gen-negatives", "emit focus-swapped hard negatives");
  std::string gn_corpus, gn_out;
  std::size_t gn_nh = 0;
  gen_neg->add_option("--corpus", gn_corpus, "corpus JSONL path")->required();
  gen_neg->add_option("--out", gn_out, "output JSONL path")->required();
  gen_neg->add_option("--config", common.config_path, "config file");
  gen_neg->add_option("--seed", common.seed, "random seed");
  gen_neg->add_option("--n-h", gn_nh, "negatives per pair");

  auto* train_cmd = app.add_subcommand("train", "train a summarizer");
  std::string tr_mode, tr_corpus, tr_dev, tr_out, tr_resume;
  train_cmd->add_option("--corpus", tr_corpus, "training corpus JSONL")->required();
  train_cmd->add_option("--out", tr_out, "run output directory")->required();
  train_cmd->add_option("--dev", tr_dev, "dev corpus JSONL");
  train_cmd->add_option("--mode", tr_mode, "ce_only or qfcl (overrides config)");
  train_cmd->add_option("--config", common.config_path, "config file");
  train_cmd->add_option("--seed", common.seed, "random seed");
  train_cmd->add_option("--resume", tr_resume, "epoch checkpoint to resume from");

  auto* eval_cmd = app.add_subcommand("evaluate", "score a checkpoint on a corpus");
  std::string ev_ckpt, ev_corpus;
  eval_cmd->add_option("--checkpoint", ev_ckpt, "checkpoint path")->required();
  eval_cmd->add_option("--corpus", ev_corpus, "corpus JSONL path")->required();

  auto* analyze_cmd =
      app.add_subcommand("analyze", "similarity margins across epoch checkpoints");
  std::string an_dir, an_dev, an_out;
  std::size_t an_nh = 0;
  analyze_cmd->add_option("--checkpoints", an_dir, "run directory with epoch_<N>.ckpt")
      ->required();
  analyze_cmd->add_option("--dev", an_dev, "dev corpus JSONL")->required();
  analyze_cmd->add_option("--out", an_out, "output CSV path")->required();
  analyze_cmd->add_option("--config", common.config_path, "config file");
  analyze_cmd->add_option("--seed", common.seed, "random seed");
  analyze_cmd->add_option("--n-h", an_nh, "negatives per pair");

  try {
    app.parse(argc, argv);
    if (gen_corpus->parsed()) return cmd_gen_corpus(common, gc_out, gc_count);
    if (gen_neg->parsed()) return cmd_gen_negatives(common, gn_corpus, gn_out, gn_nh);
    if (train_cmd->parsed())
      return cmd_train(common, tr_mode, tr_corpus, tr_dev, tr_out, tr_resume);
    if (eval_cmd->parsed()) return cmd_evaluate(ev_ckpt, ev_corpus);
    if (analyze_cmd->parsed()) return cmd_analyze(common, an_dir, an_dev, an_out, an_nh);
    return 2;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: usage: " << e.what() << "\n";
    return 2;
  } catch (const mqs::Error& e) {
    std::cerr << "error: " << mqs::category_name(e.category()) << ": " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
}
