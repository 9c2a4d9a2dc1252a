#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mqs/common/error.hpp"
#include "mqs/common/rng.hpp"
#include "mqs/common/strings.hpp"
#include "mqs/text/corpus.hpp"

namespace mqs::text {

// Configuration for the synthetic CHQ/FAQ generator. Each template couples a
// noisy consumer question with its reference summary, separated by "=>".
// "{focus}" is replaced by the pair's planted focus phrase on both sides;
// "{distractors}" on the CHQ side receives sampled distractor clauses, and
// "{decoy}" inside a distractor clause receives a different focus phrase.
struct SynthConfig {
  std::size_t pair_count = 2000;
  std::vector<std::string> focus_phrases;
  std::vector<std::string> templates;
  std::vector<std::string> distractors;
  std::size_t distractors_min = 1;
  std::size_t distractors_max = 3;
  std::size_t max_len = 48;

  static SynthConfig defaults();
  void validate() const;
};

inline SynthConfig SynthConfig::defaults() {
  SynthConfig c;
  c.focus_phrases = {
      "knee pain", "back pain", "chest pain", "joint pain", "shoulder pain",
      "stomach pain", "breast cancer", "skin cancer", "lung cancer",
      "colon cancer", "ear infection", "sinus infection", "kidney infection",
      "bladder infection", "hair loss", "weight loss", "memory loss",
      "heat rash", "skin rash", "milk allergy", "dust allergy", "mold allergy",
      "pet allergy", "hay fever", "scarlet fever", "dengue fever",
      "leg cramps", "muscle cramps", "stomach cramps", "gender dysphoria",
      "sleep apnea", "panic attacks", "heart disease", "gum disease",
      "lyme disease", "strep throat", "acid reflux", "iron deficiency",
      "tension headaches", "dry eyes",
  };
  c.templates = {
      "subject : {focus} message : i have {focus} for two weeks now {distractors} please advise"
      " => what are the treatments for {focus} ?",
      "hello doctor my mother suffers from {focus} {distractors} what can we do for her"
      " => how can i treat {focus} ?",
      "subject : help needed message : our son has {focus} since last month {distractors} we are very worried"
      " => where can i find information on {focus} ?",
      "hi i am 45 years old and i got {focus} again {distractors} is this serious"
      " => what are the symptoms of {focus} ?",
      "message : my wife keeps complaining about {focus} {distractors} nothing works so far"
      " => is there a cure for {focus} ?",
      "subject : question about {focus} message : the doctor said it could be {focus} {distractors} thank you"
      " => what causes {focus} ?",
      "good morning i think i might have {focus} {distractors} should i see a specialist"
      " => how do i manage {focus} at home ?",
      "my father was told he has {focus} at the clinic {distractors} we do not know much about it"
      " => can {focus} be prevented ?",
  };
  c.distractors = {
      "my neighbor had {decoy} last year and it was awful",
      "a friend of mine keeps talking about {decoy} all the time",
      "we also worry it might be {decoy} like my uncle had",
      "someone online said it sounded like {decoy}",
      "years ago i was checked for {decoy} but it was negative",
      "there is no clinic in our area",
      "we live far from the city",
      "she is not sleeping well these days",
      "money is tight and we lost our insurance",
      "i read many posts on the internet but nothing is clear",
      "the local pharmacy could not tell us anything",
      "he stopped going to work because of this",
  };
  return c;
}

inline void SynthConfig::validate() const {
  MQS_CHECK(pair_count >= 1, ConfigError, "synth: pair_count must be >= 1");
  MQS_CHECK(!focus_phrases.empty(), ConfigError, "synth: focus_phrases must be non-empty");
  MQS_CHECK(!templates.empty(), ConfigError, "synth: templates must be non-empty");
  MQS_CHECK(distractors_min <= distractors_max, ConfigError,
            "synth: distractors_min must be <= distractors_max");
  MQS_CHECK(max_len >= 4, ConfigError, "synth: max_len must be >= 4");
  for (const auto& f : focus_phrases) {
    MQS_CHECK(split_ws(f).size() >= 2, ConfigError,
              "synth: focus phrase must be multi-token: \"" + f + "\"");
  }
  for (const auto& t : templates) {
    auto pos = t.find("=>");
    MQS_CHECK(pos != std::string::npos, ConfigError,
              "synth: template must contain \"=>\": \"" + t + "\"");
    std::string chq = t.substr(0, pos), faq = t.substr(pos + 2);
    MQS_CHECK(chq.find("{focus}") != std::string::npos, ConfigError,
              "synth: CHQ template side must contain {focus}");
    MQS_CHECK(faq.find("{focus}") != std::string::npos, ConfigError,
              "synth: FAQ template side must contain {focus}");
  }
}

namespace detail {
inline std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}
}  // namespace detail

// Generates pair_count CHQ/FAQ pairs. Every pair plants one focus phrase
// verbatim in both sides and records it in gold_focuses; distractor clauses
// appear only in the CHQ. Deterministic for a fixed (config, seed).
inline std::vector<QAPair> synth_corpus(const SynthConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(derive_seed(seed, "synth-corpus"));
  std::vector<QAPair> pairs;
  pairs.reserve(cfg.pair_count);
  for (std::size_t n = 0; n < cfg.pair_count; ++n) {
    const std::string& focus = cfg.focus_phrases[rng.bounded(cfg.focus_phrases.size())];
    const std::string& tpl = cfg.templates[rng.bounded(cfg.templates.size())];
    auto arrow = tpl.find("=>");
    std::string chq_tpl = trim(tpl.substr(0, arrow));
    std::string faq_tpl = trim(tpl.substr(arrow + 2));

    std::string clauses;
    if (!cfg.distractors.empty() && cfg.distractors_max > 0) {
      std::size_t span = cfg.distractors_max - cfg.distractors_min + 1;
      std::size_t k = cfg.distractors_min + rng.bounded(span);
      k = std::min(k, cfg.distractors.size());
      // Partial Fisher-Yates draw of k distinct clause indices.
      std::vector<std::size_t> idx(cfg.distractors.size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      for (std::size_t j = 0; j < k; ++j) {
        std::swap(idx[j], idx[j + rng.bounded(idx.size() - j)]);
      }
      std::vector<std::string> picked;
      for (std::size_t j = 0; j < k; ++j) {
        std::string clause = cfg.distractors[idx[j]];
        while (clause.find("{decoy}") != std::string::npos) {
          std::string decoy = focus;
          if (cfg.focus_phrases.size() >= 2) {
            // Skip the planted focus so decoys are always distinct from it.
            std::size_t focus_idx = 0;
            for (std::size_t i = 0; i < cfg.focus_phrases.size(); ++i) {
              if (cfg.focus_phrases[i] == focus) {
                focus_idx = i;
                break;
              }
            }
            std::size_t d = rng.bounded(cfg.focus_phrases.size() - 1);
            if (d >= focus_idx) ++d;
            decoy = cfg.focus_phrases[d];
          }
          auto pos = clause.find("{decoy}");
          clause.replace(pos, 7, decoy);
        }
        picked.push_back(std::move(clause));
      }
      clauses = join(picked);
    }

    QAPair p;
    p.chq = detail::replace_all(detail::replace_all(chq_tpl, "{focus}", focus),
                                "{distractors}", clauses);
    p.faq = detail::replace_all(faq_tpl, "{focus}", focus);
    // Collapse doubled spaces left by an empty distractor slot.
    p.chq = join(split_ws(p.chq));
    p.faq = join(split_ws(p.faq));
    p.gold_focuses = std::vector<std::string>{focus};
    pairs.push_back(std::move(p));
  }
  return pairs;
}

}  // namespace mqs::text
