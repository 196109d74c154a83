#pragma once

#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>

#include "clapeval/embedding.hpp"

namespace clapeval {

enum class ScoreFlag { kNonpositiveHarmonicInput };

std::string_view to_string(ScoreFlag flag);

class ClapMetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct HarmonicResult {
  double value = 0.0;
  bool nonpositive_input = false;
};

/// CLAPScore family for one separated clip. clapscore_i is present exactly
/// when clapscore_before is, and ref_clapscore exactly when clapscore_ref is.
struct ClapScores {
  double clapscore = 0.0;
  std::optional<double> clapscore_before;
  std::optional<double> clapscore_i;
  std::optional<double> clapscore_ref;
  std::optional<double> ref_clapscore;
  std::set<ScoreFlag> flags;
};

/// Cosine similarity between an audio and a text embedding.
double clapscore(const Embedding& audio_emb, const Embedding& text_emb);

/// clapscore(separated) - clapscore(mixture); range [-2, 2], unclamped.
double clapscore_i(const Embedding& separated_emb, const Embedding& mixture_emb, const Embedding& text_emb);

/// Harmonic mean 2ab/(a+b) of two positive scores. Non-positive inputs yield
/// 0 with the flag set rather than throwing.
HarmonicResult ref_clapscore(double clapscore_after, double clapscore_ref);

/// Assembles the family from whichever embeddings are available.
ClapScores score_all(const Embedding& separated_emb, const Embedding& text_emb,
                     const Embedding* mixture_emb = nullptr, const Embedding* reference_emb = nullptr);

}  // namespace clapeval
