#include "clapeval/clap_metrics.hpp"

#include <cmath>

namespace clapeval {

std::string_view to_string(ScoreFlag flag) {
  switch (flag) {
    case ScoreFlag::kNonpositiveHarmonicInput:
      return "nonpositive_harmonic_input";
  }
  return "unknown";
}

double clapscore(const Embedding& audio_emb, const Embedding& text_emb) {
  if (audio_emb.modality != Modality::kAudio) {
    throw EmbeddingError(EmbeddingErrc::kModalityMismatch, "clapscore expects an audio embedding first");
  }
  if (text_emb.modality != Modality::kText) {
    throw EmbeddingError(EmbeddingErrc::kModalityMismatch, "clapscore expects a text embedding second");
  }
  return cosine_similarity(audio_emb, text_emb);
}

double clapscore_i(const Embedding& separated_emb, const Embedding& mixture_emb, const Embedding& text_emb) {
  return clapscore(separated_emb, text_emb) - clapscore(mixture_emb, text_emb);
}

HarmonicResult ref_clapscore(double clapscore_after, double clapscore_ref) {
  if (!std::isfinite(clapscore_after) || !std::isfinite(clapscore_ref) || std::abs(clapscore_after) > 1.0 ||
      std::abs(clapscore_ref) > 1.0) {
    throw ClapMetricError("ref_clapscore inputs must lie in [-1, 1]");
  }
  if (clapscore_after <= 0.0 || clapscore_ref <= 0.0) return {0.0, true};
  return {2.0 * clapscore_after * clapscore_ref / (clapscore_after + clapscore_ref), false};
}

ClapScores score_all(const Embedding& separated_emb, const Embedding& text_emb, const Embedding* mixture_emb,
                     const Embedding* reference_emb) {
  ClapScores out;
  out.clapscore = clapscore(separated_emb, text_emb);
  if (mixture_emb != nullptr) {
    out.clapscore_before = clapscore(*mixture_emb, text_emb);
    out.clapscore_i = out.clapscore - *out.clapscore_before;
  }
  if (reference_emb != nullptr) {
    out.clapscore_ref = clapscore(*reference_emb, text_emb);
    auto h = ref_clapscore(out.clapscore, *out.clapscore_ref);
    out.ref_clapscore = h.value;
    if (h.nonpositive_input) out.flags.insert(ScoreFlag::kNonpositiveHarmonicInput);
  }
  return out;
}

}  // namespace clapeval
