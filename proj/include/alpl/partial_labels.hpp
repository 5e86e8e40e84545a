#pragma once

#include "alpl/rng.hpp"

#include <bitset>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace alpl {

inline constexpr std::size_t kMaxClasses = 1024;

/// Fixed-width class mask over a label space of k classes.
class LabelMask {
 public:
  LabelMask() = default;
  explicit LabelMask(std::size_t num_classes);

  static LabelMask from_indices(std::size_t num_classes, std::span<const std::size_t> classes);
  static LabelMask full(std::size_t num_classes);

  std::size_t num_classes() const { return k_; }
  bool contains(std::size_t c) const { return c < k_ && bits_.test(c); }
  void set(std::size_t c, bool value = true);
  std::size_t count() const { return bits_.count(); }
  bool empty() const { return bits_.none(); }
  bool is_full() const { return count() == k_; }

  LabelMask complement() const;
  std::vector<std::size_t> indices() const;

  /// Pipe-separated class indices, e.g. "2|5|7".
  std::string to_string() const;
  static LabelMask parse(const std::string& text, std::size_t num_classes);

  friend bool operator==(const LabelMask& a, const LabelMask& b) { return a.k_ == b.k_ && a.bits_ == b.bits_; }

 private:
  std::bitset<kMaxClasses> bits_;
  std::size_t k_ = 0;
};

/// Partial label S: a class mask that is neither empty nor the whole label space.
class CandidateSet {
 public:
  explicit CandidateSet(LabelMask mask);

  const LabelMask& mask() const { return mask_; }
  bool contains(std::size_t c) const { return mask_.contains(c); }
  std::size_t size() const { return mask_.count(); }
  std::size_t num_classes() const { return mask_.num_classes(); }

  friend bool operator==(const CandidateSet& a, const CandidateSet& b) { return a.mask_ == b.mask_; }

 private:
  LabelMask mask_;
};

/// Inverse partial label: the complement of a candidate set. Never contains the true label.
class InverseCandidateSet {
 public:
  explicit InverseCandidateSet(LabelMask mask);

  const LabelMask& mask() const { return mask_; }
  bool contains(std::size_t c) const { return mask_.contains(c); }
  std::size_t size() const { return mask_.count(); }
  std::size_t num_classes() const { return mask_.num_classes(); }

  friend bool operator==(const InverseCandidateSet& a, const InverseCandidateSet& b) { return a.mask_ == b.mask_; }

 private:
  LabelMask mask_;
};

InverseCandidateSet invert(const CandidateSet& set);
CandidateSet invert(const InverseCandidateSet& set);

/// Uniform draw from the 2^(k-1) - 1 candidate sets that contain true_label.
CandidateSet generate_uss(std::size_t true_label, std::size_t num_classes, Rng& rng);

/// Each false label joins independently with probability flip_prob; a draw equal to the
/// whole label space is rejected and redrawn.
CandidateSet generate_fps(std::size_t true_label, std::size_t num_classes, double flip_prob, Rng& rng);

enum class GenerationMode { kUss, kFps, kGiven };

std::string to_string(GenerationMode mode);
GenerationMode parse_generation_mode(const std::string& text);

struct OracleSpec {
  GenerationMode mode = GenerationMode::kFps;
  double flip_prob = 0.0;
  std::uint64_t rng_seed = 0;
};

/// Simulated annotator. Answers are cached per sample index, so re-querying a sample
/// returns the set it was first given.
class Oracle {
 public:
  /// stored_sets is required in GIVEN mode and must outlive the oracle.
  Oracle(OracleSpec spec, std::size_t num_classes, std::span<const std::size_t> true_labels,
         const std::vector<std::optional<CandidateSet>>* stored_sets = nullptr);

  std::vector<CandidateSet> annotate(std::span<const std::size_t> indices);
  CandidateSet annotate(std::size_t index);

  const OracleSpec& spec() const { return spec_; }
  std::size_t answered() const { return answers_.size(); }

 private:
  OracleSpec spec_;
  std::size_t k_;
  std::span<const std::size_t> labels_;
  const std::vector<std::optional<CandidateSet>>* stored_;
  Rng rng_;
  std::unordered_map<std::size_t, CandidateSet> answers_;
};

}  // namespace alpl
