#include "alpl/partial_labels.hpp"

#include "alpl/error.hpp"

#include <charconv>

namespace alpl {

namespace {

void check_label_space(std::size_t true_label, std::size_t num_classes) {
  if (num_classes < 2 || num_classes > kMaxClasses) {
    throw ConfigError("class count must be in [2, " + std::to_string(kMaxClasses) + "], got " +
                      std::to_string(num_classes));
  }
  if (true_label >= num_classes) {
    throw ConfigError("true label " + std::to_string(true_label) + " outside " + std::to_string(num_classes) +
                      " classes");
  }
}

}  // namespace

LabelMask::LabelMask(std::size_t num_classes) : k_(num_classes) {
  if (num_classes > kMaxClasses) throw ConfigError("at most 1024 classes are supported");
}

LabelMask LabelMask::from_indices(std::size_t num_classes, std::span<const std::size_t> classes) {
  LabelMask m(num_classes);
  for (auto c : classes) m.set(c);
  return m;
}

LabelMask LabelMask::full(std::size_t num_classes) {
  LabelMask m(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) m.bits_.set(c);
  return m;
}

void LabelMask::set(std::size_t c, bool value) {
  if (c >= k_) throw DataError("class " + std::to_string(c) + " outside " + std::to_string(k_) + " classes");
  bits_.set(c, value);
}

LabelMask LabelMask::complement() const {
  LabelMask out = *this;
  for (std::size_t c = 0; c < k_; ++c) out.bits_.flip(c);
  return out;
}

std::vector<std::size_t> LabelMask::indices() const {
  std::vector<std::size_t> out;
  out.reserve(count());
  for (std::size_t c = 0; c < k_; ++c) {
    if (bits_.test(c)) out.push_back(c);
  }
  return out;
}

std::string LabelMask::to_string() const {
  std::string out;
  for (auto c : indices()) {
    if (!out.empty()) out += '|';
    out += std::to_string(c);
  }
  return out;
}

LabelMask LabelMask::parse(const std::string& text, std::size_t num_classes) {
  LabelMask m(num_classes);
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('|', pos);
    if (end == std::string::npos) end = text.size();
    std::size_t value = 0;
    const char* first = text.data() + pos;
    const char* last = text.data() + end;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) throw FormatError("bad class list '" + text + "'");
    m.set(value);
    pos = end + 1;
  }
  return m;
}

CandidateSet::CandidateSet(LabelMask mask) : mask_(mask) {
  if (mask_.empty()) throw DataError("candidate set is empty");
  if (mask_.is_full()) throw DataError("candidate set covers the whole label space");
}

InverseCandidateSet::InverseCandidateSet(LabelMask mask) : mask_(mask) {
  if (mask_.empty()) throw DataError("inverse candidate set is empty");
}

InverseCandidateSet invert(const CandidateSet& set) { return InverseCandidateSet(set.mask().complement()); }

CandidateSet invert(const InverseCandidateSet& set) { return CandidateSet(set.mask().complement()); }

CandidateSet generate_uss(std::size_t true_label, std::size_t num_classes, Rng& rng) {
  check_label_space(true_label, num_classes);
  // Fair coins over the false labels give every superset of {y} equal mass;
  // rejecting the full set leaves the uniform law over the admissible ones.
  for (;;) {
    LabelMask m(num_classes);
    m.set(true_label);
    for (std::size_t c = 0; c < num_classes; ++c) {
      if (c != true_label && (rng.next() >> 63) != 0) m.set(c);
    }
    if (!m.is_full()) return CandidateSet(m);
  }
}

CandidateSet generate_fps(std::size_t true_label, std::size_t num_classes, double flip_prob, Rng& rng) {
  check_label_space(true_label, num_classes);
  if (!(flip_prob >= 0.0 && flip_prob < 1.0)) {
    throw ConfigError("flip probability must lie in [0, 1), got " + std::to_string(flip_prob));
  }
  for (;;) {
    LabelMask m(num_classes);
    m.set(true_label);
    for (std::size_t c = 0; c < num_classes; ++c) {
      if (c != true_label && rng.bernoulli(flip_prob)) m.set(c);
    }
    if (!m.is_full()) return CandidateSet(m);
  }
}

std::string to_string(GenerationMode mode) {
  switch (mode) {
    case GenerationMode::kUss: return "uss";
    case GenerationMode::kFps: return "fps";
    case GenerationMode::kGiven: return "given";
  }
  return "?";
}

GenerationMode parse_generation_mode(const std::string& text) {
  if (text == "uss" || text == "USS") return GenerationMode::kUss;
  if (text == "fps" || text == "FPS") return GenerationMode::kFps;
  if (text == "given" || text == "GIVEN") return GenerationMode::kGiven;
  throw ConfigError("unknown generation mode '" + text + "' (expected uss, fps or given)");
}

Oracle::Oracle(OracleSpec spec, std::size_t num_classes, std::span<const std::size_t> true_labels,
               const std::vector<std::optional<CandidateSet>>* stored_sets)
    : spec_(spec), k_(num_classes), labels_(true_labels), stored_(stored_sets), rng_(spec.rng_seed) {
  if (spec_.mode == GenerationMode::kFps && !(spec_.flip_prob >= 0.0 && spec_.flip_prob < 1.0)) {
    throw ConfigError("flip probability must lie in [0, 1)");
  }
  if (spec_.mode == GenerationMode::kGiven && stored_ == nullptr) {
    throw DataError("GIVEN mode needs a dataset with stored candidate sets");
  }
}

CandidateSet Oracle::annotate(std::size_t index) {
  if (index >= labels_.size()) throw RequestError("sample index " + std::to_string(index) + " out of range");
  if (auto it = answers_.find(index); it != answers_.end()) return it->second;

  std::optional<CandidateSet> answer;
  switch (spec_.mode) {
    case GenerationMode::kUss: answer = generate_uss(labels_[index], k_, rng_); break;
    case GenerationMode::kFps: answer = generate_fps(labels_[index], k_, spec_.flip_prob, rng_); break;
    case GenerationMode::kGiven:
      if (index >= stored_->size() || !(*stored_)[index]) {
        throw DataError("no stored candidate set for sample " + std::to_string(index));
      }
      answer = *(*stored_)[index];
      break;
  }
  answers_.emplace(index, *answer);
  return *answer;
}

std::vector<CandidateSet> Oracle::annotate(std::span<const std::size_t> indices) {
  std::vector<CandidateSet> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(annotate(i));
  return out;
}

}  // namespace alpl
