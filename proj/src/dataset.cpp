#include "alpl/dataset.hpp"

#include "alpl/error.hpp"
#include "alpl/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <limits>
#include <numeric>
#include <sstream>

namespace alpl::data {

namespace {

std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset, const std::string& path) {
  if (offset + 4 > bytes.size()) {
    throw FormatError(path + ": truncated header at offset " + std::to_string(offset));
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void expect_magic(const std::vector<std::uint8_t>& bytes, std::uint32_t magic, const std::string& path) {
  const std::uint32_t got = read_be32(bytes, 0, path);
  if (got != magic) {
    std::ostringstream msg;
    msg << path << ": bad magic 0x" << std::hex << std::setw(8) << std::setfill('0') << got << " at offset 0, expected 0x"
        << std::setw(8) << magic;
    throw FormatError(msg.str());
  }
}

void expect_payload(const std::vector<std::uint8_t>& bytes, std::size_t offset, std::size_t length,
                    const std::string& path) {
  if (offset + length > bytes.size()) {
    throw FormatError(path + ": truncated payload at offset " + std::to_string(bytes.size()) + ", expected " +
                      std::to_string(offset + length) + " bytes");
  }
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  for (;;) {
    std::size_t end = line.find(',', pos);
    if (end == std::string::npos) {
      out.push_back(line.substr(pos));
      break;
    }
    out.push_back(line.substr(pos, end - pos));
    pos = end + 1;
  }
  for (auto& f : out) {
    while (!f.empty() && (f.back() == '\r' || f.back() == ' ')) f.pop_back();
    while (!f.empty() && f.front() == ' ') f.erase(f.begin());
  }
  return out;
}

template <typename T>
T parse_number(const std::string& field, const std::string& what, std::size_t line_no) {
  T value{};
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw FormatError("line " + std::to_string(line_no) + ": bad " + what + " '" + field + "'");
  }
  return value;
}

Split take_rows(const Split& src, std::span<const std::size_t> rows) {
  Split out;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), src.features.cols());
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = src.features.row(static_cast<Eigen::Index>(rows[i]));
    out.labels.push_back(src.labels[rows[i]]);
    if (src.has_candidate_sets()) out.candidate_sets.push_back(src.candidate_sets[rows[i]]);
  }
  return out;
}

}  // namespace

Split load_idx(const std::string& images_path, const std::string& labels_path, std::size_t num_classes) {
  const auto images = read_bytes(images_path);
  const auto labels = read_bytes(labels_path);
  if (images.empty()) throw FormatError(images_path + ": empty file at offset 0");
  if (labels.empty()) throw FormatError(labels_path + ": empty file at offset 0");

  expect_magic(images, 0x00000803u, images_path);
  expect_magic(labels, 0x00000801u, labels_path);
  const std::size_t n = read_be32(images, 4, images_path);
  const std::size_t rows = read_be32(images, 8, images_path);
  const std::size_t cols = read_be32(images, 12, images_path);
  const std::size_t n_labels = read_be32(labels, 4, labels_path);
  if (n != n_labels) {
    throw FormatError("image count " + std::to_string(n) + " differs from label count " + std::to_string(n_labels));
  }
  const std::size_t d = rows * cols;
  expect_payload(images, 16, n * d, images_path);
  expect_payload(labels, 8, n, labels_path);

  Split out;
  out.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t y = labels[8 + i];
    if (y >= num_classes) {
      throw DataError(labels_path + ": label " + std::to_string(y) + " at offset " + std::to_string(8 + i) +
                      " out of range for " + std::to_string(num_classes) + " classes");
    }
    out.labels[i] = y;
    const std::uint8_t* px = images.data() + 16 + i * d;
    for (std::size_t j = 0; j < d; ++j) {
      out.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = px[j] / 255.0;
    }
  }
  return out;
}

CsvTable load_csv(const std::string& path, std::size_t num_classes) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path + ": missing header row");
  const auto header = split_fields(line);

  std::vector<std::ptrdiff_t> feature_col;
  std::ptrdiff_t label_col = -1;
  std::ptrdiff_t cand_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto& h = header[c];
    if (h == "true_label") {
      label_col = static_cast<std::ptrdiff_t>(c);
    } else if (h == "candidate_labels") {
      cand_col = static_cast<std::ptrdiff_t>(c);
    } else if (h.size() > 1 && h[0] == 'f' && std::all_of(h.begin() + 1, h.end(), ::isdigit)) {
      const std::size_t idx = std::stoul(h.substr(1));
      if (feature_col.size() <= idx) feature_col.resize(idx + 1, -1);
      feature_col[idx] = static_cast<std::ptrdiff_t>(c);
    }
  }
  if (label_col < 0) throw FormatError(path + ": missing required column true_label");
  if (feature_col.empty()) throw FormatError(path + ": no feature columns f0..f{d-1}");
  for (std::size_t j = 0; j < feature_col.size(); ++j) {
    if (feature_col[j] < 0) throw FormatError(path + ": missing required column f" + std::to_string(j));
  }
  const std::size_t d = feature_col.size();

  std::vector<std::vector<double>> feats;
  std::vector<std::size_t> ys;
  std::vector<std::optional<std::vector<std::size_t>>> raw_sets;
  std::size_t max_class = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw FormatError(path + ": line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                        " fields, header has " + std::to_string(header.size()));
    }
    std::vector<double> row(d);
    for (std::size_t j = 0; j < d; ++j) {
      row[j] = parse_number<double>(fields[static_cast<std::size_t>(feature_col[j])], "feature", line_no);
    }
    const auto y = parse_number<std::size_t>(fields[static_cast<std::size_t>(label_col)], "label", line_no);
    max_class = std::max(max_class, y);
    std::optional<std::vector<std::size_t>> set;
    if (cand_col >= 0 && !fields[static_cast<std::size_t>(cand_col)].empty()) {
      std::vector<std::size_t> classes;
      const std::string& cell = fields[static_cast<std::size_t>(cand_col)];
      std::size_t pos = 0;
      while (pos <= cell.size()) {
        std::size_t end = cell.find('|', pos);
        if (end == std::string::npos) end = cell.size();
        classes.push_back(parse_number<std::size_t>(cell.substr(pos, end - pos), "candidate label", line_no));
        max_class = std::max(max_class, classes.back());
        pos = end + 1;
      }
      set = std::move(classes);
    }
    feats.push_back(std::move(row));
    ys.push_back(y);
    raw_sets.push_back(std::move(set));
  }

  CsvTable t;
  t.num_features = d;
  t.num_classes = num_classes == 0 ? max_class + 1 : num_classes;
  if (t.num_classes < 2 || t.num_classes > kMaxClasses) {
    throw FormatError(path + ": unsupported class count " + std::to_string(t.num_classes));
  }
  if (max_class >= t.num_classes) {
    throw DataError(path + ": class " + std::to_string(max_class) + " out of range for " +
                    std::to_string(t.num_classes) + " classes");
  }

  std::vector<std::size_t> keep;
  std::vector<std::optional<CandidateSet>> sets;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    std::optional<CandidateSet> s;
    if (raw_sets[i]) {
      const LabelMask m = LabelMask::from_indices(t.num_classes, *raw_sets[i]);
      if (m.empty() || m.is_full() || !m.contains(ys[i])) {
        ++t.dropped_rows;
        continue;
      }
      s.emplace(m);
    }
    keep.push_back(i);
    sets.push_back(std::move(s));
  }

  t.split.features.resize(static_cast<Eigen::Index>(keep.size()), static_cast<Eigen::Index>(d));
  for (std::size_t r = 0; r < keep.size(); ++r) {
    for (std::size_t j = 0; j < d; ++j) {
      t.split.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = feats[keep[r]][j];
    }
    t.split.labels.push_back(ys[keep[r]]);
  }
  if (cand_col >= 0) t.split.candidate_sets = std::move(sets);
  return t;
}

void write_csv(const std::string& path, const Split& split) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  const auto d = split.features.cols();
  for (Eigen::Index j = 0; j < d; ++j) out << 'f' << j << ',';
  out << "true_label";
  if (split.has_candidate_sets()) out << ",candidate_labels";
  out << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t i = 0; i < split.size(); ++i) {
    for (Eigen::Index j = 0; j < d; ++j) out << split.features(static_cast<Eigen::Index>(i), j) << ',';
    out << split.labels[i];
    if (split.has_candidate_sets()) {
      out << ',';
      if (split.candidate_sets[i]) out << split.candidate_sets[i]->mask().to_string();
    }
    out << '\n';
  }
}

DatasetBundle make_blobs(const BlobsSpec& spec) {
  if (spec.num_classes < 2 || spec.num_features == 0 || spec.per_class == 0 || !(spec.spread >= 0.0)) {
    throw ConfigError("blobs need k >= 2, d >= 1, per_class >= 1 and spread >= 0");
  }
  const auto k = static_cast<Eigen::Index>(spec.num_classes);
  const auto d = static_cast<Eigen::Index>(spec.num_features);
  Rng rng(spec.seed);

  Matrix means(k, d);
  for (Eigen::Index c = 0; c < k; ++c) {
    for (Eigen::Index j = 0; j < d; ++j) means(c, j) = rng.normal();
  }
  double min_dist = std::numeric_limits<double>::infinity();
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = a + 1; b < k; ++b) min_dist = std::min(min_dist, (means.row(a) - means.row(b)).norm());
  }
  const double separation = 4.0 * std::max(spec.spread, 1.0);
  means *= separation / min_dist;

  auto draw = [&](std::size_t per_class) {
    Split s;
    const auto n = static_cast<Eigen::Index>(per_class * spec.num_classes);
    s.features.resize(n, d);
    s.labels.resize(static_cast<std::size_t>(n));
    Eigen::Index r = 0;
    for (std::size_t i = 0; i < per_class; ++i) {
      for (Eigen::Index c = 0; c < k; ++c, ++r) {
        for (Eigen::Index j = 0; j < d; ++j) s.features(r, j) = means(c, j) + spec.spread * rng.normal();
        s.labels[static_cast<std::size_t>(r)] = static_cast<std::size_t>(c);
      }
    }
    return s;
  };

  DatasetBundle out;
  out.num_classes = spec.num_classes;
  out.num_features = spec.num_features;
  out.train = draw(spec.per_class);
  out.test = draw(spec.test_per_class);
  return out;
}

void split_off_test(DatasetBundle& bundle, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test fraction must lie in (0, 1)");
  const std::size_t n = bundle.train.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  if (n_test == 0 || n_test >= n) throw ConfigError("test fraction leaves an empty split");
  std::vector<std::size_t> test_rows(order.end() - static_cast<std::ptrdiff_t>(n_test), order.end());
  std::vector<std::size_t> train_rows(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_test));
  std::sort(test_rows.begin(), test_rows.end());
  std::sort(train_rows.begin(), train_rows.end());
  Split test = take_rows(bundle.train, test_rows);
  bundle.train = take_rows(bundle.train, train_rows);
  bundle.test = std::move(test);
}

void standardize(DatasetBundle& bundle) {
  auto& x = bundle.train.features;
  if (x.rows() == 0) return;
  const Eigen::RowVectorXd mean = x.colwise().mean();
  Eigen::RowVectorXd sd = ((x.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(x.rows()))
                              .sqrt()
                              .matrix();
  for (Eigen::Index j = 0; j < sd.size(); ++j) {
    if (!(sd(j) > 0.0)) sd(j) = 1.0;
  }
  auto apply = [&](Matrix& m) {
    if (m.rows() == 0) return;
    m = ((m.rowwise() - mean).array().rowwise() / sd.array()).matrix();
  };
  apply(bundle.train.features);
  apply(bundle.test.features);
}

}  // namespace alpl::data
