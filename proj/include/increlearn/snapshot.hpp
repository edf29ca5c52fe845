#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "increlearn/datasets.hpp"
#include "increlearn/error.hpp"
#include "increlearn/feature_labeler.hpp"
#include "increlearn/incremental.hpp"
#include "increlearn/softmax_model.hpp"
#include "increlearn/text_format.hpp"
#include "increlearn/types.hpp"

// Text snapshots of models, feature spaces, anchors and whole loop states.
// Numbers use the shortest round-trip decimal form, so every snapshot loads
// back bit-identically.

namespace increlearn {

namespace detail {

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  std::string next(const char* what) {
    std::string line;
    if (!std::getline(in_, line)) throw DataError(DataError::Kind::malformed_row, std::string("missing ") + what, line_ + 1);
    ++line_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  }

  void expect(std::string_view literal) {
    if (next(std::string(literal).c_str()) != literal)
      throw DataError(DataError::Kind::malformed_header, "expected '" + std::string(literal) + "'", line_);
  }

  std::string value(std::string_view key) {
    auto line = next(std::string(key).c_str());
    const std::string prefix = std::string(key) + "=";
    if (line.rfind(prefix, 0) != 0)
      throw DataError(DataError::Kind::malformed_header, "expected '" + prefix + "...'", line_);
    return line.substr(prefix.size());
  }

  template <typename Int>
  Int integer(std::string_view key) {
    auto v = text::parse_int<Int>(value(key));
    if (!v) throw DataError(DataError::Kind::malformed_header, "bad integer for " + std::string(key), line_);
    return *v;
  }

  std::vector<double> values(std::size_t expected) {
    auto line = next("values");
    auto fields = text::split(line, ',');
    if (fields.size() != expected)
      throw DataError(DataError::Kind::dimension_mismatch,
                      "expected " + std::to_string(expected) + " values, got " + std::to_string(fields.size()),
                      line_);
    return parse_values(fields, line_);
  }

  std::size_t line() const { return line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

inline std::string join_values(std::span<const double> v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out.push_back(',');
    text::append_double(out, v[i]);
  }
  return out;
}

inline std::string join_names(const ClassSet& classes) {
  std::string out;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (i) out.push_back(',');
    out += classes.name(i);
  }
  return out;
}

inline ClassSet parse_names(const std::string& line, std::size_t n, std::size_t line_no) {
  std::vector<std::string> names;
  for (auto f : text::split(line, ',')) names.emplace_back(text::trim(f));
  if (names.size() != n)
    throw DataError(DataError::Kind::malformed_header, "class list does not match N", line_no);
  return ClassSet(std::move(names));
}

inline std::string optional_label(const ClassSet& classes, const std::optional<ClassIndex>& l) {
  return l ? classes.name(*l) : std::string();
}

inline std::optional<ClassIndex> parse_optional_label(const ClassSet& classes, std::string_view s,
                                                      std::size_t line_no) {
  s = text::trim(s);
  if (s.empty()) return std::nullopt;
  auto idx = classes.index_of(s);
  if (!idx) throw DataError(DataError::Kind::unknown_class, "unknown class '" + std::string(s) + "'", line_no);
  return idx;
}

template <typename Fn>
void write_file(const std::filesystem::path& path, Fn&& fn) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(DataError::Kind::io, "cannot write '" + path.string() + "'");
  fn(out);
  if (!out) throw DataError(DataError::Kind::io, "write failed for '" + path.string() + "'");
}

template <typename Fn>
auto read_file(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataError::Kind::io, "cannot open '" + path.string() + "'");
  return fn(in);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

inline void write_model(std::ostream& out, const SoftmaxModel& m) {
  out << "increlearn-model v1\n"
      << "N=" << m.num_classes() << "\nD=" << m.dim << "\nq=" << m.version << "\n"
      << "classes=" << detail::join_names(m.classes) << "\n"
      << "weights\n";
  for (ClassIndex n = 0; n < m.num_classes(); ++n) out << detail::join_values(m.row(n)) << '\n';
  out << "bias\n" << detail::join_values(m.bias) << '\n';
}

inline SoftmaxModel read_model(std::istream& in) {
  detail::LineReader r(in);
  r.expect("increlearn-model v1");
  const auto n = r.integer<std::size_t>("N");
  const auto d = r.integer<std::size_t>("D");
  const auto q = r.integer<std::size_t>("q");
  auto classes = detail::parse_names(r.value("classes"), n, r.line());
  SoftmaxModel m(std::move(classes), d);
  m.version = q;
  r.expect("weights");
  for (ClassIndex c = 0; c < n; ++c) {
    auto row = r.values(d);
    std::copy(row.begin(), row.end(), m.row(c).begin());
  }
  r.expect("bias");
  m.bias = r.values(n);
  return m;
}

inline void save_model(const std::filesystem::path& p, const SoftmaxModel& m) {
  detail::write_file(p, [&](std::ostream& o) { write_model(o, m); });
}
inline SoftmaxModel load_model(const std::filesystem::path& p) {
  return detail::read_file(p, [](std::istream& i) { return read_model(i); });
}

// ---------------------------------------------------------------------------
// Feature space
// ---------------------------------------------------------------------------

inline void write_feature_space(std::ostream& out, const FeatureSpace& s) {
  out << "increlearn-space v1\n"
      << "q=" << s.version << "\nN=" << s.num_classes << "\nD=" << s.dim << "\nentries=" << s.size() << '\n';
  std::string line;
  for (const auto& e : s.entries) {
    line = std::to_string(e.label);
    detail::append_values(line, e.vec);
    line.push_back('\n');
    out << line;
  }
}

inline FeatureSpace read_feature_space(std::istream& in) {
  detail::LineReader r(in);
  r.expect("increlearn-space v1");
  FeatureSpace s;
  s.version = r.integer<std::size_t>("q");
  s.num_classes = r.integer<std::size_t>("N");
  s.dim = r.integer<std::size_t>("D");
  const auto count = r.integer<std::size_t>("entries");
  s.entries.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto fields = r.values(s.dim + 1);
    const double label = fields.front();
    if (label < 0 || label >= static_cast<double>(s.num_classes) || label != static_cast<double>(static_cast<std::size_t>(label)))
      throw DataError(DataError::Kind::unknown_class, "bad label", r.line());
    s.entries.push_back({FeatureVector(fields.begin() + 1, fields.end()), static_cast<ClassIndex>(label)});
  }
  return s;
}

inline void save_feature_space(const std::filesystem::path& p, const FeatureSpace& s) {
  detail::write_file(p, [&](std::ostream& o) { write_feature_space(o, s); });
}
inline FeatureSpace load_feature_space(const std::filesystem::path& p) {
  return detail::read_file(p, [](std::istream& i) { return read_feature_space(i); });
}

// ---------------------------------------------------------------------------
// Anchors
// ---------------------------------------------------------------------------

inline void write_anchors(std::ostream& out, const AnchorSet& a, std::size_t dim) {
  out << "increlearn-anchors v1\n"
      << "N=" << a.num_classes() << "\nD=" << dim << "\nM=" << a.anchors_per_class << "\nseed=" << a.seed << '\n';
  for (ClassIndex n = 0; n < a.num_classes(); ++n) {
    out << "class=" << a.per_class[n].size() << '\n';
    for (const auto& v : a.per_class[n]) out << detail::join_values(v) << '\n';
  }
}

inline AnchorSet read_anchors(std::istream& in) {
  detail::LineReader r(in);
  r.expect("increlearn-anchors v1");
  AnchorSet a;
  const auto n = r.integer<std::size_t>("N");
  const auto d = r.integer<std::size_t>("D");
  a.anchors_per_class = r.integer<std::size_t>("M");
  a.seed = r.integer<std::uint64_t>("seed");
  a.per_class.resize(n);
  for (ClassIndex c = 0; c < n; ++c) {
    const auto count = r.integer<std::size_t>("class");
    for (std::size_t i = 0; i < count; ++i) a.per_class[c].push_back(r.values(d));
  }
  return a;
}

// ---------------------------------------------------------------------------
// Training set with both label columns: id,true,pseudo,values...
// ---------------------------------------------------------------------------

inline void write_training_set(std::ostream& out, const Dataset& data) {
  out << "increlearn-trainset v1\nN=" << data.num_classes() << "\nD=" << data.dim
      << "\nclasses=" << detail::join_names(data.classes) << "\ncount=" << data.size() << '\n';
  std::string line;
  for (const auto& ex : data.examples) {
    line = ex.id + "," + detail::optional_label(data.classes, ex.true_label) + "," +
           detail::optional_label(data.classes, ex.pseudo_label);
    detail::append_values(line, ex.features);
    line.push_back('\n');
    out << line;
  }
}

inline Dataset read_training_set(std::istream& in) {
  detail::LineReader r(in);
  r.expect("increlearn-trainset v1");
  const auto n = r.integer<std::size_t>("N");
  Dataset data;
  data.dim = r.integer<std::size_t>("D");
  data.classes = detail::parse_names(r.value("classes"), n, r.line());
  const auto count = r.integer<std::size_t>("count");
  for (std::size_t i = 0; i < count; ++i) {
    auto line = r.next("example");
    auto fields = text::split(line, ',');
    if (fields.size() != data.dim + 3)
      throw DataError(DataError::Kind::dimension_mismatch, "wrong field count", r.line());
    Example ex;
    ex.id = std::string(fields[0]);
    ex.true_label = detail::parse_optional_label(data.classes, fields[1], r.line());
    ex.pseudo_label = detail::parse_optional_label(data.classes, fields[2], r.line());
    ex.features = detail::parse_values(std::span(fields).subspan(3), r.line());
    data.examples.push_back(std::move(ex));
  }
  return data;
}

// ---------------------------------------------------------------------------
// Pending set: id,true,pseudo,confidence,label_confidence,model_version,values...
// ---------------------------------------------------------------------------

inline void write_pending(std::ostream& out, const PendingSet& p, const ClassSet& classes, std::size_t dim) {
  out << "increlearn-pending v1\ncapacity=" << p.capacity << "\nD=" << dim << "\ncount=" << p.size() << '\n';
  std::string line;
  for (const auto& it : p.items) {
    line = it.example.id + "," + detail::optional_label(classes, it.example.true_label) + "," +
           detail::optional_label(classes, it.example.pseudo_label) + ",";
    text::append_double(line, it.confidence);
    line.push_back(',');
    text::append_double(line, it.label_confidence);
    line += "," + std::to_string(it.model_version);
    detail::append_values(line, it.example.features);
    line.push_back('\n');
    out << line;
  }
}

inline PendingSet read_pending(std::istream& in, const ClassSet& classes) {
  detail::LineReader r(in);
  r.expect("increlearn-pending v1");
  PendingSet p;
  p.capacity = r.integer<std::size_t>("capacity");
  const auto dim = r.integer<std::size_t>("D");
  const auto count = r.integer<std::size_t>("count");
  for (std::size_t i = 0; i < count; ++i) {
    auto line = r.next("pending item");
    auto fields = text::split(line, ',');
    if (fields.size() != dim + 6) throw DataError(DataError::Kind::dimension_mismatch, "wrong field count", r.line());
    PendingItem it;
    it.example.id = std::string(fields[0]);
    it.example.true_label = detail::parse_optional_label(classes, fields[1], r.line());
    it.example.pseudo_label = detail::parse_optional_label(classes, fields[2], r.line());
    if (!it.example.pseudo_label)
      throw DataError(DataError::Kind::missing_label, "pending item without pseudo-label", r.line());
    auto nums = detail::parse_values(std::span(fields).subspan(3, 2), r.line());
    it.confidence = nums[0];
    it.label_confidence = nums[1];
    auto version = text::parse_int<std::size_t>(fields[5]);
    if (!version) throw DataError(DataError::Kind::malformed_row, "bad model version", r.line());
    it.model_version = *version;
    it.example.features = detail::parse_values(std::span(fields).subspan(6), r.line());
    it.normalized = normalize(it.example.features);
    p.items.push_back(std::move(it));
  }
  return p;
}

// ---------------------------------------------------------------------------
// Checkpoint directory: one complete SystemState.
// ---------------------------------------------------------------------------

inline void save_checkpoint(const std::filesystem::path& dir, const SystemState& s) {
  std::filesystem::create_directories(dir);
  save_model(dir / "model.txt", s.model);
  save_feature_space(dir / "feature_space.txt", s.feature_space);
  detail::write_file(dir / "anchors.txt", [&](std::ostream& o) { write_anchors(o, s.anchors, s.model.dim); });
  detail::write_file(dir / "training_set.txt", [&](std::ostream& o) { write_training_set(o, s.training_set); });
  detail::write_file(dir / "pending.txt",
                     [&](std::ostream& o) { write_pending(o, s.pending, s.model.classes, s.model.dim); });
  detail::write_file(dir / "state.txt", [&](std::ostream& o) {
    o << "increlearn-state v1\nq=" << s.q << "\nstream_position=" << s.stream_position << '\n';
  });
}

inline SystemState load_checkpoint(const std::filesystem::path& dir) {
  SystemState s;
  s.model = load_model(dir / "model.txt");
  s.feature_space = load_feature_space(dir / "feature_space.txt");
  s.anchors = detail::read_file(dir / "anchors.txt", [](std::istream& i) { return read_anchors(i); });
  s.training_set = detail::read_file(dir / "training_set.txt", [](std::istream& i) { return read_training_set(i); });
  s.pending = detail::read_file(dir / "pending.txt",
                                [&](std::istream& i) { return read_pending(i, s.model.classes); });
  detail::read_file(dir / "state.txt", [&](std::istream& i) {
    detail::LineReader r(i);
    r.expect("increlearn-state v1");
    s.q = r.integer<std::size_t>("q");
    s.stream_position = r.integer<std::size_t>("stream_position");
    return 0;
  });
  s.check_invariants();
  return s;
}

}  // namespace increlearn
