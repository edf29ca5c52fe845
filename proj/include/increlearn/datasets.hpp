#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "increlearn/error.hpp"
#include "increlearn/rng.hpp"
#include "increlearn/text_format.hpp"
#include "increlearn/types.hpp"

namespace increlearn {

// ---------------------------------------------------------------------------
// Feature files
//
//   increlearn-features v1, N=<n>, D=<d>
//   <class 0>,<class 1>,...
//   <id>,<class name or empty>,<v0>,...,<v{D-1}>
//
// Values are written in shortest round-trip decimal form, so save/load is
// bit-exact.
// ---------------------------------------------------------------------------

inline constexpr const char* kFeatureFileMagic = "increlearn-features v1";

namespace detail {

struct FeatureHeader {
  std::size_t n = 0;
  std::size_t d = 0;
};

// Parses "<magic>, N=<n>, D=<d>".
inline FeatureHeader parse_feature_header(std::string_view line, std::string_view magic,
                                          std::size_t line_no) {
  auto bad = [&](const std::string& why) {
    return DataError(DataError::Kind::malformed_header, why, line_no);
  };
  auto fields = text::split(line, ',');
  if (fields.size() != 3 || text::trim(fields[0]) != magic)
    throw bad("expected header '" + std::string(magic) + ", N=<n>, D=<d>'");
  FeatureHeader h;
  for (int i = 1; i <= 2; ++i) {
    auto f = text::trim(fields[i]);
    const char* key = i == 1 ? "N=" : "D=";
    if (f.substr(0, 2) != key) throw bad(std::string("missing ") + key);
    auto v = text::parse_int<std::size_t>(f.substr(2));
    if (!v) throw bad(std::string("bad value for ") + key);
    (i == 1 ? h.n : h.d) = *v;
  }
  if (h.d == 0) throw bad("D must be positive");
  return h;
}

inline std::vector<double> parse_values(std::span<const std::string_view> fields, std::size_t line_no) {
  std::vector<double> values;
  values.reserve(fields.size());
  for (auto f : fields) {
    auto v = text::parse_double(f);
    if (!v)
      throw DataError(DataError::Kind::malformed_row, "cannot parse number '" + std::string(f) + "'",
                      line_no);
    if (!std::isfinite(*v)) throw DataError(DataError::Kind::non_finite_value, "non-finite value", line_no);
    values.push_back(*v);
  }
  return values;
}

inline void append_values(std::string& out, std::span<const double> values) {
  for (double v : values) {
    out.push_back(',');
    text::append_double(out, v);
  }
}

}  // namespace detail

inline Dataset read_features(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw DataError(DataError::Kind::malformed_header, "empty file", 1);
  const auto header = detail::parse_feature_header(line, kFeatureFileMagic, line_no);

  ++line_no;
  if (!std::getline(in, line))
    throw DataError(DataError::Kind::malformed_header, "missing class-name line", line_no);
  std::vector<std::string> names;
  for (auto f : text::split(text::trim(line), ',')) names.emplace_back(text::trim(f));
  if (names.size() != header.n)
    throw DataError(DataError::Kind::malformed_header,
                    "class-name line lists " + std::to_string(names.size()) + " names, header says N=" +
                        std::to_string(header.n),
                    line_no);
  Dataset data;
  try {
    data.classes = ClassSet(std::move(names));
  } catch (const ConfigError& e) {
    throw DataError(DataError::Kind::malformed_header, e.what(), line_no);
  }
  data.dim = header.d;

  std::unordered_set<std::string> ids;
  while (std::getline(in, line)) {
    ++line_no;
    auto trimmed = text::trim(line);
    if (trimmed.empty()) continue;
    auto fields = text::split(trimmed, ',');
    if (fields.size() < 2)
      throw DataError(DataError::Kind::malformed_row, "expected id,label,values", line_no);
    if (fields.size() - 2 != header.d)
      throw DataError(DataError::Kind::dimension_mismatch,
                      "expected " + std::to_string(header.d) + " values, got " +
                          std::to_string(fields.size() - 2),
                      line_no);
    Example ex;
    ex.id = std::string(text::trim(fields[0]));
    if (ex.id.empty()) throw DataError(DataError::Kind::malformed_row, "empty id", line_no);
    if (!ids.insert(ex.id).second)
      throw DataError(DataError::Kind::duplicate_id, "duplicate id '" + ex.id + "'", line_no);
    auto label = text::trim(fields[1]);
    if (!label.empty()) {
      ex.true_label = data.classes.index_of(label);
      if (!ex.true_label)
        throw DataError(DataError::Kind::unknown_class, "unknown class '" + std::string(label) + "'",
                        line_no);
    }
    ex.features = detail::parse_values(std::span(fields).subspan(2), line_no);
    data.examples.push_back(std::move(ex));
  }
  return data;
}

inline void write_features(std::ostream& out, const Dataset& data) {
  std::string buf;
  buf += kFeatureFileMagic;
  buf += ", N=" + std::to_string(data.num_classes()) + ", D=" + std::to_string(data.dim) + "\n";
  for (std::size_t n = 0; n < data.num_classes(); ++n) {
    if (n) buf.push_back(',');
    buf += data.classes.name(n);
  }
  buf.push_back('\n');
  for (const auto& ex : data.examples) {
    buf += ex.id;
    buf.push_back(',');
    if (ex.true_label) buf += data.classes.name(*ex.true_label);
    detail::append_values(buf, ex.features);
    buf.push_back('\n');
  }
  out << buf;
}

inline Dataset load_features(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(DataError::Kind::io, "cannot open '" + path.string() + "'");
  return read_features(in);
}

inline void save_features(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(DataError::Kind::io, "cannot write '" + path.string() + "'");
  write_features(out, data);
  if (!out) throw DataError(DataError::Kind::io, "write failed for '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

struct SplitSpec {
  std::vector<double> fractions;
  std::uint64_t seed = 0;

  void validate() const {
    if (fractions.empty()) throw ConfigError("split needs at least one fraction");
    double sum = 0.0;
    for (double f : fractions) {
      if (!(f > 0.0)) throw ConfigError("split fractions must be positive");
      sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
  }
};

// Part sizes by largest-remainder rounding; ties go to the earlier part.
inline std::vector<std::size_t> split_sizes(std::size_t total, std::span<const double> fractions) {
  std::vector<std::size_t> sizes(fractions.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    const double exact = fractions[i] * static_cast<double>(total);
    sizes[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += sizes[i];
    remainders.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++sizes[remainders[i % remainders.size()].second];
  return sizes;
}

// Random disjoint partition. Each part keeps the input order of its members.
inline std::vector<Dataset> split(const Dataset& data, const SplitSpec& spec) {
  spec.validate();
  const auto sizes = split_sizes(data.size(), spec.fractions);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(spec.seed, "split"));
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<Dataset> parts;
  std::size_t start = 0;
  for (std::size_t size : sizes) {
    std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                 order.begin() + static_cast<std::ptrdiff_t>(start + size));
    std::sort(idx.begin(), idx.end());
    parts.push_back(data.subset(idx));
    start += size;
  }
  return parts;
}

// ---------------------------------------------------------------------------
// Label noise
// ---------------------------------------------------------------------------

struct LabelNoiseResult {
  Dataset data;
  // Positions of the corrupted examples and their original labels.
  std::vector<std::size_t> corrupted;
  std::vector<ClassIndex> original_labels;
};

// Replaces the true label of exactly round(rate * size) examples with a
// uniformly drawn different class.
inline LabelNoiseResult inject_label_noise(const Dataset& data, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("noise rate must be in [0, 1]");
  for (const auto& ex : data.examples)
    if (!ex.true_label)
      throw DataError(DataError::Kind::missing_label, "example '" + ex.id + "' has no true label");
  LabelNoiseResult out{data, {}, {}};
  const auto count = static_cast<std::size_t>(std::llround(rate * static_cast<double>(data.size())));
  if (count == 0) return out;

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, "label-noise"));
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(count);
  std::sort(order.begin(), order.end());

  std::uniform_int_distribution<std::size_t> other(0, data.num_classes() - 2);
  for (std::size_t i : order) {
    auto& ex = out.data.examples[i];
    const ClassIndex original = *ex.true_label;
    ClassIndex wrong = other(rng);
    if (wrong >= original) ++wrong;
    ex.true_label = wrong;
    out.corrupted.push_back(i);
    out.original_labels.push_back(original);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Role manifest: which example ids play which role (train, V_k, V_test, ...).
// ---------------------------------------------------------------------------

using RoleManifest = std::map<std::string, std::vector<std::string>>;

inline RoleManifest role_manifest(std::initializer_list<std::pair<std::string, const Dataset*>> roles) {
  RoleManifest m;
  for (const auto& [role, data] : roles) {
    auto& ids = m[role];
    for (const auto& ex : data->examples) ids.push_back(ex.id);
  }
  return m;
}

inline void write_role_manifest(std::ostream& out, const RoleManifest& manifest) {
  out << "increlearn-manifest v1\n";
  for (const auto& [role, ids] : manifest) {
    out << "role " << role << ' ' << ids.size() << '\n';
    for (const auto& id : ids) out << id << '\n';
  }
}

inline RoleManifest read_role_manifest(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line) || text::trim(line) != "increlearn-manifest v1")
    throw DataError(DataError::Kind::malformed_header, "expected 'increlearn-manifest v1'", 1);
  RoleManifest m;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    std::istringstream hdr(line);
    std::string kw, role;
    std::size_t count = 0;
    if (!(hdr >> kw >> role >> count) || kw != "role")
      throw DataError(DataError::Kind::malformed_row, "expected 'role <name> <count>'", line_no);
    auto& ids = m[role];
    for (std::size_t i = 0; i < count; ++i) {
      if (!std::getline(in, line))
        throw DataError(DataError::Kind::malformed_row, "truncated role '" + role + "'", line_no);
      ++line_no;
      ids.emplace_back(text::trim(line));
    }
  }
  return m;
}

}  // namespace increlearn
