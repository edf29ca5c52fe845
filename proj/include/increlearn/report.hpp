#pragma once

#include <cstddef>
#include <filesystem>
#include <ostream>
#include <string>

#include "json.hpp"

#include "increlearn/error.hpp"
#include "increlearn/experiments.hpp"
#include "increlearn/metrics.hpp"
#include "increlearn/snapshot.hpp"
#include "increlearn/text_format.hpp"

// Report files: a JSON summary plus one CSV trace per (cell, run). Field
// order is fixed and numbers use the shortest round-trip form, so emitting
// the same report twice produces identical bytes.

namespace increlearn {

using Json = nlohmann::ordered_json;

inline const char* label_mode_name(LabelMode m) {
  switch (m) {
    case LabelMode::pseudo: return "pseudo";
    case LabelMode::oracle: return "oracle";
    case LabelMode::noisy_oracle: return "noisy_oracle";
  }
  return "?";
}

inline Json to_json(const ConfusionMatrix& cm) {
  Json rows = Json::array();
  for (std::size_t i = 0; i < cm.num_classes(); ++i) {
    Json row = Json::array();
    for (std::size_t j = 0; j < cm.num_classes(); ++j) row.push_back(cm.at(i, j));
    rows.push_back(std::move(row));
  }
  return Json{{"counts", std::move(rows)}, {"total", cm.total()}, {"accuracy", cm.accuracy()}};
}

inline Json to_json(const LabelerComparison& c) {
  return Json{{"known", {{"softmax", to_json(c.softmax_known)}, {"labeler", to_json(c.labeler_known)}}},
              {"uncertain", {{"softmax", to_json(c.softmax_uncertain)}, {"labeler", to_json(c.labeler_uncertain)}}}};
}

inline Json to_json(const KeyValueConfig& kv) {
  Json out = Json::object();
  for (const auto& [k, v] : kv.values()) out[k] = v;
  return out;
}

inline Json to_json(const RunTrace& r) {
  Json points = Json::array();
  for (const auto& p : r.points)
    points.push_back({{"q", p.q}, {"acc_vtest", p.acc_test}, {"acc_vk", p.acc_known}, {"uncertain", p.uncertain_test}});
  return Json{{"seed", r.settings.seed},
              {"labels", label_mode_name(r.settings.labels)},
              {"noise_rate", r.settings.noise_rate},
              {"updates", r.points.empty() ? 0 : r.points.size() - 1},
              {"committed", r.committed},
              {"mislabeled", r.mislabeled},
              {"measured_noise", r.measured_noise()},
              {"trace", std::move(points)},
              {"final_vtest", to_json(r.final_test)},
              {"final_vk", to_json(r.final_known)}};
}

inline std::string trace_file_name(std::size_t cell, std::size_t run) {
  return "cell" + std::to_string(cell) + "_run" + std::to_string(run) + ".csv";
}

inline Json to_json(const ExperimentReport& r) {
  Json cells = Json::array();
  for (std::size_t c = 0; c < r.cells.size(); ++c) {
    const auto& cell = r.cells[c];
    Json mean = Json::array();
    for (const auto& p : cell.mean)
      mean.push_back({{"q", p.q}, {"acc_vtest", p.acc_test}, {"acc_vk", p.acc_known}, {"uncertain", p.uncertain_test}});
    Json runs = Json::array();
    for (std::size_t i = 0; i < cell.runs.size(); ++i) {
      auto run = to_json(cell.runs[i]);
      run["trace_file"] = "traces/" + trace_file_name(c, i);
      runs.push_back(std::move(run));
    }
    cells.push_back({{"capacity", cell.capacity},
                     {"per_class", cell.per_class},
                     {"mean_noise", cell.mean_noise()},
                     {"mean", std::move(mean)},
                     {"runs", std::move(runs)}});
  }
  return Json{{"kind", r.kind},
              {"config", to_json(r.config)},
              {"sizes",
               {{"train", r.train_size},
                {"known", r.known_size},
                {"uncertain", r.uncertain_size},
                {"learn", r.learn_size},
                {"test", r.test_size}}},
              {"cells", std::move(cells)}};
}

inline void write_trace_csv(std::ostream& out, const RunTrace& r) {
  out << "q,acc_vtest,acc_vk,uncertain\n";
  for (const auto& p : r.points)
    out << p.q << ',' << text::format_double(p.acc_test) << ',' << text::format_double(p.acc_known) << ','
        << p.uncertain_test << '\n';
}

inline void save_json(const std::filesystem::path& path, const Json& j) {
  detail::write_file(path, [&](std::ostream& o) { o << j.dump(2) << '\n'; });
}

// Writes <dir>/report.json and <dir>/traces/cell<c>_run<i>.csv.
inline void emit_report(const ExperimentReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "traces", ec);
  if (ec) throw DataError(DataError::Kind::io, "cannot create '" + (dir / "traces").string() + "': " + ec.message());
  save_json(dir / "report.json", to_json(report));
  for (std::size_t c = 0; c < report.cells.size(); ++c)
    for (std::size_t i = 0; i < report.cells[c].runs.size(); ++i)
      detail::write_file(dir / "traces" / trace_file_name(c, i),
                         [&](std::ostream& o) { write_trace_csv(o, report.cells[c].runs[i]); });
}

}  // namespace increlearn
