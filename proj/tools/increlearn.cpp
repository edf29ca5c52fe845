// Command-line driver: gen, train, eval, incr, sweep, ablate.
//
// Every command reads one key-value config, writes <out>/manifest.txt and
// <out>/config.resolved before computing anything, and can be replayed with
//   increlearn <command> --config <out>/config.resolved --out <other dir>
//
// Exit codes: 0 success, 1 usage, 2 config error, 3 data error, 4 other failure.
// Log level comes from INCRELEARN_LOG (trace, debug, info, warn, error, off).

#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/cfg/helpers.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "increlearn.hpp"

namespace fs = std::filesystem;
using namespace increlearn;

namespace {

constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kUsage = 1, kConfig = 2, kData = 3, kRuntime = 4 };

struct Options {
  std::string command;
  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool resume = false;
};

// Protocol settings plus the per-command keys, resolved once.
struct Settings {
  ProtocolConfig protocol;
  KeyValueConfig resolved;

  // incr
  std::size_t incr_capacity = 0;
  std::size_t incr_per_class = 0;
  LabelMode incr_labels = LabelMode::pseudo;
  double incr_noise_rate = 0.0;
  std::size_t checkpoint_every = 10;
  // sweep
  SweepConfig sweep;
  // ablate
  std::size_t ablate_capacity = 0;
  std::size_t ablate_per_class = 0;
  std::size_t ablate_repeats = 3;
  std::optional<double> ablate_noise_rate;
  std::size_t threads = 1;
  // eval
  std::string eval_model;
};

LabelMode parse_label_mode(const std::string& s) {
  if (s == "pseudo") return LabelMode::pseudo;
  if (s == "oracle") return LabelMode::oracle;
  if (s == "noisy_oracle") return LabelMode::noisy_oracle;
  throw ConfigError("incr.labels must be pseudo, oracle or noisy_oracle, got '" + s + "'");
}

std::string join(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

Settings resolve(const Options& opt) {
  KeyValueConfig kv = opt.config_path.empty() ? KeyValueConfig{} : KeyValueConfig::load(opt.config_path);
  if (opt.seed) kv.set("seed", std::to_string(*opt.seed));

  Settings s;
  s.protocol = read_protocol_config(kv);
  const auto& p = s.protocol;
  s.threads = kv.get_int<std::size_t>("threads", 1);

  s.incr_capacity = kv.get_int<std::size_t>("incr.capacity", p.capacity);
  s.incr_per_class = kv.get_int<std::size_t>("incr.per_class", p.per_class);
  s.incr_labels = parse_label_mode(kv.get_or("incr.labels", "pseudo"));
  s.incr_noise_rate = kv.get_double("incr.noise_rate", 0.0);
  s.checkpoint_every = kv.get_int<std::size_t>("incr.checkpoint_every", 10);
  if (s.incr_capacity == 0 || s.incr_per_class == 0) throw ConfigError("incr.capacity and incr.per_class must be positive");
  if (!(s.incr_noise_rate >= 0.0 && s.incr_noise_rate <= 1.0)) throw ConfigError("incr.noise_rate must be in [0, 1]");

  s.sweep.s_values = kv.get_int_list<std::size_t>("sweep.s_values", {p.capacity});
  s.sweep.q_values = kv.get_int_list<std::size_t>("sweep.q_values", {p.per_class});
  s.sweep.repeats = kv.get_int<std::size_t>("sweep.repeats", 3);
  s.sweep.seed = derive_seed(p.seed, "sweep");
  s.sweep.threads = s.threads;
  s.sweep.validate();

  s.ablate_capacity = kv.get_int<std::size_t>("ablate.capacity", p.capacity);
  s.ablate_per_class = kv.get_int<std::size_t>("ablate.per_class", p.per_class);
  s.ablate_repeats = kv.get_int<std::size_t>("ablate.repeats", 3);
  if (auto r = kv.get("ablate.noise_rate"); r && !r->empty()) {
    s.ablate_noise_rate = kv.get_double("ablate.noise_rate", 0.0);
    if (!(*s.ablate_noise_rate >= 0.0 && *s.ablate_noise_rate <= 1.0))
      throw ConfigError("ablate.noise_rate must be in [0, 1]");
  }

  s.eval_model = kv.get_or("eval.model", "");

  for (const auto& k : kv.unused_keys()) spdlog::warn("config key '{}' is not used by any command", k);

  s.resolved = to_key_values(p);
  s.resolved.set("threads", std::to_string(s.threads));
  s.resolved.set("incr.capacity", std::to_string(s.incr_capacity));
  s.resolved.set("incr.per_class", std::to_string(s.incr_per_class));
  s.resolved.set("incr.labels", label_mode_name(s.incr_labels));
  s.resolved.set("incr.noise_rate", text::format_double(s.incr_noise_rate));
  s.resolved.set("incr.checkpoint_every", std::to_string(s.checkpoint_every));
  s.resolved.set("sweep.s_values", join(s.sweep.s_values));
  s.resolved.set("sweep.q_values", join(s.sweep.q_values));
  s.resolved.set("sweep.repeats", std::to_string(s.sweep.repeats));
  s.resolved.set("ablate.capacity", std::to_string(s.ablate_capacity));
  s.resolved.set("ablate.per_class", std::to_string(s.ablate_per_class));
  s.resolved.set("ablate.repeats", std::to_string(s.ablate_repeats));
  s.resolved.set("ablate.noise_rate", s.ablate_noise_rate ? text::format_double(*s.ablate_noise_rate) : "");
  if (!s.eval_model.empty()) s.resolved.set("eval.model", s.eval_model);
  return s;
}

void write_manifest(const Options& opt, const Settings& s) {
  fs::create_directories(opt.out);
  detail::write_file(fs::path(opt.out) / "config.resolved", [&](std::ostream& o) { s.resolved.write(o); });
  detail::write_file(fs::path(opt.out) / "manifest.txt", [&](std::ostream& o) {
    o << "increlearn-run v1\n"
      << "command = " << opt.command << '\n'
      << "config_path = " << opt.config_path << '\n'
      << "resolved_config = config.resolved\n"
      << "seed = " << s.protocol.seed << '\n'
      << "out = " << opt.out << '\n'
      << "tool_version = " << kToolVersion << '\n';
  });
}

void log_fixture(const Fixture& f) {
  spdlog::info("T_0={} V={} V_k={} V_u={} V_learn={} V_test={}", f.train.size(), f.validation.size(), f.known.size(),
               f.uncertain.size(), f.learn.size(), f.test.size());
  spdlog::debug("M_0: best epoch {} of {}", f.base_trace.best_epoch, f.base_trace.epochs.size());
  for (const auto& w : f.base_trace.warnings) spdlog::warn("base training: {}", w);
  for (const auto& w : f.anchors.warnings) spdlog::warn("anchors: {}", w);
}

// ---------------------------------------------------------------------------

void cmd_gen(const Options& opt, const Settings& s) {
  auto data = generate(s.protocol.synth);
  const fs::path out(opt.out);
  save_features(out / "train.txt", data.train);
  save_features(out / "validation.txt", data.validation);
  detail::write_file(out / "origins.csv", [&](std::ostream& o) {
    o << "split,id,label,novel,cluster,host\n";
    auto rows = [&](const char* split, const Dataset& d, const std::vector<PointOrigin>& origin) {
      for (std::size_t i = 0; i < d.size(); ++i)
        o << split << ',' << d.examples[i].id << ',' << origin[i].label << ',' << (origin[i].novel ? 1 : 0) << ','
          << origin[i].cluster << ',' << origin[i].host << '\n';
    };
    rows("train", data.train, data.train_origin);
    rows("validation", data.validation, data.validation_origin);
  });
  spdlog::info("wrote {} training and {} validation vectors (novel centroid error {})", data.train.size(),
               data.validation.size(), data.novel_centroid_error);
}

void cmd_train(const Options& opt, const Settings& s) {
  auto f = prepare_fixture(s.protocol);
  log_fixture(f);
  const fs::path out(opt.out);
  save_model(out / "model.txt", f.base_model);
  save_feature_space(out / "feature_space.txt", f.space);
  detail::write_file(out / "anchors.txt", [&](std::ostream& o) { write_anchors(o, f.anchors, f.base_model.dim); });
  detail::write_file(out / "train_trace.csv", [&](std::ostream& o) {
    o << "epoch,train_loss,val_loss\n0,," << text::format_double(f.base_trace.initial_val_loss) << '\n';
    for (const auto& e : f.base_trace.epochs)
      o << e.epoch << ',' << text::format_double(e.train_loss) << ',' << text::format_double(e.val_loss) << '\n';
  });
  detail::write_file(out / "roles.txt", [&](std::ostream& o) {
    write_role_manifest(o, role_manifest({{"train", &f.train},
                                          {"known", &f.known},
                                          {"uncertain", &f.uncertain},
                                          {"learn", &f.learn},
                                          {"test", &f.test}}));
  });
  Json warnings = Json::array();
  for (const auto& w : f.base_trace.warnings) warnings.push_back(w);
  save_json(out / "train_summary.json",
            Json{{"best_epoch", f.base_trace.best_epoch},
                 {"epochs_run", f.base_trace.epochs.size()},
                 {"stopped_early", f.base_trace.stopped_early},
                 {"train_accuracy", evaluate(f.base_model, f.train).accuracy()},
                 {"validation_accuracy", evaluate(f.base_model, f.validation).accuracy()},
                 {"warnings", std::move(warnings)}});
}

void cmd_eval(const Options& opt, const Settings& s) {
  Fixture f = prepare_fixture(s.protocol);
  if (!s.eval_model.empty()) {
    auto m = load_model(s.eval_model);
    if (!(m.classes == f.train.classes) || m.dim != f.train.dim)
      throw DataError(DataError::Kind::dimension_mismatch, "model '" + s.eval_model + "' does not match the data");
    f.base_model = std::move(m);
    split_validation(f, s.protocol);
  }
  log_fixture(f);
  auto cmp = compare_labeler(f);
  spdlog::info("V_k: softmax {} labeler {} | V_u: softmax {} labeler {}", cmp.softmax_known.accuracy(),
               cmp.labeler_known.accuracy(), cmp.softmax_uncertain.accuracy(), cmp.labeler_uncertain.accuracy());
  save_json(fs::path(opt.out) / "eval.json",
            Json{{"config", to_json(s.resolved)},
                 {"sizes", {{"known", f.known.size()}, {"uncertain", f.uncertain.size()}}},
                 {"validation", to_json(evaluate(f.base_model, f.validation))},
                 {"comparison", to_json(cmp)}});
}

// Checkpoint layout: <out>/checkpoints/q<q>/ holds the SystemState plus the
// run trace so far; <out>/checkpoints/latest names the newest one.
void save_run_progress(const fs::path& dir, const RunTrace& trace) {
  detail::write_file(dir / "trace.csv", [&](std::ostream& o) { write_trace_csv(o, trace); });
  detail::write_file(dir / "tally.txt", [&](std::ostream& o) {
    o << "committed=" << trace.committed << "\nmislabeled=" << trace.mislabeled << '\n';
  });
}

void load_run_progress(const fs::path& dir, RunTrace& trace) {
  trace.points.clear();
  detail::read_file(dir / "trace.csv", [&](std::istream& in) {
    std::string line;
    std::getline(in, line);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      auto f = text::split(line, ',');
      if (f.size() != 4) throw DataError(DataError::Kind::malformed_row, "bad trace row", line_no);
      auto q = text::parse_int<std::size_t>(f[0]);
      auto a = text::parse_double(f[1]);
      auto k = text::parse_double(f[2]);
      auto u = text::parse_int<std::size_t>(f[3]);
      if (!q || !a || !k || !u) throw DataError(DataError::Kind::malformed_row, "bad trace row", line_no);
      trace.points.push_back({*q, *a, *k, *u});
    }
    return 0;
  });
  detail::read_file(dir / "tally.txt", [&](std::istream& in) {
    std::string line;
    while (std::getline(in, line)) {
      auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      auto v = text::parse_int<std::size_t>(text::trim(std::string_view(line).substr(eq + 1)));
      if (!v) throw DataError(DataError::Kind::malformed_row, "bad tally line '" + line + "'");
      (line.starts_with("committed") ? trace.committed : trace.mislabeled) = *v;
    }
    return 0;
  });
}

void cmd_incr(const Options& opt, const Settings& s) {
  const auto f = prepare_fixture(s.protocol);
  log_fixture(f);
  RunSettings rs{s.incr_capacity, s.incr_per_class, derive_seed(s.protocol.seed, "incr"), s.incr_labels,
                 s.incr_noise_rate};
  auto setup = make_run(f, s.protocol, rs);
  RunTrace trace;
  trace.settings = rs;
  const double t = s.protocol.acquisition.threshold;
  const fs::path ckpt_root = fs::path(opt.out) / "checkpoints";

  if (opt.resume && fs::exists(ckpt_root / "latest")) {
    std::string name;
    std::ifstream(ckpt_root / "latest") >> name;
    const auto dir = ckpt_root / name;
    setup.state = load_checkpoint(dir);
    load_run_progress(dir, trace);
    spdlog::info("resumed from {} (q={}, stream position {})", dir.string(), setup.state.q,
                 setup.state.stream_position);
  } else {
    trace.points.push_back(measure(setup.state.model, f, t));
  }

  auto checkpoint = [&](const SystemState& st) {
    char name[32];
    std::snprintf(name, sizeof name, "q%06zu", st.q);
    const auto dir = ckpt_root / name;
    save_checkpoint(dir, st);
    save_run_progress(dir, trace);
    detail::write_file(ckpt_root / "latest", [&](std::ostream& o) { o << name << '\n'; });
  };
  if (!opt.resume || setup.state.q == f.base_model.version) checkpoint(setup.state);

  run_incremental(setup.state, std::span<const AcquiredItem>(setup.stream), setup.config,
                  [&](const SystemState& st, const UpdateRecord& rec) {
                    trace.points.push_back(measure(st.model, f, t));
                    tally_labels(trace, setup, rec);
                    spdlog::debug("update q={} acc_vtest={} |P|={}", st.q, trace.points.back().acc_test,
                                  trace.points.back().uncertain_test);
                    if (s.checkpoint_every > 0 && st.q % s.checkpoint_every == 0) checkpoint(st);
                  });
  checkpoint(setup.state);
  trace.final_test = evaluate(setup.state.model, f.test);
  trace.final_known = evaluate(setup.state.model, f.known);

  ExperimentReport report = detail::report_header(f, s.protocol, "incremental");
  report.config = s.resolved;
  report.cells.push_back({rs.capacity, rs.per_class, {trace}, average_traces({trace})});
  emit_report(report, opt.out);
  save_model(fs::path(opt.out) / "model.txt", setup.state.model);
  spdlog::info("{} updates; V_test accuracy {} -> {}", trace.points.size() - 1, trace.points.front().acc_test,
               trace.points.back().acc_test);
}

void cmd_sweep(const Options& opt, const Settings& s) {
  const auto f = prepare_fixture(s.protocol);
  log_fixture(f);
  auto report = run_sweep(f, s.protocol, s.sweep);
  report.config = s.resolved;
  emit_report(report, opt.out);
  for (const auto& c : report.cells)
    spdlog::info("|S|={} Q={}: final V_test {} V_k {} ({} updates)", c.capacity, c.per_class,
                 c.mean.back().acc_test, c.mean.back().acc_known, c.mean.size() - 1);
}

void cmd_ablate(const Options& opt, const Settings& s) {
  const auto f = prepare_fixture(s.protocol);
  log_fixture(f);
  auto report = noise_ablation(f, s.protocol, s.ablate_capacity, s.ablate_per_class, s.ablate_repeats,
                               derive_seed(s.protocol.seed, "ablate"), s.ablate_noise_rate, s.threads);
  report.config = s.resolved;
  emit_report(report, opt.out);
  spdlog::info("noisy arm: noise {} final V_test {} | clean arm: final V_test {}", report.cells[0].mean_noise(),
               report.cells[0].mean.back().acc_test, report.cells[1].mean.back().acc_test);
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("increlearn");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("INCRELEARN_LOG")) spdlog::cfg::helpers::load_levels(env);
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Semi-supervised incremental learning on feature vectors"};
  app.require_subcommand(1);
  Options opt;
  std::uint64_t seed = 0;

  const std::vector<std::pair<const char*, const char*>> commands{
      {"gen", "generate the synthetic feature dataset"},
      {"train", "train the base model M_0 and build F_0"},
      {"eval", "compare the softmax head with the feature-space labeler"},
      {"incr", "run one incremental-learning run with checkpoints"},
      {"sweep", "average incremental runs over a grid of |S| and Q"},
      {"ablate", "compare noisy labels against ground truth on identical schedules"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opt.config_path, "key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out, "output directory")->required();
    sub->add_option("--seed", seed, "master seed (overrides the config)");
    if (std::string(name) == "incr") sub->add_flag("--resume", opt.resume, "continue from the latest checkpoint");
    sub->callback([&opt, sub, &seed] {
      opt.command = sub->get_name();
      if (sub->count("--seed") > 0) opt.seed = seed;
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    const Settings s = resolve(opt);
    write_manifest(opt, s);
    spdlog::info("{}: seed {}, output {}", opt.command, s.protocol.seed, opt.out);
    if (opt.command == "gen") cmd_gen(opt, s);
    else if (opt.command == "train") cmd_train(opt, s);
    else if (opt.command == "eval") cmd_eval(opt, s);
    else if (opt.command == "incr") cmd_incr(opt, s);
    else if (opt.command == "sweep") cmd_sweep(opt, s);
    else if (opt.command == "ablate") cmd_ablate(opt, s);
    return kOk;
  } catch (const ConfigError& e) {
    spdlog::error("config error: {}", e.what());
    return kConfig;
  } catch (const DataError& e) {
    spdlog::error("data error: {}", e.what());
    return kData;
  } catch (const DimensionError& e) {
    spdlog::error("data error: {}", e.what());
    return kData;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kRuntime;
  }
}
