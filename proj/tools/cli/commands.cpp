#include "cli/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "andikit/experiments.hpp"
#include "andikit/stats.hpp"
#include "cli/plotdata.hpp"

namespace andikit::cli {
namespace fs = std::filesystem;

namespace {

struct Run {
  RunConfig& cfg;
  fs::path out;
  unsigned workers;
  Json inputs = Json::array();

  std::uint64_t seed() { return cfg.get_u64("seed", 0); }

  std::string input(const std::string& key) {
    const auto path = cfg.require_string(key);
    if (!fs::is_regular_file(path)) throw MissingInput("input '" + key + "' not found: " + path);
    inputs.push_back({{"key", key}, {"path", path}, {"sha256", sha256_file(path)}});
    return path;
  }

  std::string path(const std::string& name) const { return (out / name).string(); }

  void write_text(const std::string& name, const std::string& content) const { write_atomic(path(name), content); }

  void write_report(const Json& report, const std::string& name = "report.json") const {
    validate_report(report);
    write_text(name, report.dump(2) + "\n");
  }

  void finish() {
    write_text("config.resolved", cfg.resolved_text());
    write_text("inputs.json", Json{{"inputs", inputs}}.dump(2) + "\n");
    for (const auto& k : cfg.unused_keys()) std::cerr << "warning: config key '" << k << "' was not used\n";
  }
};

// Config values that fail domain validation are configuration errors.
template <typename F>
auto config_guard(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

traj::DatasetSpec dataset_spec(Run& run, std::uint64_t default_stream = 0) {
  return config_guard([&] {
    traj::DatasetSpec spec;
    std::vector<std::string> names;
    for (auto m : traj::kAllMechanisms) names.emplace_back(traj::to_string(m));
    spec.classes.clear();
    for (const auto& n : run.cfg.get_list("data.classes", names)) spec.classes.push_back(traj::parse_mechanism(n));
    spec.per_class = run.cfg.get_size("data.per_class", 10);
    const auto len = run.cfg.get_size("data.length", 200);
    spec.length.min_length = run.cfg.get_size("data.min_length", len);
    spec.length.max_length = run.cfg.get_size("data.max_length", len);
    spec.noise_amplitude = run.cfg.get_double("data.noise", 0.0);
    spec.seed = traj::derive_seed(run.seed(), 0xda7a0000 + run.cfg.get_u64("data.stream", default_stream));
    spec.validate();
    return spec;
  });
}

net::ModelConfig model_config(Run& run) {
  return config_guard([&] {
    const auto profile = run.cfg.get_string("model.profile", "desk");
    net::ModelConfig c;
    if (profile == "desk") c = net::ModelConfig::desk_scale();
    else if (profile == "full") c = net::ModelConfig::full_scale();
    else throw ConfigError("model.profile must be 'desk' or 'full', got '" + profile + "'");
    c.scale = run.cfg.get_double("model.scale", c.scale);
    c.input_len = run.cfg.get_size("model.input_len", c.input_len);
    c.validate();
    return c;
  });
}

net::TrainingSpec training_spec(Run& run) {
  return config_guard([&] {
    net::TrainingSpec s;
    s.lr0 = run.cfg.get_double("train.lr0", s.lr0);
    s.batch_size = run.cfg.get_size("train.batch_size", s.batch_size);
    s.patience = run.cfg.get_size("train.patience", s.patience);
    s.lr_halving_period = run.cfg.get_size("train.lr_halving_period", s.lr_halving_period);
    s.max_epochs = run.cfg.get_size("train.max_epochs", s.max_epochs);
    s.seed = run.seed();
    s.validate();
    return s;
  });
}

traj::Dataset dataset_input(Run& run, const std::string& key) { return traj::load_dataset(run.input(key)); }

net::Checkpoint checkpoint_input(Run& run, const std::string& key = "model.checkpoint") {
  return net::load_checkpoint(run.input(key));
}

void require_fits(const traj::Dataset& data, std::size_t input_len, const std::string& what) {
  for (const auto& t : data) {
    if (t.length() > input_len) {
      throw std::runtime_error(what + ": trajectory of length " + std::to_string(t.length()) +
                               " exceeds the model input length " + std::to_string(input_len));
    }
  }
}

cam::ClassChoice class_choice(Run& run, const std::string& key, const std::string& fallback) {
  return config_guard([&] { return cam::parse_class_choice(run.cfg.get_string(key, fallback)); });
}

std::string name_of(std::size_t c) { return std::string(traj::to_string(traj::mechanism_at(c))); }

std::string dataset_text(const traj::Dataset& data) {
  std::ostringstream os;
  traj::write_dataset(os, data);
  return os.str();
}

std::string checkpoint_bytes(net::ResAnDi<float>& model, const net::CheckpointMeta& meta) {
  std::ostringstream os(std::ios::binary);
  net::write_checkpoint(os, model, meta);
  return os.str();
}

Json meta_json(const net::CheckpointMeta& m) {
  return {{"seed", m.seed},
          {"epochs_run", m.epochs_run},
          {"best_epoch", m.best_epoch},
          {"best_val_loss", m.best_val_loss},
          {"final_val_loss", m.final_val_loss}};
}

Json evaluation_json(const net::Evaluation& ev, const std::vector<net::AlphaBin>& bins) {
  Json confusion = Json::array(), counts = Json::array(), conf = Json::array();
  for (std::size_t c = 0; c < traj::kNumClasses; ++c) {
    confusion.push_back(ev.confusion[c]);
    counts.push_back(ev.class_counts[c]);
  }
  for (const auto& b : bins) {
    conf.push_back({{"true_class", name_of(b.true_class)},
                    {"lo", b.lo},
                    {"hi", b.hi},
                    {"count", b.count},
                    {"mean_probs", b.mean_probs}});
  }
  return {{"type", "evaluation"},
          {"accuracy", ev.accuracy},
          {"overall_accuracy", ev.overall_accuracy},
          {"samples", ev.samples},
          {"class_counts", counts},
          {"confusion", confusion},
          {"confidence", conf}};
}

void log_epoch(const net::EpochRecord& e) {
  std::fprintf(stderr, "epoch %3zu  lr %.3g  train %.4f/%.3f  val %.4f/%.3f\n", e.epoch, e.lr, e.train_loss,
               e.train_accuracy, e.val_loss, e.val_accuracy);
}

Json training_json(const net::TrainResult& r, std::size_t train_size) {
  Json hist = Json::array();
  for (const auto& e : r.history) {
    hist.push_back({{"epoch", e.epoch},
                    {"lr", e.lr},
                    {"train_loss", e.train_loss},
                    {"train_accuracy", e.train_accuracy},
                    {"val_loss", e.val_loss},
                    {"val_accuracy", e.val_accuracy}});
  }
  return {{"type", "training"},
          {"train_samples", train_size},
          {"parameters", r.model.parameter_count()},
          {"early_stopped", r.early_stopped},
          {"meta", meta_json(r.meta)},
          {"history", hist}};
}

void train_and_write(Run& run, const traj::Dataset& train_set, const traj::Dataset& val_set) {
  const auto config = model_config(run);
  const auto spec = training_spec(run);
  require_fits(train_set, config.input_len, "train");
  require_fits(val_set, config.input_len, "validation");
  auto result = net::train(config, train_set, val_set, spec, run.workers, log_epoch);
  Json report = training_json(result, train_set.size());
  if (run.cfg.has("data.test")) {
    const auto test = dataset_input(run, "data.test");
    require_fits(test, config.input_len, "test");
    report["test"] = evaluation_json(net::evaluate(result.model, test, run.workers), {});
  }
  run.write_text("model.ckpt", checkpoint_bytes(result.model, result.meta));
  run.write_report(report);
  emit_plotdata(report, run.out.string());
}

// ---------------------------------------------------------------------------

void cmd_generate(Run& run) {
  const auto spec = dataset_spec(run);
  const auto name = run.cfg.get_string("data.output", "dataset.txt");
  const auto data = traj::build_dataset(spec, run.workers);
  run.write_text(name, dataset_text(data));
  run.write_report({{"type", "dataset"},
                    {"samples", data.size()},
                    {"per_class", spec.per_class},
                    {"min_length", spec.length.min_length},
                    {"max_length", spec.length.max_length},
                    {"noise", spec.noise_amplitude},
                    {"seed", spec.seed},
                    {"file", name}});
}

void cmd_train(Run& run) {
  const auto train_set = dataset_input(run, "data.train");
  const auto val_set = dataset_input(run, "data.val");
  train_and_write(run, train_set, val_set);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

void cmd_evaluate(Run& run) {
  const auto bins = run.cfg.get_size("eval.alpha_bins", 8);
  std::vector<std::size_t> labels;
  std::vector<double> alphas, probs;
  if (run.cfg.has("eval.predictions")) {
    const auto path = run.input("eval.predictions");
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    const auto header = split_csv_line(line);
    if (header.size() != 2 + traj::kNumClasses || header[0] != "label" || header[1] != "alpha") {
      throw std::runtime_error(path + ": expected header label,alpha,p0..p7");
    }
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto cells = split_csv_line(line);
      if (cells.size() != header.size()) throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad row");
      try {
        std::size_t label;
        if (!cells[0].empty() && std::isdigit(static_cast<unsigned char>(cells[0][0]))) label = std::stoul(cells[0]);
        else label = traj::class_index(traj::parse_mechanism(cells[0]));
        if (label >= traj::kNumClasses) throw std::invalid_argument("label out of range");
        labels.push_back(label);
        alphas.push_back(std::stod(cells[1]));
        for (std::size_t k = 0; k < traj::kNumClasses; ++k) probs.push_back(std::stod(cells[2 + k]));
      } catch (const std::exception& e) {
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
  } else {
    auto ckpt = checkpoint_input(run);
    const auto data = dataset_input(run, "data.input");
    require_fits(data, ckpt.model.config().input_len, "evaluate");
    probs = net::predict_proba(ckpt.model, data, 64, run.workers);
    for (const auto& t : data) {
      labels.push_back(traj::class_index(t.label));
      alphas.push_back(t.alpha);
    }
  }
  if (labels.empty()) throw std::runtime_error("evaluate: no samples");
  const auto ev = net::evaluate_predictions(labels, probs);
  const auto report = evaluation_json(ev, net::confidence_by_alpha(labels, alphas, probs, bins));
  run.write_report(report);
  emit_plotdata(report, run.out.string());
}

void cmd_gradcam(Run& run) {
  auto ckpt = checkpoint_input(run);
  const auto data = dataset_input(run, "data.input");
  const auto choice = class_choice(run, "gradcam.class", "predicted");
  const auto len = ckpt.model.config().input_len;
  require_fits(data, len, "gradcam");
  const auto cams = cam::gradcam_dataset(ckpt.model, data, choice, run.workers);
  std::string s = "trajectory,label,class_used";
  for (std::size_t j = 0; j < cams.nodes; ++j) s += ",g" + std::to_string(j);
  s += "\n";
  for (std::size_t n = 0; n < data.size(); ++n) {
    s += std::to_string(n) + "," + std::string(traj::to_string(data[n].label)) + "," + name_of(cams.class_used[n]);
    for (std::size_t j = 0; j < cams.nodes; ++j) s += "," + format_double(cams.scores[n * cams.nodes + j]);
    s += "\n";
  }
  run.write_text("gradcam.csv", s);
  std::string r = "node,start,end\n";
  const auto runs = cam::assign_to_subintervals(cams.nodes, len);
  for (std::size_t j = 0; j < runs.size(); ++j) {
    r += std::to_string(j) + "," + std::to_string(runs[j].start) + "," + std::to_string(runs[j].end) + "\n";
  }
  run.write_text("subintervals.csv", r);
  run.write_report({{"type", "gradcam"},
                    {"samples", data.size()},
                    {"nodes", cams.nodes},
                    {"input_len", len},
                    {"class_choice", std::string(cam::to_string(choice))}});
}

void cmd_erase_eval(Run& run) {
  auto ckpt = checkpoint_input(run);
  const auto data = dataset_input(run, "data.input");
  require_fits(data, ckpt.model.config().input_len, "erase-eval");
  exp::ErasureSpec spec;
  spec.class_choice = class_choice(run, "erase.class", "predicted");
  const auto scope = run.cfg.get_string("erase.scope", "trajectory");
  if (scope == "trajectory") spec.scope = exp::DecileScope::PerTrajectory;
  else if (scope == "global") spec.scope = exp::DecileScope::Global;
  else throw ConfigError("erase.scope must be 'trajectory' or 'global'");
  spec.seed = run.cfg.get_u64("erase.seed", run.seed());
  const auto c = exp::targeted_erasure_curve(ckpt.model, data, spec, run.workers);
  const Json report{{"type", "erasure"},
                    {"decile_accuracy", c.decile_accuracy},
                    {"random_accuracy", c.random_accuracy},
                    {"baseline_accuracy", c.baseline_accuracy},
                    {"samples", c.samples},
                    {"class_choice", std::string(cam::to_string(c.class_choice))},
                    {"scope", scope},
                    {"seed", spec.seed}};
  run.write_report(report);
  emit_plotdata(report, run.out.string());
}

void cmd_augment_train(Run& run) {
  const auto train_set = dataset_input(run, "data.train");
  const auto val_set = dataset_input(run, "data.val");
  exp::AugmentationSpec spec;
  spec.mode = config_guard([&] { return exp::parse_augment_mode(run.cfg.get_string("augment.mode", "targeted")); });
  spec.fraction = run.cfg.get_double("augment.fraction", spec.fraction);
  spec.class_choice = class_choice(run, "augment.class", "predicted");
  spec.seed = run.cfg.get_u64("augment.seed", run.seed());
  config_guard([&] { spec.validate(); return 0; });
  std::optional<net::Checkpoint> base;
  if (spec.mode == exp::AugmentMode::Targeted) base = checkpoint_input(run, "augment.model");
  const auto aug = exp::augment_dataset(train_set, base ? &base->model : nullptr, spec, run.workers);
  if (run.cfg.get_bool("augment.write_data", false)) run.write_text("augmented.txt", dataset_text(aug.data));
  run.write_report({{"type", "augmentation"},
                    {"samples", aug.data.size()},
                    {"original_samples", train_set.size()},
                    {"mode", std::string(exp::to_string(spec.mode))},
                    {"fraction", spec.fraction},
                    {"class_choice", std::string(cam::to_string(spec.class_choice))},
                    {"seed", spec.seed},
                    {"selected", aug.manifest.selected},
                    {"angles", aug.manifest.angles},
                    {"mean_scores", aug.manifest.mean_scores}},
                   "manifest.json");
  train_and_write(run, aug.data, val_set);
}

void cmd_noise_eval(Run& run) {
  const auto names = run.cfg.get_list("noise.schemes", {});
  if (names.empty()) throw ConfigError("noise.schemes lists no schemes");
  std::vector<std::vector<net::Checkpoint>> owned;
  for (const auto& name : names) {
    const auto paths = run.cfg.get_list("noise." + name, {});
    if (paths.empty()) throw ConfigError("noise." + name + " lists no checkpoints");
    owned.emplace_back();
    for (std::size_t i = 0; i < paths.size(); ++i) {
      const auto key = "noise." + name + "[" + std::to_string(i) + "]";
      if (!fs::is_regular_file(paths[i])) throw MissingInput("input '" + key + "' not found: " + paths[i]);
      run.inputs.push_back({{"key", key}, {"path", paths[i]}, {"sha256", sha256_file(paths[i])}});
      owned.back().push_back(net::load_checkpoint(paths[i]));
    }
  }
  std::vector<std::pair<std::string, std::vector<net::ResAnDi<float>*>>> schemes;
  for (std::size_t s = 0; s < names.size(); ++s) {
    schemes.push_back({names[s], {}});
    for (auto& c : owned[s]) schemes.back().second.push_back(&c.model);
  }
  auto spec = dataset_spec(run);
  for (const auto& s : owned) {
    for (const auto& c : s) {
      if (spec.length.max_length > c.model.config().input_len) {
        throw ConfigError("data.max_length exceeds a model input length");
      }
    }
  }
  const auto grid = run.cfg.get_doubles("noise.grid", exp::default_noise_grid());
  const auto curves = exp::noise_robustness_curve(schemes, spec, grid, run.workers);
  Json js = Json::array();
  for (const auto& c : curves) {
    Json levels = Json::array();
    for (const auto& l : c.levels) {
      levels.push_back({{"noise", l.noise}, {"accuracies", l.accuracies}, {"mean", l.mean}, {"std_error", l.std_error}});
    }
    js.push_back({{"scheme", c.scheme}, {"levels", levels}});
  }
  const Json report{{"type", "noise"}, {"per_class", spec.per_class}, {"seed", spec.seed}, {"schemes", js}};
  run.write_report(report);
  emit_plotdata(report, run.out.string());
}

void cmd_stats_corr(Run& run) {
  auto ckpt = checkpoint_input(run);
  const auto data = dataset_input(run, "data.input");
  auto window = run.cfg.get_size("stats.window", 0);
  auto stride = run.cfg.get_size("stats.stride", 0);
  const auto n_sub = run.cfg.get_size("stats.n_sub", 4);
  const auto choice = class_choice(run, "stats.class", "true");
  if (window == 0 || stride == 0) {
    const auto rf = cam::probe_receptive_field(ckpt.model, 0.9, run.workers);
    if (window == 0) window = rf.window;
    if (stride == 0) stride = rf.stride;
  }
  const auto rep = config_guard(
      [&] { return stats::correlation_report(ckpt.model, data, window, stride, n_sub, choice, run.workers); });
  std::string s = "trajectory,label,start,gradcam,AC,CS,NG,SG,VD,CS_raw,NG_raw,SG_raw,VD_raw\n";
  for (const auto& w : rep.windows) {
    s += std::to_string(w.trajectory_id) + "," + name_of(w.label) + "," + std::to_string(w.start);
    for (double v : {w.gradcam, w.AC, w.CS, w.NG, w.SG, w.VD, w.CS_raw, w.NG_raw, w.SG_raw, w.VD_raw}) {
      s += "," + format_double(v);
    }
    s += "\n";
  }
  run.write_text("windows.csv", s);
  Json r = Json::array();
  for (const auto& row : rep.table.r) {
    Json jr = Json::array();
    for (const auto& v : row) jr.push_back(v ? Json(*v) : Json(nullptr));
    r.push_back(jr);
  }
  Json classes = Json::array();
  for (std::size_t c = 0; c < traj::kNumClasses; ++c) classes.push_back(name_of(c));
  const Json report{{"type", "correlation"},
                    {"window", rep.window},
                    {"stride", rep.stride},
                    {"n_sub", rep.n_sub},
                    {"class_choice", std::string(cam::to_string(rep.class_choice))},
                    {"classes", classes},
                    {"stats", stats::kCorrelatedStats},
                    {"r", r},
                    {"windows", rep.table.windows}};
  run.write_report(report);
  emit_plotdata(report, run.out.string());
}

void cmd_probe_rf(Run& run) {
  std::optional<net::ResAnDi<float>> model;
  if (run.cfg.has("model.checkpoint")) {
    model.emplace(checkpoint_input(run).model);
  } else {
    model.emplace(model_config(run), traj::derive_seed(run.seed(), net::kInitSeedStream));
  }
  const auto threshold = run.cfg.get_double("rf.threshold", 0.9);
  const auto rf = config_guard([&] { return cam::probe_receptive_field(*model, threshold, run.workers); });
  std::string s = "node,input_index,response\n";
  for (std::size_t j = 0; j < rf.nodes; ++j) {
    for (std::size_t i = 0; i < rf.input_len; ++i) {
      s += std::to_string(j) + "," + std::to_string(i) + "," + format_double(rf.response[j * rf.input_len + i]) + "\n";
    }
  }
  run.write_text("rf_response.csv", s);
  const Json report{{"type", "receptive_field"},
                    {"input_len", rf.input_len},
                    {"nodes", rf.nodes},
                    {"threshold", rf.threshold},
                    {"window", rf.window},
                    {"peak_spacing", rf.peak_spacing},
                    {"stride", rf.stride},
                    {"peak", rf.peak},
                    {"span_start", rf.span_start},
                    {"span_end", rf.span_end}};
  run.write_report(report);
  emit_plotdata(report, run.out.string());
}

void cmd_export_activations(Run& run) {
  auto ckpt = checkpoint_input(run);
  const auto data = dataset_input(run, "data.input");
  require_fits(data, ckpt.model.config().input_len, "export-activations");
  const auto block = run.cfg.get_size("activations.block", 4);
  std::ostringstream os;
  config_guard([&] { net::export_activations(ckpt.model, data, block, os, run.workers); return 0; });
  const auto name = "activations_block" + std::to_string(block) + ".csv";
  run.write_text(name, os.str());
  run.write_report({{"type", "activations"},
                    {"samples", data.size()},
                    {"block", block},
                    {"channels", ckpt.model.config().stage_channels()[block - 1]},
                    {"file", name}});
}

using Handler = void (*)(Run&);

const std::vector<std::pair<std::string, Handler>>& handlers() {
  static const std::vector<std::pair<std::string, Handler>> h{
      {"generate", cmd_generate},         {"train", cmd_train},
      {"evaluate", cmd_evaluate},         {"gradcam", cmd_gradcam},
      {"erase-eval", cmd_erase_eval},     {"augment-train", cmd_augment_train},
      {"noise-eval", cmd_noise_eval},     {"stats-corr", cmd_stats_corr},
      {"probe-rf", cmd_probe_rf},         {"export-activations", cmd_export_activations},
  };
  return h;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& [name, h] : handlers()) n.push_back(name);
    return n;
  }();
  return names;
}

void run_command(const std::string& command, RunConfig& config, const std::string& out_dir, unsigned workers) {
  const auto& h = handlers();
  auto it = std::find_if(h.begin(), h.end(), [&](const auto& p) { return p.first == command; });
  if (it == h.end()) throw UsageError("unknown command '" + command + "'");
  if (workers == 0) throw UsageError("workers must be positive");
  fs::create_directories(out_dir);
  Run run{config, fs::path(out_dir), workers};
  run.seed();
  it->second(run);
  run.finish();
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const UsageError*>(&e)) return kExitUsage;
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  if (dynamic_cast<const MissingInput*>(&e)) return kExitMissingInput;
  return kExitRuntime;
}

}  // namespace andikit::cli
