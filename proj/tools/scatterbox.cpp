// scatterbox: prepare -> transform -> train -> occlude, plus a synthetic
// corpus generator. Exit status is 0 when no errors were reported, 1 when a
// command reported errors, 2 on usage errors.

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "scatterbox/atloss.hpp"
#include "scatterbox/dataset.hpp"
#include "scatterbox/io.hpp"
#include "scatterbox/occlusion.hpp"
#include "scatterbox/scattering.hpp"
#include "scatterbox/synth.hpp"
#include "scatterbox/train.hpp"
#include "scatterbox/wav.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace sbx;

namespace {

// Errors and warnings collected while a command runs.
struct Report {
  std::vector<std::string> errors, warnings;

  void error(std::string msg) { errors.push_back(std::move(msg)); }
  void warn(std::string msg) { warnings.push_back(std::move(msg)); }

  int finish() const {
    for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
    for (const auto& e : errors) std::cerr << "error: " << e << '\n';
    if (!errors.empty()) std::cerr << errors.size() << " error(s)\n";
    return errors.empty() ? 0 : 1;
  }
};

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw InputError("cannot write " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

fs::path config_path_for(const fs::path& manifest) { return manifest.string() + ".config.json"; }

DatasetSplit load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open manifest " + path.string());
  return read_manifest(in);
}

// "<relpath with / replaced by __>@<offset>.sbxt"
std::string tensor_name(const SegmentRef& ref) {
  std::string name = ref.path;
  std::string out;
  for (char c : name) {
    if (c == '/' || c == '\\') out += "__";
    else out += c;
  }
  return out + "@" + std::to_string(ref.offset) + ".sbxt";
}

std::vector<SegmentRef> all_segments(const DatasetSplit& split) {
  std::vector<SegmentRef> out;
  for (auto s : {SplitSet::train, SplitSet::val, SplitSet::test})
    out.insert(out.end(), split.set(s).begin(), split.set(s).end());
  return out;
}

std::map<std::string, std::size_t> class_index(const std::vector<std::string>& classes) {
  std::map<std::string, std::size_t> out;
  for (std::size_t i = 0; i < classes.size(); ++i) out[classes[i]] = i;
  return out;
}

json counts_json(const DatasetSplit& split) {
  json out = json::object();
  for (auto s : {SplitSet::train, SplitSet::val, SplitSet::test}) out[to_string(s)] = per_class_counts(split.set(s));
  return out;
}

void print_counts(const DatasetSplit& split, const std::vector<std::string>& classes) {
  std::cout << std::left << std::setw(12) << "class" << std::right << std::setw(8) << "train" << std::setw(8) << "val"
            << std::setw(8) << "test" << '\n';
  const auto tr = per_class_counts(split.train), va = per_class_counts(split.val), te = per_class_counts(split.test);
  auto get = [](const std::map<std::string, std::size_t>& m, const std::string& k) {
    const auto it = m.find(k);
    return it == m.end() ? std::size_t{0} : it->second;
  };
  for (const auto& c : classes) {
    if (!tr.count(c) && !va.count(c) && !te.count(c)) continue;
    std::cout << std::left << std::setw(12) << c << std::right << std::setw(8) << get(tr, c) << std::setw(8)
              << get(va, c) << std::setw(8) << get(te, c) << '\n';
  }
}

// ---------------------------------------------------------------------------
// prepare

struct PrepareArgs {
  std::string corpus, manifest;
  std::uint64_t seed = 0;
  std::size_t segment_length = 44100;
  std::size_t stride = 0;  // 0 = balance per class
  std::size_t target_segments = 0;  // 0 = largest class at non-overlapping stride
  double tukey = 0.1;
  double threshold_db = -50.0;
  std::size_t min_window = 1024;
  double class_floor = 0.10;
  double val = 0.1, test = 0.1;
  int sample_rate = 44100;
  std::string classes;
};

int cmd_prepare(const PrepareArgs& a) {
  Report report;
  const auto classes = a.classes.empty() ? default_classes() : split_list(a.classes);
  const std::set<std::string> known(classes.begin(), classes.end());
  const fs::path root(a.corpus);
  if (!fs::is_directory(root)) {
    report.error("corpus directory " + a.corpus + " does not exist");
    return report.finish();
  }
  std::vector<fs::path> wavs;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".wav") wavs.push_back(fs::relative(entry.path(), root));
  }
  std::sort(wavs.begin(), wavs.end());
  if (wavs.empty()) {
    report.error("corpus " + a.corpus + " contains no .wav files");
    return report.finish();
  }

  std::vector<AudioFileRecord> files;
  std::map<std::string, std::vector<std::size_t>> lengths;
  for (const auto& rel : wavs) {
    const std::string rel_str = rel.generic_string();
    if (std::distance(rel.begin(), rel.end()) < 2) {
      report.error(rel_str + ": not inside a class folder");
      continue;
    }
    const std::string label = rel.begin()->string();
    if (!known.count(label)) {
      report.error(rel_str + ": unknown label '" + label + "'");
      continue;
    }
    SampledSignal signal;
    try {
      signal = read_wav(root / rel);
    } catch (const std::exception& e) {
      report.error(rel_str + ": " + e.what());
      continue;
    }
    if (signal.sample_rate != a.sample_rate) {
      report.error(rel_str + ": sample rate " + std::to_string(signal.sample_rate) + ", expected " +
                   std::to_string(a.sample_rate));
      continue;
    }
    const auto trimmed = trim_silence(signal, a.threshold_db, a.min_window);
    if (trimmed.silent) {
      report.warn(rel_str + ": silent, skipped");
      continue;
    }
    if (trimmed.signal.size() < a.segment_length) {
      report.warn(rel_str + ": shorter than one segment after trimming, skipped");
      continue;
    }
    files.push_back({rel_str, label, trimmed.signal.size(), trimmed.start});
  }
  if (!report.errors.empty()) return report.finish();
  if (files.empty()) {
    report.error("no usable audio in " + a.corpus);
    return report.finish();
  }

  const auto filtered = filter_classes(files, a.class_floor);
  for (const auto& label : filtered.excluded) {
    std::ostringstream share;
    share << std::fixed << std::setprecision(1) << 100.0 * filtered.share.at(label);
    report.warn("class '" + label + "' holds " + share.str() + "% of the samples, below the floor; excluded");
  }
  SegmentSpec spec;
  spec.segment_length = a.segment_length;
  spec.tukey_param = a.tukey;
  std::map<std::string, std::vector<std::size_t>> per_class;
  for (const auto& f : filtered.kept) per_class[f.label].push_back(f.duration);
  std::size_t target = a.target_segments;
  if (a.stride) {
    for (const auto& [label, _] : per_class) spec.stride_per_class[label] = a.stride;
  } else {
    if (target == 0)
      for (const auto& [label, lens] : per_class) {
        std::size_t n = 0;
        for (auto len : lens) n += segment_count(len, a.segment_length, a.segment_length);
        target = std::max(target, n);
      }
    const auto balance = balance_strides_for_files(per_class, a.segment_length, target);
    spec.stride_per_class = balance.stride;
    for (const auto& [label, missing] : balance.shortfall)
      report.warn("class '" + label + "' reaches only " + std::to_string(balance.segments.at(label)) + " of " +
                  std::to_string(target) + " target segments");
  }

  DatasetSplit split;
  try {
    split = sbx::split(filtered.kept, spec, {1.0 - a.val - a.test, a.val, a.test}, a.seed);
  } catch (const std::exception& e) {
    report.error(e.what());
    return report.finish();
  }

  const fs::path manifest(a.manifest);
  if (manifest.has_parent_path()) fs::create_directories(manifest.parent_path());
  write_text(manifest, manifest_string(split));
  json cfg;
  cfg["command"] = "prepare";
  cfg["created"] = utc_timestamp();
  cfg["corpus"] = fs::absolute(root).lexically_normal().string();
  cfg["seed"] = a.seed;
  cfg["sample_rate"] = a.sample_rate;
  cfg["segment_length"] = a.segment_length;
  cfg["tukey"] = a.tukey;
  cfg["threshold_db"] = a.threshold_db;
  cfg["min_window"] = a.min_window;
  cfg["class_floor"] = a.class_floor;
  cfg["ratios"] = {{"train", 1.0 - a.val - a.test}, {"val", a.val}, {"test", a.test}};
  cfg["classes"] = classes;
  cfg["excluded"] = filtered.excluded;
  cfg["target_segments"] = target;
  cfg["strides"] = spec.stride_per_class;
  cfg["counts"] = counts_json(split);
  write_text(config_path_for(manifest), cfg.dump(2) + "\n");

  print_counts(split, classes);
  return report.finish();
}

// ---------------------------------------------------------------------------
// transform

struct TransformArgs {
  std::string manifest, out_dir, kind = "gs", preset = "default", corpus;
  bool log_compress = false;
  unsigned threads = 1;
};

ScatteringConfig make_config(const std::string& preset, Representation kind, bool log_compress) {
  ScatteringConfig cfg;
  if (preset == "default") cfg = default_config(kind);
  else if (preset == "compact") cfg = compact_config(kind);
  else throw ParameterError("unknown preset '" + preset + "' (expected default or compact)");
  cfg.log_compress = log_compress;
  return cfg;
}

int cmd_transform(const TransformArgs& a) {
  Report report;
  const auto kind = representation_from_string(a.kind);
  const auto cfg = make_config(a.preset, kind, a.log_compress);
  const fs::path manifest(a.manifest);
  const auto split = load_manifest(manifest);
  const auto prep = read_json(config_path_for(manifest));
  const fs::path corpus = a.corpus.empty() ? fs::path(prep.at("corpus").get<std::string>()) : fs::path(a.corpus);
  const std::size_t length = prep.at("segment_length").get<std::size_t>();
  const double tukey = prep.at("tukey").get<double>();

  std::map<std::string, std::vector<SegmentRef>> by_file;
  for (const auto& ref : all_segments(split)) by_file[ref.path].push_back(ref);
  std::vector<std::string> paths;
  for (const auto& [p, _] : by_file) paths.push_back(p);
  const fs::path out_dir(a.out_dir);
  fs::create_directories(out_dir);

  std::vector<std::vector<std::string>> errors(paths.size());
  std::vector<std::array<std::size_t, 3>> shapes(paths.size(), {0, 0, 0});
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      SampledSignal signal;
      try {
        signal = read_wav(corpus / paths[i]);
      } catch (const std::exception& e) {
        errors[i].push_back(paths[i] + ": " + e.what());
        continue;
      }
      for (const auto& ref : by_file[paths[i]]) {
        try {
          const auto samples = extract_segment(signal, ref.offset, length, tukey);
          const auto feat = assemble(SampledSignal{samples, signal.sample_rate}, cfg, kind);
          save_tensor(out_dir / tensor_name(ref), to_tensor_file(feat));
          shapes[i] = {feat.channels(), feat.freq_bins(), feat.frames()};
        } catch (const std::exception& e) {
          errors[i].push_back(paths[i] + " @" + std::to_string(ref.offset) + ": " + e.what());
        }
      }
    }
  };
  const std::size_t chunks = std::clamp<std::size_t>(a.threads, 1, std::max<std::size_t>(paths.size(), 1));
  if (chunks == 1) {
    work(0, paths.size());
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < chunks; ++k)
      pool.emplace_back(work, k * paths.size() / chunks, (k + 1) * paths.size() / chunks);
    for (auto& t : pool) t.join();
  }
  std::array<std::size_t, 3> shape{0, 0, 0};
  std::size_t written = 0;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    for (auto& e : errors[i]) report.error(std::move(e));
    if (shapes[i][0]) shape = shapes[i];
    written += by_file[paths[i]].size() - errors[i].size();
  }

  json run;
  run["command"] = "transform";
  run["created"] = utc_timestamp();
  run["manifest"] = fs::absolute(manifest).lexically_normal().string();
  run["corpus"] = fs::absolute(corpus).lexically_normal().string();
  run["kind"] = to_string(kind);
  run["preset"] = a.preset;
  run["log_compress"] = a.log_compress;
  run["shape"] = shape;
  run["tensors"] = written;
  write_text(out_dir / "transform.json", run.dump(2) + "\n");
  std::cout << "wrote " << written << " " << to_string(kind) << " tensors of shape " << shape[0] << "x" << shape[1]
            << "x" << shape[2] << " to " << out_dir.string() << '\n';
  return report.finish();
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string manifest, tensors, out_dir, loss = "cc", transforms, kernels = "auto", classes;
  std::uint64_t seed = 0;
  std::size_t batch_size = 128, max_updates = 11000, eval_every = 100, kernel_size = 3, pool = 2;
  double learning_rate = 0.001, l2 = 0.001, at_weight = 10.0, stop_at = 2.0;
  unsigned threads = 1;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a) {
  Report report;
  const auto split = load_manifest(a.manifest);
  const fs::path dir(a.tensors), out_dir(a.out_dir);
  const auto classes = a.classes.empty() ? default_classes() : split_list(a.classes);
  const auto index = class_index(classes);

  // Pre-flight: every manifest entry needs a tensor and a known label.
  std::vector<std::string> missing;
  for (const auto& ref : all_segments(split)) {
    if (!index.count(ref.label)) report.error(ref.path + ": label '" + ref.label + "' is not among the classes");
    if (!fs::exists(dir / tensor_name(ref))) missing.push_back(tensor_name(ref));
  }
  if (!missing.empty()) {
    for (const auto& m : missing) report.error("missing tensor " + (dir / m).string());
    report.error(std::to_string(missing.size()) + " of " + std::to_string(all_segments(split).size()) +
                 " tensors are missing; run transform first");
  }
  if (split.train.empty() || split.val.empty() || split.test.empty())
    report.error("manifest must list train, val and test segments");
  if (!report.errors.empty()) return report.finish();

  std::vector<std::uint32_t> dims;
  std::uint8_t kind = 0;
  auto load = [&](const std::vector<SegmentRef>& refs) {
    LabeledSet set;
    for (const auto& ref : refs) {
      auto t = load_tensor(dir / tensor_name(ref));
      if (t.dims.size() != 3) throw FormatError(tensor_name(ref) + ": expected a rank-3 tensor");
      if (dims.empty()) {
        dims = t.dims;
        kind = t.kind;
      } else if (t.dims != dims || t.kind != kind) {
        throw FormatError(tensor_name(ref) + ": shape or kind differs from the other tensors");
      }
      set.inputs.push_back(std::move(t.values));
      set.labels.push_back(index.at(ref.label));
    }
    return set;
  };
  const auto train_set = load(split.train), val_set = load(split.val), test_set = load(split.test);

  ConvClassifierSpec spec;
  if (a.kernels == "auto") {
    spec = standard_spec(dims[0], dims[1], dims[2], classes.size());
  } else {
    spec = ConvClassifierSpec{dims[0], dims[1], dims[2], {}, classes.size(), 0.0, {}, {}};
    for (const auto& k : split_list(a.kernels)) spec.stacks.push_back({std::stoul(k), a.kernel_size, a.pool});
  }
  spec.l2_weight = a.l2;
  // Standardisation is stored as f32 in checkpoints; round it now so the
  // saved model computes exactly what was trained.
  auto [mean, scale] = channel_statistics(train_set, spec.channels);
  for (auto* v : {&mean, &scale})
    for (double& x : *v) x = static_cast<float>(x);
  spec.input_offset = mean;
  spec.input_scale = scale;
  ConvClassifier<float> model(spec);
  model.init_he_uniform(a.seed);

  TrainConfig cfg;
  cfg.batch_size = a.batch_size;
  cfg.adam.learning_rate = a.learning_rate;
  cfg.max_weight_updates = a.max_updates;
  cfg.seed = a.seed;
  cfg.eval_every = a.eval_every;
  cfg.stop_at_val_accuracy = a.stop_at;
  cfg.threads = a.threads;
  if (a.loss == "at") {
    cfg.at.transforms = a.transforms.empty() ? default_transforms(a.at_weight) : load_transforms(a.transforms);
  } else if (a.loss != "cc") {
    throw ParameterError("unknown loss '" + a.loss + "' (expected cc or at)");
  }

  std::cout << "model: " << parameter_count(spec) << " parameters, input " << dims[0] << "x" << dims[1] << "x"
            << dims[2] << ", " << train_set.size() << " train / " << val_set.size() << " val / " << test_set.size()
            << " test\n";
  TrainResult result;
  try {
    result = train(model, train_set, val_set, test_set, cfg, [&](const MetricRecord& r) {
      if (!a.quiet)
        std::cout << "update " << r.update_index << "  loss " << r.train_loss << "  val_acc " << r.val_accuracy
                  << std::endl;
    });
  } catch (const TrainingDiverged& e) {
    report.error(std::string("training diverged: ") + e.what());
    return report.finish();
  }

  fs::create_directories(out_dir);
  save_checkpoint(out_dir / "model.sbxm", result.best_model);
  {
    std::ofstream csv(out_dir / "metrics.csv", std::ios::trunc);
    write_metrics_csv(csv, result.history);
  }
  json rep;
  rep["classes"] = classes;
  rep["parameters"] = parameter_count(spec);
  rep["kernels"] = json::array();
  for (const auto& s : spec.stacks) rep["kernels"].push_back(s.kernels);
  rep["updates_run"] = result.updates_run;
  rep["best_update"] = result.best_update;
  rep["best_val_accuracy"] = result.best_val_accuracy;
  rep["test_accuracy"] = result.test_accuracy;
  rep["confusion"] = json::array();
  for (std::size_t r = 0; r < result.confusion.rows(); ++r) {
    const auto row = result.confusion.row(r);
    rep["confusion"].push_back(std::vector<std::size_t>(row.begin(), row.end()));
  }
  write_text(out_dir / "report.json", rep.dump(2) + "\n");
  json run;
  run["command"] = "train";
  run["created"] = utc_timestamp();
  run["manifest"] = fs::absolute(a.manifest).lexically_normal().string();
  run["tensors"] = fs::absolute(dir).lexically_normal().string();
  run["loss"] = a.loss;
  run["transforms"] = json::array();
  for (const auto& t : cfg.at.transforms) run["transforms"].push_back({{"name", t.name}, {"weight", t.weight}, {"vector", t.vector}});
  run["seed"] = a.seed;
  run["batch_size"] = a.batch_size;
  run["learning_rate"] = a.learning_rate;
  run["adam"] = {{"beta1", cfg.adam.beta1}, {"beta2", cfg.adam.beta2}, {"epsilon", cfg.adam.epsilon}};
  run["max_updates"] = a.max_updates;
  run["eval_every"] = a.eval_every;
  run["stop_at"] = a.stop_at;
  run["l2"] = a.l2;
  run["threads"] = a.threads;
  write_text(out_dir / "run.json", run.dump(2) + "\n");

  std::cout << "best val_acc " << result.best_val_accuracy << " at update " << result.best_update << ", test_acc "
            << result.test_accuracy << '\n';
  return report.finish();
}

// ---------------------------------------------------------------------------
// occlude

struct OccludeArgs {
  std::string checkpoint, tensor, prefix, target_class, window = "8x8", stride = "4x4", classes;
  double fill = 0.0;
  std::size_t group = 3;
  unsigned threads = 1;
  bool signed_mask = false;
};

std::pair<std::size_t, std::size_t> parse_pair(const std::string& s, const std::string& what) {
  const auto x = s.find('x');
  try {
    if (x == std::string::npos) {
      const auto v = std::stoul(s);
      return {v, v};
    }
    return {std::stoul(s.substr(0, x)), std::stoul(s.substr(x + 1))};
  } catch (const std::exception&) {
    throw ParameterError("bad " + what + " '" + s + "' (expected N or FxT)");
  }
}

int cmd_occlude(const OccludeArgs& a) {
  Report report;
  const auto model = load_checkpoint(a.checkpoint);
  const auto file = load_tensor(a.tensor);
  if (file.dims.size() != 3) throw FormatError(a.tensor + ": expected a rank-3 tensor");
  Tensor3<double> input(file.dims[0], file.dims[1], file.dims[2]);
  std::copy(file.values.begin(), file.values.end(), input.values().begin());

  const auto classes = a.classes.empty() ? default_classes() : split_list(a.classes);
  std::size_t target = 0;
  if (a.target_class.empty()) {
    std::vector<float> x(file.values);
    Workspace<float> ws;
    if (x.size() != model.spec.input_size()) throw InputError("tensor shape does not match the checkpoint");
    forward_sample(model, std::span<const float>(x), ws);
    target = static_cast<std::size_t>(std::max_element(ws.logits.begin(), ws.logits.end()) - ws.logits.begin());
  } else if (const auto it = std::find(classes.begin(), classes.end(), a.target_class); it != classes.end()) {
    target = static_cast<std::size_t>(it - classes.begin());
  } else {
    try {
      target = std::stoul(a.target_class);
    } catch (const std::exception&) {
      throw ParameterError("unknown class '" + a.target_class + "'");
    }
  }
  if (target >= model.spec.classes) throw ParameterError("class index " + std::to_string(target) + " out of range");

  OcclusionConfig cfg;
  std::tie(cfg.window_freq, cfg.window_frames) = parse_pair(a.window, "window");
  std::tie(cfg.stride_freq, cfg.stride_frames) = parse_pair(a.stride, "stride");
  cfg.fill_value = a.fill;
  cfg.bin_group = a.group;
  cfg.threads = a.threads;
  const auto map = occlusion_map(model, input, target, cfg);
  const auto importance = frequency_importance(map, cfg.bin_group);
  const auto masked = masked_input(input, map, a.signed_mask ? MaskMode::signed_map : MaskMode::positive);

  const std::string prefix = a.prefix;
  if (fs::path(prefix).has_parent_path()) fs::create_directories(fs::path(prefix).parent_path());
  {
    std::ofstream csv(prefix + ".map.csv", std::ios::trunc);
    write_map_csv(csv, map);
  }
  const auto scale = write_pgm(prefix + ".map.pgm", map);
  FeatureTensor masked_feat{static_cast<Representation>(file.kind), masked};
  auto masked_file = to_tensor_file(masked_feat);
  masked_file.kind = file.kind;
  save_tensor(prefix + ".masked.sbxt", masked_file);
  std::ostringstream table;
  table << "group\tfirst_bin\tlast_bin\tscore\n" << std::setprecision(9);
  for (std::size_t g = 0; g < importance.size(); ++g)
    table << g << '\t' << g * cfg.bin_group << '\t' << std::min(map.rows(), (g + 1) * cfg.bin_group) - 1 << '\t'
          << importance[g] << '\n';
  write_text(prefix + ".importance.tsv", table.str());

  std::cout << "class " << (target < classes.size() ? classes[target] : std::to_string(target)) << ", map range ["
            << scale.min << ", " << scale.max << "]\n"
            << table.str();
  return report.finish();
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::string out_dir;
  std::size_t clips_per_class = 200, length = 44100;
  std::uint64_t seed = 0;
};

int cmd_synth(const SynthArgs& a) {
  SynthConfig cfg;
  cfg.clips_per_class = a.clips_per_class;
  cfg.length = a.length;
  const auto clips = synth_corpus(default_synth_classes(), cfg, a.seed);
  write_synth_corpus(a.out_dir, clips);
  std::cout << "wrote " << clips.size() << " clips to " << a.out_dir << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scattering features, training and occlusion maps for instrument recognition"};
  app.require_subcommand(1);

  PrepareArgs prep;
  auto* p = app.add_subcommand("prepare", "Trim, segment, balance and split a corpus of <class>/<file>.wav");
  p->add_option("corpus", prep.corpus, "Corpus directory")->required();
  p->add_option("manifest", prep.manifest, "Output manifest path")->required();
  p->add_option("--seed", prep.seed, "Split seed")->capture_default_str();
  p->add_option("--segment-length", prep.segment_length, "Samples per segment")->capture_default_str()->check(CLI::PositiveNumber);
  p->add_option("--stride", prep.stride, "Fixed stride for every class (0 balances per class)")->capture_default_str();
  p->add_option("--target-segments", prep.target_segments, "Per-class segment target (0: largest class at no overlap)")
      ->capture_default_str();
  p->add_option("--tukey", prep.tukey, "Tukey taper parameter")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  p->add_option("--threshold-db", prep.threshold_db, "Silence threshold relative to the peak")->capture_default_str();
  p->add_option("--min-window", prep.min_window, "RMS window for silence trimming")->capture_default_str()->check(CLI::PositiveNumber);
  p->add_option("--class-floor", prep.class_floor, "Minimum share of samples per class")->capture_default_str();
  p->add_option("--val", prep.val, "Validation share of files")->capture_default_str();
  p->add_option("--test", prep.test, "Test share of files")->capture_default_str();
  p->add_option("--sample-rate", prep.sample_rate, "Required sample rate")->capture_default_str();
  p->add_option("--classes", prep.classes, "Comma-separated class list (default: the six instruments)");

  TransformArgs tr;
  auto* t = app.add_subcommand("transform", "Write one SBXT tensor per manifest segment");
  t->add_option("manifest", tr.manifest, "Manifest from prepare")->required();
  t->add_option("out_dir", tr.out_dir, "Output directory")->required();
  t->add_option("--kind", tr.kind, "mt, ms or gs")->capture_default_str()->check(CLI::IsMember({"mt", "ms", "gs"}));
  t->add_option("--preset", tr.preset, "default (full size) or compact")->capture_default_str()->check(CLI::IsMember({"default", "compact"}));
  t->add_option("--corpus", tr.corpus, "Corpus directory (default: the one recorded by prepare)");
  t->add_flag("--log", tr.log_compress, "Apply log(1 + x) to every channel");
  t->add_option("--threads", tr.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);

  TrainArgs ta;
  auto* r = app.add_subcommand("train", "Train the convolutional classifier on transformed tensors");
  r->add_option("manifest", ta.manifest, "Manifest from prepare")->required();
  r->add_option("tensors", ta.tensors, "Tensor directory from transform")->required();
  r->add_option("out_dir", ta.out_dir, "Output directory")->required();
  r->add_option("--loss", ta.loss, "cc (cross-entropy) or at (with target transforms)")->capture_default_str()->check(CLI::IsMember({"cc", "at"}));
  r->add_option("--transforms", ta.transforms, "Transform bank file for --loss at (default: built-in bank)");
  r->add_option("--at-weight", ta.at_weight, "Weight of every built-in transform")->capture_default_str();
  r->add_option("--seed", ta.seed, "Initialisation and shuffling seed")->capture_default_str();
  r->add_option("--batch-size", ta.batch_size)->capture_default_str()->check(CLI::PositiveNumber);
  r->add_option("--lr", ta.learning_rate, "Adam learning rate")->capture_default_str();
  r->add_option("--max-updates", ta.max_updates, "Weight update limit")->capture_default_str();
  r->add_option("--eval-every", ta.eval_every, "Validation interval in updates")->capture_default_str()->check(CLI::PositiveNumber);
  r->add_option("--stop-at", ta.stop_at, "Stop once validation accuracy reaches this value")->capture_default_str();
  r->add_option("--kernels", ta.kernels, "Kernels per stack, e.g. 64,64,64,8, or auto")->capture_default_str();
  r->add_option("--kernel-size", ta.kernel_size)->capture_default_str();
  r->add_option("--pool", ta.pool)->capture_default_str();
  r->add_option("--l2", ta.l2, "L2 weight on convolution and dense weights")->capture_default_str();
  r->add_option("--classes", ta.classes, "Comma-separated class list (default: the six instruments)");
  r->add_option("--threads", ta.threads, "Threads per batch")->capture_default_str()->check(CLI::PositiveNumber);
  r->add_flag("--quiet", ta.quiet, "Do not print the metric history");

  OccludeArgs oc;
  auto* o = app.add_subcommand("occlude", "Occlusion map, masked input and per-band importance for one tensor");
  o->add_option("checkpoint", oc.checkpoint, "Model from train")->required();
  o->add_option("tensor", oc.tensor, "SBXT input")->required();
  o->add_option("prefix", oc.prefix, "Output path prefix")->required();
  o->add_option("--class", oc.target_class, "Class name or index (default: the predicted class)");
  o->add_option("--classes", oc.classes, "Comma-separated class list (default: the six instruments)");
  o->add_option("--window", oc.window, "Patch size, FxT")->capture_default_str();
  o->add_option("--stride", oc.stride, "Patch step, FxT")->capture_default_str();
  o->add_option("--fill", oc.fill, "Value written into the patch")->capture_default_str();
  o->add_option("--group", oc.group, "Frequency bins per importance group")->capture_default_str()->check(CLI::PositiveNumber);
  o->add_option("--threads", oc.threads)->capture_default_str()->check(CLI::PositiveNumber);
  o->add_flag("--signed", oc.signed_mask, "Multiply by the signed map instead of its positive part");

  SynthArgs sy;
  auto* s = app.add_subcommand("synth", "Write the six-class synthetic tone corpus");
  s->add_option("out_dir", sy.out_dir, "Output directory")->required();
  s->add_option("--clips-per-class", sy.clips_per_class)->capture_default_str()->check(CLI::PositiveNumber);
  s->add_option("--length", sy.length, "Samples per clip")->capture_default_str()->check(CLI::PositiveNumber);
  s->add_option("--seed", sy.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  try {
    if (*p) return cmd_prepare(prep);
    if (*t) return cmd_transform(tr);
    if (*r) return cmd_train(ta);
    if (*o) return cmd_occlude(oc);
    if (*s) return cmd_synth(sy);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
