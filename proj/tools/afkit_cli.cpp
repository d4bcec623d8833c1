// Command-line driver: scene generation, controller training, evaluation,
// and scaling benchmarks over the streaming toolkit.
//
// Exit codes: 0 success, 2 invalid configuration, 3 training divergence,
// 4 I/O failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <sys/utsname.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <thread>

#include "afkit/flops.hpp"
#include "afkit/metrics.hpp"
#include "afkit/scenes.hpp"
#include "afkit/stream.hpp"
#include "afkit/train.hpp"
#include "afkit/wav.hpp"

using namespace afkit;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kGenTag = 0x6E0;    // generate verb scene stream
constexpr std::uint64_t kTrainTag = 0x5CE;  // must match the training loop
constexpr std::uint64_t kEvalTag = 0xEA1;   // held-out stream, disjoint from training

// ---- flat key=value configuration --------------------------------------------
// A run is configured by a plain key=value file plus flags; a flag given on
// the command line always wins over the file. Every run writes the resolved
// values next to its outputs.

class KvBinding {
 public:
  void add(const std::string& key, std::string* v) {
    entries_.push_back({key, [v](const std::string& s) { *v = s; },
                        [v] { return *v; }});
  }
  void add(const std::string& key, double* v) {
    entries_.push_back({key,
                        [key, v](const std::string& s) { *v = parse_num(key, s); },
                        [v] {
                          char buf[32];
                          std::snprintf(buf, sizeof buf, "%.17g", *v);
                          return std::string(buf);
                        }});
  }
  template <typename UInt>
  void add(const std::string& key, UInt* v) {
    static_assert(std::is_unsigned_v<UInt>);
    entries_.push_back({key,
                        [key, v](const std::string& s) {
                          const double d = parse_num(key, s);
                          if (d < 0.0 || d != std::floor(d))
                            throw ConfigError(key + " must be a non-negative integer");
                          *v = static_cast<UInt>(d);
                        },
                        [v] { return std::to_string(*v); }});
  }
  void add(const std::string& key, std::vector<std::string>* v) {
    entries_.push_back({key,
                        [v](const std::string& s) {
                          v->clear();
                          std::size_t start = 0;
                          while (start <= s.size()) {
                            const std::size_t comma = s.find(',', start);
                            const std::size_t end = comma == std::string::npos ? s.size() : comma;
                            if (end > start) v->push_back(s.substr(start, end - start));
                            if (comma == std::string::npos) break;
                            start = comma + 1;
                          }
                        },
                        [v] {
                          std::string joined;
                          for (const std::string& item : *v) {
                            if (!joined.empty()) joined += ',';
                            joined += item;
                          }
                          return joined;
                        }});
  }

  // Applies file values to every option the command line left untouched.
  void apply_file(const CLI::App& sub, const std::string& path) const {
    std::ifstream f(path);
    if (!f) throw IoError("cannot read config file " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
      ++lineno;
      const std::size_t hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const auto notspace = [](unsigned char c) { return !std::isspace(c); };
      line.erase(line.begin(), std::find_if(line.begin(), line.end(), notspace));
      line.erase(std::find_if(line.rbegin(), line.rend(), notspace).base(), line.end());
      if (line.empty()) continue;
      const std::size_t eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
      const std::string key = line.substr(0, eq);
      const std::string value = line.substr(eq + 1);
      const Entry* entry = nullptr;
      for (const Entry& e : entries_)
        if (e.key == key) entry = &e;
      if (!entry)
        throw ConfigError(path + ":" + std::to_string(lineno) + ": unknown key " + key);
      if (sub.count("--" + key) > 0) continue;  // explicit flag wins
      entry->set(value);
    }
  }

  void write_resolved(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    for (const Entry& e : entries_) f << e.key << "=" << e.get() << "\n";
  }

 private:
  struct Entry {
    std::string key;
    std::function<void(const std::string&)> set;
    std::function<std::string()> get;
  };

  static double parse_num(const std::string& key, const std::string& s) {
    std::size_t pos = 0;
    double d = 0.0;
    try {
      d = std::stod(s, &pos);
    } catch (const std::exception&) {
      throw ConfigError(key + ": cannot parse number from '" + s + "'");
    }
    if (pos != s.size())
      throw ConfigError(key + ": cannot parse number from '" + s + "'");
    return d;
  }

  std::vector<Entry> entries_;
};

// ---- run configuration ------------------------------------------------------

struct RunOpts {
  std::string task = "aec";
  std::string size = "S";  // S|M|L model or nlms|kf|rls|frozen baseline
  std::string mode = "pu";
  std::string loss = "log_mse";
  std::uint64_t seed = 1;
  std::size_t scenes = 10;
  double duration_s = 4.0;
  std::string ckpt;
  std::string out;
  unsigned threads = 1;
};

bool is_learned(const std::string& size) {
  return size == "S" || size == "M" || size == "L";
}

std::size_t size_hidden(const std::string& size) {
  if (size == "S") return 16;
  if (size == "M") return 32;
  if (size == "L") return 64;
  throw ConfigError("unknown model size: " + size);
}

OptimizerKind baseline_kind(const std::string& size) {
  if (size == "nlms") return OptimizerKind::Nlms;
  if (size == "kf") return OptimizerKind::Kalman;
  if (size == "rls") return OptimizerKind::Rls;
  if (size == "frozen") return OptimizerKind::Frozen;
  throw ConfigError("unknown size/baseline: " + size +
                    " (want S, M, L, nlms, kf, rls, or frozen)");
}

void validate_combo(const RunOpts& o, bool for_train) {
  if (o.task != "aec" && o.task != "gsc")
    throw ConfigError("unknown task: " + o.task + " (want aec or gsc)");
  parse_step_mode(o.mode);
  parse_loss_kind(o.loss);
  if (for_train && !is_learned(o.size))
    throw ConfigError("training needs a learned controller size (S, M, or L)");
  if (!is_learned(o.size)) {
    const OptimizerKind k = baseline_kind(o.size);
    if (k == OptimizerKind::Rls && o.task == "aec")
      throw ConfigError("the rls baseline is beamforming only");
    if (k == OptimizerKind::Kalman && o.task == "gsc")
      throw ConfigError("the kalman baseline is echo cancellation only");
  }
  if (o.scenes == 0) throw ConfigError("need at least one scene");
  if (o.duration_s <= 0.0) throw ConfigError("scene duration must be positive");
  if (o.threads == 0) throw ConfigError("thread budget must be positive");
  if (o.out.empty()) throw ConfigError("an output directory is required");
}

// Fixed processing geometry: 512-sample frames at a 256 hop, 8 echo blocks,
// a 4-mic array. Scene synthesis and the cost model share it.
MdfConfig aec_config() {
  MdfConfig cfg;
  cfg.frame = {512, 256};
  cfg.blocks = 8;
  return cfg;
}

GscConfig gsc_config() {
  GscConfig cfg;
  cfg.frame = {512, 256};
  cfg.mics = 4;
  return cfg;
}

NetConfig net_config(const std::string& task, std::size_t hidden) {
  NetConfig nc;
  nc.hidden = hidden;
  nc.taps = task == "aec" ? aec_config().blocks : gsc_config().mics;
  nc.bins = 257;
  nc.band = 5;
  return nc;
}

AecSceneParams aec_scene_params(double duration_s) {
  AecSceneParams p;
  p.duration_s = duration_s;
  return p;
}

GscSceneParams gsc_scene_params(double duration_s) {
  GscSceneParams p;
  p.array = gsc_config();
  p.duration_s = duration_s;
  return p;
}

std::string mode_label(const std::string& mode) {
  if (mode == "p") return "P";
  if (mode == "pu") return "PU";
  return "PUx2";
}

std::string upper(std::string s) {
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

// S-S-PU style identifiers: size, supervision (S supervised, U self-supervised),
// step mode. Baselines carry just name and mode.
std::string run_label(const RunOpts& o) {
  if (!is_learned(o.size)) return upper(o.size) + "-" + mode_label(o.mode);
  const char* sup = parse_loss_kind(o.loss) == LossKind::LogPower ? "U" : "S";
  return o.size + "-" + sup + "-" + mode_label(o.mode);
}

std::string canonical_ckpt_name(const RunOpts& o) {
  const char* sup = parse_loss_kind(o.loss) == LossKind::LogPower ? "u" : "s";
  std::string size = o.size;
  for (char& c : size) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return o.task + "-" + size + "-" + sup + "-" + o.mode + ".net";
}

std::string hardware_string() {
  utsname u{};
  if (uname(&u) != 0) return "unknown";
  return std::string(u.sysname) + " " + u.release + " " + u.machine + ", " +
         std::to_string(std::thread::hardware_concurrency()) + " hw threads";
}

// ---- shared evaluation harness ----------------------------------------------

struct EngineSpec {
  bool learned = false;
  OptimizerKind kind = OptimizerKind::Frozen;
  NetConfig net;                // valid when learned
  std::vector<double> params;   // valid when learned
};

std::unique_ptr<Optimizer> make_optimizer(const EngineSpec& spec, std::size_t taps,
                                          std::size_t bins) {
  if (spec.learned) return std::make_unique<NetOptimizer>(spec.net, spec.params);
  switch (spec.kind) {
    case OptimizerKind::Nlms:
      return std::make_unique<NlmsOptimizer>(NlmsConfig{}, taps, bins);
    case OptimizerKind::Kalman:
      return std::make_unique<KalmanOptimizer>(KalmanConfig{}, taps, bins);
    case OptimizerKind::Rls:
      return std::make_unique<RlsOptimizer>(RlsConfig{}, taps, bins);
    default:
      return std::make_unique<FrozenOptimizer>();
  }
}

struct SceneScores {
  double erle = std::nan("");
  double sisdr = std::nan("");
  double sir = std::nan("");
  double sar = std::nan("");
};

// The streaming engines consume whole hops; stray tail samples are dropped.
AecScene trimmed_aec_scene(const AecSceneParams& p, std::uint64_t seed, std::size_t hop) {
  AecScene sc = make_aec_scene(p, seed);
  const std::size_t len = sc.u.size() / hop * hop;
  auto cut = [len](auto& v) { v.resize(len); };
  cut(sc.u);
  cut(sc.d);
  cut(sc.echo);
  cut(sc.near_speech);
  cut(sc.noise);
  cut(sc.far_active);
  cut(sc.near_active);
  return sc;
}

GscScene trimmed_gsc_scene(const GscSceneParams& p, std::uint64_t seed, std::size_t hop) {
  GscScene sc = make_gsc_scene(p, seed);
  const std::size_t len = sc.target_ref.size() / hop * hop;
  for (auto& ch : sc.mics) ch.resize(len);
  sc.target_ref.resize(len);
  sc.interf_ref.resize(len);
  return sc;
}

std::vector<double> process_aec_scene(const EngineSpec& spec, StepMode mode,
                                      const AecScene& sc) {
  const MdfConfig cfg = aec_config();
  EchoCanceller ec(cfg, make_optimizer(spec, cfg.blocks, cfg.bins()), mode);
  return ec.process(sc.u, sc.d);
}

std::vector<double> process_gsc_scene(const EngineSpec& spec, StepMode mode,
                                      const GscScene& sc) {
  const GscConfig cfg = gsc_config();
  Beamformer bf(cfg, sc.target_doa_deg, make_optimizer(spec, cfg.mics, cfg.bins()), mode);
  return bf.process(sc.mics);
}

SceneScores score_aec_scene(const AecScene& sc, const std::vector<double>& out,
                            std::size_t hop) {
  SceneScores s;
  // The pipeline emits input chunk c one hop later; align references the same way.
  const std::vector<double> d_al = delayed(sc.d, hop);
  std::vector<std::uint8_t> mask(sc.d.size(), 0);
  for (std::size_t i = 0; i + hop < mask.size(); ++i)
    mask[i + hop] = sc.far_active[i] && !sc.near_active[i];
  s.erle = erle_masked_db(d_al, out, mask);
  if (energy(sc.near_speech) > 0.0)
    s.sisdr = si_sdr_db(delayed(sc.near_speech, hop), out);
  return s;
}

SceneScores score_gsc_scene(const GscScene& sc, const std::vector<double>& out,
                            std::size_t hop) {
  SceneScores s;
  const std::vector<double> t_al = delayed(sc.target_ref, hop);
  const std::vector<double> i_al = delayed(sc.interf_ref, hop);
  s.sisdr = si_sdr_db(t_al, out);
  const SirSar ss = sir_sar_db(out, t_al, i_al);
  s.sir = ss.sir_db;
  s.sar = ss.sar_db;
  return s;
}

struct EvalOutcome {
  double erle = std::nan("");
  double sisdr = std::nan("");
  double sir = std::nan("");
  double sar = std::nan("");
  double rtf = std::nan("");
  std::size_t scenes = 0;
};

double mean_defined(const std::vector<SceneScores>& rows, double SceneScores::*field) {
  double acc = 0.0;
  std::size_t n = 0;
  for (const SceneScores& r : rows)
    if (!std::isnan(r.*field)) {
      acc += r.*field;
      ++n;
    }
  return n == 0 ? std::nan("") : acc / static_cast<double>(n);
}

EvalOutcome run_eval(const RunOpts& o, const EngineSpec& spec) {
  const StepMode mode = parse_step_mode(o.mode);
  const std::size_t hop = 256;
  std::vector<SceneScores> rows(o.scenes);

  auto worker = [&](std::size_t first, std::size_t stride) {
    for (std::size_t i = first; i < o.scenes; i += stride) {
      const std::uint64_t s = Rng::derive(o.seed, kEvalTag, i);
      if (o.task == "aec") {
        const AecScene sc = trimmed_aec_scene(aec_scene_params(o.duration_s), s, hop);
        rows[i] = score_aec_scene(sc, process_aec_scene(spec, mode, sc), hop);
      } else {
        const GscScene sc = trimmed_gsc_scene(gsc_scene_params(o.duration_s), s, hop);
        rows[i] = score_gsc_scene(sc, process_gsc_scene(spec, mode, sc), hop);
      }
    }
  };
  const std::size_t nthreads = std::min<std::size_t>(o.threads, o.scenes);
  if (nthreads <= 1) {
    worker(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < nthreads; ++t) pool.emplace_back(worker, t, nthreads);
    for (auto& th : pool) th.join();
  }

  EvalOutcome e;
  e.scenes = o.scenes;
  e.erle = mean_defined(rows, &SceneScores::erle);
  e.sisdr = mean_defined(rows, &SceneScores::sisdr);
  e.sir = mean_defined(rows, &SceneScores::sir);
  e.sar = mean_defined(rows, &SceneScores::sar);

  // Real-time factor is always timed single-threaded over a few scenes,
  // engine processing only.
  double proc_s = 0.0, audio_s = 0.0;
  for (std::size_t i = 0; i < std::min<std::size_t>(4, o.scenes); ++i) {
    const std::uint64_t s = Rng::derive(o.seed, kEvalTag, i);
    if (o.task == "aec") {
      const AecScene sc = trimmed_aec_scene(aec_scene_params(o.duration_s), s, hop);
      const auto t0 = std::chrono::steady_clock::now();
      const auto out = process_aec_scene(spec, mode, sc);
      proc_s += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      audio_s += static_cast<double>(sc.d.size()) / 16000.0;
    } else {
      const GscScene sc = trimmed_gsc_scene(gsc_scene_params(o.duration_s), s, hop);
      const auto t0 = std::chrono::steady_clock::now();
      const auto out = process_gsc_scene(spec, mode, sc);
      proc_s += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      audio_s += static_cast<double>(sc.mics[0].size()) / 16000.0;
    }
  }
  e.rtf = proc_s / audio_s;
  return e;
}

EngineSpec engine_from_opts(const RunOpts& o) {
  EngineSpec spec;
  if (is_learned(o.size)) {
    if (o.ckpt.empty())
      throw ConfigError("a learned controller needs --ckpt with trained weights");
    auto [nc, params] = load_net(o.ckpt);
    const NetConfig want = net_config(o.task, size_hidden(o.size));
    if (nc.hidden != want.hidden || nc.taps != want.taps || nc.bins != want.bins ||
        nc.band != want.band)
      throw ConfigError("checkpoint geometry does not match task " + o.task + " size " +
                        o.size);
    spec.learned = true;
    spec.kind = OptimizerKind::Net;
    spec.net = nc;
    spec.params = std::move(params);
  } else {
    spec.kind = baseline_kind(o.size);
  }
  return spec;
}

double flops_millions(const RunOpts& o, const EngineSpec& spec) {
  const StepMode mode = parse_step_mode(o.mode);
  const NetConfig* net = spec.learned ? &spec.net : nullptr;
  const double per_frame = o.task == "aec"
                               ? aec_flops_per_frame(aec_config(), mode, spec.kind, net)
                               : gsc_flops_per_frame(gsc_config(), mode, spec.kind, net);
  return per_frame / 1e6;
}

// ---- CSV / JSON row emission -------------------------------------------------

const char* kRowHeader =
    "label,task,size,mode,loss,status,params,mflops,scenes,seed,erle_db,si_sdr_db,"
    "sir_db,sar_db,rtf";

std::string fmt_metric(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string csv_row(const RunOpts& o, const std::string& status, std::size_t params,
                    double mflops, const EvalOutcome& e) {
  char head[256];
  std::snprintf(head, sizeof head, "%s,%s,%s,%s,%s,%s,%zu", run_label(o).c_str(),
                o.task.c_str(), o.size.c_str(), mode_label(o.mode).c_str(),
                o.loss.c_str(), status.c_str(), params);
  char mid[64];
  if (std::isnan(mflops)) {
    std::snprintf(mid, sizeof mid, ",,%zu,%llu", e.scenes,
                  static_cast<unsigned long long>(o.seed));
  } else {
    std::snprintf(mid, sizeof mid, ",%.6g,%zu,%llu", mflops, e.scenes,
                  static_cast<unsigned long long>(o.seed));
  }
  return std::string(head) + mid + "," + fmt_metric(e.erle) + "," + fmt_metric(e.sisdr) +
         "," + fmt_metric(e.sir) + "," + fmt_metric(e.sar) + "," + fmt_metric(e.rtf);
}

nlohmann::json json_row(const RunOpts& o, const std::string& status, std::size_t params,
                        double mflops, const EvalOutcome& e) {
  nlohmann::json j;
  j["label"] = run_label(o);
  j["task"] = o.task;
  j["size"] = o.size;
  j["mode"] = mode_label(o.mode);
  j["loss"] = o.loss;
  j["status"] = status;
  j["params"] = params;
  j["mflops_per_frame"] = mflops;
  j["scenes"] = e.scenes;
  j["seed"] = o.seed;
  auto put = [&](const char* key, double v) {
    if (std::isnan(v))
      j["metrics"][key] = nullptr;
    else
      j["metrics"][key] = v;
  };
  put("erle_db", e.erle);
  put("si_sdr_db", e.sisdr);
  put("sir_db", e.sir);
  put("sar_db", e.sar);
  j["rtf"] = std::isnan(e.rtf) ? nlohmann::json() : nlohmann::json(e.rtf);
  j["hardware"] = hardware_string();
  if (!o.ckpt.empty()) j["checkpoint"] = o.ckpt;
  return j;
}

// ---- verbs -------------------------------------------------------------------

int cmd_generate(const RunOpts& o, const KvBinding& kv) {
  validate_combo(o, false);
  fs::create_directories(o.out);
  for (std::size_t i = 0; i < o.scenes; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "scene_%05zu", i);
    const std::string dir = o.out + "/" + name;
    const std::uint64_t s = Rng::derive(o.seed, kGenTag, i);
    if (o.task == "aec") {
      const AecSceneParams p = aec_scene_params(o.duration_s);
      save_aec_scene(dir, p, make_aec_scene(p, s));
    } else {
      const GscSceneParams p = gsc_scene_params(o.duration_s);
      save_gsc_scene(dir, p, make_gsc_scene(p, s));
    }
  }
  kv.write_resolved(o.out + "/generate_config.txt");
  std::printf("wrote %zu %s scenes to %s\n", o.scenes, o.task.c_str(), o.out.c_str());
  return 0;
}

struct TrainOpts {
  RunOpts run;
  std::size_t epochs = 8;
  std::size_t batch = 16;
  double lr = 1e-4;
  double clip = 5.0;
  std::size_t seg_min = 8, seg_max = 128;
  std::string resume;
};

int cmd_train(const TrainOpts& t, const KvBinding& kv) {
  const RunOpts& o = t.run;
  validate_combo(o, true);
  if (t.epochs == 0 || t.batch == 0) throw ConfigError("epochs and batch must be positive");
  if (t.lr <= 0.0) throw ConfigError("learn rate must be positive");
  if (t.seg_min == 0 || t.seg_max < t.seg_min)
    throw ConfigError("bad segment length range");
  fs::create_directories(o.out);

  const NetConfig nc = net_config(o.task, size_hidden(o.size));
  const std::string ckpt = o.ckpt.empty() ? o.out + "/" + canonical_ckpt_name(o) : o.ckpt;

  TrainSchedule sched;
  sched.scenes = o.scenes;
  sched.epochs = t.epochs;
  sched.batch = t.batch;
  sched.seg_min = t.seg_min;
  sched.seg_max = t.seg_max;
  sched.adam.lr = t.lr;
  sched.clip = t.clip;
  sched.seed = o.seed;
  sched.csv_path = o.out + "/train_log.csv";
  sched.checkpoint_path = ckpt;
  sched.resume_path = t.resume;

  SegmentOptions seg;
  seg.mode = parse_step_mode(o.mode);
  seg.loss = parse_loss_kind(o.loss);

  std::vector<double> params;
  if (!t.resume.empty()) {
    params.resize(nc.param_count());  // overwritten from the sidecar
  } else {
    params = init_params(nc, Rng::derive(o.seed, 0x1A17));
  }

  kv.write_resolved(o.out + "/train_config.txt");
  std::printf("training %s (%s, %zu params) on %zu scenes, %zu epochs\n",
              run_label(o).c_str(), o.task.c_str(), nc.param_count(), o.scenes, t.epochs);

  TrainReport rep;
  if (o.task == "aec") {
    rep = train_echo_controller(aec_config(), nc, seg, aec_scene_params(o.duration_s),
                                sched, params);
  } else {
    rep = train_beam_controller(gsc_config(), nc, seg, gsc_scene_params(o.duration_s),
                                sched, params);
  }

  std::printf("best loss %.6f at epoch %zu after %zu steps; checkpoint %s\n",
              rep.best_loss, rep.best_epoch, rep.steps, ckpt.c_str());
  if (rep.diverged) {
    std::fprintf(stderr, "training diverged; best parameters kept\n");
    return 3;
  }
  return 0;
}

struct EvalOpts {
  RunOpts run;
  std::size_t save_audio = 0;
};

int cmd_eval(const EvalOpts& ev, const KvBinding& kv) {
  const RunOpts& o = ev.run;
  validate_combo(o, false);
  fs::create_directories(o.out);
  const EngineSpec spec = engine_from_opts(o);
  const std::size_t params = spec.learned ? spec.net.param_count() : 0;
  const double mflops = flops_millions(o, spec);

  const EvalOutcome e = run_eval(o, spec);

  std::ofstream csv(o.out + "/report.csv");
  if (!csv) throw IoError("cannot write " + o.out + "/report.csv");
  csv << kRowHeader << "\n" << csv_row(o, "ok", params, mflops, e) << "\n";
  std::ofstream js(o.out + "/report.json");
  if (!js) throw IoError("cannot write " + o.out + "/report.json");
  js << json_row(o, "ok", params, mflops, e).dump(2) << "\n";
  kv.write_resolved(o.out + "/eval_config.txt");

  const StepMode mode = parse_step_mode(o.mode);
  for (std::size_t i = 0; i < std::min(ev.save_audio, o.scenes); ++i) {
    const std::uint64_t s = Rng::derive(o.seed, kEvalTag, i);
    char name[48];
    std::snprintf(name, sizeof name, "eval_scene_%03zu_out.wav", i);
    if (o.task == "aec") {
      const AecScene sc = trimmed_aec_scene(aec_scene_params(o.duration_s), s, 256);
      write_wav_mono(o.out + "/" + name, process_aec_scene(spec, mode, sc), 16000);
    } else {
      const GscScene sc = trimmed_gsc_scene(gsc_scene_params(o.duration_s), s, 256);
      write_wav_mono(o.out + "/" + name, process_gsc_scene(spec, mode, sc), 16000);
    }
  }

  std::printf("%s\n%s\n", kRowHeader, csv_row(o, "ok", params, mflops, e).c_str());
  return 0;
}

struct BenchOpts {
  RunOpts run;  // task, scenes, seed, duration, out, threads shared
  std::vector<std::string> sizes{"S", "M", "L"};
  std::vector<std::string> modes{"p", "pu", "pux2"};
  std::vector<std::string> losses{"log_mse"};
  std::vector<std::string> baselines;
  std::string ckpt_dir;
};

int cmd_bench(const BenchOpts& b, const KvBinding& kv) {
  RunOpts base = b.run;
  if (base.task != "aec" && base.task != "gsc")
    throw ConfigError("unknown task: " + base.task);
  if (base.out.empty()) throw ConfigError("an output directory is required");
  fs::create_directories(base.out);

  struct Cell {
    RunOpts opts;
    std::string status;
    std::size_t params = 0;
    double mflops = std::nan("");
    EvalOutcome e;
  };
  std::vector<Cell> cells;
  std::size_t evaluated = 0;

  for (const std::string& loss : b.losses) {
    for (const std::string& mode : b.modes) {
      for (const std::string& size : b.sizes) {
        Cell c;
        c.opts = base;
        c.opts.size = size;
        c.opts.mode = mode;
        c.opts.loss = loss;
        validate_combo(c.opts, false);
        if (!is_learned(size)) throw ConfigError("--sizes lists model sizes; use --baselines");
        if (b.ckpt_dir.empty()) throw ConfigError("bench needs --ckpt-dir for model cells");
        c.opts.ckpt = b.ckpt_dir + "/" + canonical_ckpt_name(c.opts);
        if (!fs::exists(c.opts.ckpt)) {
          // Static columns stay meaningful for the gap row: both depend only
          // on the cell's geometry, not on trained weights.
          EngineSpec ghost;
          ghost.learned = true;
          ghost.kind = OptimizerKind::Net;
          ghost.net = net_config(c.opts.task, size_hidden(size));
          c.params = ghost.net.param_count();
          c.mflops = flops_millions(c.opts, ghost);
          c.status = "missing";
          std::fprintf(stderr, "missing checkpoint: %s\n", c.opts.ckpt.c_str());
        } else {
          const EngineSpec spec = engine_from_opts(c.opts);
          c.params = spec.net.param_count();
          c.mflops = flops_millions(c.opts, spec);
          c.e = run_eval(c.opts, spec);
          c.status = "ok";
          ++evaluated;
        }
        cells.push_back(std::move(c));
      }
    }
  }
  for (const std::string& bl : b.baselines) {
    for (const std::string& mode : b.modes) {
      Cell c;
      c.opts = base;
      c.opts.size = bl;
      c.opts.mode = mode;
      validate_combo(c.opts, false);
      const EngineSpec spec = engine_from_opts(c.opts);
      c.mflops = flops_millions(c.opts, spec);
      c.e = run_eval(c.opts, spec);
      c.status = "ok";
      ++evaluated;
      cells.push_back(std::move(c));
    }
  }
  if (evaluated == 0) throw IoError("no bench cell could be evaluated");

  std::ofstream csv(base.out + "/bench.csv");
  if (!csv) throw IoError("cannot write " + base.out + "/bench.csv");
  csv << kRowHeader << "\n";
  for (const Cell& c : cells)
    csv << csv_row(c.opts, c.status, c.params, c.mflops, c.e) << "\n";

  // Scaling sanity: within a (loss, mode) group a bigger model should not
  // score worse. Self-supervised groups are allowed to break this (the trend
  // the larger tables show); every violation is reported either way.
  std::ofstream notes(base.out + "/bench_notes.txt");
  if (!notes) throw IoError("cannot write " + base.out + "/bench_notes.txt");
  std::size_t flagged = 0;
  for (const std::string& loss : b.losses) {
    for (const std::string& mode : b.modes) {
      const Cell* prev = nullptr;
      for (const std::string& size : b.sizes) {
        const Cell* cur = nullptr;
        for (const Cell& c : cells)
          if (c.status == "ok" && c.opts.size == size && c.opts.mode == mode &&
              c.opts.loss == loss)
            cur = &c;
        if (!cur) continue;
        if (prev) {
          const double mp = base.task == "aec" ? prev->e.erle : prev->e.sisdr;
          const double mc = base.task == "aec" ? cur->e.erle : cur->e.sisdr;
          if (!std::isnan(mp) && !std::isnan(mc) && mc < mp) {
            notes << run_label(cur->opts) << " underperforms " << run_label(prev->opts)
                  << " (" << fmt_metric(mc) << " < " << fmt_metric(mp) << " dB)\n";
            ++flagged;
          }
        }
        prev = cur;
      }
    }
  }
  if (flagged == 0) notes << "all evaluated groups scale monotonically\n";
  kv.write_resolved(base.out + "/bench_config.txt");

  std::printf("bench wrote %zu rows (%zu evaluated) to %s/bench.csv; %zu scaling notes\n",
              cells.size(), evaluated, base.out.c_str(), flagged);
  return 0;
}

void add_common(CLI::App* sub, RunOpts& o, KvBinding& kv, std::string* config_path,
                bool with_model) {
  sub->add_option("--task", o.task, "aec or gsc")->capture_default_str();
  kv.add("task", &o.task);
  if (with_model) {
    sub->add_option("--size", o.size, "model size S|M|L or baseline nlms|kf|rls|frozen")
        ->capture_default_str();
    kv.add("size", &o.size);
    sub->add_option("--mode", o.mode, "step mode p|pu|pux2")->capture_default_str();
    kv.add("mode", &o.mode);
    sub->add_option("--loss", o.loss, "log_power|log_mse|neg_si_sdr")
        ->capture_default_str();
    kv.add("loss", &o.loss);
  }
  sub->add_option("--seed", o.seed, "base seed")->capture_default_str();
  kv.add("seed", &o.seed);
  sub->add_option("--scenes", o.scenes, "scene count")->capture_default_str();
  kv.add("scenes", &o.scenes);
  sub->add_option("--duration", o.duration_s, "scene length in seconds")
      ->capture_default_str();
  kv.add("duration", &o.duration_s);
  sub->add_option("--threads", o.threads, "thread budget")->capture_default_str();
  kv.add("threads", &o.threads);
  sub->add_option("--out", o.out, "output directory");
  kv.add("out", &o.out);
  sub->add_option("--config", *config_path, "key=value file; flags override");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"streaming adaptive filter toolkit"};
  app.require_subcommand(1);

  std::string gen_cfg, train_cfg, eval_cfg, bench_cfg;
  KvBinding gen_kv, train_kv, eval_kv, bench_kv;

  RunOpts gen_o;
  gen_o.scenes = 10;
  CLI::App* gen = app.add_subcommand("generate", "write synthetic scenes to disk");
  add_common(gen, gen_o, gen_kv, &gen_cfg, false);

  TrainOpts tr;
  tr.run.scenes = 2000;
  CLI::App* train = app.add_subcommand("train", "train a learned controller");
  add_common(train, tr.run, train_kv, &train_cfg, true);
  train->add_option("--ckpt", tr.run.ckpt, "checkpoint output path (default out dir)");
  train_kv.add("ckpt", &tr.run.ckpt);
  train->add_option("--epochs", tr.epochs, "epochs to run now (numbering continues on resume)")
      ->capture_default_str();
  train_kv.add("epochs", &tr.epochs);
  train->add_option("--batch", tr.batch, "utterances per step")->capture_default_str();
  train_kv.add("batch", &tr.batch);
  train->add_option("--lr", tr.lr, "adam learn rate")->capture_default_str();
  train_kv.add("lr", &tr.lr);
  train->add_option("--clip", tr.clip, "global gradient norm cap")->capture_default_str();
  train_kv.add("clip", &tr.clip);
  train->add_option("--seg-min", tr.seg_min, "min segment frames")->capture_default_str();
  train_kv.add("seg-min", &tr.seg_min);
  train->add_option("--seg-max", tr.seg_max, "max segment frames")->capture_default_str();
  train_kv.add("seg-max", &tr.seg_max);
  train->add_option("--resume", tr.resume, "training sidecar to continue from");
  train_kv.add("resume", &tr.resume);

  EvalOpts ev;
  ev.run.scenes = 200;
  CLI::App* eval = app.add_subcommand("eval", "score one configuration on held-out scenes");
  add_common(eval, ev.run, eval_kv, &eval_cfg, true);
  eval->add_option("--ckpt", ev.run.ckpt, "trained weights for learned sizes");
  eval_kv.add("ckpt", &ev.run.ckpt);
  eval->add_option("--save-audio", ev.save_audio, "dump processed audio for first N scenes")
      ->capture_default_str();
  eval_kv.add("save-audio", &ev.save_audio);

  BenchOpts be;
  be.run.scenes = 50;
  CLI::App* bench = app.add_subcommand("bench", "evaluate a size x mode x loss matrix");
  add_common(bench, be.run, bench_kv, &bench_cfg, false);
  bench->add_option("--sizes", be.sizes, "model sizes to sweep")
      ->delimiter(',')
      ->capture_default_str();
  bench_kv.add("sizes", &be.sizes);
  bench->add_option("--modes", be.modes, "step modes to sweep")
      ->delimiter(',')
      ->capture_default_str();
  bench_kv.add("modes", &be.modes);
  bench->add_option("--losses", be.losses, "loss kinds to sweep")
      ->delimiter(',')
      ->capture_default_str();
  bench_kv.add("losses", &be.losses);
  bench->add_option("--baselines", be.baselines, "classical rows to add (nlms,kf,rls)")
      ->delimiter(',');
  bench_kv.add("baselines", &be.baselines);
  bench->add_option("--ckpt-dir", be.ckpt_dir,
                    "directory of <task>-<size>-<sup>-<mode>.net files");
  bench_kv.add("ckpt-dir", &be.ckpt_dir);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) {
      if (!gen_cfg.empty()) gen_kv.apply_file(*gen, gen_cfg);
      return cmd_generate(gen_o, gen_kv);
    }
    if (train->parsed()) {
      if (!train_cfg.empty()) train_kv.apply_file(*train, train_cfg);
      return cmd_train(tr, train_kv);
    }
    if (eval->parsed()) {
      if (!eval_cfg.empty()) eval_kv.apply_file(*eval, eval_cfg);
      return cmd_eval(ev, eval_kv);
    }
    if (bench->parsed()) {
      if (!bench_cfg.empty()) bench_kv.apply_file(*bench, bench_cfg);
      return cmd_bench(be, bench_kv);
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "invalid configuration: %s\n", e.what());
    return 2;
  } catch (const DivergedError& e) {
    std::fprintf(stderr, "diverged: %s\n", e.what());
    return 3;
  } catch (const IoError& e) {
    std::fprintf(stderr, "i/o failure: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
