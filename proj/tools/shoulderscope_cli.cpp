// shoulderscope command-line front end: synth, recognize, eval, pek.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "shoulderscope/error.hpp"
#include "shoulderscope/imgproc.hpp"
#include "shoulderscope/keyrec.hpp"
#include "shoulderscope/layout.hpp"
#include "shoulderscope/pek.hpp"
#include "shoulderscope/rng.hpp"
#include "shoulderscope/synthcam.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace shoulderscope;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitPipeline = 4;

// Reads and writes flag values as JSON: {"<subcommand>": {"<flag>": value}}.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    return dump(app, default_also).dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw CLI::ConversionError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config must be a JSON object");
    std::vector<CLI::ConfigItem> items;
    collect(j, {}, items);
    return items;
  }

 private:
  static json dump(const CLI::App* app, bool default_also) {
    json j = json::object();
    for (const CLI::Option* opt : app->get_options({})) {
      if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
      const std::string name = opt->get_lnames()[0];
      if (opt->get_type_size() != 0) {
        const bool list = opt->get_items_expected_max() > 1;
        if (opt->count() == 1 && !list) {
          j[name] = opt->results().at(0);
        } else if (opt->count() > 0) {
          j[name] = opt->results();
        } else if (default_also && !opt->get_default_str().empty()) {
          j[name] = default_value(opt->get_default_str());
        }
      } else if (opt->count() > 0 || default_also) {
        j[name] = opt->count() > 0;
      }
    }
    for (const CLI::App* sub : app->get_subcommands({})) {
      if (sub->parsed()) j[sub->get_name()] = dump(sub, default_also);
    }
    return j;
  }

  // "[a,b]" is how CLI11 renders a vector default
  static json default_value(const std::string& s) {
    if (s.size() < 2 || s.front() != '[' || s.back() != ']') return s;
    json arr = json::array();
    std::stringstream in(s.substr(1, s.size() - 2));
    for (std::string item; std::getline(in, item, ',');) arr.push_back(item);
    return arr;
  }

  static void collect(const json& j, std::vector<std::string> parents,
                      std::vector<CLI::ConfigItem>& out) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it->is_object()) {
        auto p = parents;
        p.push_back(it.key());
        collect(*it, p, out);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = it.key();
      if (it->is_array()) {
        for (const auto& v : *it) item.inputs.push_back(v.is_string() ? v.get<std::string>() : v.dump());
      } else if (it->is_string()) {
        item.inputs = {it->get<std::string>()};
      } else {
        item.inputs = {it->dump()};
      }
      out.push_back(std::move(item));
    }
  }
};

struct IoFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t default_seed() {
  const char* env = std::getenv("SHOULDERSCOPE_SEED");
  if (env == nullptr || *env == '\0') return 1;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(env, &used, 0);
    if (used == std::string(env).size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::kInvalidArgument, "SHOULDERSCOPE_SEED is not an unsigned integer");
}

json read_json_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoFailure("cannot open " + p.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoFailure("cannot parse " + p.string() + ": " + e.what());
  }
}

void write_text(const std::optional<fs::path>& p, const std::string& text) {
  if (!p) {
    std::cout << text << '\n';
    return;
  }
  if (p->has_parent_path()) fs::create_directories(p->parent_path());
  std::ofstream out(*p);
  if (!out) throw IoFailure("cannot write " + p->string());
  out << text << '\n';
  if (!out) throw IoFailure("write failed for " + p->string());
}

// A builtin name such as "ipad-digits", or a layout JSON file.
layout::KeyboardLayout load_layout(const std::string& source) {
  std::error_code ec;
  if (source.ends_with(".json") || fs::is_regular_file(source, ec)) {
    return layout::layout_from_json(read_json_file(source));
  }
  return layout::builtin_layout(source);
}

std::string joined(const std::vector<std::string>& code) {
  std::string s;
  for (const auto& c : code) s += c;
  return s;
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::string layout = "ipad-digits";
  std::string pin;
  std::size_t count = 0;
  std::size_t length = 4;
  std::vector<std::string> cameras{"front"};
  fs::path out;
  double noise = 2.0;
  double jitter = 0.0;
  std::optional<std::uint64_t> seed;
  synthcam::Tap timing;
  int transit = 6;
  double max_speed = 2.5;
};

synthcam::Video synth_one(const layout::KeyboardLayout& l, const SynthArgs& a,
                          const std::string& camera, const std::string& pin, std::uint64_t seed) {
  auto cfg = synthcam::make_scene(l, synthcam::camera_preset(camera));
  cfg.noise_sigma = a.noise;
  cfg.jitter_px = a.jitter;
  auto script = synthcam::script_from_pin(l, pin, a.timing);
  script.transit = a.transit;
  script.max_speed_mm = a.max_speed;
  return synthcam::synth_tap_video(cfg, script, seed);
}

void save_video(const synthcam::Video& v, const fs::path& dir) {
  imgproc::save_frame_directory(v.frames, dir);
  write_text(dir / "ground_truth.json", synthcam::to_json(v.truth).dump(2));
}

int cmd_synth(const SynthArgs& a) {
  const auto l = load_layout(a.layout);
  const std::uint64_t seed = a.seed.value_or(default_seed());
  if (a.pin.empty() == (a.count == 0)) {
    throw Error(ErrorCode::kInvalidArgument, "give exactly one of --pin or --count");
  }
  if (!a.pin.empty() && a.cameras.size() == 1) {
    const auto v = synth_one(l, a, a.cameras[0], a.pin, seed);
    save_video(v, a.out);
    std::cout << "wrote " << v.frames.size() << " frames to " << a.out.string() << '\n';
    return kExitOk;
  }
  // batch: <out>/<camera>/<index>/ plus a manifest
  const std::size_t n = a.pin.empty() ? a.count : 1;
  json videos = json::array();
  std::size_t total = 0;
  for (const auto& camera : a.cameras) {
    for (std::size_t i = 0; i < n; ++i) {
      std::string pin = a.pin;
      if (pin.empty()) {
        Rng rng(derive_seed({seed, 3, i}));
        for (std::size_t c = 0; c < a.length; ++c) {
          const auto& keys = l.keys();
          pin += keys[rng.below(keys.size())].label;
        }
      }
      char name[16];
      std::snprintf(name, sizeof name, "%04zu", i);
      const fs::path rel = fs::path(camera) / name;
      const auto v = synth_one(l, a, camera, pin, derive_seed({seed, i}));
      save_video(v, a.out / rel);
      total += v.frames.size();
      videos.push_back({{"frames", rel.string()},
                        {"truth", (rel / "ground_truth.json").string()},
                        {"group", camera}});
    }
  }
  write_text(a.out / "manifest.json", json{{"layout", a.layout}, {"videos", videos}}.dump(2));
  std::cout << "wrote " << videos.size() << " videos (" << total << " frames) and manifest.json to "
            << a.out.string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// recognize

struct RecognizeArgs {
  fs::path frames;
  std::string layout = "ipad-digits";
  std::optional<fs::path> out;
  std::optional<fs::path> annotate;
  std::optional<std::size_t> expected_taps;
  std::vector<int> hand_box;
  std::optional<fs::path> truth;
  std::optional<double> min_screen_area;
  std::optional<std::uint64_t> seed;
  int upscale = 4;
  int clusters = 5;
};

keyrec::RecognizeConfig recognize_config(const RecognizeArgs& a) {
  keyrec::RecognizeConfig rc;
  rc.seed = a.seed.value_or(default_seed());
  rc.tap.expected_taps = a.expected_taps;
  rc.upscale_factor = a.upscale;
  rc.clusters = a.clusters;
  if (a.min_screen_area) rc.screen.min_area_fraction = *a.min_screen_area;
  if (!a.hand_box.empty()) {
    if (a.hand_box.size() != 4 || a.hand_box[2] < 1 || a.hand_box[3] < 1) {
      throw Error(ErrorCode::kInvalidArgument, "--hand-box needs x,y,w,h with w,h >= 1");
    }
    rc.hand_box = imgproc::PixelRect{a.hand_box[0], a.hand_box[1], a.hand_box[2], a.hand_box[3]};
  } else if (a.truth) {
    rc.hand_box = synthcam::ground_truth_from_json(read_json_file(*a.truth)).hand_box;
  }
  return rc;
}

int cmd_recognize(const RecognizeArgs& a) {
  const auto l = load_layout(a.layout);
  const auto rc = recognize_config(a);
  const auto frames = imgproc::load_frame_directory(a.frames);
  const auto r = keyrec::recognize_sequence(frames, l, rc);
  write_text(a.out, keyrec::to_json(r).dump(2));
  if (a.annotate) imgproc::write_pgm_file(*a.annotate, keyrec::annotate_reference(l, r));
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  fs::path manifest;
  std::optional<std::string> layout;
  std::optional<fs::path> csv;
  std::size_t tolerance = 1;
  bool auto_box = false;
  std::optional<double> min_screen_area;
  std::optional<std::uint64_t> seed;
};

struct Tally {
  std::size_t videos = 0, first = 0, second = 0;
  std::size_t true_taps = 0, matched = 0, false_pos = 0, negatives = 0;

  double rate(std::size_t a, std::size_t b) const { return b ? 100.0 * a / b : 0.0; }
  std::string line() const {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(1);
    s << "n=" << videos << " first=" << rate(first, videos) << "% second=" << rate(second, videos)
      << "% tap_tp=" << rate(matched, true_taps) << "%";
    s.precision(2);
    s << " tap_fp=" << rate(false_pos, negatives) << "%";
    return s.str();
  }
};

int cmd_eval(const EvalArgs& a) {
  const json m = read_json_file(a.manifest);
  const fs::path base = a.manifest.parent_path();
  const auto l = load_layout(a.layout.value_or(m.value("layout", std::string("ipad-digits"))));
  if (!m.contains("videos") || !m.at("videos").is_array()) {
    throw Error(ErrorCode::kInvalidArgument, "manifest needs a \"videos\" array");
  }
  std::ofstream csv;
  if (a.csv) {
    csv.open(*a.csv);
    if (!csv) throw IoFailure("cannot write " + a.csv->string());
    csv << "frames,group,truth,code,first_ok,second_ok,true_taps,detected,matched,false_pos,"
           "frames_total,error\n";
  }
  std::vector<std::string> order;
  std::map<std::string, Tally> groups;
  Tally all;
  for (const auto& v : m.at("videos")) {
    const fs::path frames_dir = base / v.at("frames").get<std::string>();
    const fs::path truth_path = base / v.at("truth").get<std::string>();
    const std::string group = v.value("group", std::string("all"));
    if (!groups.contains(group)) order.push_back(group);
    const auto gt = synthcam::ground_truth_from_json(read_json_file(truth_path));
    const auto frames = imgproc::load_frame_directory(frames_dir);

    keyrec::RecognizeConfig rc;
    rc.seed = a.seed.value_or(default_seed());
    if (!a.auto_box) rc.hand_box = gt.hand_box;
    if (a.min_screen_area) rc.screen.min_area_fraction = *a.min_screen_area;
    std::vector<std::string> code;
    std::vector<std::size_t> detected;
    bool first = false, second = false;
    std::string error;
    try {
      const auto r = keyrec::recognize_sequence(frames, l, rc);
      code = r.code;
      detected = r.touching_frames;
      first = r.code == gt.code();
      const auto alt = r.second_guess();
      second = first || (alt && *alt == gt.code());
    } catch (const PipelineAbort& e) {
      error = e.stage();
    }
    // a detection within +-tolerance frames of an unmatched true tap matches it
    std::vector<bool> used(gt.taps.size(), false);
    std::size_t matched = 0, fp = 0;
    for (const std::size_t f : detected) {
      bool hit = false;
      for (std::size_t i = 0; i < gt.taps.size() && !hit; ++i) {
        const std::size_t t = gt.taps[i].frame;
        if (!used[i] && (f > t ? f - t : t - f) <= a.tolerance) used[i] = hit = true;
      }
      hit ? ++matched : ++fp;
    }
    for (Tally* t : {&groups[group], &all}) {
      ++t->videos;
      t->first += first;
      t->second += second;
      t->true_taps += gt.taps.size();
      t->matched += matched;
      t->false_pos += fp;
      t->negatives += frames.size() - gt.taps.size();
    }
    if (csv.is_open()) {
      csv << v.at("frames").get<std::string>() << ',' << group << ',' << joined(gt.code()) << ','
          << joined(code) << ',' << first << ',' << second << ',' << gt.taps.size() << ','
          << detected.size() << ',' << matched << ',' << fp << ',' << frames.size() << ','
          << error << '\n';
    }
  }
  if (all.videos == 0) throw Error(ErrorCode::kInvalidArgument, "manifest lists no videos");
  for (const auto& g : order) std::cout << "group " << g << ": " << groups[g].line() << '\n';
  std::cout << "overall: " << all.line() << '\n';
  if (order.size() > 1) {
    bool monotone = true;
    for (std::size_t i = 1; i < order.size(); ++i) {
      const auto& p = groups[order[i - 1]];
      const auto& c = groups[order[i]];
      monotone = monotone && c.rate(c.first, c.videos) <= p.rate(p.first, p.videos);
    }
    std::cout << "trend over groups in manifest order: "
              << (monotone ? "monotone non-increasing" : "not monotone") << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// pek

struct PekArgs {
  std::string layout = "ipad-digits";
  std::string mode = "shuffled";
  std::optional<std::uint64_t> seed;
  std::size_t steps = 1;
  double sigma = pek::kDefaultSigma;
  std::optional<fs::path> out;
  std::size_t check_uniformity = 0;
};

int cmd_pek(const PekArgs& a) {
  const auto mode = pek::mode_from_string(a.mode);
  const auto l = load_layout(a.layout);
  const std::uint64_t seed = a.seed.value_or(default_seed());
  if (a.check_uniformity > 0) {
    const auto u = pek::shuffle_uniformity(l, a.check_uniformity, seed);
    std::cout << "chi2 statistic=" << u.statistic << " dof=" << u.dof << " p=" << u.p_value << '\n';
    return kExitOk;
  }
  const auto seq = pek::simulate_session(l, mode, seed, a.steps, a.sigma);
  const json j = mode == pek::Mode::kShuffled ? layout::to_json(seq.front()) : pek::to_json(seq);
  write_text(a.out, j.dump(2));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Keystroke inference from video of a touch screen, with synthetic test data"};
  app.require_subcommand(1);
  app.fallthrough();
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON file with flag values, {\"<subcommand>\": {...}}");
  app.allow_config_extras(CLI::config_extras_mode::error);
  bool echo = false;
  app.add_flag("--echo-config", echo, "Print the effective flags as JSON and exit")
      ->configurable(false);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Render a synthetic tap video with ground truth");
  synth->add_option("--layout", sa.layout, "Builtin layout name or layout JSON file")
      ->capture_default_str();
  synth->add_option("--pin", sa.pin, "Key labels to tap, one character each");
  synth->add_option("--count", sa.count, "Render this many random codes instead of --pin");
  synth->add_option("--length", sa.length, "Code length for --count")->capture_default_str();
  synth->add_option("--camera", sa.cameras, "Camera preset(s); several give a batch")
      ->delimiter(',')
      ->capture_default_str();
  synth->add_option("--out", sa.out, "Output directory")->required();
  synth->add_option("--noise", sa.noise, "Gaussian intensity noise sigma")->capture_default_str();
  synth->add_option("--jitter", sa.jitter, "Per-frame hand tremor, px")->capture_default_str();
  synth->add_option("--seed", sa.seed, "RNG seed (default: SHOULDERSCOPE_SEED or 1)");
  synth->add_option("--approach", sa.timing.approach, "Approach frames per tap")
      ->capture_default_str();
  synth->add_option("--dwell", sa.timing.dwell, "Contact frames per tap")->capture_default_str();
  synth->add_option("--retreat", sa.timing.retreat, "Retreat frames per tap")->capture_default_str();
  synth->add_option("--transit", sa.transit, "Minimum frames between taps")->capture_default_str();
  synth->add_option("--max-speed", sa.max_speed, "Peak hand speed between taps, mm per frame")
      ->capture_default_str();

  RecognizeArgs ra;
  auto* rec = app.add_subcommand("recognize", "Infer the typed code from a frame directory");
  rec->add_option("--frames", ra.frames, "Directory of PGM frames")->required();
  rec->add_option("--layout", ra.layout, "Builtin layout name or layout JSON file")
      ->capture_default_str();
  rec->add_option("--out", ra.out, "Result JSON path (default: stdout)");
  rec->add_option("--annotate", ra.annotate, "Write the reference keyboard with touch points (PGM)");
  rec->add_option("--expected-taps", ra.expected_taps, "Keep only this many touching frames");
  rec->add_option("--hand-box", ra.hand_box, "Seed region x,y,w,h in the first frame")
      ->delimiter(',')
      ->expected(4);
  rec->add_option("--truth", ra.truth, "Take the seed region from a ground-truth JSON file");
  rec->add_option("--min-screen-area", ra.min_screen_area,
                  "Smallest screen area as a fraction of the frame");
  rec->add_option("--seed", ra.seed, "k-means seed (default: SHOULDERSCOPE_SEED or 1)");
  rec->add_option("--upscale", ra.upscale, "Fingertip upscale factor")->capture_default_str();
  rec->add_option("--clusters", ra.clusters, "k-means clusters")->capture_default_str();

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "Score recognition over a batch manifest");
  ev->add_option("--manifest", ea.manifest, "Manifest JSON written by synth")->required();
  ev->add_option("--layout", ea.layout, "Override the manifest layout");
  ev->add_option("--csv", ea.csv, "Write per-video rows as CSV");
  ev->add_option("--tolerance", ea.tolerance, "Frames a detected tap may be off by")
      ->capture_default_str();
  ev->add_flag("--auto-box", ea.auto_box, "Find the hand region instead of using ground truth");
  ev->add_option("--min-screen-area", ea.min_screen_area,
                 "Smallest screen area as a fraction of the frame");
  ev->add_option("--seed", ea.seed, "k-means seed (default: SHOULDERSCOPE_SEED or 1)");

  PekArgs pa;
  auto* pk = app.add_subcommand("pek", "Privacy-enhancing keyboard layouts");
  pk->add_option("--layout", pa.layout, "Builtin layout name or layout JSON file")
      ->capture_default_str();
  pk->add_option("--mode", pa.mode, "shuffled or brownian")->capture_default_str();
  pk->add_option("--seed", pa.seed, "RNG seed (default: SHOULDERSCOPE_SEED or 1)");
  pk->add_option("--steps", pa.steps, "Layouts to emit in brownian mode")->capture_default_str();
  pk->add_option("--sigma", pa.sigma, "Brownian step size, reference px")->capture_default_str();
  pk->add_option("--out", pa.out, "Output JSON path (default: stdout)");
  pk->add_option("--check-uniformity", pa.check_uniformity,
                 "Chi-squared test of label placement over this many shuffles");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }
  if (echo) {
    std::cout << app.config_to_str(true, true) << '\n';
    return kExitOk;
  }

  try {
    if (synth->parsed()) return cmd_synth(sa);
    if (rec->parsed()) return cmd_recognize(ra);
    if (ev->parsed()) return cmd_eval(ea);
    if (pk->parsed()) return cmd_pek(pa);
  } catch (const PipelineAbort& e) {
    std::cerr << "error: pipeline aborted at stage '" << e.stage() << "': " << e.what() << '\n';
    return kExitPipeline;
  } catch (const IoFailure& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::kIoError ? kExitIo : kExitUsage;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitUsage;
}
