#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "ivdoa/checkpoint.hpp"
#include "ivdoa/config.hpp"
#include "ivdoa/csv.hpp"
#include "ivdoa/pipeline.hpp"
#include "ivdoa/rng.hpp"
#include "ivdoa/scene.hpp"
#include "ivdoa/trainer.hpp"
#include "ivdoa/wav.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using namespace ivdoa;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void echo_config(const RunConfig& cfg, const fs::path& dir) {
  std::ofstream out(dir / "effective_config.txt", std::ios::trunc);
  out << render_config(cfg);
}

FoaSignal load_foa(const std::string& path, const RunConfig& cfg) {
  const WavData wav = read_wav(path);
  if (wav.channels.size() != 4)
    throw UsageError(path + ": expected 4 FOA channels, found " +
                     std::to_string(wav.channels.size()));
  if (std::abs(wav.sample_rate - cfg.sample_rate) > 0.5)
    throw UsageError(path + ": sample rate " + std::to_string(wav.sample_rate) +
                     " does not match configured " + std::to_string(cfg.sample_rate));
  FoaSignal sig;
  sig.sample_rate = wav.sample_rate;
  if (cfg.channel_order == "acn") {
    // ACN file order is W, Y, Z, X
    sig.channels[0] = wav.channels[0];
    sig.channels[1] = wav.channels[3];
    sig.channels[2] = wav.channels[1];
    sig.channels[3] = wav.channels[2];
  } else {
    for (int c = 0; c < 4; ++c) sig.channels[c] = wav.channels[c];
  }
  return sig;
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t j = 0; j < std::min(jobs, n); ++j) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------- simulate

SceneSpec scene_from_json(const json& j, const RunConfig& cfg, std::uint64_t default_seed) {
  SceneSpec spec;
  spec.sample_rate = cfg.sample_rate;
  spec.duration_s = j.value("duration_s", 5.0);
  spec.seed = j.value("seed", default_seed);
  if (j.contains("events")) {
    for (const auto& je : j.at("events")) {
      SceneEvent ev;
      ev.onset_s = je.at("onset_s").get<double>();
      ev.offset_s = je.at("offset_s").get<double>();
      ev.direction = direction_from_degrees(je.at("azimuth_deg").get<double>(),
                                            je.at("elevation_deg").get<double>());
      ev.kind = source_kind_from_string(je.value("kind", "white"));
      spec.events.push_back(ev);
    }
  }
  if (j.contains("reverb")) {
    const auto& jr = j.at("reverb");
    spec.reverb.rt60_s = jr.value("rt60_s", 0.0);
    spec.reverb.drr_db = jr.value("drr_db", 0.0);
    spec.reverb.diffuse_directions = jr.value("diffuse_directions", 32);
  }
  if (j.contains("noise")) {
    const auto& jn = j.at("noise");
    spec.noise.enabled = true;
    spec.noise.snr_db = jn.at("snr_db").get<double>();
    spec.noise.kind = jn.value("kind", "white") == "pink" ? NoiseKind::Pink : NoiseKind::White;
  }
  return spec;
}

double range_value(const json& j, Rng& rng) {
  if (j.is_array()) {
    if (j.size() != 2) throw UsageError("spec range must have two entries");
    return rng.uniform(j[0].get<double>(), j[1].get<double>());
  }
  return j.get<double>();
}

// Named scene batch from an explicit list and/or a "generate" block.
std::vector<std::pair<std::string, SceneSpec>> load_scene_batch(const std::string& path,
                                                                const RunConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open scene spec: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw UsageError("malformed scene spec " + path + ": " + e.what());
  }
  std::vector<std::pair<std::string, SceneSpec>> out;
  try {
    if (j.contains("scenes")) {
      std::size_t index = 0;
      for (const auto& js : j.at("scenes")) {
        char name[32];
        std::snprintf(name, sizeof name, "scene_%04zu", index);
        out.emplace_back(js.value("name", std::string(name)),
                         scene_from_json(js, cfg, cfg.seed + index));
        ++index;
      }
    }
    if (j.contains("generate")) {
      const auto& g = j.at("generate");
      const std::size_t count = g.at("count").get<std::size_t>();
      const std::string prefix = g.value("prefix", "scene");
      const std::vector<std::string> kinds =
          g.value("kinds", std::vector<std::string>{"white", "am", "tone"});
      for (std::size_t i = 0; i < count; ++i) {
        Rng rng = Rng::fork(cfg.seed, "scene", i);
        SceneSpec spec;
        spec.sample_rate = cfg.sample_rate;
        spec.duration_s = g.value("duration_s", 5.0);
        spec.seed = rng.next_u64();
        const auto ev_min = g.value("events_min", std::size_t{1});
        const auto ev_max = g.value("events_max", std::size_t{1});
        const std::size_t n_events =
            ev_min + (ev_max > ev_min ? rng.uniform_index(ev_max - ev_min + 1) : 0);
        const double min_len = g.value("event_min_len_s", 0.8);
        const double max_len = g.value("event_max_len_s", 2.5);
        // place events left to right, random lengths and gaps
        std::vector<double> lens(n_events);
        double total = 0.0;
        for (double& l : lens) {
          l = rng.uniform(min_len, max_len);
          total += l;
        }
        if (total > 0.9 * spec.duration_s) {
          const double s = 0.9 * spec.duration_s / total;
          for (double& l : lens) l *= s;
          total = 0.9 * spec.duration_s;
        }
        std::vector<double> gaps(n_events + 1);
        double gap_total = 0.0;
        for (double& gv : gaps) {
          gv = rng.uniform(0.05, 1.0);
          gap_total += gv;
        }
        const double slack = spec.duration_s - total;
        double cursor = 0.0;
        for (std::size_t e = 0; e < n_events; ++e) {
          cursor += slack * gaps[e] / gap_total;
          SceneEvent ev;
          ev.onset_s = cursor;
          ev.offset_s = cursor + lens[e];
          cursor = ev.offset_s;
          ev.direction.azimuth = g.contains("azimuth_deg")
                                     ? range_value(g.at("azimuth_deg"), rng) * kPi / 180.0
                                     : rng.uniform(-kPi, kPi);
          ev.direction.elevation = g.contains("elevation_deg")
                                       ? range_value(g.at("elevation_deg"), rng) * kPi / 180.0
                                       : std::asin(rng.uniform(-1.0, 1.0));
          ev.kind = source_kind_from_string(kinds[rng.uniform_index(kinds.size())]);
          spec.events.push_back(ev);
        }
        if (g.contains("rt60_s")) {
          spec.reverb.rt60_s = range_value(g.at("rt60_s"), rng);
          spec.reverb.drr_db = g.contains("drr_db") ? range_value(g.at("drr_db"), rng) : 0.0;
          spec.reverb.diffuse_directions = g.value("diffuse_directions", 32);
        }
        if (g.contains("snr_db")) {
          spec.noise.enabled = true;
          spec.noise.snr_db = range_value(g.at("snr_db"), rng);
          spec.noise.kind =
              g.value("noise_kind", "white") == "pink" ? NoiseKind::Pink : NoiseKind::White;
        }
        char name[80];
        std::snprintf(name, sizeof name, "%s_%04zu", prefix.c_str(), i);
        out.emplace_back(name, std::move(spec));
      }
    }
  } catch (const json::exception& e) {
    throw UsageError("malformed scene spec " + path + ": " + e.what());
  }
  if (out.empty()) throw UsageError("scene spec " + path + " defines no scenes");
  return out;
}

int cmd_simulate(const RunConfig& cfg, const std::string& spec_path, const std::string& out_dir) {
  const auto batch = load_scene_batch(spec_path, cfg);
  fs::create_directories(out_dir);
  echo_config(cfg, out_dir);
  parallel_for(batch.size(), cfg.jobs, [&](std::size_t i) {
    const auto& [name, spec] = batch[i];
    const SceneRender render = simulate_scene(spec);
    WavData wav;
    wav.sample_rate = render.sample_rate;
    wav.channels.assign(render.mixture.channels.begin(), render.mixture.channels.end());
    write_wav((fs::path(out_dir) / (name + ".wav")).string(), wav);
    std::vector<EventRow> rows;
    for (const auto& ev : render.events)
      rows.push_back({ev.onset_s, ev.offset_s, ev.direction.azimuth * 180.0 / kPi,
                      ev.direction.elevation * 180.0 / kPi});
    write_event_csv((fs::path(out_dir) / (name + "_meta.csv")).string(), rows);
  });
  std::cout << "simulated " << batch.size() << " scene(s) into " << out_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------- estimate

std::vector<FrameRow> track_to_rows(const DoaTrack& track, const std::vector<int>& active) {
  std::vector<FrameRow> rows(track.size());
  for (std::size_t t = 0; t < track.size(); ++t) {
    rows[t].frame_index = t;
    rows[t].active = active[t];
    rows[t].azimuth_deg = track.azimuth[t] * 180.0 / kPi;
    rows[t].elevation_deg = track.elevation[t] * 180.0 / kPi;
  }
  return rows;
}

int cmd_estimate(const RunConfig& cfg, const std::vector<std::string>& inputs,
                 const std::string& mode, const std::string& checkpoint_path,
                 const std::string& out, bool do_postprocess) {
  if (mode != "baseline" && mode != "baseline-nomask" && mode != "neural")
    throw UsageError("estimate: mode must be baseline, baseline-nomask or neural");
  NetworkParams net;
  if (mode == "neural") {
    if (checkpoint_path.empty()) throw UsageError("estimate: neural mode needs --checkpoint");
    net = load_checkpoint(checkpoint_path);
  }
  const bool out_is_dir = inputs.size() > 1 || fs::is_directory(out);
  if (out_is_dir) {
    fs::create_directories(out);
    echo_config(cfg, out);
  }
  parallel_for(inputs.size(), cfg.jobs, [&](std::size_t i) {
    const FoaSignal sig = load_foa(inputs[i], cfg);
    DoaTrack track;
    std::vector<int> active;
    if (mode == "neural") {
      NeuralResult res = run_neural(sig, net, cfg.stft(), cfg.mel_bands);
      active = sad_threshold(res.sad, cfg.sad_alpha);
      track = std::move(res.track);
    } else {
      BaselineResult res = run_baseline(sig, cfg.stft(), mode == "baseline" && cfg.use_mask);
      active.resize(res.track.size());
      for (std::size_t t = 0; t < res.track.size(); ++t)
        active[t] = res.track.degenerate[t] ? 0 : 1;
      track = std::move(res.track);
    }
    if (do_postprocess) track = postprocess(track, segment_events(active));
    const fs::path out_path =
        out_is_dir ? fs::path(out) / (fs::path(inputs[i]).stem().string() + ".csv")
                   : fs::path(out);
    write_frame_csv(out_path.string(), track_to_rows(track, active));
  });
  return 0;
}

// ---------------------------------------------------------------- train

std::vector<std::pair<std::string, std::string>> read_pair_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open list file: " + path);
  const fs::path base = fs::path(path).parent_path();
  std::vector<std::pair<std::string, std::string>> pairs;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::size_t comma = line.find(',');
    if (comma == std::string::npos) throw UsageError("list line must be 'wav,csv': " + line);
    auto resolve = [&](std::string p) {
      fs::path fp(p);
      return fp.is_absolute() ? fp.string() : (base / fp).string();
    };
    pairs.emplace_back(resolve(line.substr(0, comma)), resolve(line.substr(comma + 1)));
  }
  if (pairs.empty()) throw UsageError("empty list file: " + path);
  return pairs;
}

TrainSample build_sample(const std::string& wav_path, const std::string& meta_path,
                         const RunConfig& cfg, const MelFilterbank& fb) {
  const FoaSignal sig = load_foa(wav_path, cfg);
  const SpectrogramSet sp = stft_foa(sig, cfg.stft());
  FeatureSet feats = make_features(sp, fb);
  std::vector<SceneEvent> events;
  for (const auto& row : read_event_csv(meta_path)) {
    SceneEvent ev;
    ev.onset_s = row.onset_s;
    ev.offset_s = row.offset_s;
    ev.direction = direction_from_degrees(row.azimuth_deg, row.elevation_deg);
    events.push_back(ev);
  }
  const GroundTruth gt = ground_truth_tracks(events, sp.num_frames(), cfg.stft(), cfg.sample_rate);
  TrainSample sample;
  sample.features = std::move(feats.x);
  sample.iv_mel_norm = std::move(feats.iv_mel_norm);
  sample.gt.azimuth.resize(gt.doa.size());
  sample.gt.elevation.resize(gt.doa.size());
  sample.gt.degenerate.assign(gt.doa.size(), 0);
  for (std::size_t t = 0; t < gt.doa.size(); ++t) {
    sample.gt.azimuth[t] = gt.doa[t].azimuth;
    sample.gt.elevation[t] = gt.doa[t].elevation;
  }
  sample.z = gt.active;
  return sample;
}

int cmd_train(const RunConfig& cfg, const std::string& train_list, const std::string& val_list,
              const std::string& out_ckpt, std::string log_path) {
  const MelFilterbank fb = mel_filterbank(cfg.mel_bands, cfg.fft_size, cfg.sample_rate);
  std::vector<TrainSample> train, val;
  for (const auto& [wav, meta] : read_pair_list(train_list))
    train.push_back(build_sample(wav, meta, cfg, fb));
  if (!val_list.empty())
    for (const auto& [wav, meta] : read_pair_list(val_list))
      val.push_back(build_sample(wav, meta, cfg, fb));

  NetConfig net_cfg = cfg.net;
  net_cfg.bands = cfg.mel_bands;
  NetworkParams params = NetworkParams::init(net_cfg, cfg.seed);
  std::cout << "network parameters: " << params.parameter_count() << "\n";
  std::cout << "training on " << train.size() << " recording(s), validating on " << val.size()
            << "\n";

  if (log_path.empty()) log_path = out_ckpt + ".log.csv";
  const fs::path parent = fs::path(out_ckpt).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  std::ofstream log(log_path, std::ios::trunc);
  if (!log) throw UsageError("cannot write loss log: " + log_path);
  log << "epoch,lr,loss,loss_doa,loss_sad,val_de_deg\n";
  log.precision(10);

  TrainOptions opt;
  opt.epochs = cfg.epochs;
  opt.schedule = cfg.schedule;
  opt.augment = cfg.augment;
  opt.seed = cfg.seed;
  train_network(params, train, val, opt, [&](const EpochStats& s) {
    log << s.epoch << ',' << s.lr << ',' << s.loss << ',' << s.loss_doa << ',' << s.loss_sad
        << ',' << s.val_de_deg << '\n';
    log.flush();
    std::cout << "epoch " << s.epoch << " lr " << s.lr << " loss " << s.loss << " (doa "
              << s.loss_doa << ", sad " << s.loss_sad << ") val DE " << s.val_de_deg << "\n";
  });

  if (!parent.empty()) echo_config(cfg, parent);
  save_checkpoint(out_ckpt, params);
  std::cout << "checkpoint written to " << out_ckpt << "\n";
  return 0;
}

// ---------------------------------------------------------------- eval

struct FramePair {
  DoaTrack est;
  std::vector<int> est_active;
  DoaTrack gt;
  std::vector<int> gt_z;
};

FramePair load_pair(const std::string& est_csv, const std::string& gt_csv, const RunConfig& cfg) {
  const auto rows = read_frame_csv(est_csv);
  if (rows.empty()) throw UsageError("empty estimate CSV: " + est_csv);
  FramePair pair;
  const std::size_t frames = rows.size();
  pair.est.azimuth.resize(frames);
  pair.est.elevation.resize(frames);
  pair.est.degenerate.assign(frames, 0);
  pair.est_active.resize(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    if (rows[t].frame_index != t)
      throw UsageError(est_csv + ": frame indices must be consecutive from 0");
    pair.est.azimuth[t] = rows[t].azimuth_deg * kPi / 180.0;
    pair.est.elevation[t] = rows[t].elevation_deg * kPi / 180.0;
    pair.est_active[t] = rows[t].active;
  }

  std::vector<SceneEvent> events;
  const StftConfig stft_cfg = cfg.stft();
  const double hop_s = static_cast<double>(stft_cfg.hop) / cfg.sample_rate;
  const double span_s =
      static_cast<double>(frames) * hop_s + static_cast<double>(stft_cfg.fft_size) / cfg.sample_rate;
  for (const auto& row : read_event_csv(gt_csv)) {
    if (row.offset_s > span_s)
      throw UsageError("ground truth " + gt_csv + " extends to " + std::to_string(row.offset_s) +
                       " s but estimate " + est_csv + " covers only " + std::to_string(span_s) +
                       " s (mismatched frame count)");
    SceneEvent ev;
    ev.onset_s = row.onset_s;
    ev.offset_s = row.offset_s;
    ev.direction = direction_from_degrees(row.azimuth_deg, row.elevation_deg);
    events.push_back(ev);
  }
  const GroundTruth gt = ground_truth_tracks(events, frames, stft_cfg, cfg.sample_rate);
  pair.gt.azimuth.resize(frames);
  pair.gt.elevation.resize(frames);
  pair.gt.degenerate.assign(frames, 0);
  for (std::size_t t = 0; t < frames; ++t) {
    pair.gt.azimuth[t] = gt.doa[t].azimuth;
    pair.gt.elevation[t] = gt.doa[t].elevation;
  }
  pair.gt_z = gt.active;
  return pair;
}

int cmd_eval(const RunConfig& cfg, const std::vector<std::string>& est_csvs,
             const std::vector<std::string>& gt_csvs, const std::string& report) {
  if (est_csvs.size() != gt_csvs.size()) throw UsageError("eval: need matching --est/--gt pairs");
  if (est_csvs.empty()) throw UsageError("eval: no input pairs");

  MetricsReport rep;
  for (std::size_t i = 0; i < est_csvs.size(); ++i) {
    const FramePair pair = load_pair(est_csvs[i], gt_csvs[i], cfg);
    FoldMetrics fm;
    fm.name = "fold" + std::to_string(i + 1);
    fm.de_deg = doa_error_deg(pair.est, pair.gt, pair.gt_z);
    fm.fr = frame_recall(pair.est_active, pair.gt_z);
    rep.folds.push_back(fm);
  }
  const FoldMetrics avg = rep.aggregate();

  std::ostringstream table;
  table << "fold        DE_deg      FR\n";
  char line[128];
  for (const auto& f : rep.folds) {
    std::snprintf(line, sizeof line, "%-10s %9.4f %7.4f\n", f.name.c_str(), f.de_deg, f.fr);
    table << line;
  }
  std::snprintf(line, sizeof line, "%-10s %9.4f %7.4f\n", avg.name.c_str(), avg.de_deg, avg.fr);
  table << line;
  std::cout << table.str();

  if (!report.empty()) {
    const fs::path dir = fs::path(report).parent_path();
    if (!dir.empty()) {
      fs::create_directories(dir);
      echo_config(cfg, dir);
    }
    std::ofstream txt(report + ".txt", std::ios::trunc);
    txt << table.str();
    std::ofstream csv(report + ".csv", std::ios::trunc);
    csv << "fold,DE_deg,FR\n";
    csv.precision(10);
    for (const auto& f : rep.folds) csv << f.name << ',' << f.de_deg << ',' << f.fr << '\n';
    csv << avg.name << ',' << avg.de_deg << ',' << avg.fr << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------- plot

void svg_polyline(std::ostream& out, const std::vector<std::pair<double, double>>& pts,
                  const char* style) {
  if (pts.size() < 2) return;
  out << "<polyline fill=\"none\" " << style << " points=\"";
  for (const auto& [x, y] : pts) out << x << ',' << y << ' ';
  out << "\"/>\n";
}

int cmd_plot(const RunConfig& cfg, const std::vector<std::string>& est_csvs,
             const std::string& gt_csv, const std::string& out_dir) {
  fs::create_directories(out_dir);
  echo_config(cfg, out_dir);
  for (const auto& est_csv : est_csvs) {
    const FramePair pair = load_pair(est_csv, gt_csv, cfg);
    const std::size_t frames = pair.est.size();
    const double hop_s = static_cast<double>(cfg.stft().hop) / cfg.sample_rate;
    const double duration = static_cast<double>(frames) * hop_s;

    struct Panel {
      double y0, height, vmin, vmax;
      const char* label;
    };
    const double width = 900.0, margin = 55.0;
    const Panel panels[2] = {{20.0, 260.0, -180.0, 180.0, "azimuth [deg]"},
                             {320.0, 260.0, -90.0, 90.0, "elevation [deg]"}};
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width + 2 * margin
        << "\" height=\"640\" font-family=\"sans-serif\" font-size=\"12\">\n";
    for (int pi = 0; pi < 2; ++pi) {
      const Panel& p = panels[pi];
      auto xmap = [&](double t_s) { return margin + t_s / duration * width; };
      auto ymap = [&](double v) {
        return p.y0 + p.height - (v - p.vmin) / (p.vmax - p.vmin) * p.height;
      };
      svg << "<rect x=\"" << margin << "\" y=\"" << p.y0 << "\" width=\"" << width
          << "\" height=\"" << p.height << "\" fill=\"white\" stroke=\"black\"/>\n";
      svg << "<text x=\"14\" y=\"" << p.y0 + p.height / 2 << "\" transform=\"rotate(-90 14 "
          << p.y0 + p.height / 2 << ")\">" << p.label << "</text>\n";
      for (double v = p.vmin; v <= p.vmax; v += (p.vmax - p.vmin) / 4.0) {
        svg << "<line x1=\"" << margin << "\" y1=\"" << ymap(v) << "\" x2=\"" << margin + width
            << "\" y2=\"" << ymap(v) << "\" stroke=\"#dddddd\"/>\n";
        svg << "<text x=\"" << margin - 40 << "\" y=\"" << ymap(v) + 4 << "\">" << v
            << "</text>\n";
      }
      for (int which = 0; which < 2; ++which) {
        const DoaTrack& track = which == 0 ? pair.gt : pair.est;
        const std::vector<int>& act = which == 0 ? pair.gt_z : pair.est_active;
        const char* style =
            which == 0 ? "stroke=\"#cc2222\" stroke-width=\"2\" stroke-dasharray=\"6,4\""
                       : "stroke=\"#2244cc\" stroke-width=\"1.5\"";
        std::vector<std::pair<double, double>> pts;
        for (std::size_t t = 0; t < frames; ++t) {
          if (!act[t]) {
            svg_polyline(svg, pts, style);
            pts.clear();
            continue;
          }
          const double v = (pi == 0 ? track.azimuth[t] : track.elevation[t]) * 180.0 / kPi;
          pts.emplace_back(xmap(static_cast<double>(t) * hop_s), ymap(v));
        }
        svg_polyline(svg, pts, style);
      }
    }
    svg << "<text x=\"" << margin << "\" y=\"620\">time -&gt;; red dashed: ground truth, blue: "
        << fs::path(est_csv).stem().string() << "</text>\n";
    svg << "</svg>\n";

    const std::string stem = fs::path(est_csv).stem().string();
    std::ofstream img(fs::path(out_dir) / (stem + "_plot.svg"), std::ios::trunc);
    if (!img) throw UsageError("cannot write plot into " + out_dir);
    img << svg.str();
    // raw plot data in the frame-CSV schema so it feeds back into eval
    write_frame_csv((fs::path(out_dir) / (stem + "_plotdata.csv")).string(),
                    track_to_rows(pair.est, pair.est_active));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"intensity-vector DOA estimation toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  RunConfig cfg;
  bool augment_flag = false, mask_flag = true;
  std::uint64_t seed_arg = 0;
  std::size_t jobs_arg = 1;

  app.add_option("--config", config_path, "key = value configuration file");
  auto* seed_opt = app.add_option("--seed", seed_arg, "PRNG seed override");
  auto* jobs_opt = app.add_option("--jobs", jobs_arg, "max concurrent files");

  auto* sim = app.add_subcommand("simulate", "render synthetic FOA scenes");
  std::string sim_spec, sim_out;
  sim->add_option("--spec", sim_spec, "scene batch JSON")->required();
  sim->add_option("--out", sim_out, "output directory")->required();

  auto* est = app.add_subcommand("estimate", "per-frame DOA estimation");
  std::vector<std::string> est_inputs;
  std::string est_mode = "baseline", est_ckpt, est_out;
  bool est_post = false;
  est->add_option("--mode", est_mode, "baseline | baseline-nomask | neural");
  est->add_option("--checkpoint", est_ckpt, "network checkpoint for neural mode");
  est->add_option("--out", est_out, "output CSV path (single input) or directory")->required();
  est->add_flag("--postprocess", est_post, "apply event-median post-processing");
  auto* est_mask = est->add_flag("--mask,!--no-mask", mask_flag, "energy mask in baseline mode");
  auto* order_opt = est->add_option("--channel-order", cfg.channel_order, "wxyz | acn");
  est->add_option("wavs", est_inputs, "input 4-channel WAV files")->required();

  auto* trn = app.add_subcommand("train", "train the refinement network");
  std::string trn_train, trn_val, trn_out, trn_log;
  std::size_t trn_epochs = 0;
  trn->add_option("--train", trn_train, "training list: wav,meta per line")->required();
  trn->add_option("--val", trn_val, "validation list");
  trn->add_option("--out", trn_out, "output checkpoint path")->required();
  trn->add_option("--log", trn_log, "per-epoch loss log CSV (default: <out>.log.csv)");
  trn->add_option("--epochs", trn_epochs, "override epoch count");
  auto* trn_aug = trn->add_flag("--augment,!--no-augment", augment_flag, "16-pattern augmentation");
  auto* trn_order = trn->add_option("--channel-order", cfg.channel_order, "wxyz | acn");

  auto* evl = app.add_subcommand("eval", "DE / frame-recall metrics");
  std::vector<std::string> evl_est, evl_gt;
  std::string evl_report;
  evl->add_option("--est", evl_est, "estimate frame CSV (repeat per fold)")->required();
  evl->add_option("--gt", evl_gt, "ground-truth event CSV (repeat per fold)")->required();
  evl->add_option("--report", evl_report, "report base path (writes .txt and .csv)");

  auto* plt = app.add_subcommand("plot", "time vs angle overlay plots");
  std::vector<std::string> plt_est;
  std::string plt_gt, plt_out;
  plt->add_option("--gt", plt_gt, "ground-truth event CSV")->required();
  plt->add_option("--out", plt_out, "output directory")->required();
  plt->add_option("tracks", plt_est, "estimate frame CSVs")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    app.exit(e);
    return 2;
  }

  try {
    std::string order_flag = cfg.channel_order;
    cfg.channel_order = "wxyz";
    if (!config_path.empty()) apply_config_file(cfg, config_path);
    apply_environment(cfg);
    if (seed_opt->count()) cfg.seed = seed_arg;
    if (jobs_opt->count()) cfg.jobs = jobs_arg;
    if (est_mask->count()) cfg.use_mask = mask_flag;
    if (trn_aug->count()) cfg.augment = augment_flag;
    if (order_opt->count() || trn_order->count()) cfg.channel_order = order_flag;
    if (trn_epochs > 0) cfg.epochs = trn_epochs;
    cfg.net.bands = cfg.mel_bands;
    cfg.validate();

    if (sim->parsed()) return cmd_simulate(cfg, sim_spec, sim_out);
    if (est->parsed()) return cmd_estimate(cfg, est_inputs, est_mode, est_ckpt, est_out, est_post);
    if (trn->parsed()) return cmd_train(cfg, trn_train, trn_val, trn_out, trn_log);
    if (evl->parsed()) return cmd_eval(cfg, evl_est, evl_gt, evl_report);
    if (plt->parsed()) return cmd_plot(cfg, plt_est, plt_gt, plt_out);
    return 2;
  } catch (const std::logic_error& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
