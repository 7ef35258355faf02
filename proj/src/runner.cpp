#include "qctraj/runner.hpp"

#include "qctraj/entanglement.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

namespace qctraj {

namespace {

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

/// Per-chunk scalar series on a fixed step grid (weighted value, count,
/// extremes). One chunk is one batch of the batch-means error estimate.
struct ChunkSeries {
  std::vector<double> vsum;
  std::vector<long> cnt;
  std::vector<double> vmin, vmax;

  void init(size_t m) {
    vsum.assign(m, 0.0);
    cnt.assign(m, 0);
    vmin.assign(m, std::numeric_limits<double>::infinity());
    vmax.assign(m, -std::numeric_limits<double>::infinity());
  }
  void add(size_t i, double weighted_value, bool track_extremes, double raw_value) {
    vsum[i] += weighted_value;
    ++cnt[i];
    if (track_extremes) {
      vmin[i] = std::min(vmin[i], raw_value);
      vmax[i] = std::max(vmax[i], raw_value);
    }
  }
};

struct ChunkData {
  std::vector<EnsembleAccumulator> at_times;
  ChunkSeries conc;
  double max_purity_defect = 0.0;
  double max_conc_drift = 0.0;
  long jumps = 0;
  long zero_intensity = 0;
  std::string paths;
  long path_rows = 0;
};

struct ModeResult {
  Mode mode = Mode::Q;
  std::vector<double> observe_times;
  std::vector<long> observe_steps;
  std::vector<EnsembleAccumulator> acc;  // merged, one per observe time
  std::vector<long> series_steps;
  std::vector<Estimate> conc_series;
  std::vector<double> conc_min, conc_max;
  double max_purity_defect = 0.0;
  double max_conc_drift = 0.0;
  long jumps = 0;
  long zero_intensity = 0;
  std::string paths_csv;
};

struct Needs {
  bool states = false;
  bool concurrence = false;
  bool conc_drift = false;
  bool purity = false;
  bool observable = false;
  bool at_x0 = false;
  std::vector<double> at_x0_times;
  ClassicalPoint x0_target;
  bool bins = false;
};

bool has_check(const RunConfig& cfg, const std::string& name) {
  for (const auto& c : cfg.checks) {
    if (c.name == name) return true;
  }
  return false;
}

const CheckConfig* find_check(const RunConfig& cfg, const std::string& name) {
  for (const auto& c : cfg.checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

Operator default_observable(int n) {
  if (n == 4) return kron(pauli_z(), identity2());
  if (n == 2) return pauli_z();
  return Operator::Identity(n, n);
}

ModeResult run_mode(const RunConfig& cfg, Mode mode, const Needs& needs, const BinSpec& bins) {
  const HybridModel& model = cfg.model;
  const long N = cfg.trajectories;
  const int chunks = cfg.batches;
  const long steps = std::lround(cfg.horizon / cfg.dt);

  ModeResult res;
  res.mode = mode;
  res.observe_times = cfg.outputs.times;
  for (const auto& c : cfg.checks) {
    for (double t : c.times) res.observe_times.push_back(t);
  }
  if (needs.at_x0) {
    for (double t : needs.at_x0_times) res.observe_times.push_back(t);
  }
  std::sort(res.observe_times.begin(), res.observe_times.end());
  res.observe_times.erase(std::unique(res.observe_times.begin(), res.observe_times.end()),
                          res.observe_times.end());

  // Concurrence series grid: every step for short runs, thinned otherwise.
  const long series_stride = std::max<long>(1, steps / 256);
  for (long m = 0; m <= steps; m += series_stride) res.series_steps.push_back(m);
  if (res.series_steps.back() != steps) res.series_steps.push_back(steps);

  const ClassicalPoint x0 = cfg.initial_point();
  const Operator sigma0 = cfg.initial_state();
  const Operator a_obs = default_observable(model.n);

  RecordOptions rec;
  rec.state_stride = needs.states ? 1 : 0;

  // Map observe times onto the grid once (validates alignment).
  {
    TrajectoryPath probe;
    probe.dt = cfg.dt;
    probe.steps = steps;
    for (double t : res.observe_times) res.observe_steps.push_back(probe.step_of_time(t));
  }

  std::vector<ChunkData> data(chunks);
  std::atomic<int> next_chunk{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&]() {
    try {
      TrajectorySimulator sim(model, cfg.dt, mode);
      for (;;) {
        const int c = next_chunk.fetch_add(1);
        if (c >= chunks) break;
        ChunkData& cd = data[c];
        cd.at_times.assign(res.observe_times.size(),
                           EnsembleAccumulator(model.n, cfg.batches, bins));
        cd.conc.init(res.series_steps.size());
        const long lo = N * c / chunks;
        const long hi = N * (c + 1) / chunks;
        for (long i = lo; i < hi; ++i) {
          TrajectoryPath path = sim.run(x0, sigma0, cfg.horizon, cfg.seed, i, rec);
          cd.jumps += static_cast<long>(path.jumps.size());
          cd.zero_intensity += path.zero_intensity_steps;

          for (size_t ti = 0; ti < res.observe_steps.size(); ++ti) {
            const long s = res.observe_steps[ti];
            const double w = mode == Mode::Q ? path.weight[s] : 1.0;
            EnsembleAccumulator& acc = cd.at_times[ti];
            if (needs.states) {
              acc.add_state(path.state_at_step(s), w, c);
            } else {
              acc.add_count(w, c);
            }
            if (needs.bins) acc.add_point(path.x[s], w, c);
            acc.add_scalar("weight", path.weight[s], 1.0, c);
            if (needs.observable && model.n > 1) {
              const double v = (path.state_at_step(s) * a_obs).trace().real();
              acc.add_scalar("obs", w * v, 1.0, c);
            }
            if (needs.at_x0) {
              const bool at = (path.x[s] - needs.x0_target).lpNorm<Eigen::Infinity>() <= 1e-6;
              acc.add_scalar("at_x0", w * (at ? 1.0 : 0.0), 1.0, c);
            }
          }

          if (needs.concurrence || needs.conc_drift) {
            double c0 = -1.0;
            for (size_t si = 0; si < res.series_steps.size(); ++si) {
              const long s = res.series_steps[si];
              const double w = mode == Mode::Q ? path.weight[s] : 1.0;
              double value = 0.0;
              bool have = false;
              if (w > tol::eps_weight) {
                value = concurrence_of_pure_density(path.state_at_step(s));
                have = true;
              }
              cd.conc.add(si, w * value, have, value);
              if (have) {
                if (c0 < 0) c0 = value;
                if (needs.conc_drift) {
                  cd.max_conc_drift = std::max(cd.max_conc_drift, std::abs(value - c0));
                }
              }
            }
          }
          if (needs.purity) {
            for (size_t si = 0; si < path.state_steps.size(); ++si) {
              const long s = path.state_steps[si];
              const double w = mode == Mode::Q ? path.weight[s] : 1.0;
              if (!(w > tol::eps_weight)) continue;
              const Operator& sh = path.states[si];
              const double defect = 0.5 * (1.0 - (sh * sh).trace().real());
              cd.max_purity_defect = std::max(cd.max_purity_defect, defect);
            }
          }
          if (cfg.outputs.paths && cd.path_rows < cfg.outputs.max_path_rows) {
            for (long s = 0; s <= steps && cd.path_rows < cfg.outputs.max_path_rows; ++s) {
              std::string row = std::to_string(i) + "," + std::to_string(s) + "," +
                                fmt(path.times[s]);
              for (int j = 0; j < model.s; ++j) row += "," + fmt(path.x[s](j));
              row += "," + fmt(path.weight[s]);
              const Operator& sh = path.state_at_step(s);
              for (int r = 0; r < model.n; ++r) {
                for (int q = 0; q < model.n; ++q) {
                  row += "," + fmt(sh(r, q).real()) + "," + fmt(sh(r, q).imag());
                }
              }
              cd.paths += row + "\n";
              ++cd.path_rows;
            }
          }
        }
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  };

  int nworkers = cfg.workers > 0 ? cfg.workers
                                 : static_cast<int>(std::thread::hardware_concurrency());
  nworkers = std::max(1, std::min(nworkers, chunks));
  std::vector<std::thread> pool;
  for (int w = 0; w < nworkers; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);

  // Deterministic reduction in chunk order.
  res.acc.assign(res.observe_times.size(), EnsembleAccumulator());
  ChunkSeries merged;
  merged.init(res.series_steps.size());
  for (int c = 0; c < chunks; ++c) {
    for (size_t ti = 0; ti < res.acc.size(); ++ti) res.acc[ti].merge(data[c].at_times[ti]);
    for (size_t si = 0; si < res.series_steps.size(); ++si) {
      merged.vsum[si] += data[c].conc.vsum[si];
      merged.cnt[si] += data[c].conc.cnt[si];
      merged.vmin[si] = std::min(merged.vmin[si], data[c].conc.vmin[si]);
      merged.vmax[si] = std::max(merged.vmax[si], data[c].conc.vmax[si]);
    }
    res.max_purity_defect = std::max(res.max_purity_defect, data[c].max_purity_defect);
    res.max_conc_drift = std::max(res.max_conc_drift, data[c].max_conc_drift);
    res.jumps += data[c].jumps;
    res.zero_intensity += data[c].zero_intensity;
    res.paths_csv += data[c].paths;
  }
  if (needs.concurrence || needs.conc_drift) {
    for (size_t si = 0; si < res.series_steps.size(); ++si) {
      const long n = merged.cnt[si];
      const double mean = n > 0 ? merged.vsum[si] / n : 0.0;
      double var = 0.0;
      int used = 0;
      for (int c = 0; c < chunks; ++c) {
        if (data[c].conc.cnt[si] == 0) continue;
        const double d = data[c].conc.vsum[si] / data[c].conc.cnt[si] - mean;
        var += d * d;
        ++used;
      }
      const double se =
          used >= 2 ? std::sqrt(var / (static_cast<double>(used) * (used - 1))) : 0.0;
      res.conc_series.push_back({mean, se});
      res.conc_min.push_back(merged.vmin[si]);
      res.conc_max.push_back(merged.vmax[si]);
    }
  }
  return res;
}

void write_file(const std::filesystem::path& path, const std::string& body,
                RunManifest& manifest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw NumericalError("cannot write output file " + path.string());
  out << body;
  out.close();
  manifest.outputs.push_back({path.filename().string(), fnv1a_hex(body)});
}

std::string apriori_csv(const RunConfig& cfg, const ModeResult& r) {
  std::string body = "t";
  for (int i = 0; i < cfg.model.n; ++i) {
    for (int j = 0; j < cfg.model.n; ++j) {
      body += ",re_" + std::to_string(i) + "_" + std::to_string(j) + ",im_" +
              std::to_string(i) + "_" + std::to_string(j);
    }
  }
  body += ",trace,stderr\n";
  for (size_t ti = 0; ti < r.observe_times.size(); ++ti) {
    const Operator eta = r.acc[ti].mean_state();
    std::string row = fmt(r.observe_times[ti]);
    for (int i = 0; i < cfg.model.n; ++i) {
      for (int j = 0; j < cfg.model.n; ++j) {
        row += "," + fmt(eta(i, j).real()) + "," + fmt(eta(i, j).imag());
      }
    }
    row += "," + fmt(eta.trace().real()) + "," + fmt(r.acc[ti].mean_state_stderr());
    body += row + "\n";
  }
  return body;
}

std::string marginals_csv(const RunConfig& cfg, const ModeResult& r, const BinSpec& bins) {
  std::string body = "t,bin";
  for (int i = 0; i < cfg.model.s; ++i) body += ",lo_" + std::to_string(i);
  for (int i = 0; i < cfg.model.s; ++i) body += ",hi_" + std::to_string(i);
  body += ",mass,stderr\n";
  for (size_t ti = 0; ti < r.observe_times.size(); ++ti) {
    const auto hist = r.acc[ti].histogram();
    for (long b = 0; b < static_cast<long>(hist.size()); ++b) {
      auto [lo, hi] = bins.bounds(b);
      std::string row = fmt(r.observe_times[ti]) + "," + std::to_string(b);
      for (int i = 0; i < cfg.model.s; ++i) row += "," + fmt(lo(i));
      for (int i = 0; i < cfg.model.s; ++i) row += "," + fmt(hi(i));
      row += "," + fmt(hist[b].value) + "," + fmt(hist[b].stderr_);
      body += row + "\n";
    }
    const Estimate ov = r.acc[ti].overflow();
    std::string row = fmt(r.observe_times[ti]) + ",-1";
    for (int i = 0; i < 2 * cfg.model.s; ++i) row += ",";
    row += "," + fmt(ov.value) + "," + fmt(ov.stderr_);
    body += row + "\n";
  }
  return body;
}

std::string concurrence_csv(const ModeResult& r, double dt) {
  std::string body = "t,mean,stderr,min,max\n";
  for (size_t si = 0; si < r.series_steps.size(); ++si) {
    body += fmt(r.series_steps[si] * dt) + "," + fmt(r.conc_series[si].value) + "," +
            fmt(r.conc_series[si].stderr_) + "," + fmt(r.conc_min[si]) + "," +
            fmt(r.conc_max[si]) + "\n";
  }
  return body;
}

std::string paths_csv_header(const RunConfig& cfg) {
  std::string h = "trajectory_id,time_index,t";
  for (int i = 0; i < cfg.model.s; ++i) h += ",x_" + std::to_string(i);
  h += ",weight";
  for (int i = 0; i < cfg.model.n; ++i) {
    for (int j = 0; j < cfg.model.n; ++j) {
      h += ",re_s_" + std::to_string(i) + "_" + std::to_string(j) + ",im_s_" +
           std::to_string(i) + "_" + std::to_string(j);
    }
  }
  return h + "\n";
}

size_t observe_index(const ModeResult& r, double t) {
  for (size_t i = 0; i < r.observe_times.size(); ++i) {
    if (std::abs(r.observe_times[i] - t) <= 1e-12 * std::max(1.0, std::abs(t))) return i;
  }
  throw NumericalError("internal: time " + std::to_string(t) + " was not observed");
}

std::vector<CheckReport> evaluate_checks(const RunConfig& cfg, const ModeResult* q,
                                         const ModeResult* p) {
  std::vector<CheckReport> reports;
  const ModeResult* physical = p ? p : q;
  for (const auto& cc : cfg.checks) {
    CheckReport rep;
    rep.name = cc.name;
    if (cc.name == "martingale") {
      if (!q) {
        rep.details = "martingale check needs a Q-mode run";
      } else {
        const Estimate e = q->acc[observe_index(*q, cfg.horizon)].scalar("weight");
        rep.estimate = std::abs(e.value - 1.0);
        rep.stderr_ = e.stderr_;
        rep.tolerance = 3.0 * e.stderr_;
        rep.pass = rep.estimate <= rep.tolerance;
        rep.details = {{"mean_weight", e.value}};
      }
    } else if (cc.name == "equilibrium") {
      const double T = cc.horizon.value_or(cfg.horizon);
      rep.tolerance = cc.tolerance.value_or(1e-6);
      try {
        const Operator rho = a_priori_solution(cfg.model, cfg.initial_state(), T);
        rep.estimate = trace_distance(rho, maximally_mixed(cfg.model.n));
        rep.pass = rep.estimate < rep.tolerance;
        rep.details = {{"horizon", T}};
      } catch (const NumericalError& e) {
        rep.details = e.what();
      }
    } else if (cc.name == "mode_equivalence") {
      if (!q || !p) {
        rep.details = "mode_equivalence needs mode=both";
      } else {
        double worst = -std::numeric_limits<double>::infinity();
        double worst_dev = 0.0, worst_tol = 0.0;
        auto compare = [&](const Estimate& eq, const Estimate& ep) {
          const double dev = std::abs(eq.value - ep.value);
          const double tol3 = 3.0 * std::hypot(eq.stderr_, ep.stderr_) + 1e-12;
          if (dev - tol3 > worst) {
            worst = dev - tol3;
            worst_dev = dev;
            worst_tol = tol3;
          }
        };
        for (size_t ti = 0; ti < q->observe_times.size(); ++ti) {
          const size_t pi = observe_index(*p, q->observe_times[ti]);
          if (cfg.model.n > 1) {
            compare(q->acc[ti].scalar("obs"), p->acc[pi].scalar("obs"));
          }
          if (!q->acc[ti].bins().empty()) {
            const auto hq = q->acc[ti].histogram();
            const auto hp = p->acc[pi].histogram();
            for (size_t b = 0; b < hq.size(); ++b) compare(hq[b], hp[b]);
            compare(q->acc[ti].overflow(), p->acc[pi].overflow());
          }
        }
        rep.estimate = worst_dev;
        rep.tolerance = worst_tol;
        rep.pass = worst <= 0.0;
      }
    } else if (cc.name == "purity") {
      rep.tolerance = cc.tolerance.value_or(tol::purity);
      rep.estimate = std::max(q ? q->max_purity_defect : 0.0, p ? p->max_purity_defect : 0.0);
      rep.pass = rep.estimate < rep.tolerance;
    } else if (cc.name == "concurrence_constant") {
      rep.tolerance = cc.tolerance.value_or(1e-8);
      rep.estimate = physical->max_conc_drift;
      rep.pass = rep.estimate < rep.tolerance;
    } else if (cc.name == "point_mass_law") {
      if (cfg.model_params.name != "point_mass") {
        rep.details = "point_mass_law applies to the point_mass model";
      } else {
        const double lambda = cfg.model.channels[0].rate;
        std::vector<double> times = cc.times.empty() ? std::vector<double>{cfg.horizon}
                                                     : cc.times;
        rep.pass = true;
        nlohmann::json detail = nlohmann::json::array();
        for (double t : times) {
          const Estimate e = physical->acc[observe_index(*physical, t)].scalar("at_x0");
          const double prob = 1.0 - std::exp(-lambda * t);
          const double half_width =
              2.5758 * std::sqrt(prob * (1.0 - prob) / cfg.trajectories);
          const double dev = std::abs(e.value - prob);
          if (dev > half_width) rep.pass = false;
          rep.estimate = std::max(rep.estimate, dev);
          rep.tolerance = std::max(rep.tolerance, half_width);
          detail.push_back({{"t", t}, {"empirical", e.value}, {"expected", prob},
                            {"ci99_half_width", half_width}});
        }
        rep.details = detail;
      }
    }
    reports.push_back(rep);
  }
  return reports;
}

}  // namespace

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string digest_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NumericalError("cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return fnv1a_hex(os.str());
}

bool RunManifest::all_passed() const {
  for (const auto& c : checks) {
    if (!c.pass) return false;
  }
  return true;
}

nlohmann::json RunManifest::to_json() const {
  nlohmann::json jchecks = nlohmann::json::array();
  for (const auto& c : checks) jchecks.push_back(qctraj::to_json(c));
  nlohmann::json jout = nlohmann::json::array();
  for (const auto& o : outputs) jout.push_back({{"file", o.file}, {"digest", o.digest}});
  nlohmann::json j{{"version", version},      {"seed", seed},
                   {"config", config_echo},   {"checks", jchecks},
                   {"wall_clock_s", wall_clock_s}, {"outputs", jout},
                   {"combined_digest", combined_digest}};
  if (!note.empty()) j["note"] = note;
  return j;
}

std::string resolve_output_dir(const RunConfig& config) {
  if (const char* env = std::getenv("QCTRAJ_OUTPUT_DIR")) {
    if (*env) return env;
  }
  return config.output_dir;
}

RunManifest run_scenario(const RunConfig& cfg, bool checks_only) {
  const auto start = std::chrono::steady_clock::now();
  RunManifest manifest;
  manifest.config_echo = cfg.raw;
  manifest.seed = cfg.seed;

  const std::filesystem::path outdir = resolve_output_dir(cfg);
  std::filesystem::create_directories(outdir);

  try {
    if (cfg.outputs.concurrence && cfg.model.n != 4) {
      throw ConfigError("concurrence output requires a two-qubit model");
    }

    Needs needs;
    needs.concurrence = cfg.outputs.concurrence || has_check(cfg, "concurrence_constant");
    needs.conc_drift = has_check(cfg, "concurrence_constant");
    needs.purity = has_check(cfg, "purity");
    needs.observable = has_check(cfg, "mode_equivalence");
    needs.bins = cfg.outputs.marginals || has_check(cfg, "mode_equivalence");
    needs.states = cfg.outputs.a_priori || cfg.outputs.paths || needs.concurrence ||
                   needs.purity || needs.observable;
    if (const CheckConfig* pm = find_check(cfg, "point_mass_law")) {
      needs.at_x0 = true;
      needs.at_x0_times = pm->times.empty() ? std::vector<double>{cfg.horizon} : pm->times;
      auto it = cfg.model_params.vectors.find("x0");
      std::vector<double> x0 = it != cfg.model_params.vectors.end() ? it->second
                                                                    : std::vector<double>{1.0};
      needs.x0_target = Eigen::Map<const ClassicalPoint>(x0.data(), x0.size());
    }

    BinSpec bins;
    if (needs.bins) {
      bins = cfg.bins ? *cfg.bins
                      : default_bins(cfg.model, cfg.initial_point(), cfg.horizon, cfg.dt, 256,
                                     cfg.seed);
    }

    std::optional<ModeResult> rq, rp;
    if (cfg.run_q) rq = run_mode(cfg, Mode::Q, needs, bins);
    if (cfg.run_p) rp = run_mode(cfg, Mode::P, needs, bins);

    if (!checks_only) {
      for (const ModeResult* r : {rq ? &*rq : nullptr, rp ? &*rp : nullptr}) {
        if (!r) continue;
        const std::string suffix = std::string("_") + mode_name(r->mode) + ".csv";
        if (cfg.outputs.a_priori) {
          write_file(outdir / ("apriori" + suffix), apriori_csv(cfg, *r), manifest);
        }
        if (cfg.outputs.marginals) {
          write_file(outdir / ("marginals" + suffix), marginals_csv(cfg, *r, bins), manifest);
        }
        if (cfg.outputs.concurrence) {
          write_file(outdir / ("concurrence" + suffix), concurrence_csv(*r, cfg.dt), manifest);
        }
        if (cfg.outputs.paths) {
          write_file(outdir / ("paths" + suffix), paths_csv_header(cfg) + r->paths_csv,
                     manifest);
        }
      }
    }

    manifest.checks = evaluate_checks(cfg, rq ? &*rq : nullptr, rp ? &*rp : nullptr);
  } catch (...) {
    manifest.note = "aborted before completion";
    manifest.wall_clock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::string digest_input;
    for (const auto& o : manifest.outputs) digest_input += o.file + ":" + o.digest + "\n";
    manifest.combined_digest = fnv1a_hex(digest_input);
    std::ofstream out(outdir / "manifest.json");
    out << manifest.to_json().dump(2) << "\n";
    throw;
  }

  manifest.wall_clock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::string digest_input;
  for (const auto& o : manifest.outputs) digest_input += o.file + ":" + o.digest + "\n";
  manifest.combined_digest = fnv1a_hex(digest_input);
  {
    std::ofstream out(outdir / "manifest.json");
    out << manifest.to_json().dump(2) << "\n";
  }
  return manifest;
}

}  // namespace qctraj
