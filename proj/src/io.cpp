#include "tpkmp/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tpkmp/errors.hpp"

namespace tpkmp {

namespace fs = std::filesystem;

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_number(std::string_view field, std::size_t line) {
  field = trim(field);
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
    throw ParseError("cannot parse number '" + std::string(field) + "'", line);
  }
  if (!std::isfinite(v)) throw ValidationError("line " + std::to_string(line) + ": non-finite value");
  return v;
}

fs::path sidecar_of(const fs::path& csv) {
  fs::path p = csv;
  p.replace_extension(".json");
  return p;
}

template <class T>
void read_opt(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

Json require_object(const Json& j, const char* what) {
  if (!j.is_object()) throw ValidationError(std::string(what) + " must be a JSON object");
  return j;
}

}  // namespace

Demonstration parse_demo_csv(std::istream& in) {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line)) throw ParseError("empty demonstration file", lineno);
  const auto header = split(trim(line), ',');
  if (header.size() < 2 || trim(header[0]) != "s") throw ParseError("header must be s,x1,...,xO", lineno);
  for (std::size_t a = 1; a < header.size(); ++a) {
    if (trim(header[a]) != "x" + std::to_string(a)) throw ParseError("header must be s,x1,...,xO", lineno);
  }
  const Index o = static_cast<Index>(header.size() - 1);

  std::vector<double> s;
  std::vector<double> x;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty()) continue;
    const auto fields = split(t, ',');
    if (fields.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()),
                       lineno);
    }
    s.push_back(parse_number(fields[0], lineno));
    for (Index a = 0; a < o; ++a) x.push_back(parse_number(fields[static_cast<std::size_t>(a + 1)], lineno));
  }

  Demonstration d;
  d.inputs = std::move(s);
  d.outputs.resize(d.length(), o);
  for (Index h = 0; h < d.length(); ++h) {
    for (Index a = 0; a < o; ++a) d.outputs(h, a) = x[static_cast<std::size_t>(h * o + a)];
  }
  d.validate();
  return d;
}

Demonstration ingest_demo(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open demonstration '" + path.string() + "'");
  Demonstration d = parse_demo_csv(in);
  const fs::path side = sidecar_of(path);
  if (!fs::exists(side)) throw ValidationError("missing sidecar '" + side.string() + "'");
  const Json meta = read_json(side);
  if (!meta.contains("duration_s")) throw ValidationError("sidecar lacks duration_s");
  d.duration_s = meta.at("duration_s").get<double>();
  if (meta.contains("frames")) {
    for (const auto& f : meta.at("frames")) d.frames.push_back(frame_from_json(f));
  }
  d.validate();
  return d;
}

void write_demo(const fs::path& path, const Demonstration& demo) {
  demo.validate();
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out << 's';
  for (Index a = 0; a < demo.output_dim(); ++a) out << ",x" << (a + 1);
  out << '\n';
  out.precision(17);
  for (Index h = 0; h < demo.length(); ++h) {
    out << demo.inputs[static_cast<std::size_t>(h)];
    for (Index a = 0; a < demo.output_dim(); ++a) out << ',' << demo.outputs(h, a);
    out << '\n';
  }
  Json meta{{"duration_s", demo.duration_s}};
  if (!demo.frames.empty()) {
    meta["frames"] = Json::array();
    for (const auto& f : demo.frames) meta["frames"].push_back(to_json(f));
  }
  write_json(sidecar_of(path), meta);
}

Json to_json(const Vec& v) {
  Json j = Json::array();
  for (Index i = 0; i < v.size(); ++i) j.push_back(v(i));
  return j;
}

Json to_json(const Mat& m) {
  Json j = Json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    j.push_back(std::move(row));
  }
  return j;
}

Json to_json(const FramePose& f) { return Json{{"b", to_json(f.origin())}, {"A", to_json(f.rotation())}}; }

Vec vec_from_json(const Json& j) {
  if (!j.is_array()) throw ValidationError("expected a JSON array of numbers");
  Vec v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ValidationError("expected a number");
    v(static_cast<Index>(i)) = j[i].get<double>();
  }
  if (!v.allFinite()) throw ValidationError("non-finite value");
  return v;
}

Mat mat_from_json(const Json& j) {
  if (!j.is_array() || j.empty()) throw ValidationError("expected a non-empty JSON matrix");
  const std::size_t cols = j[0].size();
  Mat m(static_cast<Index>(j.size()), static_cast<Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    const Vec row = vec_from_json(j[r]);
    if (static_cast<std::size_t>(row.size()) != cols) throw DimensionError("ragged JSON matrix");
    m.row(static_cast<Index>(r)) = row.transpose();
  }
  return m;
}

FramePose frame_from_json(const Json& j) {
  const Vec b = vec_from_json(j.at("b"));
  const Mat a = j.contains("A") ? mat_from_json(j.at("A")) : Mat(Mat::Identity(b.size(), b.size()));
  return FramePose(b, a);
}

Json to_json(const KernelConfig& k) {
  return Json{{"family", to_string(k.family)}, {"length_scale", k.length_scale}, {"signal_variance", k.signal_variance}};
}

Json to_json(const KmpHyper& h) {
  return Json{{"lambda1", h.lambda1}, {"lambda2", h.lambda2}, {"alpha", h.alpha}};
}

Json to_json(const TriggerConfig& c) {
  return Json{{"mode", to_string(c.mode)},
              {"gamma_F", c.gamma_F},
              {"gamma_xi", c.gamma_xi},
              {"gamma_Sigma", c.gamma_Sigma},
              {"debounce", c.debounce}};
}

Json to_json(const StiffnessConfig& c) {
  return Json{{"c1", c.c1},       {"c2", c.c2},   {"delta_ep", c.delta_ep}, {"delta_al", c.delta_al},
              {"reg", c.reg}, {"g_max", c.g_max}};
}

Json to_json(const EpisodeConfig& c) {
  Json j{{"stiffness", to_json(c.stiffness)},
         {"trigger", to_json(c.trigger)},
         {"duration_scale", c.duration_scale},
         {"rate_hz", c.rate_hz},
         {"mass", c.mass},
         {"gains", c.gains == GainMode::raw ? "raw" : "uncertainty"},
         {"record", c.record}};
  if (c.s_end) j["s_end"] = *c.s_end;
  if (c.start) j["start"] = to_json(*c.start);
  return j;
}

Json to_json(const TrainConfig& c) {
  return Json{{"components", c.components},
              {"inputs", c.inputs},
              {"seed", c.seed},
              {"kernel", to_json(c.kernel)},
              {"hyper", to_json(c.hyper)},
              {"em", Json{{"max_iterations", c.em.max_iterations}, {"rel_tol", c.em.rel_tol}}},
              {"labels", c.labels}};
}

KernelConfig kernel_from_json(const Json& j) {
  KernelConfig k;
  if (j.contains("family")) k.family = kernel_family_from_string(j.at("family").get<std::string>());
  read_opt(j, "length_scale", k.length_scale);
  read_opt(j, "signal_variance", k.signal_variance);
  k.validate();
  return k;
}

KmpHyper hyper_from_json(const Json& j) {
  KmpHyper h;
  read_opt(j, "lambda1", h.lambda1);
  read_opt(j, "lambda2", h.lambda2);
  read_opt(j, "alpha", h.alpha);
  h.validate();
  return h;
}

TriggerConfig trigger_from_json(const Json& j, TriggerConfig c) {
  require_object(j, "trigger");
  if (j.contains("mode")) c.mode = trigger_mode_from_string(j.at("mode").get<std::string>());
  read_opt(j, "gamma_F", c.gamma_F);
  read_opt(j, "gamma_xi", c.gamma_xi);
  read_opt(j, "gamma_Sigma", c.gamma_Sigma);
  read_opt(j, "debounce", c.debounce);
  c.validate();
  return c;
}

StiffnessConfig stiffness_from_json(const Json& j, StiffnessConfig c) {
  require_object(j, "stiffness");
  read_opt(j, "c1", c.c1);
  read_opt(j, "c2", c.c2);
  read_opt(j, "delta_ep", c.delta_ep);
  read_opt(j, "delta_al", c.delta_al);
  read_opt(j, "reg", c.reg);
  read_opt(j, "g_max", c.g_max);
  c.validate();
  return c;
}

EpisodeConfig episode_config_from_json(const Json& j, EpisodeConfig c) {
  require_object(j, "episode config");
  if (j.contains("stiffness")) c.stiffness = stiffness_from_json(j.at("stiffness"), c.stiffness);
  if (j.contains("trigger")) c.trigger = trigger_from_json(j.at("trigger"), c.trigger);
  read_opt(j, "duration_scale", c.duration_scale);
  read_opt(j, "rate_hz", c.rate_hz);
  read_opt(j, "mass", c.mass);
  read_opt(j, "record", c.record);
  if (j.contains("s_end") && !j.at("s_end").is_null()) c.s_end = j.at("s_end").get<double>();
  if (j.contains("start") && !j.at("start").is_null()) c.start = vec_from_json(j.at("start"));
  if (j.contains("gains")) {
    const auto g = j.at("gains").get<std::string>();
    if (g == "raw") {
      c.gains = GainMode::raw;
    } else if (g == "uncertainty") {
      c.gains = GainMode::uncertainty;
    } else {
      throw ValidationError("unknown gain mode '" + g + "'");
    }
  }
  c.validate();
  return c;
}

TrainConfig train_config_from_json(const Json& j, TrainConfig c) {
  require_object(j, "train config");
  read_opt(j, "components", c.components);
  read_opt(j, "inputs", c.inputs);
  read_opt(j, "seed", c.seed);
  if (j.contains("kernel")) c.kernel = kernel_from_json(j.at("kernel"));
  if (j.contains("hyper")) c.hyper = hyper_from_json(j.at("hyper"));
  if (j.contains("em")) {
    read_opt(j.at("em"), "max_iterations", c.em.max_iterations);
    read_opt(j.at("em"), "rel_tol", c.em.rel_tol);
  }
  read_opt(j, "labels", c.labels);
  return c;
}

Json to_json(const ViaPoint& vp) {
  Json j{{"s", vp.s}, {"mu", to_json(vp.mu)}, {"sigma", to_json(vp.sigma)}, {"source", to_string(vp.source)}};
  if (vp.frame_index) j["frame"] = *vp.frame_index;
  return j;
}

ViaPoint via_point_from_json(const Json& j) {
  ViaPoint vp;
  vp.s = j.at("s").get<double>();
  vp.mu = vec_from_json(j.at("mu"));
  vp.sigma = mat_from_json(j.at("sigma"));
  if (j.contains("source")) vp.source = via_source_from_string(j.at("source").get<std::string>());
  if (j.contains("frame")) vp.frame_index = j.at("frame").get<std::size_t>();
  if (!std::isfinite(vp.s)) throw ValidationError("via-point input is not finite");
  if (vp.sigma.rows() != vp.mu.size() || vp.sigma.cols() != vp.mu.size()) {
    throw DimensionError("via-point covariance does not match its mean");
  }
  return vp;
}

Json model_to_json(const TpModel& model) {
  Json locals = Json::array();
  for (const auto& l : model.locals) {
    Json ref = Json::array();
    for (const auto& e : l.base.entries) ref.push_back(Json{{"s", e.s}, {"mu", to_json(e.mu)}, {"sigma", to_json(e.sigma)}});
    Json vps = Json::array();
    for (const auto& vp : l.via_points) vps.push_back(to_json(vp));
    locals.push_back(Json{{"label", l.label}, {"frame", to_json(l.frame)}, {"reference", ref}, {"via_points", vps}});
  }
  return Json{{"kernel", to_json(model.kernel)}, {"hyper", to_json(model.hyper)}, {"s_max", model.s_max}, {"locals", locals}};
}

TpModel model_from_json(const Json& j) {
  require_object(j, "model");
  TpModel m;
  m.kernel = kernel_from_json(j.at("kernel"));
  m.hyper = hyper_from_json(j.at("hyper"));
  m.s_max = j.at("s_max").get<double>();
  for (const auto& lj : j.at("locals")) {
    ReferenceDistribution base;
    for (const auto& e : lj.at("reference")) {
      base.entries.push_back(RefEntry{e.at("s").get<double>(), vec_from_json(e.at("mu")), mat_from_json(e.at("sigma"))});
    }
    std::vector<ViaPoint> vps;
    for (const auto& v : lj.at("via_points")) vps.push_back(via_point_from_json(v));
    m.locals.push_back(make_local(lj.at("label").get<std::string>(), frame_from_json(lj.at("frame")), std::move(base),
                                  std::move(vps), m.kernel, m.hyper));
  }
  m.validate();
  return m;
}

std::string dump_model(const TpModel& model) { return model_to_json(model).dump(1); }

void save_model(const fs::path& path, const TpModel& model) { write_json(path, model_to_json(model)); }

TpModel load_model(const fs::path& path) { return model_from_json(read_json(path)); }

Json scenario_to_json(const Scenario& sc, bool embed_demos) {
  Json demos = Json::array();
  for (std::size_t m = 0; m < sc.demos.size(); ++m) {
    const auto& d = sc.demos[m];
    if (!embed_demos) {
      demos.push_back("demo" + std::to_string(m) + ".csv");
      continue;
    }
    Json frames = Json::array();
    for (const auto& f : d.frames) frames.push_back(to_json(f));
    Json s = Json::array();
    for (double v : d.inputs) s.push_back(v);
    demos.push_back(Json{{"s", s}, {"x", to_json(d.outputs)}, {"duration_s", d.duration_s}, {"frames", frames}});
  }
  const auto frame_set = [](const std::vector<FramePose>& fs) {
    Json a = Json::array();
    for (const auto& f : fs) a.push_back(to_json(f));
    return a;
  };
  Json evals = Json::array();
  for (const auto& e : sc.eval_frames) evals.push_back(frame_set(e));
  return Json{{"name", sc.name},
              {"kind", to_string(sc.kind)},
              {"seed", sc.seed},
              {"frame_labels", sc.frame_labels},
              {"demos", demos},
              {"eval_frames", evals},
              {"correction_frames", frame_set(sc.correction_frames)},
              {"train", to_json(sc.train)},
              {"trigger", to_json(sc.trigger)},
              {"stiffness", to_json(sc.stiffness)},
              {"shape", Json{{"lift", sc.shape.lift}, {"t_up", sc.shape.t_up}, {"t_down", sc.shape.t_down}}},
              {"box",
               Json{{"inner_width", sc.box.inner_width},
                    {"wall", sc.box.wall},
                    {"wall_height", sc.box.wall_height},
                    {"grasp_height", sc.box.grasp_height}}},
              {"duration_scale", sc.duration_scale},
              {"rate_hz", sc.rate_hz},
              {"s_end", sc.s_end},
              {"noise", sc.noise}};
}

Scenario scenario_from_json(const Json& j, const fs::path& base_dir) {
  require_object(j, "scenario");
  const auto kind = scenario_kind_from_string(j.value("kind", std::string("pick_place")));
  Scenario sc = generate_scenario(kind, j.value("seed", std::uint64_t{0}));
  read_opt(j, "name", sc.name);
  read_opt(j, "frame_labels", sc.frame_labels);
  if (j.contains("demos")) {
    sc.demos.clear();
    for (const auto& d : j.at("demos")) {
      if (d.is_string()) {
        sc.demos.push_back(ingest_demo(base_dir / d.get<std::string>()));
        continue;
      }
      Demonstration demo;
      demo.inputs = d.at("s").get<std::vector<double>>();
      demo.outputs = mat_from_json(d.at("x"));
      demo.duration_s = d.value("duration_s", 1.0);
      for (const auto& f : d.value("frames", Json::array())) demo.frames.push_back(frame_from_json(f));
      demo.validate();
      sc.demos.push_back(std::move(demo));
    }
    if (sc.demos.empty()) throw ValidationError("scenario has no demonstrations");
  }
  const auto frame_set = [](const Json& a) {
    std::vector<FramePose> out;
    for (const auto& f : a) out.push_back(frame_from_json(f));
    return out;
  };
  if (j.contains("eval_frames")) {
    sc.eval_frames.clear();
    for (const auto& e : j.at("eval_frames")) sc.eval_frames.push_back(frame_set(e));
  }
  if (j.contains("correction_frames")) sc.correction_frames = frame_set(j.at("correction_frames"));
  if (j.contains("train")) sc.train = train_config_from_json(j.at("train"), sc.train);
  if (j.contains("trigger")) sc.trigger = trigger_from_json(j.at("trigger"), sc.trigger);
  if (j.contains("stiffness")) sc.stiffness = stiffness_from_json(j.at("stiffness"), sc.stiffness);
  if (j.contains("shape")) {
    read_opt(j.at("shape"), "lift", sc.shape.lift);
    read_opt(j.at("shape"), "t_up", sc.shape.t_up);
    read_opt(j.at("shape"), "t_down", sc.shape.t_down);
  }
  if (j.contains("box")) {
    read_opt(j.at("box"), "inner_width", sc.box.inner_width);
    read_opt(j.at("box"), "wall", sc.box.wall);
    read_opt(j.at("box"), "wall_height", sc.box.wall_height);
    read_opt(j.at("box"), "grasp_height", sc.box.grasp_height);
  }
  read_opt(j, "duration_scale", sc.duration_scale);
  read_opt(j, "rate_hz", sc.rate_hz);
  read_opt(j, "s_end", sc.s_end);
  read_opt(j, "noise", sc.noise);

  const std::size_t p = sc.demos.front().frames.size();
  for (const auto& d : sc.demos) {
    if (d.frames.size() != p) throw ValidationError("demonstrations disagree on the number of frames");
  }
  for (const auto& e : sc.eval_frames) {
    if (e.size() < p) throw ValidationError("evaluation frame set has too few frames");
  }
  return sc;
}

fs::path write_scenario(const fs::path& dir, const Scenario& sc) {
  fs::create_directories(dir);
  for (std::size_t m = 0; m < sc.demos.size(); ++m) write_demo(dir / ("demo" + std::to_string(m) + ".csv"), sc.demos[m]);
  const fs::path file = dir / "scenario.json";
  write_json(file, scenario_to_json(sc, false));
  return file;
}

Scenario load_scenario(const fs::path& file) { return scenario_from_json(read_json(file), file.parent_path()); }

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const Scenario& sc) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(scenario_to_json(sc, true).dump())));
  return buf;
}

Json to_json(const TraceRow& r) {
  return Json{{"t", r.t},
              {"s", r.s},
              {"desired", to_json(r.desired)},
              {"actual", to_json(r.actual)},
              {"F", to_json(r.force)},
              {"w1", r.w1},
              {"sigma2_ep", r.sigma2_ep},
              {"GP_trace", r.trace_gp}};
}

void write_trace_csv(const fs::path& path, const std::vector<TraceRow>& trace) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  write_trace_csv(out, trace);
}

Json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ParseError(e.what(), 0);
  }
}

void write_json(const fs::path& path, const Json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out << j.dump(1) << '\n';
}

}  // namespace tpkmp
