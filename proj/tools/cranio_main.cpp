// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: synthetic data, registration, model building,
// sampling, fitting, surgery prediction, metrics, ablation and the REST service.

#include "cranio/eval/ablation.hpp"
#include "cranio/eval/config.hpp"
#include "cranio/eval/manifest.hpp"
#include "cranio/eval/metrics.hpp"
#include "cranio/fitting/fitting.hpp"
#include "cranio/geometry/mesh_io.hpp"
#include "cranio/service/http.hpp"
#include "cranio/synth/generator.hpp"
#include "cranio/util/hash.hpp"

#include <CLI11.hpp>
#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace cranio;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string manifest;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "Pipeline config JSON");
  cmd->add_option("--set", c.overrides, "Override a config entry, e.g. --set registration.rays.n_q=5")
      ->take_all();
  cmd->add_option("--manifest", c.manifest, "Manifest path (default: next to the outputs)");
}

/// File config, then --set overrides in order, then validation.
PipelineConfig resolve_config(const Common& c) {
  nlohmann::json j = c.config_path.empty() ? nlohmann::json(PipelineConfig{})
                                           : nlohmann::json(load_config(c.config_path));
  for (const std::string& o : c.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw ValidationError("override must be key.path=value: " + o);
    nlohmann::json value;
    try {
      value = nlohmann::json::parse(o.substr(eq + 1));
    } catch (const nlohmann::json::parse_error&) {
      value = o.substr(eq + 1);
    }
    nlohmann::json* node = &j;
    std::string path = o.substr(0, eq);
    for (std::size_t pos; (pos = path.find('.')) != std::string::npos; path = path.substr(pos + 1)) {
      const std::string key = path.substr(0, pos);
      if (!node->contains(key)) throw ValidationError("unknown config section '" + key + "'");
      node = &(*node)[key];
    }
    if (!node->is_object() || !node->contains(path)) {
      throw ValidationError("unknown config key '" + o.substr(0, eq) + "'");
    }
    (*node)[path] = value;
  }
  return j.get<PipelineConfig>();
}

TemplateSet templates_from(const std::string& dir) {
  if (dir.empty()) return synth::template_set(synth::make_templates());
  return load_template_set(dir);
}

std::vector<fs::path> case_dirs(const fs::path& corpus) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(corpus)) {
    if (e.is_directory() && e.path().filename().string().rfind("case_", 0) == 0) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw ValidationError("no case_* directories under " + corpus.string());
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string(), e.byte, false, e.what());
  }
}

fs::path manifest_path(const Common& c, const fs::path& fallback) {
  return c.manifest.empty() ? fallback : fs::path(c.manifest);
}

std::map<std::string, Affine34> parse_transforms(const nlohmann::json& j) {
  std::map<std::string, Affine34> out;
  for (const auto& [name, m] : j.items()) {
    if (!m.is_array() || m.size() != 3) throw ValidationError("transform '" + name + "' must be 3x4");
    Affine34 a;
    for (int r = 0; r < 3; ++r) {
      const auto& row = m.at(static_cast<std::size_t>(r));
      if (!row.is_array() || row.size() != 4) throw ValidationError("transform '" + name + "' must be 3x4");
      for (int k = 0; k < 4; ++k) a(r, k) = row.at(static_cast<std::size_t>(k)).get<double>();
    }
    out[name] = a;
  }
  return out;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  Common common;
  std::string out;
  int cases = -1;
  long long seed = -1;
};

int run_synth(const SynthArgs& a, const std::vector<std::string>& argv) {
  PipelineConfig cfg = resolve_config(a.common);
  if (a.cases >= 0) cfg.synth.cases = a.cases;
  if (a.seed >= 0) cfg.synth.seed = static_cast<std::uint64_t>(a.seed);
  cfg.validate();
  const fs::path out(a.out);
  fs::create_directories(out);
  const synth::HeadTemplates t = synth::make_templates();
  synth::write_templates(t, out / "templates");
  const auto corpus = synth::generate_corpus(t, cfg.synth.cases, cfg.synth.seed);
  for (const auto& c : corpus) synth::write_case(c, out);
  std::cout << "wrote " << corpus.size() << " cases and templates to " << out << '\n';

  RunManifest m("synth", argv);
  m.set_config(cfg);
  m.add_output(out);
  m.write(manifest_path(a.common, out / "manifest.json"));
  return 0;
}

struct RegisterArgs {
  Common common;
  std::string templates;
  std::string corpus;
  std::vector<std::string> cases;
};

int run_register(const RegisterArgs& a, const std::vector<std::string>& argv) {
  const PipelineConfig cfg = resolve_config(a.common);
  const TemplateSet t = templates_from(a.templates);
  std::vector<fs::path> dirs(a.cases.begin(), a.cases.end());
  if (!a.corpus.empty()) {
    const auto more = case_dirs(a.corpus);
    dirs.insert(dirs.end(), more.begin(), more.end());
  }
  if (dirs.empty()) throw ValidationError("nothing to register: pass case directories or --corpus");

  RunManifest m("register", argv);
  m.set_config(cfg);
  if (!a.templates.empty()) m.add_input(a.templates);
  for (const fs::path& d : dirs) {
    const auto start = std::chrono::steady_clock::now();
    const RegistrationCase rc = register_case_directory(t, d, cfg.registration);
    save_registration(rc, d);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << rc.id << ": registered in " << secs << " s, "
              << rc.provenance.value("joint_valid_rays", 0) << " joint rays\n";
    for (const char* f : {"face_scan.ply", "skull_ct.ply", "landmarks.json"}) m.add_input(d / f);
    m.add_output(d / "registered");
  }
  const fs::path fallback = a.corpus.empty() ? dirs.front() / "register_manifest.json"
                                             : fs::path(a.corpus) / "register_manifest.json";
  m.write(manifest_path(a.common, fallback));
  return 0;
}

struct BuildArgs {
  Common common;
  std::string templates;
  std::string corpus;
  std::string out;
};

int run_build_models(const BuildArgs& a, const std::vector<std::string>& argv) {
  const PipelineConfig cfg = resolve_config(a.common);
  const TemplateSet t = templates_from(a.templates);
  std::vector<RegistrationCase> cases;
  RunManifest m("build-models", argv);
  m.set_config(cfg);
  for (const fs::path& d : case_dirs(a.corpus)) {
    cases.push_back(load_registration(d));
    m.add_input(d / "registered");
  }
  if (cfg.models.flip_augment) {
    const std::size_t n = cases.size();
    for (std::size_t i = 0; i < n; ++i) {
      cases.push_back(flip_augment(cases[i], t.face_symmetry, t.skull_symmetry));
    }
  }
  const FsmmModel fsmm = build_fsmm(cases, cfg.models.n_id, cfg.models.n_alb);
  SkullRayOptions rays;
  rays.n_q = cases.front().n_q;
  const TmmModel tmm = build_tmm(cases, template_index_map(t, rays), cfg.models.n_ti);

  const fs::path out(a.out);
  fs::create_directories(out);
  save_model(fsmm, out / "fsmm.bfsm", cfg.models.storage);
  save_model(tmm, out / "tmm.bfsm", cfg.models.storage);
  std::cout << "FSMM: " << fsmm.n_id() << " shape / " << fsmm.n_alb() << " albedo components from "
            << fsmm.samples << " samples\nTMM: " << tmm.n_ti() << " components over "
            << tmm.valid_count() << " of " << tmm.rays() << " rays\n";
  m.add_output(out / "fsmm.bfsm");
  m.add_output(out / "tmm.bfsm");
  m.write(manifest_path(a.common, out / "manifest.json"));
  return 0;
}

struct SampleArgs {
  Common common;
  std::string model;
  std::string out;
  int count = 1;
  std::uint64_t seed = 0;
  double sigma = 1.0;
};

int run_sample(const SampleArgs& a, const std::vector<std::string>& argv) {
  const PipelineConfig cfg = resolve_config(a.common);
  const fs::path out(a.out);
  fs::create_directories(out);
  RunManifest m("sample", argv);
  m.set_config(cfg);
  m.add_input(a.model);
  const std::string kind = model_kind(a.model);
  for (int i = 0; i < a.count; ++i) {
    const std::uint64_t seed = a.seed + static_cast<std::uint64_t>(i);
    char name[32];
    std::snprintf(name, sizeof(name), "%04d", i);
    if (kind == "fsmm") {
      const FsmmModel model = load_fsmm(a.model);
      const FsmmSample s = sample_fsmm(model, random_fsmm_coefficients(model, seed, a.sigma));
      save_mesh(s.face, out / ("face_" + std::string(name) + ".ply"));
      save_mesh(s.skull, out / ("skull_" + std::string(name) + ".ply"));
    } else {
      const TmmModel model = load_tmm(a.model);
      const TissueField f = sample_tmm(model, random_tmm_coefficients(model, seed, a.sigma));
      nlohmann::json j = {{"n_q", model.n_q}, {"mask", f.mask}};
      std::vector<double> v;
      for (const Vec3& x : f.vectors) v.insert(v.end(), {x.x(), x.y(), x.z()});
      j["vectors"] = v;
      write_text(out / ("tissue_" + std::string(name) + ".json"), j.dump());
    }
  }
  std::cout << "wrote " << a.count << " " << kind << " samples to " << out << '\n';
  m.set("seed", a.seed);
  m.set("sigma", a.sigma);
  m.add_output(out);
  m.write(manifest_path(a.common, out / "manifest.json"));
  return 0;
}

struct FitArgs {
  Common common;
  std::string model;
  std::string target;
  std::string which = "face";
  int components = 0;
  std::string out;
  std::string mesh_out;
};

int run_fit(const FitArgs& a, const std::vector<std::string>& argv) {
  const PipelineConfig cfg = resolve_config(a.common);
  const FsmmModel model = load_fsmm(a.model);
  const TriMesh target = load_mesh(a.target);
  FsmmFitConfig fc;
  fc.which = a.which == "skull" ? FitTarget::Skull : a.which == "both" ? FitTarget::Both : FitTarget::Face;
  fc.components = a.components;
  const FsmmFit fit = fit_fsmm_to_mesh(target, model, fc);
  nlohmann::json j = {{"rmse_mm", fit.rmse},
                      {"iterations", fit.iterations},
                      {"rmse_history", fit.rmse_history},
                      {"id", std::vector<double>(fit.coeffs.id.data(), fit.coeffs.id.data() + fit.coeffs.id.size())},
                      {"angles", {fit.coeffs.angles.x(), fit.coeffs.angles.y(), fit.coeffs.angles.z()}},
                      {"translation", {fit.coeffs.translation.x(), fit.coeffs.translation.y(), fit.coeffs.translation.z()}}};
  write_text(a.out, j.dump(2) + "\n");
  std::cout << "fit RMSE " << fit.rmse << " mm after " << fit.iterations << " iterations\n";
  RunManifest m("fit", argv);
  m.set_config(cfg);
  m.add_input(a.model);
  m.add_input(a.target);
  m.add_output(a.out);
  if (!a.mesh_out.empty()) {
    const FsmmSample s = sample_fsmm(model, fit.coeffs);
    save_mesh(a.which == "skull" ? s.skull : s.face, a.mesh_out);
    m.add_output(a.mesh_out);
  }
  m.write(manifest_path(a.common, fs::path(a.out).parent_path() / "fit_manifest.json"));
  return 0;
}

struct PredictArgs {
  Common common;
  std::string templates;
  std::string case_dir;
  std::string plan;
  std::string tmm;
  std::string truth;
  std::string out;
};

int run_predict(const PredictArgs& a, const std::vector<std::string>& argv) {
  const PipelineConfig cfg = resolve_config(a.common);
  const TemplateSet t = templates_from(a.templates);
  const RegistrationCase rc = load_registration(a.case_dir);
  const nlohmann::json plan_json = read_json_file(a.plan);
  TriMesh skull_plan = rc.skull;
  if (plan_json.contains("transforms")) {
    skull_plan = make_surgery_plan(rc.skull, t.skull_regions, parse_transforms(plan_json.at("transforms")),
                                   cfg.surgery.band_mm)
                     .skull_plan;
  } else if (plan_json.contains("vertices")) {
    const auto v = plan_json.at("vertices").get<std::vector<double>>();
    if (v.size() != 3 * skull_plan.vertices.size()) throw ValidationError("planned vertex count mismatch");
    for (std::size_t i = 0; i < skull_plan.vertices.size(); ++i) {
      skull_plan.vertices[i] = Vec3(v[3 * i], v[3 * i + 1], v[3 * i + 2]);
    }
  } else {
    throw ValidationError("plan needs transforms or vertices");
  }
  std::optional<TmmModel> tmm;
  if (!a.tmm.empty()) tmm = load_tmm(a.tmm);

  const auto start = std::chrono::steady_clock::now();
  const PredictionResult r = predict_surgery(rc.face, rc.skull, skull_plan, t.face_landmarks,
                                             tmm ? &*tmm : nullptr, cfg.surgery.predict);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const fs::path out(a.out);
  fs::create_directories(out);
  save_mesh(skull_plan, out / "skull_plan.ply");
  save_mesh(r.face, out / "face_pred.ply");
  double max_d = 0.0;
  double sum_d = 0.0;
  for (double d : r.displacement) {
    max_d = std::max(max_d, d);
    sum_d += d;
  }
  nlohmann::json report = {{"displacement_max_mm", max_d},
                           {"displacement_mean_mm", sum_d / static_cast<double>(r.displacement.size())},
                           {"displacement", r.displacement},
                           {"diagnostics", r.diagnostics}};
  if (!a.truth.empty()) {
    const TriMesh truth = load_mesh(a.truth);
    if (truth.vertices.size() != r.face.vertices.size()) throw ValidationError("truth vertex count mismatch");
    double err = 0.0;
    for (std::size_t i = 0; i < truth.vertices.size(); ++i) err += (truth.vertices[i] - r.face.vertices[i]).norm();
    err /= static_cast<double>(truth.vertices.size());
    report["truth_mean_error_mm"] = err;
    report["truth_mean_error_pct_diag"] = 100.0 * err / truth.bbox_diagonal();
    report["metrics"] = evaluate(r.face, truth, cfg.metrics.recall_tau, cfg.metrics.crop_margin);
  }
  write_text(out / "prediction.json", report.dump(2) + "\n");
  std::cout << "predicted face in " << secs << " s, mean displacement "
            << report["displacement_mean_mm"].get<double>() << " mm\n";

  RunManifest m("predict-surgery", argv);
  m.set_config(cfg);
  m.add_input(fs::path(a.case_dir) / "registered");
  m.add_input(a.plan);
  if (!a.tmm.empty()) m.add_input(a.tmm);
  if (!a.truth.empty()) m.add_input(a.truth);
  m.add_output(out / "skull_plan.ply");
  m.add_output(out / "face_pred.ply");
  m.add_output(out / "prediction.json");
  m.write(manifest_path(a.common, out / "manifest.json"));
  return 0;
}

struct MetricsArgs {
  Common common;
  std::string pred;
  std::string gt;
  double tau = -1.0;
  double margin = -1.0;
  std::string out;
};

int run_metrics(const MetricsArgs& a, const std::vector<std::string>& argv) {
  PipelineConfig cfg = resolve_config(a.common);
  if (a.tau >= 0.0) cfg.metrics.recall_tau = a.tau;
  if (a.margin >= 0.0) cfg.metrics.crop_margin = a.margin;
  cfg.validate();
  const MetricsReport r =
      evaluate(load_mesh(a.pred), load_mesh(a.gt), cfg.metrics.recall_tau, cfg.metrics.crop_margin);
  const std::string text = nlohmann::json(r).dump(2) + "\n";
  RunManifest m("metrics", argv);
  m.set_config(cfg);
  m.add_input(a.pred);
  m.add_input(a.gt);
  fs::path fallback = "metrics_manifest.json";
  if (a.out.empty()) {
    std::cout << text;
  } else {
    write_text(a.out, text);
    m.add_output(a.out);
    fallback = fs::path(a.out).parent_path() / "metrics_manifest.json";
  }
  m.write(manifest_path(a.common, fallback));
  return 0;
}

struct AblateArgs {
  Common common;
  std::string templates;
  std::string corpus;
  std::string out;
  int limit = 0;
};

int run_ablate(const AblateArgs& a, const std::vector<std::string>& argv) {
  const PipelineConfig cfg = resolve_config(a.common);
  const TemplateSet t = templates_from(a.templates);
  RunManifest m("ablate", argv);
  m.set_config(cfg);
  std::vector<AblationCase> cases;
  for (const fs::path& d : case_dirs(a.corpus)) {
    if (a.limit > 0 && static_cast<int>(cases.size()) >= a.limit) break;
    const RegistrationCase rc = load_registration(d);
    cases.push_back({rc.id, rc.face, load_mesh(d / "skull_ct.ply"), load_mesh(d / "ground_truth" / "skull.ply")});
    m.add_input(d / "registered");
    m.add_input(d / "skull_ct.ply");
    m.add_input(d / "ground_truth" / "skull.ply");
  }
  const AblationTable table = run_ablation(t, cases, cfg.registration.skull, cfg.ablation);
  const std::string csv = ablation_csv(table, t.face.vertices.size());
  const fs::path out(a.out);
  write_text(out / "ablation.csv", csv);
  nlohmann::json cells = nlohmann::json::array();
  for (const AblationCell& c : table.cells) {
    nlohmann::json per_case = nlohmann::json::array();
    for (double v : c.per_case) per_case.push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
    cells.push_back({{"origin_stride", c.origin_stride},
                     {"origins", c.origins},
                     {"n_q", c.n_q},
                     {"nrmse", std::isnan(c.nrmse) ? nlohmann::json(nullptr) : nlohmann::json(c.nrmse)},
                     {"per_case", per_case},
                     {"failed", c.failed},
                     {"first_error", c.first_error}});
  }
  write_text(out / "ablation.json", nlohmann::json{{"cells", cells}}.dump(2) + "\n");
  std::cout << csv;
  m.add_output(out / "ablation.csv");
  m.add_output(out / "ablation.json");
  m.write(manifest_path(a.common, out / "manifest.json"));
  return 0;
}

struct ServeArgs {
  Common common;
  std::string templates;
  std::string store = "cranio_store";
  std::string tmm;
  std::string host = "127.0.0.1";
  int port = 8080;
};

httplib::Server* g_server = nullptr;

int run_serve(const ServeArgs& a, const std::vector<std::string>& argv) {
  const PipelineConfig cfg = resolve_config(a.common);
  std::shared_ptr<const TmmModel> tmm;
  if (!a.tmm.empty()) tmm = std::make_shared<const TmmModel>(load_tmm(a.tmm));
  PlanningService service(templates_from(a.templates), a.store, cfg.surgery, tmm);

  RunManifest m("serve", argv);
  m.set_config(cfg);
  if (!a.templates.empty()) m.add_input(a.templates);
  if (!a.tmm.empty()) m.add_input(a.tmm);
  m.set("host", a.host);
  m.set("port", a.port);
  m.write(manifest_path(a.common, fs::path(a.store) / "serve_manifest.json"));

  httplib::Server server;
  install_routes(server, service);
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (g_server) g_server->stop();
  });
  std::cout << "listening on http://" << a.host << ':' << a.port << std::endl;
  if (!server.listen(a.host, a.port)) throw IoError("cannot listen on " + a.host + ":" + std::to_string(a.port));
  g_server = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  CLI::App app{"Face and skull shape modelling, registration and surgery prediction"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Write synthetic template and case fixtures");
  add_common(synth, synth_args.common);
  synth->add_option("--out", synth_args.out, "Output directory")->required();
  synth->add_option("--cases", synth_args.cases, "Number of cases (default from config)");
  synth->add_option("--seed", synth_args.seed, "Corpus seed (default from config)");

  RegisterArgs reg_args;
  auto* reg = app.add_subcommand("register", "Register raw cases to the template pair");
  add_common(reg, reg_args.common);
  reg->add_option("--templates", reg_args.templates, "Template directory (default: built-in)");
  reg->add_option("--corpus", reg_args.corpus, "Directory holding case_* subdirectories");
  reg->add_option("cases", reg_args.cases, "Case directories");

  BuildArgs build_args;
  auto* build = app.add_subcommand("build-models", "Build the shape and tissue models");
  add_common(build, build_args.common);
  build->add_option("--templates", build_args.templates, "Template directory (default: built-in)");
  build->add_option("--corpus", build_args.corpus, "Registered corpus")->required();
  build->add_option("--out", build_args.out, "Output directory")->required();

  SampleArgs sample_args;
  auto* sample = app.add_subcommand("sample", "Draw random model instances");
  add_common(sample, sample_args.common);
  sample->add_option("--model", sample_args.model, "Model file")->required();
  sample->add_option("--out", sample_args.out, "Output directory")->required();
  sample->add_option("--count", sample_args.count, "Number of samples")->check(CLI::PositiveNumber);
  sample->add_option("--seed", sample_args.seed, "Random seed");
  sample->add_option("--sigma", sample_args.sigma, "Standard deviations per component");

  FitArgs fit_args;
  auto* fit = app.add_subcommand("fit", "Fit the shape model to a mesh");
  add_common(fit, fit_args.common);
  fit->add_option("--model", fit_args.model, "FSMM file")->required();
  fit->add_option("--target", fit_args.target, "Target mesh")->required();
  fit->add_option("--which", fit_args.which, "face, skull or both")
      ->check(CLI::IsMember({"face", "skull", "both"}));
  fit->add_option("--components", fit_args.components, "Leading components to use (0: all)");
  fit->add_option("--out", fit_args.out, "Coefficient JSON")->required();
  fit->add_option("--mesh-out", fit_args.mesh_out, "Fitted mesh");

  PredictArgs pred_args;
  auto* pred = app.add_subcommand("predict-surgery", "Predict the postoperative face for a skull plan");
  add_common(pred, pred_args.common);
  pred->add_option("--templates", pred_args.templates, "Template directory (default: built-in)");
  pred->add_option("--case", pred_args.case_dir, "Registered case directory")->required();
  pred->add_option("--plan", pred_args.plan, "Plan JSON: {\"transforms\": {region: 3x4}} or {\"vertices\": [...]}")
      ->required();
  pred->add_option("--tmm", pred_args.tmm, "Tissue model for regularized prediction");
  pred->add_option("--truth", pred_args.truth, "Ground-truth postoperative face");
  pred->add_option("--out", pred_args.out, "Output directory")->required();

  MetricsArgs met_args;
  auto* met = app.add_subcommand("metrics", "NRMSE, chamfer and recall of a prediction");
  add_common(met, met_args.common);
  met->add_option("--pred", met_args.pred, "Predicted mesh")->required();
  met->add_option("--gt", met_args.gt, "Ground-truth mesh")->required();
  met->add_option("--tau", met_args.tau, "Recall threshold in mm (default from config)");
  met->add_option("--margin", met_args.margin, "Chamfer crop margin in mm (default from config)");
  met->add_option("--out", met_args.out, "Report JSON (default: stdout)");

  AblateArgs abl_args;
  auto* abl = app.add_subcommand("ablate", "Skull NRMSE over ray-origin and endpoint counts");
  add_common(abl, abl_args.common);
  abl->add_option("--templates", abl_args.templates, "Template directory (default: built-in)");
  abl->add_option("--corpus", abl_args.corpus, "Registered synthetic corpus")->required();
  abl->add_option("--out", abl_args.out, "Output directory")->required();
  abl->add_option("--limit", abl_args.limit, "Use at most this many cases");

  ServeArgs serve_args;
  auto* serve = app.add_subcommand("serve", "Run the planning REST service");
  add_common(serve, serve_args.common);
  serve->add_option("--templates", serve_args.templates, "Template directory (default: built-in)");
  serve->add_option("--store", serve_args.store, "Case and plan store directory");
  serve->add_option("--tmm", serve_args.tmm, "Tissue model");
  serve->add_option("--host", serve_args.host, "Bind address");
  serve->add_option("--port", serve_args.port, "Port")->check(CLI::Range(1, 65535));

  CLI11_PARSE(app, argc, argv);
  try {
    if (*synth) return run_synth(synth_args, args);
    if (*reg) return run_register(reg_args, args);
    if (*build) return run_build_models(build_args, args);
    if (*sample) return run_sample(sample_args, args);
    if (*fit) return run_fit(fit_args, args);
    if (*pred) return run_predict(pred_args, args);
    if (*met) return run_metrics(met_args, args);
    if (*abl) return run_ablate(abl_args, args);
    if (*serve) return run_serve(serve_args, args);
  } catch (const ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
