// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include "cranio/deform/deform.hpp"
#include "cranio/eval/ablation.hpp"
#include "cranio/eval/metrics.hpp"
#include "cranio/fitting/fitting.hpp"
#include "cranio/models/models.hpp"
#include "cranio/pipeline/registration.hpp"
#include "cranio/raycast/raycast.hpp"
#include "cranio/synth/generator.hpp"

#include <CLI11.hpp>
#include <Eigen/Geometry>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <span>
#include <string>

namespace cranio {
namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

double max_vertex_distance(std::span<const Vec3> a, std::span<const Vec3> b) {
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, (a[i] - b[i]).norm());
  return worst;
}

double mean_vertex_distance(std::span<const Vec3> a, std::span<const Vec3> b) {
  double sum = 0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]).norm();
  return sum / static_cast<double>(a.size());
}

double rms_vertex_distance(std::span<const Vec3> a, std::span<const Vec3> b) {
  double sum = 0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]).squaredNorm();
  return std::sqrt(sum / static_cast<double>(a.size()));
}

Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  return Eigen::Quaterniond(n(rng), n(rng), n(rng), n(rng)).normalized().toRotationMatrix();
}

struct Context {
  synth::HeadTemplates heads;
  TemplateSet templates;
  std::vector<synth::SynthCase> corpus;
  int registration_cases = 20;
  int model_cases = 10;
  int ablation_cases = 5;
  // Filled by the registration criterion, reused by the ablation.
  std::vector<RegistrationCase> registered;
};

Outcome ray_oracle(const Context&) {
  const TriMesh skull = synth::make_skull_mesh(51, 51);
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(-1, 1);
  const Aabb box = skull.bounds();
  RayBundle rays;
  for (int i = 0; i < 10000; ++i) {
    const Vec3 o = box.center() + 0.6 * (box.max - box.min).cwiseProduct(Vec3(u(rng), u(rng), u(rng)));
    rays.origins.push_back(o);
    rays.targets.push_back(o + 10.0 * Vec3(u(rng), u(rng), u(rng)).normalized());
  }
  const Stopwatch clock;
  const HitSet fast = psi_hit(rays, SpatialIndex(skull));
  const double fast_s = clock.seconds();
  const HitSet slow = psi_hit_brute_force(rays, skull);
  const double total_s = clock.seconds();

  const bool masks = fast.mask == slow.mask;
  double worst = 0;
  for (std::size_t i = 0; masks && i < fast.size(); ++i) {
    if (fast.valid(i)) worst = std::max(worst, (fast.point(i) - slow.point(i)).norm());
  }
  worst /= skull.bbox_diagonal();
  return {masks && worst <= 1e-9 && total_s < 5.0,
          fmt("%zu triangles, %zu/%zu hits, masks %s, max rel deviation %.2e, accelerated %.3f s, "
              "total %.3f s",
              skull.faces.size(), fast.valid_count(), fast.size(), masks ? "identical" : "DIFFER", worst,
              fast_s, total_s)};
}

Outcome deform_fixed_point(const Context& ctx) {
  std::string detail;
  bool pass = true;
  for (const auto& [name, mesh] : {std::pair<std::string, const TriMesh&>{"face", ctx.templates.face},
                                   {"skull", ctx.templates.skull}}) {
    const SpatialIndex index(mesh);
    DeformConfig cfg = DeformConfig::defaults();
    cfg.iterations = 500;
    cfg.schedule = DeformConfig::geometric_schedule(100, 1, 4, cfg.iterations);
    const DeformResult r = deform(mesh, &index, ControlPairs{mesh.vertices, mesh.vertices}, cfg);
    const double rel = max_vertex_distance(r.mesh.vertices, mesh.vertices) / mesh.bbox_diagonal();
    pass = pass && rel <= 1e-3;
    detail += fmt("%s template max move %.2e diag (%d iterations); ", name.c_str(), rel, r.iterations);
  }
  detail.resize(detail.size() - 2);
  return {pass, detail};
}

Outcome gradient_check(const Context&) {
  TriMesh source;
  const int cols = 10, rows = 5;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) source.vertices.emplace_back(5.0 * c, 5.0 * r, 0.0);
  }
  for (int r = 0; r + 1 < rows; ++r) {
    for (int c = 0; c + 1 < cols; ++c) {
      const int a = r * cols + c;
      source.faces.push_back({a, a + 1, a + cols + 1});
      source.faces.push_back({a, a + cols + 1, a + cols});
    }
  }
  TriMesh target = source;
  for (Vec3& v : target.vertices) v.z() = 2.0 * std::sin(v.x() / 9.0) + 0.5 * std::cos(v.y() / 7.0);
  ControlPairs controls;
  for (int k : {0, 13, 27, 49}) {
    controls.source.push_back(source.vertices[static_cast<std::size_t>(k)]);
    controls.target.push_back(source.vertices[static_cast<std::size_t>(k)] + Vec3(0.7, -0.4, 1.1));
  }
  DeformConfig cfg;
  cfg.mu = 2.0;
  const SpatialIndex index(target);
  DeformProblem problem(source, &index, controls, cfg);
  AffineField field = AffineField::identity(source.vertices.size());
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 0.02);
  for (double& p : field.flat()) p += n(rng);
  problem.update_correspondences(field);

  const double lambda = 5.0;
  std::vector<double> grad;
  problem.evaluate(field, lambda, &grad);
  double gmax = 0;
  for (double g : grad) gmax = std::max(gmax, std::abs(g));
  const double h = 1e-6;
  double worst = 0;
  auto flat = field.flat();
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const double keep = flat[i];
    flat[i] = keep + h;
    const double up = problem.evaluate(field, lambda, nullptr).total;
    flat[i] = keep - h;
    const double down = problem.evaluate(field, lambda, nullptr).total;
    flat[i] = keep;
    const double fd = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-3 * gmax}));
  }
  return {worst < 1e-4, fmt("%zu vertices, %zu parameters, max relative error %.2e", source.vertices.size(),
                            flat.size(), worst)};
}

Outcome dense_vs_sparse(Context& ctx) {
  const TemplateSet& t = ctx.templates;
  const RegistrationOptions options;
  const std::span<const synth::SynthCase> corpus(
      ctx.corpus.data(), std::min<std::size_t>(ctx.corpus.size(), static_cast<std::size_t>(ctx.registration_cases)));
  double dense = 0, sparse = 0, face_worst = 0, seconds = 0;
  for (const synth::SynthCase& c : corpus) {
    const Stopwatch clock;
    const RegistrationReport r = register_subject(t, c.face_scan, c.skull_ct, c.face_landmarks, options, c.id);
    seconds += clock.seconds();
    const DeformResult s = register_skull_sparse(c.skull_ct, t.skull, t.skull_landmarks, c.skull_landmarks,
                                                 r.skull.prealign, options.skull);
    dense += mean_vertex_distance(r.registered.skull.vertices, c.skull.vertices);
    sparse += mean_vertex_distance(s.mesh.vertices, c.skull.vertices);
    face_worst = std::max(face_worst, 100.0 * rms_vertex_distance(r.registered.face.vertices, c.face.vertices) /
                                          c.face.bbox_diagonal());
    ctx.registered.push_back(r.registered);
  }
  const double n = static_cast<double>(corpus.size());
  dense /= n;
  sparse /= n;
  const double ratio = sparse / dense;
  return {ratio >= 2.0 && face_worst < 2.0,
          fmt("%zu cases: skull correspondence error dense %.3f mm, sparse (%zu landmarks) %.3f mm, "
              "ratio %.2f (need >= 2); worst face RMS error %.3f%% diag (need < 2%%); %.1f s per registration",
              corpus.size(), dense, t.skull_landmarks.size(), sparse, ratio, face_worst, seconds / n)};
}

std::vector<RegistrationCase> truth_corpus(const Context& ctx) {
  std::vector<RegistrationCase> out;
  for (int i = 0; i < ctx.model_cases && i < static_cast<int>(ctx.corpus.size()); ++i) {
    const synth::SynthCase& c = ctx.corpus[static_cast<std::size_t>(i)];
    RegistrationCase rc;
    rc.id = c.id;
    rc.face = c.face;
    rc.skull = c.skull;
    const std::vector<Vec3> q = psi_map(c.face, ctx.templates.face_landmarks, rc.n_q);
    rc.tissue = psi_hit(build_skull_rays(c.face, q, 1), SpatialIndex(c.skull));
    out.push_back(rc);
    out.push_back(flip_augment(rc, ctx.templates.face_symmetry, ctx.templates.skull_symmetry));
  }
  return out;
}

Eigen::VectorXd tissue_vector(const TmmModel& m, const RegistrationCase& c) {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(m.mean.size());
  for (std::size_t r = 0; r < m.rays(); ++r) {
    if (m.valid[r]) y.segment<3>(static_cast<Eigen::Index>(3 * r)) = c.tissue.vector(r);
  }
  return y;
}

Outcome pca_exactness(const Context& ctx) {
  const std::vector<RegistrationCase> cases = truth_corpus(ctx);
  const IndexMap index_map = template_index_map(ctx.templates);
  const FsmmModel fsmm = build_fsmm(cases);
  const TmmModel tmm = build_tmm(cases, index_map);

  auto fsmm_error = [&](const FsmmModel& m, const RegistrationCase& c) {
    const Eigen::VectorXd y = stack_shape(c.face, c.skull);
    return (fsmm_shape(m, fsmm_project(m, y)) - y).norm() / y.norm();
  };
  auto tmm_error = [&](const TmmModel& m, const RegistrationCase& c) {
    const Eigen::VectorXd y = tissue_vector(m, c);
    const Eigen::VectorXd back = m.mean + m.basis * (m.basis.transpose() * (y - m.mean));
    return (back - y).norm() / y.norm();
  };

  double fsmm_full = 0, tmm_full = 0;
  for (const RegistrationCase& c : cases) {
    fsmm_full = std::max(fsmm_full, fsmm_error(fsmm, c));
    tmm_full = std::max(tmm_full, tmm_error(tmm, c));
  }
  bool monotone = true;
  double prev_f = INFINITY, prev_t = INFINITY;
  for (int k = 1; k <= fsmm.rank; ++k) {
    const FsmmModel fk = build_fsmm(cases, k);
    const TmmModel tk = build_tmm(cases, index_map, k);
    double ef = 0, et = 0;
    for (const RegistrationCase& c : cases) {
      ef += fsmm_error(fk, c);
      et += tmm_error(tk, c);
    }
    monotone = monotone && ef <= prev_f + 1e-12 && et <= prev_t + 1e-12;
    prev_f = ef;
    prev_t = et;
  }
  return {fsmm_full < 1e-9 && tmm_full < 1e-9 && monotone,
          fmt("%zu training cases, rank %d: full-rank relative error FSMM %.2e, TMM %.2e; error "
              "non-increasing over 1..%d components: %s",
              cases.size(), fsmm.rank, fsmm_full, tmm_full, fsmm.rank, monotone ? "yes" : "NO")};
}

Outcome flip_symmetry(const Context& ctx) {
  const FsmmModel m = build_fsmm(truth_corpus(ctx));
  const TemplateSet& t = ctx.templates;
  const std::size_t nf = m.face_vertices;
  auto vertex = [&](std::size_t i) { return Vec3(m.mean.segment<3>(static_cast<Eigen::Index>(3 * i))); };
  auto mirrored = [&](std::size_t j) {
    const Vec3 b = vertex(j);
    return Vec3(-b.x(), b.y(), b.z());
  };
  double worst = 0;
  for (std::size_t i = 0; i < nf; ++i) {
    const Vec3 d = vertex(i) - mirrored(static_cast<std::size_t>(t.face_symmetry[i]));
    worst = std::max(worst, d.cwiseAbs().maxCoeff());
  }
  for (std::size_t i = 0; i < m.skull_vertices; ++i) {
    const Vec3 d = vertex(nf + i) - mirrored(nf + static_cast<std::size_t>(t.skull_symmetry[i]));
    worst = std::max(worst, d.cwiseAbs().maxCoeff());
  }
  return {worst < 1e-9, fmt("%zu-sample mean, max |mean - flip(mean)| %.2e mm", m.samples, worst)};
}

Outcome tmm_identities(const Context& ctx) {
  const TmmModel m = build_tmm(truth_corpus(ctx), template_index_map(ctx.templates));
  const TissueField zero = sample_tmm(m, TmmCoefficients::zero(m));
  bool mean_exact = true;
  for (std::size_t r = 0; r < m.rays(); ++r) {
    mean_exact = mean_exact && zero.vectors[r] == Vec3(m.mean.segment<3>(static_cast<Eigen::Index>(3 * r)));
  }

  bool homogeneous = true;
  double fit_worst = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    TmmCoefficients k = random_tmm_coefficients(m, seed);
    k.scale = 1.0;
    const TissueField unit = sample_tmm(m, k);
    k.scale = 0.8 + 0.1 * static_cast<double>(seed);
    const TissueField scaled = sample_tmm(m, k);
    for (std::size_t r = 0; r < m.rays(); ++r) {
      homogeneous = homogeneous && scaled.vectors[r] == k.scale * unit.vectors[r];
    }
    const TissueFit fit = fit_tissue(scaled, m, 0.0);
    const TissueField back = sample_tmm(m, fit.coeffs);
    double num = 0, den = 0;
    for (std::size_t r = 0; r < m.rays(); ++r) {
      if (!m.valid[r]) continue;
      num += (back.vectors[r] - scaled.vectors[r]).squaredNorm();
      den += scaled.vectors[r].squaredNorm();
    }
    fit_worst = std::max(fit_worst, std::sqrt(num / den));
  }
  return {mean_exact && homogeneous && fit_worst < 1e-6,
          fmt("zero coefficients give the mean exactly: %s; scale homogeneity exact: %s; fit_tissue round "
              "trip max relative residual %.2e over 5 sampled fields",
              mean_exact ? "yes" : "NO", homogeneous ? "yes" : "NO", fit_worst)};
}

Outcome surgery(const Context& ctx) {
  const TemplateSet& t = ctx.templates;
  Affine34 advance = identity_affine();
  advance(1, 3) = 4.0;
  Affine34 impaction = identity_affine();
  impaction(2, 3) = -3.0;
  const std::vector<std::map<std::string, Affine34>> plans{
      {{"mandible", advance}}, {{"maxilla", impaction}}, {{"mandible", advance}, {"maxilla", impaction}}};

  const std::size_t n = std::min<std::size_t>(5, ctx.corpus.size());
  double noop_worst = 0, err_sum = 0, err_worst = 0;
  int predictions = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const synth::SynthCase& c = ctx.corpus[i];
    const SurgeryTransport transport = prepare_transport(c.face, c.skull, t.face_landmarks);
    const PredictionResult noop = predict_surgery(c.face, c.skull, c.skull, transport);
    noop_worst = std::max(noop_worst, mean_vertex_distance(noop.face.vertices, c.face.vertices));
    for (const auto& plan : plans) {
      const SurgeryPlan p = make_surgery_plan(c.skull, t.skull_regions, plan, 5.0);
      const synth::PostopTruth truth = synth::make_postop_truth(c, ctx.heads, plan, 5.0);
      const PredictionResult r = predict_surgery(c.face, c.skull, p.skull_plan, transport);
      const double e = nrmse(r.face.vertices, truth.face_after);
      err_sum += e;
      err_worst = std::max(err_worst, e);
      ++predictions;
    }
  }
  const double err_mean = err_sum / predictions;

  // End to end on one raw case: registration, planning and prediction.
  const synth::SynthCase& c = ctx.corpus.front();
  const Stopwatch clock;
  const RegistrationReport reg =
      register_subject(t, c.face_scan, c.skull_ct, c.face_landmarks, RegistrationOptions{}, c.id);
  const SurgeryPlan p = make_surgery_plan(reg.registered.skull, t.skull_regions, plans.front(), 5.0);
  const PredictionResult r = predict_surgery(reg.registered.face, reg.registered.skull, p.skull_plan,
                                             t.face_landmarks);
  const double e2e = clock.seconds();
  const synth::PostopTruth truth = synth::make_postop_truth(c, ctx.heads, plans.front(), 5.0);
  const double e2e_err = nrmse(r.face.vertices, truth.face_after);

  return {noop_worst < 1.0 && err_mean < 2.0 && e2e < 60.0,
          fmt("identity plan mean face change %.2e mm; %d GT predictions on %zu cases, error mean %.3f%% "
              "max %.3f%% diag; end to end from raw scans %.1f s (error %.3f%% diag)",
              noop_worst, predictions, n, err_mean, err_worst, e2e, e2e_err)};
}

Outcome ablation_direction(const Context& ctx) {
  std::vector<AblationCase> cases;
  for (std::size_t i = 0; i < ctx.registered.size() && static_cast<int>(i) < ctx.ablation_cases; ++i) {
    const synth::SynthCase& c = ctx.corpus[i];
    cases.push_back({c.id, ctx.registered[i].face, c.skull_ct, c.skull});
  }
  if (cases.empty()) return {false, "no registered cases"};
  const AblationConfig grid;
  const AblationTable table = run_ablation(ctx.templates, cases, RegistrationOptions{}.skull, grid);
  bool pass = true;
  std::string detail = fmt("%zu cases;", cases.size());
  const int sparse = grid.origin_strides.front();
  const int dense = grid.origin_strides.back();
  for (int q : grid.n_q) {
    const double lo = table.at(sparse, q).nrmse;
    const double hi = table.at(dense, q).nrmse;
    // A failed sparse cell (too few rays to register) counts as unbounded error.
    const bool ok = std::isnan(lo) ? !std::isnan(hi) : hi <= 1.05 * lo;
    pass = pass && ok;
    detail += fmt(" n_q=%d: N_O=N_F %.4f vs N_O=N_F/100 %s%s;", q, hi,
                  std::isnan(lo) ? "failed" : fmt("%.4f", lo).c_str(), ok ? "" : " VIOLATED");
  }
  detail.pop_back();
  return {pass, detail};
}

Outcome metric_identities(const Context&) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g;
  auto ellipsoid = [&](int n, const Vec3& radii) {
    std::vector<Vec3> pts;
    for (int i = 0; i < n; ++i) pts.push_back(radii.cwiseProduct(Vec3(g(rng), g(rng), g(rng)).normalized()));
    return pts;
  };
  const std::vector<Vec3> x = ellipsoid(1500, Vec3(90, 70, 50));
  std::vector<Vec3> y = ellipsoid(1500, Vec3(91, 69, 52));
  for (Vec3& p : y) p += Vec3(0.4, -0.3, 0.2);

  const double c0 = chamfer(x, x), r0 = recall(x, x, 2.0), n0 = nrmse(x, x);
  const bool identities = c0 == 0.0 && r0 == 1.0 && n0 == 0.0;

  const double c1 = chamfer(x, y), r1 = recall(x, y, 1.7), n1 = nrmse(y, x);
  double worst = 0;
  for (int trial = 0; trial < 5; ++trial) {
    const Mat3 rot = random_rotation(rng);
    const Vec3 shift(g(rng) * 100, g(rng) * 100, g(rng) * 100);
    auto move = [&](std::vector<Vec3> pts) {
      for (Vec3& p : pts) p = rot * p + shift;
      return pts;
    };
    const std::vector<Vec3> xm = move(x), ym = move(y);
    worst = std::max({worst, std::abs(chamfer(xm, ym) - c1), std::abs(recall(xm, ym, 1.7) - r1),
                      std::abs(nrmse(ym, xm) - n1)});
  }
  return {identities && worst < 1e-9,
          fmt("chamfer(X,X)=%g recall(X,X)=%g nrmse(X,X)=%g; max change under 5 rigid motions %.2e "
              "(chamfer %.4f, recall %.4f, nrmse %.4f); no secondary component is built or linked",
              c0, r0, n0, worst, c1, r1, n1)};
}

}  // namespace
}  // namespace cranio

int main(int argc, char** argv) {
  using namespace cranio;
  CLI::App app("Runs every acceptance criterion and prints one PASS/FAIL line each");
  int cases = 20;
  int model_cases = 10;
  int ablation_cases = 5;
  std::uint64_t seed = 1;
  std::string only;
  app.add_option("--cases", cases, "Synthetic cases for the registration criterion")->check(CLI::PositiveNumber);
  app.add_option("--model-cases", model_cases, "Cases (before flipping) for the model criteria")
      ->check(CLI::PositiveNumber);
  app.add_option("--ablation-cases", ablation_cases, "Registered cases scored in the ablation")
      ->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "Corpus seed");
  app.add_option("--only", only, "Run only criteria whose name contains this text");
  CLI11_PARSE(app, argc, argv);

  Context ctx;
  ctx.heads = synth::make_templates();
  ctx.templates = synth::template_set(ctx.heads);
  ctx.corpus = synth::generate_corpus(ctx.heads, std::max({cases, model_cases, 2}), seed);
  ctx.registration_cases = cases;
  ctx.model_cases = model_cases;
  ctx.ablation_cases = ablation_cases;

  const std::vector<std::pair<std::string, std::function<Outcome(Context&)>>> criteria{
      {"ray oracle equivalence", ray_oracle},
      {"deformation fixed point", deform_fixed_point},
      {"gradient correctness", gradient_check},
      {"dense vs sparse skull registration", dense_vs_sparse},
      {"PCA exactness and monotonicity", pca_exactness},
      {"flip symmetry of the mean", flip_symmetry},
      {"tissue model identities", tmm_identities},
      {"surgery no-op and synthetic ground truth", surgery},
      {"ablation direction", ablation_direction},
      {"metric identities and rigid invariance", metric_identities},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& [name, run] = criteria[i];
    if (!only.empty() && name.find(only) == std::string::npos) continue;
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      o = run(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failed;
    std::printf("%s  %2zu %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, name.c_str(), o.detail.c_str(), s);
    std::fflush(stdout);
  }
  std::printf("%d failed\n", failed);
  return failed == 0 ? 0 : 1;
}
