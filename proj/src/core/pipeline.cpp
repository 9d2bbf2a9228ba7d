#include "pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "csvio.hpp"
#include "parallel.hpp"

namespace mtg {

namespace {

using nlohmann::json;

json provenance(std::uint64_t hash) {
  return json{{"tool", "mtgibbs"}, {"version", kVersion}, {"config_hash", hex64(hash)}};
}

void ensure_dir(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  require(!ec, Status::Io, "cannot create output directory: " + path);
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

double json_number(const json& v, const std::string& what) {
  require(v.is_number(), Status::Schema, what + " must be a number");
  return v.get<double>();
}

PairMatrix matrix_from_config(const json& v, int n_marks, const std::string& what) {
  if (v.is_number()) return PairMatrix(n_marks, v.get<double>());
  return pair_matrix_from_json(v);
}

}  // namespace

RunConfig RunConfig::from_json(const json& doc) {
  require(doc.is_object(), Status::Schema, "config must be a JSON object");
  RunConfig c;
  c.raw = doc;
  c.hash = fnv1a64(doc.dump());
  if (doc.contains("grid")) c.grid = doc["grid"].get<int>();
  if (doc.contains("dummy")) c.dummy = doc["dummy"].get<int>();
  if (doc.contains("border")) c.border = json_number(doc["border"], "border");
  if (doc.contains("bandwidth"))
    c.bandwidth = json_number(doc["bandwidth"], "bandwidth");
  if (doc.contains("max_range"))
    c.max_range = json_number(doc["max_range"], "max_range");
  if (doc.contains("threads")) c.threads = doc["threads"].get<int>();
  if (doc.contains("seed")) c.seed = doc["seed"].get<std::uint64_t>();
  if (doc.contains("shared_hardcore"))
    c.shared_hardcore = doc["shared_hardcore"].get<bool>();
  if (doc.contains("residual_fields"))
    c.residual_fields = doc["residual_fields"].get<bool>();
  if (doc.contains("models")) {
    c.models.clear();
    if (doc["models"].is_string()) {
      c.models.push_back(doc["models"].get<std::string>());
    } else {
      for (const auto& m : doc["models"]) c.models.push_back(m.get<std::string>());
    }
  }
  if (c.models.size() == 1 && c.models[0] == "all") {
    c.models.clear();
    for (const auto& entry : model_menu()) c.models.push_back(entry.label);
  }
  if (doc.contains("covariates") && doc["covariates"].is_array())
    for (const auto& name : doc["covariates"])
      c.covariate_subset.push_back(name.get<std::string>());
  require(c.grid >= 8, Status::Invalid, "grid must be at least 8");
  require(c.threads >= 1, Status::Invalid, "threads must be at least 1");
  return c;
}

FitOptions RunConfig::fit_options() const {
  FitOptions o;
  o.fit_grid = grid;
  o.dummy_grid = dummy;
  o.border = border;
  o.bandwidth = bandwidth;
  o.covariate_subset = covariate_subset;
  o.threads = threads;
  return o;
}

json window_to_json(const PolygonalWindow& window) {
  json rings = json::array();
  for (const Ring& ring : window.rings()) {
    json jring = json::array();
    for (const Point2& p : ring) jring.push_back(json::array({p.x, p.y}));
    rings.push_back(std::move(jring));
  }
  return json{{"rings", std::move(rings)}, {"area", window.area()}};
}

PolygonalWindow window_from_json(const json& doc) {
  if (doc.contains("rect")) {
    const auto& r = doc["rect"];
    require(r.is_array() && r.size() == 4, Status::Schema,
            "window rect needs [x0, y0, x1, y1]");
    return PolygonalWindow::rectangle(r[0].get<double>(), r[1].get<double>(),
                                      r[2].get<double>(), r[3].get<double>());
  }
  require(doc.contains("rings"), Status::Schema, "window needs 'rings' or 'rect'");
  std::vector<Ring> rings;
  for (const auto& jring : doc["rings"]) {
    Ring ring;
    for (const auto& jp : jring)
      ring.push_back({jp.at(0).get<double>(), jp.at(1).get<double>()});
    rings.push_back(std::move(ring));
  }
  return PolygonalWindow::from_rings(rings);
}

json pair_matrix_to_json(const PairMatrix& m) {
  json rows = json::array();
  for (int i = 0; i < m.size(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.size(); ++j) {
      const double v = m(i, j);
      if (std::isnan(v)) {
        row.push_back(nullptr);
      } else {
        row.push_back(v);
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

PairMatrix pair_matrix_from_json(const json& doc) {
  require(doc.is_array() && !doc.empty(), Status::Schema,
          "parameter matrix must be a nonempty array of rows");
  const int n = static_cast<int>(doc.size());
  PairMatrix m(n, std::numeric_limits<double>::quiet_NaN());
  for (int i = 0; i < n; ++i) {
    require(doc[i].is_array() && static_cast<int>(doc[i].size()) == n,
            Status::Schema, "parameter matrix must be square");
    for (int j = i; j < n; ++j) {
      const auto& v = doc[i][j];
      if (!v.is_null()) m.set(i, j, v.get<double>());
    }
  }
  return m;
}

json model_to_json(const FittedModel& model, std::uint64_t config_hash) {
  json coef = json::array();
  for (const auto& entry : model.table)
    coef.push_back(json{{"name", entry.name},
                        {"estimate", entry.estimate},
                        {"exp_estimate", std::exp(entry.estimate)},
                        {"std_error", entry.std_error},
                        {"p_value", entry.p_value}});
  const FitOptions& o = model.refit_options;
  json doc{
      {"label", model.label},
      {"marks", model.marks.labels()},
      {"interaction", interaction_kind_name(model.spec.kind)},
      {"use_offset", model.use_offset},
      {"use_covariates", model.use_covariates},
      {"hardcore", pair_matrix_to_json(model.spec.hardcore)},
      {"range", pair_matrix_to_json(model.spec.irange)},
      {"rate", pair_matrix_to_json(model.spec.rate)},
      {"coefficients", std::move(coef)},
      {"log_pseudolikelihood", model.log_pl},
      {"excluded_dummies", model.excluded_dummies},
      {"config",
       {{"fit_grid", o.fit_grid},
        {"dummy_grid", o.dummy_grid},
        {"border", model.border},
        {"bandwidth", o.bandwidth},
        {"covariate_subset", o.covariate_subset},
        {"threads", o.threads}}},
      {"provenance", provenance(config_hash)},
  };
  return doc;
}

FittedModel model_from_json(const json& doc) {
  FittedModel model;
  model.label = doc.at("label").get<std::string>();
  model.marks = MarkSet(doc.at("marks").get<std::vector<std::string>>());
  const int M = model.marks.size();
  model.use_offset = doc.at("use_offset").get<bool>();
  model.use_covariates = doc.at("use_covariates").get<bool>();

  InteractionSpec spec;
  spec.kind = parse_interaction_kind(doc.at("interaction").get<std::string>());
  spec.n_marks = M;
  spec.hardcore = pair_matrix_from_json(doc.at("hardcore"));
  spec.irange = pair_matrix_from_json(doc.at("range"));
  spec.rate = pair_matrix_from_json(doc.at("rate"));
  if (spec.kind != InteractionKind::None) spec.validate();
  model.spec = std::move(spec);

  std::vector<std::string> subset;
  for (const auto& s : doc.at("config").at("covariate_subset"))
    subset.push_back(s.get<std::string>());
  model.layout = make_layout(model.marks, model.spec, subset,
                             model.use_covariates);
  const auto& coef = doc.at("coefficients");
  require(static_cast<int>(coef.size()) == model.layout.columns(), Status::Schema,
          "coefficient count does not match the model layout");
  model.coefficients = Eigen::VectorXd(model.layout.columns());
  int j = 0;
  for (const auto& entry : coef) {
    CoefficientEntry e;
    e.name = entry.at("name").get<std::string>();
    require(e.name == model.layout.names[j], Status::Schema,
            "coefficient order does not match the model layout");
    e.estimate = entry.at("estimate").get<double>();
    e.std_error = entry.at("std_error").get<double>();
    e.p_value = entry.at("p_value").get<double>();
    model.coefficients[j] = e.estimate;
    model.table.push_back(e);
    ++j;
  }
  model.log_pl = doc.at("log_pseudolikelihood").get<double>();
  model.excluded_dummies = doc.at("excluded_dummies").get<long>();
  const auto& cfg = doc.at("config");
  model.refit_options.fit_grid = cfg.at("fit_grid").get<int>();
  model.refit_options.dummy_grid = cfg.at("dummy_grid").get<int>();
  model.refit_options.bandwidth = cfg.at("bandwidth").get<double>();
  model.refit_options.covariate_subset = subset;
  model.refit_options.threads = cfg.at("threads").get<int>();
  model.refit_options.use_offset = model.use_offset;
  model.refit_options.use_covariates = model.use_covariates;
  model.border = cfg.at("border").get<double>();
  return model;
}

void attach_cohort(FittedModel& model, const Cohort& cohort) {
  require(cohort.marks == model.marks, Status::Invalid,
          "model mark set does not match the cohort");
  model.context = prepare_fit(cohort, model.refit_options, model.border);
}

std::string coefficient_table_csv(const FittedModel& model,
                                  std::uint64_t config_hash) {
  std::ostringstream out;
  out << provenance_line(config_hash);
  out << "name,estimate,exp_estimate,std_error,p_value\n";
  for (const auto& e : model.table)
    out << e.name << ',' << format_double(e.estimate) << ','
        << format_double(std::exp(e.estimate)) << ','
        << format_double(e.std_error) << ',' << format_double(e.p_value) << '\n';
  return out.str();
}

json run_window(const Cohort& cohort, const RunConfig& config,
                const std::string& out_dir) {
  ensure_dir(out_dir);
  json patients = json::array();
  std::vector<PolygonalWindow> windows;
  for (const auto& patient : cohort.patients) {
    windows.push_back(patient.pattern.window);
    patients.push_back(json{{"id", patient.pattern.id},
                            {"area", patient.pattern.window.area()}});
  }
  PolygonalWindow common = intersect_windows(windows);
  const std::string path = join_path(out_dir, "window.json");
  json doc = window_to_json(common);
  doc["provenance"] = provenance(config.hash);
  write_text_file(path, doc.dump(2) + "\n");
  return json{{"command", "window"},
              {"patients", std::move(patients)},
              {"intersection_area", common.area()},
              {"window_file", path},
              {"provenance", provenance(config.hash)}};
}

namespace {

// Shared machinery for summaries and the max-range bound.
struct SummaryBatch {
  std::vector<double> r_grid;
  // per pair (i <= j): pooled L plus per-patient curves
  struct PairCurves {
    int mark_i, mark_j;
    std::vector<SummaryFunction> per_patient_k;
    std::vector<SummaryFunction> per_patient_l;
    SummaryFunction pooled_k, pooled_l;
    bool all_empty = false;
  };
  std::vector<PairCurves> pairs;
};

SummaryBatch compute_summaries(const Cohort& cohort, const RunConfig& config,
                               int r_n, bool same_type_only) {
  SummaryBatch batch;
  const int M = cohort.marks.size();

  // one r grid for the whole cohort: a quarter of the smallest window diameter
  double rmax = std::numeric_limits<double>::infinity();
  for (const auto& patient : cohort.patients)
    rmax = std::min(rmax, patient.pattern.window.diameter() / 4.0);
  if (cohort.common_window)
    rmax = std::min(rmax, cohort.common_window->diameter() / 4.0);
  batch.r_grid.resize(r_n);
  for (int k = 0; k < r_n; ++k)
    batch.r_grid[k] = rmax * k / (r_n - 1);

  // per-patient mark intensity surfaces
  const std::size_t g = cohort.size();
  std::vector<std::vector<IntensitySurface>> surfaces(g);
  std::vector<MarkedPointPattern> patterns(g);
  parallel_for(g, config.threads, [&](std::size_t k) {
    patterns[k] = cohort.common_window
                      ? restrict_pattern(cohort.patients[k].pattern,
                                         *cohort.common_window)
                      : cohort.patients[k].pattern;
    auto grid = std::make_shared<TileGrid>(patterns[k].window, config.grid,
                                           config.grid);
    for (int m = 0; m < M; ++m) {
      const double h0 = config.bandwidth > 0.0 ? config.bandwidth
                                               : scott_bandwidth(patterns[k], m);
      std::vector<double> bw;
      if (!patterns[k].indices_of_mark(m).empty())
        bw = adaptive_bandwidths(patterns[k], m, h0);
      surfaces[k].push_back(estimate_intensity(patterns[k], m, bw, grid, h0));
    }
  });

  for (int i = 0; i < M; ++i) {
    for (int j = i; j < M; ++j) {
      if (same_type_only && i != j) continue;
      SummaryBatch::PairCurves curves;
      curves.mark_i = i;
      curves.mark_j = j;
      curves.per_patient_k.resize(g);
      curves.per_patient_l.resize(g);
      parallel_for(g, config.threads, [&](std::size_t k) {
        curves.per_patient_k[k] = k_inhom_cross(
            patterns[k], i, j, surfaces[k][i], surfaces[k][j], batch.r_grid);
        curves.per_patient_l[k] = l_from_k(curves.per_patient_k[k]);
      });
      bool any = false;
      for (const auto& f : curves.per_patient_k) any = any || !f.is_empty;
      curves.all_empty = !any;
      if (any) {
        curves.pooled_k = pool_functions(curves.per_patient_k);
        curves.pooled_l = pool_functions(curves.per_patient_l);
      }
      batch.pairs.push_back(std::move(curves));
    }
  }
  return batch;
}

double max_range_bound(const Cohort& cohort, const RunConfig& config) {
  if (config.max_range >= 0.0) return config.max_range;
  const auto batch = compute_summaries(cohort, config, 128, /*same_type_only=*/true);
  double bound = 0.0;
  for (const auto& pair : batch.pairs)
    if (!pair.all_empty) bound = std::max(bound, suggest_max_range(pair.pooled_l));
  require(bound > 0.0, Status::Invalid,
          "cannot derive a max interaction range; supply --max-range");
  return bound;
}

std::string pair_label(const MarkSet& marks, int i, int j) {
  return marks.label(i) + ":" + marks.label(j);
}

}  // namespace

json run_summaries(const Cohort& cohort, const RunConfig& config,
                   const std::string& out_dir) {
  ensure_dir(out_dir);
  int r_n = 512;
  if (config.raw.contains("summaries") && config.raw["summaries"].contains("r_n"))
    r_n = config.raw["summaries"]["r_n"].get<int>();
  require(r_n >= 8, Status::Invalid, "summaries r grid too small");

  const auto batch = compute_summaries(cohort, config, r_n, false);

  std::ostringstream pooled;
  pooled << provenance_line(config.hash);
  pooled << "pair,r,K,L\n";
  for (const auto& pair : batch.pairs) {
    if (pair.all_empty) continue;
    const std::string label = pair_label(cohort.marks, pair.mark_i, pair.mark_j);
    for (std::size_t k = 0; k < batch.r_grid.size(); ++k)
      pooled << label << ',' << format_double(batch.r_grid[k]) << ','
             << format_double(pair.pooled_k.value[k]) << ','
             << format_double(pair.pooled_l.value[k]) << '\n';
  }
  const std::string pooled_path = join_path(out_dir, "summaries_pooled.csv");
  write_text_file(pooled_path, pooled.str());

  std::ostringstream per_patient;
  per_patient << provenance_line(config.hash);
  per_patient << "patient,pair,r,K,L\n";
  for (const auto& pair : batch.pairs) {
    const std::string label = pair_label(cohort.marks, pair.mark_i, pair.mark_j);
    for (std::size_t p = 0; p < cohort.size(); ++p) {
      const auto& fk = pair.per_patient_k[p];
      if (fk.is_empty) continue;
      for (std::size_t k = 0; k < batch.r_grid.size(); ++k)
        per_patient << cohort.patients[p].pattern.id << ',' << label << ','
                    << format_double(batch.r_grid[k]) << ','
                    << format_double(fk.value[k]) << ','
                    << format_double(pair.per_patient_l[p].value[k]) << '\n';
    }
  }
  const std::string per_patient_path =
      join_path(out_dir, "summaries_by_patient.csv");
  write_text_file(per_patient_path, per_patient.str());

  json suggestions = json::array();
  double overall = 0.0;
  for (const auto& pair : batch.pairs) {
    if (pair.all_empty) {
      suggestions.push_back(
          json{{"pair", pair_label(cohort.marks, pair.mark_i, pair.mark_j)},
               {"empty", true}});
      continue;
    }
    const double s = suggest_max_range(pair.pooled_l);
    overall = std::max(overall, s);
    suggestions.push_back(
        json{{"pair", pair_label(cohort.marks, pair.mark_i, pair.mark_j)},
             {"suggested_max_range", s}});
  }
  return json{{"command", "summaries"},
              {"r_max", batch.r_grid.back()},
              {"pairs", std::move(suggestions)},
              {"suggested_max_range", overall},
              {"pooled_file", pooled_path},
              {"by_patient_file", per_patient_path},
              {"provenance", provenance(config.hash)}};
}

namespace {

struct Irregulars {
  PairMatrix hardcore, range, rate;
  bool have_range = false, have_rate = false;
  std::vector<std::pair<int, int>> missing_hardcore;
};

Irregulars resolve_irregulars(const Cohort& cohort, const RunConfig& config) {
  const int M = cohort.marks.size();
  Irregulars out;
  json source = json::object();
  if (config.raw.contains("irregulars_file"))
    source = json::parse(
        read_text_file(config.raw["irregulars_file"].get<std::string>()));
  if (config.raw.contains("irregulars")) {
    const auto& inline_source = config.raw["irregulars"];
    for (const auto& key : {"hardcore", "range", "rate"})
      if (inline_source.contains(key)) source[key] = inline_source[key];
  }

  if (source.contains("hardcore")) {
    out.hardcore = matrix_from_config(source["hardcore"], M, "hardcore");
  } else {
    out.hardcore = estimate_hardcore(cohort, &out.missing_hardcore);
  }
  if (config.shared_hardcore) {
    double h_min = std::numeric_limits<double>::infinity();
    for (int i = 0; i < M; ++i)
      for (int j = i; j < M; ++j)
        if (!std::isnan(out.hardcore(i, j)))
          h_min = std::min(h_min, out.hardcore(i, j));
    require(std::isfinite(h_min), Status::Invalid,
            "no hardcore distance could be estimated");
    out.hardcore = PairMatrix(M, h_min);
    out.missing_hardcore.clear();
  }
  if (source.contains("range")) {
    out.range = matrix_from_config(source["range"], M, "range");
    out.have_range = true;
  }
  if (source.contains("rate")) {
    out.rate = matrix_from_config(source["rate"], M, "rate");
    out.have_rate = true;
  } else {
    out.rate = PairMatrix(M, 0.0);
  }
  return out;
}

}  // namespace

json run_profile(const Cohort& cohort, const RunConfig& config,
                 const std::string& out_dir) {
  ensure_dir(out_dir);
  const int M = cohort.marks.size();
  const json profile_cfg = config.raw.contains("profile")
                               ? config.raw["profile"]
                               : json::object();
  const InteractionKind kind = parse_interaction_kind(
      profile_cfg.contains("kind") ? profile_cfg["kind"].get<std::string>()
                                   : "fiksel");

  Irregulars irr = resolve_irregulars(cohort, config);
  require(irr.missing_hardcore.empty(), Status::Invalid,
          "hardcore distances missing for some mark pairs; supply them or use "
          "shared_hardcore");

  const double bound = max_range_bound(cohort, config);

  std::vector<double> range_grid;
  if (profile_cfg.contains("range_grid")) {
    for (const auto& v : profile_cfg["range_grid"])
      range_grid.push_back(v.get<double>());
  } else {
    double h_min = std::numeric_limits<double>::infinity();
    for (int i = 0; i < M; ++i)
      for (int j = i; j < M; ++j) h_min = std::min(h_min, irr.hardcore(i, j));
    const int n = profile_cfg.contains("range_n")
                      ? profile_cfg["range_n"].get<int>()
                      : 8;
    const double low = std::max(2.0 * h_min, bound / n);
    require(low < bound, Status::Invalid,
            "max interaction range is too small for a profile grid");
    for (int k = 0; k < n; ++k)
      range_grid.push_back(low + (bound - low) * k / (n - 1));
  }
  std::vector<double> rate_grid;
  if (profile_cfg.contains("rate_grid")) {
    for (const auto& v : profile_cfg["rate_grid"])
      rate_grid.push_back(v.get<double>());
  } else {
    // the slope search grid defaults to [-0.2, 0.2] per µm
    const int n = profile_cfg.contains("rate_n") ? profile_cfg["rate_n"].get<int>()
                                                 : 9;
    for (int k = 0; k < n; ++k)
      rate_grid.push_back(-0.2 + 0.4 * k / (n - 1));
  }

  FitOptions options = config.fit_options();
  options.use_offset = true;
  options.use_covariates = true;
  if (config.raw.contains("profile") && profile_cfg.contains("use_offset"))
    options.use_offset = profile_cfg["use_offset"].get<bool>();
  if (config.raw.contains("profile") && profile_cfg.contains("use_covariates"))
    options.use_covariates = profile_cfg["use_covariates"].get<bool>();

  auto result = profile_pl(cohort, kind, irr.hardcore, range_grid, rate_grid,
                           options);

  json irregulars{{"kind", interaction_kind_name(kind)},
                  {"hardcore", pair_matrix_to_json(irr.hardcore)},
                  {"range", pair_matrix_to_json(result.range)},
                  {"rate", pair_matrix_to_json(result.rate)},
                  {"best_log_pseudolikelihood", result.best_log_pl},
                  {"provenance", provenance(config.hash)}};
  const std::string irregulars_path = join_path(out_dir, "profile_irregulars.json");
  write_text_file(irregulars_path, irregulars.dump(2) + "\n");

  std::ostringstream trace;
  trace << provenance_line(config.hash);
  trace << "sweep,pair,range,rate,log_pl,accepted\n";
  for (const auto& entry : result.trace)
    trace << entry.sweep << ','
          << pair_label(cohort.marks, entry.mark_i, entry.mark_j) << ','
          << format_double(entry.range) << ',' << format_double(entry.rate)
          << ',' << format_double(entry.log_pl) << ','
          << (entry.accepted ? 1 : 0) << '\n';
  const std::string trace_path = join_path(out_dir, "profile_trace.csv");
  write_text_file(trace_path, trace.str());

  return json{{"command", "profile"},
              {"max_range", bound},
              {"range_grid", range_grid},
              {"rate_grid", rate_grid},
              {"evaluations", result.trace.size()},
              {"irregulars", irregulars},
              {"irregulars_file", irregulars_path},
              {"trace_file", trace_path},
              {"provenance", provenance(config.hash)}};
}

json run_fit(const Cohort& cohort, const RunConfig& config,
             const std::string& out_dir) {
  ensure_dir(out_dir);
  const int M = cohort.marks.size();
  Irregulars irr = resolve_irregulars(cohort, config);

  std::vector<ModelMenuEntry> entries;
  for (const auto& label : config.models) entries.push_back(menu_entry(label));

  bool needs_range = false, any_offset = false;
  for (const auto& entry : entries) {
    if (entry.kind != InteractionKind::None &&
        entry.kind != InteractionKind::Hardcore)
      needs_range = true;
    any_offset = any_offset || entry.use_offset;
  }
  require(!needs_range || irr.have_range, Status::Invalid,
          "selected models need interaction ranges; run `profile` first or "
          "supply irregulars in the config");
  require(irr.missing_hardcore.empty() || !needs_range, Status::Invalid,
          "hardcore distances missing for some mark pairs");

  // one shared quadrature for the whole menu: a common border keeps the
  // pseudolikelihoods and residuals comparable across models
  double border = config.border;
  if (border < 0.0) {
    border = 0.0;
    for (const auto& entry : entries) {
      auto spec = menu_spec(entry, irr.hardcore, irr.have_range ? irr.range : irr.hardcore,
                            irr.rate);
      border = std::max(border, spec.max_interaction_distance());
    }
  }

  FitOptions options = config.fit_options();
  options.use_offset = any_offset;
  options.use_covariates = true;
  auto context = prepare_fit(cohort, options, border);

  json models_report = json::array();
  json report{{"command", "fit"}, {"provenance", provenance(config.hash)}};
  for (const auto& entry : entries) {
    auto spec = menu_spec(entry, irr.hardcore,
                          irr.have_range ? irr.range : irr.hardcore, irr.rate);
    FittedModel model =
        fit_with_context(context, spec, entry.use_offset, entry.use_covariates);
    model.label = entry.label;

    const std::string model_path =
        join_path(out_dir, "model_" + entry.label + ".json");
    write_text_file(model_path, model_to_json(model, config.hash).dump(2) + "\n");
    const std::string table_path =
        join_path(out_dir, "coefficients_" + entry.label + ".csv");
    write_text_file(table_path, coefficient_table_csv(model, config.hash));

    models_report.push_back(json{{"label", entry.label},
                                 {"log_pseudolikelihood", model.log_pl},
                                 {"coefficients", model.layout.columns()},
                                 {"excluded_dummies", model.excluded_dummies},
                                 {"model_file", model_path},
                                 {"coefficients_file", table_path}});
  }
  report["border"] = border;
  report["models"] = std::move(models_report);
  if (!irr.missing_hardcore.empty()) {
    json missing = json::array();
    for (auto [i, j] : irr.missing_hardcore)
      missing.push_back(pair_label(cohort.marks, i, j));
    report["missing_hardcore_pairs"] = std::move(missing);
  }
  return report;
}

json run_residuals(const Cohort& cohort, std::vector<FittedModel> models,
                   const RunConfig& config, const std::string& out_dir) {
  ensure_dir(out_dir);
  require(!models.empty(), Status::Invalid, "no models to evaluate");

  json comparison = json::array();
  std::ostringstream comparison_csv;
  comparison_csv << provenance_line(config.hash);
  comparison_csv << "model,interaction,offset,covariates,rmse_raw,rmse_pearson,"
                    "rmse_inverse\n";

  json report{{"command", "residuals"}, {"provenance", provenance(config.hash)}};
  json totals_files = json::array();

  for (FittedModel& model : models) {
    if (!model.context) attach_cohort(model, cohort);
    require(model.context->patterns.size() == cohort.size(), Status::Invalid,
            "model context does not match the cohort");
    const int M = model.marks.size();
    const std::size_t g = cohort.size();

    std::ostringstream totals_csv;
    totals_csv << provenance_line(config.hash);
    totals_csv << "patient,mark,kind,value\n";

    std::vector<double> by_patient_raw(g, 0.0), by_patient_pearson(g, 0.0),
        by_patient_inverse(g, 0.0);
    std::vector<std::string> field_rows;

    for (std::size_t k = 0; k < g; ++k) {
      ModelEvaluator eval(model, k);
      const TileGrid& grid = *model.context->quadratures[k].grid;
      for (int m = 0; m < M; ++m) {
        for (ResidualKind kind :
             {ResidualKind::Raw, ResidualKind::Pearson, ResidualKind::Inverse}) {
          const auto field = residual_field(eval, m, kind, grid);
          double total = 0.0;
          for (double v : field) total += v;
          totals_csv << cohort.patients[k].pattern.id << ','
                     << model.marks.label(m) << ',' << residual_kind_name(kind)
                     << ',' << format_double(total) << '\n';
          if (kind == ResidualKind::Raw) by_patient_raw[k] += total;
          if (kind == ResidualKind::Pearson) by_patient_pearson[k] += total;
          if (kind == ResidualKind::Inverse) by_patient_inverse[k] += total;

          if (config.residual_fields && kind == ResidualKind::Raw) {
            std::ostringstream field_csv;
            field_csv << provenance_line(config.hash);
            field_csv << "cell_x,cell_y,value\n";
            for (std::size_t c = 0; c < grid.n_cells(); ++c) {
              const Point2 center = grid.cell_center(c);
              field_csv << format_double(center.x) << ','
                        << format_double(center.y) << ','
                        << format_double(field[c]) << '\n';
            }
            const std::string path = join_path(
                out_dir, "residual_field_" + model.label + "_" +
                             cohort.patients[k].pattern.id + "_" +
                             model.marks.label(m) + ".csv");
            write_text_file(path, field_csv.str());
            field_rows.push_back(path);
          }
        }
      }
    }

    const std::string totals_path =
        join_path(out_dir, "residual_totals_" + model.label + ".csv");
    write_text_file(totals_path, totals_csv.str());
    totals_files.push_back(totals_path);

    const double rmse_raw = rmse_of_totals(by_patient_raw);
    const double rmse_pearson = rmse_of_totals(by_patient_pearson);
    const double rmse_inverse = rmse_of_totals(by_patient_inverse);
    comparison_csv << model.label << ','
                   << interaction_kind_name(model.spec.kind) << ','
                   << (model.use_offset ? "yes" : "no") << ','
                   << (model.use_covariates ? "yes" : "no") << ','
                   << format_double(rmse_raw) << ','
                   << format_double(rmse_pearson) << ','
                   << format_double(rmse_inverse) << '\n';
    comparison.push_back(json{{"model", model.label},
                              {"interaction", interaction_kind_name(model.spec.kind)},
                              {"offset", model.use_offset},
                              {"covariates", model.use_covariates},
                              {"rmse_raw", rmse_raw},
                              {"rmse_pearson", rmse_pearson},
                              {"rmse_inverse", rmse_inverse}});
  }

  const std::string comparison_path = join_path(out_dir, "model_comparison.csv");
  write_text_file(comparison_path, comparison_csv.str());
  report["comparison"] = std::move(comparison);
  report["comparison_file"] = comparison_path;
  report["totals_files"] = std::move(totals_files);
  return report;
}

json run_simulate(const RunConfig& config, const std::string& out_dir) {
  ensure_dir(out_dir);
  require(config.raw.contains("simulate"), Status::Schema,
          "config needs a 'simulate' block");
  const json& sim = config.raw["simulate"];

  GeneratingModel model;
  model.window = window_from_json(sim.at("window"));
  model.marks = MarkSet(sim.at("marks").get<std::vector<std::string>>());
  const int M = model.marks.size();

  std::vector<double> levels;
  if (sim.at("trend").is_number()) {
    levels.assign(M, sim["trend"].get<double>());
  } else {
    levels = sim["trend"].get<std::vector<double>>();
  }
  require(static_cast<int>(levels.size()) == M, Status::Schema,
          "trend needs one level per mark");
  model.trend = Trend::constant(levels);

  const json& inter = sim.at("interaction");
  const InteractionKind kind =
      parse_interaction_kind(inter.at("kind").get<std::string>());
  PairMatrix h(M, 0.0), R(M, 0.0), gamma(M, 0.0);
  if (inter.contains("hardcore"))
    h = matrix_from_config(inter["hardcore"], M, "hardcore");
  if (inter.contains("range")) R = matrix_from_config(inter["range"], M, "range");
  if (inter.contains("rate")) gamma = matrix_from_config(inter["rate"], M, "rate");
  switch (kind) {
    case InteractionKind::None: model.spec = InteractionSpec::none(M); break;
    case InteractionKind::Fiksel:
      model.spec = InteractionSpec::fiksel(h, R, gamma, false);
      break;
    case InteractionKind::FikselWithinOnly:
      model.spec = InteractionSpec::fiksel(h, R, gamma, true);
      break;
    case InteractionKind::Strauss: model.spec = InteractionSpec::strauss(R); break;
    case InteractionKind::Hardcore:
      model.spec = InteractionSpec::hardcore_model(R);
      break;
    case InteractionKind::StraussHardcore:
      model.spec = InteractionSpec::strauss_hardcore(h, R);
      break;
  }
  if (sim.contains("strengths"))
    model.strengths = sim["strengths"].get<std::vector<double>>();
  require(static_cast<int>(model.strengths.size()) == model.spec.n_coefficients(),
          Status::Schema, "strengths must match the interaction coefficients");

  SimulationConfig chain;
  if (sim.contains("steps")) chain.steps = sim["steps"].get<long>();
  if (sim.contains("burnin")) chain.burnin = sim["burnin"].get<long>();
  if (sim.contains("proposal")) {
    const auto proposal = sim["proposal"].get<std::vector<double>>();
    require(proposal.size() == 3, Status::Schema,
            "proposal needs [birth, death, shift]");
    chain.p_birth = proposal[0];
    chain.p_death = proposal[1];
    chain.p_shift = proposal[2];
  }
  if (sim.contains("shift_scale"))
    chain.shift_scale = sim["shift_scale"].get<double>();
  chain.seed = config.seed;
  const long trace_every = sim.contains("trace_every")
                               ? sim["trace_every"].get<long>()
                               : std::max<long>(1, chain.steps / 100);
  const int g = sim.contains("g") ? sim["g"].get<int>() : 1;
  require(g >= 1, Status::Schema, "simulate.g must be positive");

  json manifest{{"marks", model.marks.labels()}, {"patients", json::array()}};
  json traces = json::array();
  json counts = json::array();
  std::vector<MarkedPointPattern> patterns(g);
  std::vector<std::vector<TraceEntry>> chain_traces(g);
  parallel_for(static_cast<std::size_t>(g), config.threads, [&](std::size_t k) {
    SimulationConfig per_chain = chain;
    per_chain.seed = Rng::derive(chain.seed, k);
    patterns[k] = mh_sample(model.window, model.marks, model.trend, model.spec,
                            model.strengths, per_chain, &chain_traces[k],
                            trace_every);
    patterns[k].id = "sim_" + std::to_string(k);
  });

  for (int k = 0; k < g; ++k) {
    const std::string cells_name = "sim_" + std::to_string(k) + ".csv";
    write_text_file(join_path(out_dir, cells_name),
                    pattern_to_csv(patterns[k], model.marks, config.hash));
    manifest["patients"].push_back(
        json{{"id", patterns[k].id},
             {"cells", cells_name},
             {"window", window_to_json(model.window)}});
    json trace = json::array();
    for (const auto& entry : chain_traces[k])
      trace.push_back(json{{"step", entry.step},
                           {"n", entry.n_points},
                           {"log_density", entry.cumulative_log_density}});
    traces.push_back(json{{"patient", patterns[k].id}, {"trace", std::move(trace)}});
    counts.push_back(json{{"patient", patterns[k].id},
                          {"n", patterns[k].size()}});
  }
  manifest["provenance"] = provenance(config.hash);
  const std::string manifest_path = join_path(out_dir, "sim_manifest.json");
  write_text_file(manifest_path, manifest.dump(2) + "\n");
  json trace_doc{{"traces", std::move(traces)},
                 {"provenance", provenance(config.hash)}};
  const std::string trace_path = join_path(out_dir, "sim_trace.json");
  write_text_file(trace_path, trace_doc.dump(2) + "\n");

  return json{{"command", "simulate"},
              {"patterns", std::move(counts)},
              {"manifest_file", manifest_path},
              {"trace_file", trace_path},
              {"provenance", provenance(config.hash)}};
}

}  // namespace mtg
