#include "patterns.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

#include <json.hpp>

#include "csvio.hpp"

namespace mtg {

MarkSet::MarkSet(std::vector<std::string> labels) : labels_(std::move(labels)) {
  require(!labels_.empty(), Status::Schema, "mark set must not be empty");
  std::set<std::string> seen;
  for (const auto& label : labels_) {
    require(!label.empty(), Status::Schema, "mark labels must not be empty");
    require(seen.insert(label).second, Status::Schema,
            "duplicate mark label '" + label + "'");
  }
}

std::optional<int> MarkSet::index_of(const std::string& label) const {
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (labels_[i] == label) return static_cast<int>(i);
  return std::nullopt;
}

std::vector<std::size_t> MarkedPointPattern::count_by_mark(int n_marks) const {
  std::vector<std::size_t> counts(n_marks, 0);
  for (int m : marks) ++counts.at(m);
  return counts;
}

std::vector<std::size_t> MarkedPointPattern::indices_of_mark(int mark) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < marks.size(); ++i)
    if (marks[i] == mark) out.push_back(i);
  return out;
}

void MarkedPointPattern::validate(int n_marks) const {
  require(points.size() == marks.size(), Status::Invalid,
          "pattern '" + id + "': points/marks size mismatch");
  for (std::size_t i = 0; i < points.size(); ++i) {
    require(std::isfinite(points[i].x) && std::isfinite(points[i].y),
            Status::Schema, "pattern '" + id + "': non-finite coordinate");
    require(marks[i] >= 0 && marks[i] < n_marks, Status::Schema,
            "pattern '" + id + "': mark index out of range");
    require(window.contains(points[i]), Status::Invalid,
            "pattern '" + id + "': point outside its window");
  }
}

Stage parse_stage(const std::string& text) {
  for (Stage s : {Stage::IA, Stage::IB, Stage::IIA, Stage::IIB, Stage::IIIA,
                  Stage::IIIB, Stage::IV})
    if (text == stage_name(s)) return s;
  fail(Status::Schema, "unknown cancer stage '" + text + "'");
}

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::IA: return "IA";
    case Stage::IB: return "IB";
    case Stage::IIA: return "IIA";
    case Stage::IIB: return "IIB";
    case Stage::IIIA: return "IIIA";
    case Stage::IIIB: return "IIIB";
    case Stage::IV: return "IV";
  }
  return "?";
}

void ClinicalCovariates::validate() const {
  require(age_years > 0, Status::Schema, "age must be positive");
  require(survival_days >= 0, Status::Schema, "survival days must be nonnegative");
  for (int b : {gender_male, mhcii_low, death, recurrence_or_death, adjuvant_therapy})
    require(b == 0 || b == 1, Status::Schema, "binary covariates must be 0 or 1");
}

std::vector<double> ClinicalCovariates::encode() const {
  std::vector<double> v(13, 0.0);
  v[0] = gender_male;
  v[1] = age_years;
  const int stage_idx = static_cast<int>(stage);  // IA = 0 is the reference
  if (stage_idx > 0) v[1 + stage_idx] = 1.0;      // slots 2..7 = IB..IV
  v[8] = mhcii_low;
  v[9] = survival_days;
  v[10] = death;
  v[11] = recurrence_or_death;
  v[12] = adjuvant_therapy;
  return v;
}

const std::vector<std::string>& ClinicalCovariates::covariate_names() {
  static const std::vector<std::string> names{
      "gender_male",   "age",        "stage_IB",   "stage_IIA", "stage_IIB",
      "stage_IIIA",    "stage_IIIB", "stage_IV",   "mhcii_low", "survival_days",
      "death",         "recurrence_or_death",      "adjuvant_therapy"};
  return names;
}

void Cohort::validate() const {
  require(marks.size() > 0, Status::Schema, "cohort has no mark set");
  std::set<std::string> ids;
  for (const auto& patient : patients) {
    require(ids.insert(patient.pattern.id).second, Status::Schema,
            "duplicate patient id '" + patient.pattern.id + "'");
    patient.pattern.validate(marks.size());
    if (patient.covariates) patient.covariates->validate();
  }
}

MarkedPointPattern parse_pattern_csv(const std::string& text, const MarkSet& marks,
                                     const std::string& id,
                                     const std::optional<PolygonalWindow>& window) {
  const CsvTable table = parse_csv(text, "cells[" + id + "]");
  const std::size_t cx = table.col("x");
  const std::size_t cy = table.col("y");
  const std::size_t cp = table.col("phenotype");
  require(!table.rows.empty(), Status::Schema,
          "cells[" + id + "]: empty cell table");

  MarkedPointPattern pattern;
  pattern.id = id;
  pattern.points.reserve(table.rows.size());
  pattern.marks.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    const double x = parse_double(row[cx], "cells[" + id + "] x");
    const double y = parse_double(row[cy], "cells[" + id + "] y");
    const auto mark = marks.index_of(row[cp]);
    require(mark.has_value(), Status::Schema,
            "cells[" + id + "]: phenotype '" + row[cp] + "' not in the mark set");
    pattern.points.push_back({x, y});
    pattern.marks.push_back(*mark);
  }
  pattern.window = window ? *window : ripley_rasson_window(pattern.points);
  pattern.validate(marks.size());
  return pattern;
}

MarkedPointPattern load_pattern_csv(const std::string& path, const MarkSet& marks,
                                    const std::string& id,
                                    const std::optional<PolygonalWindow>& window) {
  return parse_pattern_csv(read_text_file(path), marks, id, window);
}

std::string pattern_to_csv(const MarkedPointPattern& pattern, const MarkSet& marks,
                           std::uint64_t config_hash) {
  std::ostringstream out;
  out << provenance_line(config_hash);
  out << "x,y,phenotype\n";
  for (std::size_t i = 0; i < pattern.size(); ++i)
    out << format_double(pattern.points[i].x) << ','
        << format_double(pattern.points[i].y) << ','
        << marks.label(pattern.marks[i]) << '\n';
  return out.str();
}

std::vector<std::pair<std::string, ClinicalCovariates>> parse_covariates_csv(
    const std::string& text, const std::string& origin) {
  const CsvTable table = parse_csv(text, origin);
  const std::size_t c_id = table.col("patient_id");
  const std::size_t c_gender = table.col("gender");
  const std::size_t c_age = table.col("age");
  const std::size_t c_stage = table.col("stage");
  const std::size_t c_mhcii = table.col("mhcii");
  const std::size_t c_surv = table.col("survival_days");
  const std::size_t c_death = table.col("death");
  const std::size_t c_rec = table.col("recurrence_or_death");
  const std::size_t c_adj = table.col("adjuvant_therapy");

  std::vector<std::pair<std::string, ClinicalCovariates>> out;
  for (const auto& row : table.rows) {
    ClinicalCovariates c;
    c.gender_male = static_cast<int>(parse_long(row[c_gender], origin + " gender"));
    c.age_years = parse_double(row[c_age], origin + " age");
    c.stage = parse_stage(row[c_stage]);
    c.mhcii_low = static_cast<int>(parse_long(row[c_mhcii], origin + " mhcii"));
    c.survival_days = parse_double(row[c_surv], origin + " survival_days");
    c.death = static_cast<int>(parse_long(row[c_death], origin + " death"));
    c.recurrence_or_death =
        static_cast<int>(parse_long(row[c_rec], origin + " recurrence_or_death"));
    c.adjuvant_therapy =
        static_cast<int>(parse_long(row[c_adj], origin + " adjuvant_therapy"));
    c.validate();
    out.emplace_back(row[c_id], c);
  }
  return out;
}

std::vector<std::pair<std::string, ClinicalCovariates>> load_covariates_csv(
    const std::string& path) {
  return parse_covariates_csv(read_text_file(path), path);
}

Cohort load_cohort(const std::string& manifest_path) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    fail(Status::Schema, "manifest parse error: " + std::string(e.what()));
  }
  const auto base = std::filesystem::path(manifest_path).parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp.string() : (base / fp).string();
  };

  require(manifest.contains("marks") && manifest["marks"].is_array(),
          Status::Schema, "manifest: missing 'marks' array");
  Cohort cohort;
  cohort.marks = MarkSet(manifest["marks"].get<std::vector<std::string>>());

  std::vector<std::pair<std::string, ClinicalCovariates>> covariates;
  if (manifest.contains("covariates") && !manifest["covariates"].is_null())
    covariates = load_covariates_csv(resolve(manifest["covariates"].get<std::string>()));

  require(manifest.contains("patients") && manifest["patients"].is_array(),
          Status::Schema, "manifest: missing 'patients' array");
  for (const auto& entry : manifest["patients"]) {
    require(entry.contains("id") && entry.contains("cells"), Status::Schema,
            "manifest: each patient needs 'id' and 'cells'");
    const std::string id = entry["id"].get<std::string>();
    std::optional<PolygonalWindow> window;
    if (entry.contains("window") && !entry["window"].is_null()) {
      std::vector<Ring> rings;
      for (const auto& jring : entry["window"]["rings"]) {
        Ring ring;
        for (const auto& jp : jring)
          ring.push_back({jp.at(0).get<double>(), jp.at(1).get<double>()});
        rings.push_back(std::move(ring));
      }
      window = PolygonalWindow::from_rings(rings);
    }
    PatientRecord record;
    record.pattern =
        load_pattern_csv(resolve(entry["cells"].get<std::string>()), cohort.marks, id, window);
    for (const auto& [cid, cov] : covariates)
      if (cid == id) record.covariates = cov;
    cohort.patients.push_back(std::move(record));
  }
  cohort.validate();
  return cohort;
}

MarkedPointPattern restrict_pattern(const MarkedPointPattern& pattern,
                                    const PolygonalWindow& window) {
  const std::vector<PolygonalWindow> both{pattern.window, window};
  PolygonalWindow clipped = intersect_windows(both);
  MarkedPointPattern out;
  out.id = pattern.id;
  out.window = std::move(clipped);
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    if (out.window.contains(pattern.points[i])) {
      out.points.push_back(pattern.points[i]);
      out.marks.push_back(pattern.marks[i]);
    }
  }
  return out;
}

std::optional<double> min_cross_nn_distance(const MarkedPointPattern& pattern,
                                            int mark_i, int mark_j) {
  const auto idx_i = pattern.indices_of_mark(mark_i);
  const auto idx_j = pattern.indices_of_mark(mark_j);
  if (idx_i.empty() || idx_j.empty()) return std::nullopt;
  if (mark_i == mark_j && idx_i.size() < 2) return std::nullopt;

  double best = std::numeric_limits<double>::infinity();
  for (const std::size_t a : idx_i)
    for (const std::size_t b : idx_j) {
      if (a == b) continue;
      best = std::min(best, squared_distance(pattern.points[a], pattern.points[b]));
    }
  return std::sqrt(best);
}

}  // namespace mtg
