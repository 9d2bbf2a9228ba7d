#pragma once

#include <optional>
#include <string>
#include <vector>

#include "geometry.hpp"

namespace mtg {

// Ordered, distinct type labels; the order indexes every parameter matrix of
// the cohort and must not change once patterns are loaded.
class MarkSet {
 public:
  MarkSet() = default;
  explicit MarkSet(std::vector<std::string> labels);

  int size() const { return static_cast<int>(labels_.size()); }
  const std::string& label(int index) const { return labels_.at(index); }
  const std::vector<std::string>& labels() const { return labels_; }
  std::optional<int> index_of(const std::string& label) const;
  bool operator==(const MarkSet& other) const { return labels_ == other.labels_; }

 private:
  std::vector<std::string> labels_;
};

struct MarkedPointPattern {
  std::string id;
  std::vector<Point2> points;
  std::vector<int> marks;  // indexes into the cohort MarkSet
  PolygonalWindow window;

  std::size_t size() const { return points.size(); }
  std::vector<std::size_t> count_by_mark(int n_marks) const;
  std::vector<std::size_t> indices_of_mark(int mark) const;
  void validate(int n_marks) const;
};

enum class Stage { IA, IB, IIA, IIB, IIIA, IIIB, IV };

Stage parse_stage(const std::string& text);
const char* stage_name(Stage s);

// Patient-level design covariates. Encoding: treatment contrasts for stage
// with IA as the reference, 0/1 for binaries, raw numeric otherwise.
struct ClinicalCovariates {
  int gender_male = 0;
  double age_years = 0.0;
  Stage stage = Stage::IA;
  int mhcii_low = 0;
  double survival_days = 0.0;
  int death = 0;
  int recurrence_or_death = 0;
  int adjuvant_therapy = 0;

  void validate() const;
  std::vector<double> encode() const;
  static const std::vector<std::string>& covariate_names();  // 13 entries
};

struct PatientRecord {
  MarkedPointPattern pattern;
  std::optional<ClinicalCovariates> covariates;
};

struct Cohort {
  MarkSet marks;
  std::vector<PatientRecord> patients;
  std::optional<PolygonalWindow> common_window;

  std::size_t size() const { return patients.size(); }
  void validate() const;
};

// Cell table: CSV with header x,y,phenotype. The window is estimated by
// ripley_rasson_window unless one is supplied.
MarkedPointPattern load_pattern_csv(const std::string& path, const MarkSet& marks,
                                    const std::string& id,
                                    const std::optional<PolygonalWindow>& window = {});
MarkedPointPattern parse_pattern_csv(const std::string& text, const MarkSet& marks,
                                     const std::string& id,
                                     const std::optional<PolygonalWindow>& window = {});
std::string pattern_to_csv(const MarkedPointPattern& pattern, const MarkSet& marks,
                           std::uint64_t config_hash = 0);

// Covariates table: CSV keyed by patient_id (see covariate_names for fields).
std::vector<std::pair<std::string, ClinicalCovariates>> load_covariates_csv(
    const std::string& path);
std::vector<std::pair<std::string, ClinicalCovariates>> parse_covariates_csv(
    const std::string& text, const std::string& origin);

// Cohort manifest: JSON listing the mark set, per-patient cell tables, and an
// optional covariates table. Paths are resolved relative to the manifest.
Cohort load_cohort(const std::string& manifest_path);

// Keeps exactly the points inside (old window ∩ new window) and attaches that
// intersection; disjoint windows surface the geometry error.
MarkedPointPattern restrict_pattern(const MarkedPointPattern& pattern,
                                    const PolygonalWindow& window);

// Minimum distance between distinct points of marks i and j; nullopt when the
// pattern cannot supply such a pair.
std::optional<double> min_cross_nn_distance(const MarkedPointPattern& pattern,
                                            int mark_i, int mark_j);

}  // namespace mtg
