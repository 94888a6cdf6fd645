#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tland/common.hpp"

namespace tland {

enum class LandmarkClass { Mesial, Distal, Cusp, InnerPoint, OuterPoint, FacialPoint };

inline constexpr std::array<LandmarkClass, 6> kAllClasses = {
    LandmarkClass::Mesial,     LandmarkClass::Distal,     LandmarkClass::Cusp,
    LandmarkClass::InnerPoint, LandmarkClass::OuterPoint, LandmarkClass::FacialPoint};

// Evaluation categories. Metrics are computed per category, never per class.
enum class Category { MesialDistal, Cusps, InnerOuter, Facial };

inline constexpr std::array<Category, 4> kAllCategories = {
    Category::MesialDistal, Category::Cusps, Category::InnerOuter, Category::Facial};

constexpr Category category_of(LandmarkClass c) {
  switch (c) {
    case LandmarkClass::Mesial:
    case LandmarkClass::Distal:
      return Category::MesialDistal;
    case LandmarkClass::Cusp:
      return Category::Cusps;
    case LandmarkClass::InnerPoint:
    case LandmarkClass::OuterPoint:
      return Category::InnerOuter;
    case LandmarkClass::FacialPoint:
      return Category::Facial;
  }
  return Category::Facial;
}

constexpr std::size_t index_of(LandmarkClass c) { return static_cast<std::size_t>(c); }
constexpr std::size_t index_of(Category c) { return static_cast<std::size_t>(c); }

// Canonical spellings: "Mesial", "Distal", "Cusp", "InnerPoint", "OuterPoint",
// "FacialPoint".
std::string_view to_string(LandmarkClass c);
// Stable identifiers: "mesial_distal", "cusps", "inner_outer", "facial".
std::string_view to_string(Category c);

// Case-insensitive after trimming. Also accepts the short forms "inner",
// "outer", "facial". Throws ParseError for anything else.
LandmarkClass parse_landmark_class(std::string_view text);
Category parse_category(std::string_view text);

struct Landmark {
  std::string key;
  LandmarkClass cls = LandmarkClass::Cusp;
  Vec3 position = Vec3::Zero();

  bool operator==(const Landmark&) const = default;
};

struct Prediction {
  Landmark landmark;
  double score = 1.0;

  bool operator==(const Prediction&) const = default;
};

/// One annotation or submission record.
///
/// Ground-truth files leave `score` empty on every object; prediction files
/// set it on every object. Top-level fields the codec does not know about are
/// kept in `extra` and written back out unchanged.
struct LandmarkFile {
  struct Object {
    Landmark landmark;
    std::optional<double> score;

    bool operator==(const Object&) const = default;
  };

  std::string version = "1.1";
  std::string scan_id;
  std::vector<Object> objects;
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();

  bool operator==(const LandmarkFile&) const = default;

  bool has_scores() const;
  std::vector<Landmark> landmarks() const;
  // Throws ValidationError if any object lacks a score.
  std::vector<Prediction> predictions() const;

  static LandmarkFile from_landmarks(std::string scan_id, std::span<const Landmark> landmarks);
  static LandmarkFile from_predictions(std::string scan_id, std::span<const Prediction> predictions);
};

// Checks the file-level invariants (non-empty scan id, unique keys, finite
// coordinates, scores in [0,1]). Throws ValidationError.
void validate(const LandmarkFile& file);

LandmarkFile parse_ground_truth(std::string_view text);
LandmarkFile parse_predictions(std::string_view text);
std::string write_landmark_file(const LandmarkFile& file);

LandmarkFile read_ground_truth_file(const std::filesystem::path& path);
LandmarkFile read_predictions_file(const std::filesystem::path& path);
void write_landmark_file(const LandmarkFile& file, const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);

using ClassCounts = std::array<std::size_t, 6>;

ClassCounts dataset_stats(std::span<const LandmarkFile> files);

struct DatasetEntry {
  std::filesystem::path ground_truth;
  std::optional<std::filesystem::path> mesh;
};

/// scan_id -> files on disk. Built by scanning a directory for *.json
/// annotation files; a mesh with the same stem (.obj/.ply/.stl) in `mesh_dir`
/// is attached when present.
class DatasetIndex {
 public:
  void add(const std::string& scan_id, DatasetEntry entry);
  const DatasetEntry* find(const std::string& scan_id) const;
  const std::map<std::string, DatasetEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  static DatasetIndex scan(const std::filesystem::path& gt_dir,
                           const std::optional<std::filesystem::path>& mesh_dir = std::nullopt);

 private:
  std::map<std::string, DatasetEntry> entries_;
};

// Sorted list of *.json files directly inside `dir`.
std::vector<std::filesystem::path> list_json_files(const std::filesystem::path& dir);

}  // namespace tland
