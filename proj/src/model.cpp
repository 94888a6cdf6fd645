#include "tland/model.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace tland {

using json = nlohmann::ordered_json;

namespace {

std::string normalize_token(std::string_view text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
  std::string out;
  out.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) {
    const char c = text[i];
    if (c == '_' || c == '-' || c == ' ') continue;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

const json* find_alias(const json& obj, std::initializer_list<const char*> names,
                       const char* what) {
  const json* found = nullptr;
  for (const char* name : names) {
    auto it = obj.find(name);
    if (it == obj.end()) continue;
    if (found != nullptr && *found != *it) {
      throw ParseError(std::string("conflicting values for ") + what);
    }
    found = &*it;
  }
  return found;
}

Vec3 parse_coordinates(const json& node, const std::string& key) {
  if (!node.is_array() || node.size() != 3) {
    throw ParseError("object '" + key + "': coordinates must be an array of 3 numbers");
  }
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!node[i].is_number()) {
      throw ParseError("object '" + key + "': coordinate " + std::to_string(i) +
                       " is not a number");
    }
    v[i] = node[i].get<double>();
  }
  if (!is_finite(v)) throw ParseError("object '" + key + "': non-finite coordinate");
  return v;
}

enum class ScoreMode { Forbidden, Required };

LandmarkFile parse_file(std::string_view text, ScoreMode mode) {
  json root;
  try {
    root = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
  if (!root.is_object()) throw ParseError("top level must be a JSON object");

  LandmarkFile file;
  const json* version = find_alias(root, {"version"}, "version");
  if (version == nullptr) throw ParseError("missing 'version'");
  if (version->is_string()) {
    file.version = version->get<std::string>();
  } else if (version->is_number()) {
    file.version = version->dump();
  } else {
    throw ParseError("'version' must be a string");
  }

  const json* scan = find_alias(root, {"scan_id", "id"}, "scan id");
  if (scan == nullptr) throw ParseError("missing 'scan_id' (or 'id')");
  if (!scan->is_string()) throw ParseError("'scan_id' must be a string");
  file.scan_id = scan->get<std::string>();
  if (file.scan_id.empty()) throw ParseError("'scan_id' is empty");

  const json* objects = find_alias(root, {"objects"}, "objects");
  if (objects == nullptr) throw ParseError("missing 'objects'");
  if (!objects->is_array()) throw ParseError("'objects' must be an array");

  std::set<std::string> keys;
  file.objects.reserve(objects->size());
  for (const json& node : *objects) {
    if (!node.is_object()) throw ParseError("every entry of 'objects' must be an object");
    LandmarkFile::Object obj;

    auto key_it = node.find("key");
    if (key_it == node.end() || !key_it->is_string()) {
      throw ParseError("object without a string 'key'");
    }
    obj.landmark.key = key_it->get<std::string>();
    if (!keys.insert(obj.landmark.key).second) {
      throw ParseError("duplicate key '" + obj.landmark.key + "'");
    }

    auto class_it = node.find("class");
    if (class_it == node.end() || !class_it->is_string()) {
      throw ParseError("object '" + obj.landmark.key + "': missing string 'class'");
    }
    obj.landmark.cls = parse_landmark_class(class_it->get<std::string>());

    const json* coords = find_alias(node, {"coordinates", "coord", "position"}, "coordinates");
    if (coords == nullptr) {
      throw ParseError("object '" + obj.landmark.key + "': missing 'coordinates'");
    }
    obj.landmark.position = parse_coordinates(*coords, obj.landmark.key);

    auto score_it = node.find("score");
    if (mode == ScoreMode::Required) {
      if (score_it == node.end()) {
        throw ParseError("object '" + obj.landmark.key + "': missing 'score'");
      }
      if (!score_it->is_number()) {
        throw ParseError("object '" + obj.landmark.key + "': 'score' is not a number");
      }
      const double s = score_it->get<double>();
      if (!std::isfinite(s) || s < 0.0 || s > 1.0) {
        throw ParseError("object '" + obj.landmark.key + "': score outside [0,1]");
      }
      obj.score = s;
    }
    file.objects.push_back(std::move(obj));
  }

  for (auto it = root.begin(); it != root.end(); ++it) {
    const std::string& name = it.key();
    if (name == "version" || name == "scan_id" || name == "id" || name == "objects") continue;
    file.extra[name] = it.value();
  }
  return file;
}

}  // namespace

std::string_view to_string(LandmarkClass c) {
  switch (c) {
    case LandmarkClass::Mesial: return "Mesial";
    case LandmarkClass::Distal: return "Distal";
    case LandmarkClass::Cusp: return "Cusp";
    case LandmarkClass::InnerPoint: return "InnerPoint";
    case LandmarkClass::OuterPoint: return "OuterPoint";
    case LandmarkClass::FacialPoint: return "FacialPoint";
  }
  return "Cusp";
}

std::string_view to_string(Category c) {
  switch (c) {
    case Category::MesialDistal: return "mesial_distal";
    case Category::Cusps: return "cusps";
    case Category::InnerOuter: return "inner_outer";
    case Category::Facial: return "facial";
  }
  return "facial";
}

LandmarkClass parse_landmark_class(std::string_view text) {
  const std::string t = normalize_token(text);
  if (t == "mesial") return LandmarkClass::Mesial;
  if (t == "distal") return LandmarkClass::Distal;
  if (t == "cusp") return LandmarkClass::Cusp;
  if (t == "innerpoint" || t == "inner") return LandmarkClass::InnerPoint;
  if (t == "outerpoint" || t == "outer") return LandmarkClass::OuterPoint;
  if (t == "facialpoint" || t == "facial") return LandmarkClass::FacialPoint;
  throw ParseError("unknown landmark class '" + std::string(text) + "'");
}

Category parse_category(std::string_view text) {
  const std::string t = normalize_token(text);
  if (t == "mesialdistal") return Category::MesialDistal;
  if (t == "cusps" || t == "cusp") return Category::Cusps;
  if (t == "innerouter" || t == "outerinner") return Category::InnerOuter;
  if (t == "facial") return Category::Facial;
  throw ParseError("unknown category '" + std::string(text) + "'");
}

bool LandmarkFile::has_scores() const {
  return !objects.empty() &&
         std::all_of(objects.begin(), objects.end(), [](const Object& o) { return o.score.has_value(); });
}

std::vector<Landmark> LandmarkFile::landmarks() const {
  std::vector<Landmark> out;
  out.reserve(objects.size());
  for (const auto& o : objects) out.push_back(o.landmark);
  return out;
}

std::vector<Prediction> LandmarkFile::predictions() const {
  std::vector<Prediction> out;
  out.reserve(objects.size());
  for (const auto& o : objects) {
    if (!o.score) throw ValidationError("object '" + o.landmark.key + "' has no score");
    out.push_back({o.landmark, *o.score});
  }
  return out;
}

LandmarkFile LandmarkFile::from_landmarks(std::string scan_id, std::span<const Landmark> landmarks) {
  LandmarkFile f;
  f.scan_id = std::move(scan_id);
  for (const auto& l : landmarks) f.objects.push_back({l, std::nullopt});
  return f;
}

LandmarkFile LandmarkFile::from_predictions(std::string scan_id,
                                            std::span<const Prediction> predictions) {
  LandmarkFile f;
  f.scan_id = std::move(scan_id);
  for (const auto& p : predictions) f.objects.push_back({p.landmark, p.score});
  return f;
}

void validate(const LandmarkFile& file) {
  if (file.scan_id.empty()) throw ValidationError("scan_id is empty");
  std::set<std::string_view> keys;
  for (const auto& o : file.objects) {
    if (!keys.insert(o.landmark.key).second) {
      throw ValidationError("duplicate key '" + o.landmark.key + "'");
    }
    if (!is_finite(o.landmark.position)) {
      throw ValidationError("object '" + o.landmark.key + "': non-finite coordinate");
    }
    if (o.score && (!std::isfinite(*o.score) || *o.score < 0.0 || *o.score > 1.0)) {
      throw ValidationError("object '" + o.landmark.key + "': score outside [0,1]");
    }
  }
  if (!file.extra.is_object()) throw ValidationError("extra fields must form an object");
}

LandmarkFile parse_ground_truth(std::string_view text) {
  return parse_file(text, ScoreMode::Forbidden);
}

LandmarkFile parse_predictions(std::string_view text) {
  return parse_file(text, ScoreMode::Required);
}

std::string write_landmark_file(const LandmarkFile& file) {
  validate(file);
  json root = json::object();
  root["version"] = file.version;
  root["scan_id"] = file.scan_id;
  json objects = json::array();
  for (const auto& o : file.objects) {
    json node = json::object();
    node["key"] = o.landmark.key;
    node["class"] = std::string(to_string(o.landmark.cls));
    const Vec3& p = o.landmark.position;
    node["coordinates"] = json::array({p.x(), p.y(), p.z()});
    if (o.score) node["score"] = *o.score;
    objects.push_back(std::move(node));
  }
  root["objects"] = std::move(objects);
  for (auto it = file.extra.begin(); it != file.extra.end(); ++it) root[it.key()] = it.value();
  // nlohmann emits the shortest representation that round-trips exactly.
  return root.dump(2) + "\n";
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

LandmarkFile read_ground_truth_file(const std::filesystem::path& path) {
  try {
    return parse_ground_truth(read_text_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

LandmarkFile read_predictions_file(const std::filesystem::path& path) {
  try {
    return parse_predictions(read_text_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_landmark_file(const LandmarkFile& file, const std::filesystem::path& path) {
  const std::string text = write_landmark_file(file);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
}

ClassCounts dataset_stats(std::span<const LandmarkFile> files) {
  ClassCounts counts{};
  for (const auto& f : files) {
    for (const auto& o : f.objects) ++counts[index_of(o.landmark.cls)];
  }
  return counts;
}

void DatasetIndex::add(const std::string& scan_id, DatasetEntry entry) {
  if (!entries_.emplace(scan_id, std::move(entry)).second) {
    throw ValidationError("duplicate scan_id '" + scan_id + "' in dataset");
  }
}

const DatasetEntry* DatasetIndex::find(const std::string& scan_id) const {
  auto it = entries_.find(scan_id);
  return it == entries_.end() ? nullptr : &it->second;
}

std::vector<std::filesystem::path> list_json_files(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw ValidationError("not a directory: '" + dir.string() + "'");
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

DatasetIndex DatasetIndex::scan(const std::filesystem::path& gt_dir,
                                const std::optional<std::filesystem::path>& mesh_dir) {
  namespace fs = std::filesystem;
  DatasetIndex index;
  for (const auto& path : list_json_files(gt_dir)) {
    const LandmarkFile gt = read_ground_truth_file(path);
    DatasetEntry entry{path, std::nullopt};
    if (mesh_dir) {
      for (const char* ext : {".obj", ".ply", ".stl"}) {
        fs::path candidate = *mesh_dir / (path.stem().string() + ext);
        if (fs::exists(candidate)) {
          entry.mesh = candidate;
          break;
        }
      }
    }
    index.add(gt.scan_id, std::move(entry));
  }
  return index;
}

}  // namespace tland
