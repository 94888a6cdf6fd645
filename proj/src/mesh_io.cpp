#include <cctype>
#include <charconv>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "tland/geometry.hpp"

namespace tland {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Drops faces that repeat a vertex; checks index range.
MeshLoadResult finish(std::vector<Vec3> vertices, const std::vector<std::array<std::int64_t, 3>>& faces) {
  MeshLoadResult result;
  result.mesh.vertices = std::move(vertices);
  const auto n = static_cast<std::int64_t>(result.mesh.vertices.size());
  for (const auto& f : faces) {
    for (std::int64_t v : f) {
      if (v < 0 || v >= n) throw ParseError("face index " + std::to_string(v) + " out of range");
    }
    if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) {
      ++result.degenerate_faces_dropped;
      continue;
    }
    result.mesh.faces.push_back({static_cast<std::uint32_t>(f[0]), static_cast<std::uint32_t>(f[1]),
                                 static_cast<std::uint32_t>(f[2])});
  }
  for (const auto& v : result.mesh.vertices) {
    if (!is_finite(v)) throw ParseError("non-finite vertex coordinate");
  }
  if (result.mesh.vertices.empty() || result.mesh.faces.empty()) throw ParseError("mesh is empty");
  return result;
}

double to_double(std::string_view tok) {
  double v = 0.0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    throw ParseError("bad number '" + std::string(tok) + "'");
  }
  return v;
}

std::int64_t to_int(std::string_view tok) {
  std::int64_t v = 0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    throw ParseError("bad integer '" + std::string(tok) + "'");
  }
  return v;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

// Splits into lines, tolerating CRLF.
std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.push_back(line);
    start = end + 1;
  }
  return out;
}

template <typename T>
T read_le(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

template <typename T>
void append_le(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

struct PlyProperty {
  std::string name;
  std::string type;
  bool is_list = false;
  std::string count_type;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

std::size_t ply_type_size(const std::string& t) {
  if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
  if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
  if (t == "int" || t == "uint" || t == "float" || t == "int32" || t == "uint32" || t == "float32") return 4;
  if (t == "double" || t == "float64") return 8;
  throw ParseError("unsupported PLY type '" + t + "'");
}

double ply_read_binary(const std::string& t, const char* p) {
  if (t == "char" || t == "int8") return read_le<std::int8_t>(p);
  if (t == "uchar" || t == "uint8") return read_le<std::uint8_t>(p);
  if (t == "short" || t == "int16") return read_le<std::int16_t>(p);
  if (t == "ushort" || t == "uint16") return read_le<std::uint16_t>(p);
  if (t == "int" || t == "int32") return read_le<std::int32_t>(p);
  if (t == "uint" || t == "uint32") return read_le<std::uint32_t>(p);
  if (t == "float" || t == "float32") return read_le<float>(p);
  return read_le<double>(p);
}

}  // namespace

MeshLoadResult read_obj(std::string_view text) {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::int64_t, 3>> faces;
  for (std::string_view line : split_lines(text)) {
    const auto tok = split_ws(line);
    if (tok.empty() || tok[0][0] == '#') continue;
    if (tok[0] == "v") {
      if (tok.size() < 4) throw ParseError("OBJ vertex needs 3 coordinates");
      vertices.emplace_back(to_double(tok[1]), to_double(tok[2]), to_double(tok[3]));
    } else if (tok[0] == "f") {
      if (tok.size() < 4) throw ParseError("OBJ face needs at least 3 vertices");
      std::vector<std::int64_t> idx;
      for (std::size_t i = 1; i < tok.size(); ++i) {
        std::string_view t = tok[i];
        t = t.substr(0, t.find('/'));
        std::int64_t v = to_int(t);
        // 1-based; negative counts back from the last vertex so far.
        v = v < 0 ? static_cast<std::int64_t>(vertices.size()) + v : v - 1;
        idx.push_back(v);
      }
      for (std::size_t i = 1; i + 1 < idx.size(); ++i) faces.push_back({idx[0], idx[i], idx[i + 1]});
    }
  }
  return finish(std::move(vertices), faces);
}

MeshLoadResult read_ply(std::string_view bytes) {
  const std::size_t header_end = bytes.find("end_header");
  if (bytes.substr(0, 3) != "ply" || header_end == std::string_view::npos) throw ParseError("not a PLY file");
  std::size_t body = bytes.find('\n', header_end);
  if (body == std::string_view::npos) throw ParseError("truncated PLY header");
  ++body;

  std::string format;
  std::vector<PlyElement> elements;
  for (std::string_view line : split_lines(bytes.substr(0, header_end))) {
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "format" && tok.size() >= 2) {
      format = std::string(tok[1]);
    } else if (tok[0] == "element" && tok.size() >= 3) {
      elements.push_back({std::string(tok[1]), static_cast<std::size_t>(to_int(tok[2])), {}});
    } else if (tok[0] == "property" && !elements.empty()) {
      PlyProperty prop;
      if (tok.size() >= 5 && tok[1] == "list") {
        prop.is_list = true;
        prop.count_type = std::string(tok[2]);
        prop.type = std::string(tok[3]);
        prop.name = std::string(tok[4]);
      } else if (tok.size() >= 3) {
        prop.type = std::string(tok[1]);
        prop.name = std::string(tok[2]);
      } else {
        throw ParseError("bad PLY property line");
      }
      elements.back().properties.push_back(prop);
    }
  }
  if (format != "ascii" && format != "binary_little_endian") {
    throw ParseError("unsupported PLY format '" + format + "'");
  }

  std::vector<Vec3> vertices;
  std::vector<std::array<std::int64_t, 3>> faces;
  auto add_polygon = [&](const std::vector<std::int64_t>& idx) {
    for (std::size_t i = 1; i + 1 < idx.size(); ++i) faces.push_back({idx[0], idx[i], idx[i + 1]});
  };

  if (format == "ascii") {
    const auto lines = split_lines(bytes.substr(body));
    std::size_t li = 0;
    auto next_tokens = [&]() {
      while (li < lines.size()) {
        auto tok = split_ws(lines[li++]);
        if (!tok.empty()) return tok;
      }
      throw ParseError("truncated PLY body");
    };
    for (const auto& el : elements) {
      for (std::size_t r = 0; r < el.count; ++r) {
        const auto tok = next_tokens();
        std::size_t ti = 0;
        Vec3 v = Vec3::Zero();
        for (const auto& prop : el.properties) {
          if (prop.is_list) {
            if (ti >= tok.size()) throw ParseError("truncated PLY row");
            const auto cnt = static_cast<std::size_t>(to_int(tok[ti++]));
            std::vector<std::int64_t> idx;
            for (std::size_t c = 0; c < cnt; ++c) {
              if (ti >= tok.size()) throw ParseError("truncated PLY row");
              idx.push_back(to_int(tok[ti++]));
            }
            if (el.name == "face" && (prop.name == "vertex_indices" || prop.name == "vertex_index")) add_polygon(idx);
          } else {
            if (ti >= tok.size()) throw ParseError("truncated PLY row");
            const double value = to_double(tok[ti++]);
            if (el.name == "vertex") {
              if (prop.name == "x") v.x() = value;
              if (prop.name == "y") v.y() = value;
              if (prop.name == "z") v.z() = value;
            }
          }
        }
        if (el.name == "vertex") vertices.push_back(v);
      }
    }
  } else {
    std::size_t pos = body;
    auto need = [&](std::size_t n) {
      if (pos + n > bytes.size()) throw ParseError("truncated PLY body");
    };
    for (const auto& el : elements) {
      for (std::size_t r = 0; r < el.count; ++r) {
        Vec3 v = Vec3::Zero();
        for (const auto& prop : el.properties) {
          if (prop.is_list) {
            const std::size_t cs = ply_type_size(prop.count_type);
            need(cs);
            const auto cnt = static_cast<std::size_t>(ply_read_binary(prop.count_type, bytes.data() + pos));
            pos += cs;
            const std::size_t is = ply_type_size(prop.type);
            need(cnt * is);
            std::vector<std::int64_t> idx;
            for (std::size_t c = 0; c < cnt; ++c) {
              idx.push_back(static_cast<std::int64_t>(ply_read_binary(prop.type, bytes.data() + pos)));
              pos += is;
            }
            if (el.name == "face" && (prop.name == "vertex_indices" || prop.name == "vertex_index")) add_polygon(idx);
          } else {
            const std::size_t s = ply_type_size(prop.type);
            need(s);
            const double value = ply_read_binary(prop.type, bytes.data() + pos);
            pos += s;
            if (el.name == "vertex") {
              if (prop.name == "x") v.x() = value;
              if (prop.name == "y") v.y() = value;
              if (prop.name == "z") v.z() = value;
            }
          }
        }
        if (el.name == "vertex") vertices.push_back(v);
      }
    }
  }
  return finish(std::move(vertices), faces);
}

MeshLoadResult read_stl(std::string_view bytes) {
  if (bytes.size() < 84) throw ParseError("STL file too short");
  const auto count = read_le<std::uint32_t>(bytes.data() + 80);
  if (bytes.size() < 84 + static_cast<std::size_t>(count) * 50) {
    throw ParseError("STL file truncated (only binary STL is supported)");
  }
  std::vector<Vec3> vertices;
  std::map<std::array<float, 3>, std::int64_t> weld;
  std::vector<std::array<std::int64_t, 3>> faces;
  faces.reserve(count);
  for (std::uint32_t f = 0; f < count; ++f) {
    const char* p = bytes.data() + 84 + static_cast<std::size_t>(f) * 50 + 12;
    std::array<std::int64_t, 3> tri{};
    for (int c = 0; c < 3; ++c) {
      const std::array<float, 3> key = {read_le<float>(p + 12 * c), read_le<float>(p + 12 * c + 4),
                                        read_le<float>(p + 12 * c + 8)};
      auto [it, inserted] = weld.emplace(key, static_cast<std::int64_t>(vertices.size()));
      if (inserted) vertices.emplace_back(key[0], key[1], key[2]);
      tri[c] = it->second;
    }
    faces.push_back(tri);
  }
  return finish(std::move(vertices), faces);
}

MeshLoadResult load_mesh(const std::filesystem::path& path) {
  const std::string ext = lower(path.extension().string());
  if (ext != ".obj" && ext != ".ply" && ext != ".stl") {
    throw ValidationError("unsupported mesh format '" + path.string() + "'");
  }
  const std::string bytes = read_text_file(path);
  try {
    if (ext == ".obj") return read_obj(bytes);
    if (ext == ".ply") return read_ply(bytes);
    return read_stl(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

MeshFormat mesh_format_from_name(std::string_view name) {
  const std::string n = lower(name);
  if (n == "obj") return MeshFormat::Obj;
  if (n == "ply" || n == "ply-binary" || n == "ply_binary") return MeshFormat::PlyBinary;
  if (n == "ply-ascii" || n == "ply_ascii") return MeshFormat::PlyAscii;
  if (n == "stl") return MeshFormat::Stl;
  throw ValidationError("unknown mesh format '" + std::string(name) + "'");
}

std::string write_mesh(const TriangleMesh& mesh, MeshFormat format) {
  std::string out;
  switch (format) {
    case MeshFormat::Obj: {
      std::ostringstream ss;
      ss.precision(17);
      for (const auto& v : mesh.vertices) ss << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
      for (const auto& f : mesh.faces) ss << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
      out = ss.str();
      break;
    }
    case MeshFormat::PlyAscii:
    case MeshFormat::PlyBinary: {
      const bool binary = format == MeshFormat::PlyBinary;
      std::ostringstream ss;
      ss << "ply\nformat " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n"
         << "element vertex " << mesh.vertices.size() << "\n"
         << "property double x\nproperty double y\nproperty double z\n"
         << "element face " << mesh.faces.size() << "\n"
         << "property list uchar int vertex_indices\nend_header\n";
      out = ss.str();
      if (binary) {
        for (const auto& v : mesh.vertices) {
          append_le(out, v.x());
          append_le(out, v.y());
          append_le(out, v.z());
        }
        for (const auto& f : mesh.faces) {
          append_le(out, std::uint8_t{3});
          for (auto i : f) append_le(out, static_cast<std::int32_t>(i));
        }
      } else {
        std::ostringstream body;
        body.precision(17);
        for (const auto& v : mesh.vertices) body << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
        for (const auto& f : mesh.faces) body << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
        out += body.str();
      }
      break;
    }
    case MeshFormat::Stl: {
      out.assign(80, '\0');
      std::memcpy(out.data(), "tland binary STL", 16);
      append_le(out, static_cast<std::uint32_t>(mesh.faces.size()));
      for (const auto& f : mesh.faces) {
        const Vec3& a = mesh.vertices[f[0]];
        const Vec3& b = mesh.vertices[f[1]];
        const Vec3& c = mesh.vertices[f[2]];
        Vec3 n = (b - a).cross(c - a);
        if (n.norm() > 0) n.normalize();
        for (const Vec3* v : {static_cast<const Vec3*>(&n), &a, &b, &c}) {
          for (int k = 0; k < 3; ++k) append_le(out, static_cast<float>((*v)[k]));
        }
        append_le(out, std::uint16_t{0});
      }
      break;
    }
  }
  return out;
}

void save_mesh(const TriangleMesh& mesh, const std::filesystem::path& path, MeshFormat format) {
  const std::string bytes = write_mesh(mesh, format);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace tland
