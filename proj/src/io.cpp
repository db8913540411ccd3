#include "sscalib/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace sscalib {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "binary PLY I/O assumes a little-endian host");

namespace {

Error parse_error(const fs::path& path, std::size_t offset, const std::string& what) {
  return Error(ErrorCode::kParseError, path.string() + ": " + what + " at byte " + std::to_string(offset));
}

enum class PlyType { kInt8, kUint8, kInt16, kUint16, kInt32, kUint32, kFloat32, kFloat64 };

bool ply_type(const std::string& name, PlyType& t) {
  static const std::array<std::pair<const char*, PlyType>, 16> table = {{
      {"char", PlyType::kInt8},     {"int8", PlyType::kInt8},       {"uchar", PlyType::kUint8},
      {"uint8", PlyType::kUint8},   {"short", PlyType::kInt16},     {"int16", PlyType::kInt16},
      {"ushort", PlyType::kUint16}, {"uint16", PlyType::kUint16},   {"int", PlyType::kInt32},
      {"int32", PlyType::kInt32},   {"uint", PlyType::kUint32},     {"uint32", PlyType::kUint32},
      {"float", PlyType::kFloat32}, {"float32", PlyType::kFloat32}, {"double", PlyType::kFloat64},
      {"float64", PlyType::kFloat64},
  }};
  for (const auto& [n, v] : table) {
    if (name == n) {
      t = v;
      return true;
    }
  }
  return false;
}

std::size_t type_size(PlyType t) {
  switch (t) {
    case PlyType::kInt8:
    case PlyType::kUint8: return 1;
    case PlyType::kInt16:
    case PlyType::kUint16: return 2;
    case PlyType::kInt32:
    case PlyType::kUint32:
    case PlyType::kFloat32: return 4;
    case PlyType::kFloat64: return 8;
  }
  return 0;
}

template <typename T>
T load(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

double decode(PlyType t, const char* p) {
  switch (t) {
    case PlyType::kInt8: return load<std::int8_t>(p);
    case PlyType::kUint8: return load<std::uint8_t>(p);
    case PlyType::kInt16: return load<std::int16_t>(p);
    case PlyType::kUint16: return load<std::uint16_t>(p);
    case PlyType::kInt32: return load<std::int32_t>(p);
    case PlyType::kUint32: return load<std::uint32_t>(p);
    case PlyType::kFloat32: return load<float>(p);
    case PlyType::kFloat64: return load<double>(p);
  }
  return 0.0;
}

struct PlyProperty {
  std::string name;
  PlyType type;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> props;
  bool has_list = false;
};

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Index of each named channel in the vertex property list, -1 when absent.
struct Channels {
  int x = -1, y = -1, z = -1, label = -1, r = -1, g = -1, b = -1, colored = -1;
};

Channels find_channels(const std::vector<PlyProperty>& props) {
  Channels c;
  for (int i = 0; i < static_cast<int>(props.size()); ++i) {
    const std::string& n = props[i].name;
    if (n == "x") c.x = i;
    else if (n == "y") c.y = i;
    else if (n == "z") c.z = i;
    else if (n == "label") c.label = i;
    else if (n == "red" || n == "r") c.r = i;
    else if (n == "green" || n == "g") c.g = i;
    else if (n == "blue" || n == "b") c.b = i;
    else if (n == "colored") c.colored = i;
  }
  return c;
}

std::uint8_t to_u8(double v) { return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0)); }

void store(PointCloud& cloud, const Channels& ch, const std::vector<double>& row) {
  cloud.points.emplace_back(row[ch.x], row[ch.y], row[ch.z]);
  if (ch.label >= 0) cloud.labels.push_back(to_u8(row[ch.label]));
  if (ch.r >= 0) {
    cloud.colors.push_back({to_u8(row[ch.r]), to_u8(row[ch.g]), to_u8(row[ch.b])});
    cloud.colored.push_back(ch.colored >= 0 ? to_u8(row[ch.colored]) : 1);
  }
}

bool parse_double(std::string_view s, double& v) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

void write_ply(const fs::path& path, const PointCloud& cloud, PlyFormat format) {
  const bool labels = cloud.has_labels();
  const bool colors = cloud.has_colors();
  std::ostringstream out;
  out << "ply\nformat " << (format == PlyFormat::kAscii ? "ascii" : "binary_little_endian") << " 1.0\n";
  out << "element vertex " << cloud.size() << "\n";
  out << "property float x\nproperty float y\nproperty float z\n";
  if (labels) out << "property uchar label\n";
  if (colors) out << "property uchar red\nproperty uchar green\nproperty uchar blue\nproperty uchar colored\n";
  out << "end_header\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const std::array<float, 3> xyz = {static_cast<float>(cloud.points[i].x()), static_cast<float>(cloud.points[i].y()),
                                      static_cast<float>(cloud.points[i].z())};
    if (format == PlyFormat::kAscii) {
      char buf[64];
      for (int a = 0; a < 3; ++a) {
        std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(xyz[a]));
        out << (a ? " " : "") << buf;
      }
      if (labels) out << ' ' << int(cloud.labels[i]);
      if (colors) {
        out << ' ' << int(cloud.colors[i][0]) << ' ' << int(cloud.colors[i][1]) << ' ' << int(cloud.colors[i][2]) << ' '
            << int(cloud.colored.empty() ? 1 : cloud.colored[i]);
      }
      out << '\n';
    } else {
      out.write(reinterpret_cast<const char*>(xyz.data()), sizeof xyz);
      if (labels) out.put(static_cast<char>(cloud.labels[i]));
      if (colors) {
        out.write(reinterpret_cast<const char*>(cloud.colors[i].data()), 3);
        out.put(static_cast<char>(cloud.colored.empty() ? 1 : cloud.colored[i]));
      }
    }
  }
  write_text(path, out.str());
}

PointCloud read_ply(const fs::path& path) {
  const std::string data = read_bytes(path);
  std::size_t pos = 0;
  auto next_line = [&](std::string& line) {
    const std::size_t nl = data.find('\n', pos);
    if (nl == std::string::npos) throw parse_error(path, data.size(), "header ends without end_header");
    line = data.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::size_t at = pos;
    pos = nl + 1;
    return at;
  };

  std::string line;
  next_line(line);
  if (line != "ply") throw parse_error(path, 0, "missing ply magic");
  bool ascii = false;
  bool have_format = false;
  std::vector<PlyElement> elements;
  for (;;) {
    const std::size_t at = next_line(line);
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "end_header") break;
    if (word == "comment" || word == "obj_info" || word.empty()) continue;
    if (word == "format") {
      std::string fmt, ver;
      ls >> fmt >> ver;
      if (fmt == "ascii") ascii = true;
      else if (fmt != "binary_little_endian") throw parse_error(path, at, "unsupported format '" + fmt + "'");
      have_format = true;
    } else if (word == "element") {
      PlyElement e;
      long long count = -1;
      ls >> e.name >> count;
      if (!ls || count < 0) throw parse_error(path, at, "malformed element line");
      e.count = static_cast<std::size_t>(count);
      elements.push_back(e);
    } else if (word == "property") {
      if (elements.empty()) throw parse_error(path, at, "property before any element");
      std::string type, name;
      ls >> type;
      if (type == "list") {
        elements.back().has_list = true;
        continue;
      }
      ls >> name;
      PlyType t;
      if (!ply_type(type, t) || name.empty()) throw parse_error(path, at, "bad property '" + line + "'");
      elements.back().props.push_back({name, t});
    } else {
      throw parse_error(path, at, "unexpected header keyword '" + word + "'");
    }
  }
  if (!have_format) throw parse_error(path, pos, "header has no format line");

  PointCloud cloud;
  for (const PlyElement& e : elements) {
    if (e.name != "vertex") {
      // Elements before the vertex block would have to be skipped in binary
      // files; the writers we care about put vertices first.
      if (cloud.points.empty() && e.count > 0) throw parse_error(path, pos, "element '" + e.name + "' precedes vertex");
      continue;
    }
    if (e.has_list) throw parse_error(path, pos, "list property in vertex element");
    const Channels ch = find_channels(e.props);
    if (ch.x < 0 || ch.y < 0 || ch.z < 0) throw parse_error(path, pos, "vertex element lacks x, y or z");
    if ((ch.r >= 0) != (ch.g >= 0) || (ch.r >= 0) != (ch.b >= 0)) {
      throw parse_error(path, pos, "incomplete color properties");
    }
    cloud.points.reserve(e.count);
    std::vector<double> row(e.props.size());
    if (ascii) {
      for (std::size_t i = 0; i < e.count; ++i) {
        const std::size_t at = pos;
        if (pos >= data.size()) throw parse_error(path, at, "file ends after " + std::to_string(i) + " vertices");
        const std::size_t nl = data.find('\n', pos);
        const std::string_view text(data.data() + pos, (nl == std::string::npos ? data.size() : nl) - pos);
        pos = nl == std::string::npos ? data.size() : nl + 1;
        std::size_t field = 0, start = 0;
        for (std::size_t j = 0; j <= text.size(); ++j) {
          if (j == text.size() || text[j] == ' ' || text[j] == '\t' || text[j] == '\r') {
            if (j > start) {
              if (field >= row.size()) throw parse_error(path, at + start, "too many values in vertex row");
              if (!parse_double(text.substr(start, j - start), row[field])) {
                throw parse_error(path, at + start, "bad number");
              }
              ++field;
            }
            start = j + 1;
          }
        }
        if (field != row.size()) throw parse_error(path, at, "vertex row has " + std::to_string(field) + " values");
        store(cloud, ch, row);
      }
    } else {
      std::size_t stride = 0;
      for (const auto& p : e.props) stride += type_size(p.type);
      for (std::size_t i = 0; i < e.count; ++i) {
        if (pos + stride > data.size()) {
          throw parse_error(path, pos, "file truncated after " + std::to_string(i) + " of " + std::to_string(e.count) +
                                           " vertices");
        }
        std::size_t off = pos;
        for (std::size_t j = 0; j < e.props.size(); ++j) {
          row[j] = decode(e.props[j].type, data.data() + off);
          off += type_size(e.props[j].type);
        }
        pos += stride;
        store(cloud, ch, row);
      }
    }
  }
  return cloud;
}

PointCloud read_csv(const fs::path& path) {
  const std::string data = read_bytes(path);
  PointCloud cloud;
  std::size_t pos = 0;
  bool first = true;
  while (pos < data.size()) {
    const std::size_t nl = data.find('\n', pos);
    const std::size_t end = nl == std::string::npos ? data.size() : nl;
    const std::string_view line(data.data() + pos, end - pos);
    const std::size_t at = pos;
    pos = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos || line.front() == '#') continue;
    std::array<double, 3> v{};
    std::size_t field = 0, start = 0;
    bool ok = true;
    for (std::size_t j = 0; j <= line.size() && ok; ++j) {
      if (j == line.size() || line[j] == ',') {
        if (field < 3) ok = parse_double(line.substr(start, j - start), v[field]);
        ++field;
        start = j + 1;
      }
    }
    if (ok && field < 3) ok = false;
    if (!ok) {
      if (first) {
        first = false;
        continue;
      }
      throw parse_error(path, at, "expected x,y,z");
    }
    first = false;
    cloud.points.emplace_back(v[0], v[1], v[2]);
  }
  return cloud;
}

PointCloud read_cloud(const fs::path& path) {
  std::string ext = path.extension().string();
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext == ".ply" ? read_ply(path) : read_csv(path);
}

std::string read_text(const fs::path& path) { return read_bytes(path); }

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorCode::kIoError, "short write to " + path.string());
}

std::string intrinsics_to_json(const Intrinsics& k) {
  json j = {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"k1", k.k1},       {"k2", k.k2},
            {"k3", k.k3}, {"p1", k.p1}, {"p2", k.p2}, {"width", k.width}, {"height", k.height}};
  return j.dump(2) + "\n";
}

Intrinsics intrinsics_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParseError, std::string("intrinsics: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::kParseError, "intrinsics: expected a JSON object");
  Intrinsics k;
  try {
    for (const char* req : {"fx", "fy", "cx", "cy"}) {
      if (!j.contains(req)) throw Error(ErrorCode::kParseError, std::string("intrinsics: missing '") + req + "'");
    }
    k.fx = j.at("fx").get<double>();
    k.fy = j.at("fy").get<double>();
    k.cx = j.at("cx").get<double>();
    k.cy = j.at("cy").get<double>();
    k.k1 = j.value("k1", 0.0);
    k.k2 = j.value("k2", 0.0);
    k.k3 = j.value("k3", 0.0);
    k.p1 = j.value("p1", 0.0);
    k.p2 = j.value("p2", 0.0);
    k.width = j.value("width", k.width);
    k.height = j.value("height", k.height);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("intrinsics: ") + e.what());
  }
  if (!k.valid()) throw Error(ErrorCode::kInvalidArgument, "intrinsics: focal lengths and size must be positive");
  return k;
}

Intrinsics read_intrinsics(const fs::path& path) { return intrinsics_from_json(read_text(path)); }

}  // namespace sscalib
