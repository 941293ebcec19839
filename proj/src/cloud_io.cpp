#include "mapeval/cloud_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mapeval/error.hpp"

namespace mapeval {

namespace {

namespace fs = std::filesystem;

enum class ScalarType { kInt8, kUInt8, kInt16, kUInt16, kInt32, kUInt32, kFloat32, kFloat64 };

std::size_t scalar_size(ScalarType t) {
  switch (t) {
    case ScalarType::kInt8:
    case ScalarType::kUInt8: return 1;
    case ScalarType::kInt16:
    case ScalarType::kUInt16: return 2;
    case ScalarType::kInt32:
    case ScalarType::kUInt32:
    case ScalarType::kFloat32: return 4;
    case ScalarType::kFloat64: return 8;
  }
  return 0;
}

template <typename T>
T load_le(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    auto* b = reinterpret_cast<unsigned char*>(&v);
    std::reverse(b, b + sizeof(T));
  }
  return v;
}

template <typename T>
void store_le(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  out.append(buf, sizeof(T));
}

double load_scalar(ScalarType t, const char* p) {
  switch (t) {
    case ScalarType::kInt8: return load_le<std::int8_t>(p);
    case ScalarType::kUInt8: return load_le<std::uint8_t>(p);
    case ScalarType::kInt16: return load_le<std::int16_t>(p);
    case ScalarType::kUInt16: return load_le<std::uint16_t>(p);
    case ScalarType::kInt32: return load_le<std::int32_t>(p);
    case ScalarType::kUInt32: return load_le<std::uint32_t>(p);
    case ScalarType::kFloat32: return load_le<float>(p);
    case ScalarType::kFloat64: return load_le<double>(p);
  }
  return 0.0;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("failed reading " + path.string());
  return std::move(ss).str();
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<std::size_t> parse_count(std::string_view s) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

// Line-oriented cursor over the header with 1-based line numbers.
class HeaderReader {
 public:
  HeaderReader(const std::string& data, std::string name) : data_(data), name_(std::move(name)) {}

  std::optional<std::string_view> next() {
    if (pos_ >= data_.size()) return std::nullopt;
    const std::size_t end = data_.find('\n', pos_);
    const std::size_t stop = end == std::string::npos ? data_.size() : end;
    std::string_view line(data_.data() + pos_, stop - pos_);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos_ = end == std::string::npos ? data_.size() : end + 1;
    ++line_;
    return line;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(name_ + ":" + std::to_string(line_) + ": " + what);
  }

  std::size_t offset() const { return pos_; }
  int line() const { return line_; }

 private:
  const std::string& data_;
  std::string name_;
  std::size_t pos_ = 0;
  int line_ = 0;
};

struct Accumulated {
  PointCloud cloud;
  std::size_t dropped = 0;

  void add(double x, double y, double z, const Rgb* color) {
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z)) {
      ++dropped;
      return;
    }
    cloud.points.emplace_back(x, y, z);
    if (color != nullptr) cloud.colors.push_back(*color);
  }
};

// ---------------------------------------------------------------- PLY

struct PlyProperty {
  std::string name;
  ScalarType type = ScalarType::kFloat32;
  bool is_list = false;
  ScalarType count_type = ScalarType::kUInt8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> props;
};

std::optional<ScalarType> ply_type(std::string_view s) {
  if (s == "char" || s == "int8") return ScalarType::kInt8;
  if (s == "uchar" || s == "uint8") return ScalarType::kUInt8;
  if (s == "short" || s == "int16") return ScalarType::kInt16;
  if (s == "ushort" || s == "uint16") return ScalarType::kUInt16;
  if (s == "int" || s == "int32") return ScalarType::kInt32;
  if (s == "uint" || s == "uint32") return ScalarType::kUInt32;
  if (s == "float" || s == "float32") return ScalarType::kFloat32;
  if (s == "double" || s == "float64") return ScalarType::kFloat64;
  return std::nullopt;
}

ReadResult read_ply(const std::string& data, const std::string& name) {
  HeaderReader header(data, name);
  auto first = header.next();
  if (!first || *first != "ply") header.fail("missing 'ply' magic");

  bool ascii = false;
  bool have_format = false;
  std::vector<PlyElement> elements;
  for (;;) {
    auto line = header.next();
    if (!line) header.fail("missing end_header");
    const auto tok = split_ws(*line);
    if (tok.empty()) continue;
    if (tok[0] == "end_header") break;
    if (tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "format") {
      if (tok.size() < 2) header.fail("incomplete format line");
      if (tok[1] == "ascii") ascii = true;
      else if (tok[1] == "binary_little_endian") ascii = false;
      else if (tok[1] == "binary_big_endian") header.fail("big-endian PLY is not supported");
      else header.fail("unknown PLY format '" + std::string(tok[1]) + "'");
      have_format = true;
    } else if (tok[0] == "element") {
      if (tok.size() != 3) header.fail("element line needs a name and a count");
      auto count = parse_count(tok[2]);
      if (!count) header.fail("invalid element count '" + std::string(tok[2]) + "'");
      elements.push_back({std::string(tok[1]), *count, {}});
    } else if (tok[0] == "property") {
      if (elements.empty()) header.fail("property before any element");
      PlyProperty prop;
      if (tok.size() == 5 && tok[1] == "list") {
        auto ct = ply_type(tok[2]);
        auto it = ply_type(tok[3]);
        if (!ct || !it) header.fail("unknown list property type");
        prop = {std::string(tok[4]), *it, true, *ct};
      } else if (tok.size() == 3) {
        auto t = ply_type(tok[1]);
        if (!t) header.fail("unknown property type '" + std::string(tok[1]) + "'");
        prop = {std::string(tok[2]), *t, false, ScalarType::kUInt8};
      } else {
        header.fail("malformed property line");
      }
      elements.back().props.push_back(prop);
    } else {
      header.fail("unexpected header keyword '" + std::string(tok[0]) + "'");
    }
  }
  if (!have_format) header.fail("missing format line");

  const auto vertex_it = std::find_if(elements.begin(), elements.end(), [](const auto& e) { return e.name == "vertex"; });
  if (vertex_it == elements.end()) throw ParseError(name + ": no vertex element");
  const PlyElement& vertex = *vertex_it;
  int ix = -1, iy = -1, iz = -1, ir = -1, ig = -1, ib = -1;
  for (std::size_t i = 0; i < vertex.props.size(); ++i) {
    const auto& p = vertex.props[i];
    if (p.is_list) throw ParseError(name + ": list property '" + p.name + "' in vertex element is not supported");
    const int idx = static_cast<int>(i);
    if (p.name == "x") ix = idx;
    else if (p.name == "y") iy = idx;
    else if (p.name == "z") iz = idx;
    else if (p.name == "red") ir = idx;
    else if (p.name == "green") ig = idx;
    else if (p.name == "blue") ib = idx;
  }
  if (ix < 0 || iy < 0 || iz < 0) throw ParseError(name + ": vertex element lacks x/y/z");
  const bool colors = ir >= 0 && ig >= 0 && ib >= 0;

  Accumulated acc;
  acc.cloud.points.reserve(vertex.count);
  auto emit = [&](const std::vector<double>& v) {
    Rgb c;
    if (colors) {
      c = {static_cast<std::uint8_t>(v[static_cast<std::size_t>(ir)]),
           static_cast<std::uint8_t>(v[static_cast<std::size_t>(ig)]),
           static_cast<std::uint8_t>(v[static_cast<std::size_t>(ib)])};
    }
    acc.add(v[static_cast<std::size_t>(ix)], v[static_cast<std::size_t>(iy)], v[static_cast<std::size_t>(iz)],
            colors ? &c : nullptr);
  };

  std::vector<double> values(vertex.props.size());
  if (ascii) {
    for (const PlyElement& el : elements) {
      for (std::size_t n = 0; n < el.count; ++n) {
        auto line = header.next();
        if (!line) throw ParseError(name + ": body ended after " + std::to_string(n) + " of " +
                                    std::to_string(el.count) + " '" + el.name + "' lines");
        if (&el != &vertex) continue;
        const auto tok = split_ws(*line);
        if (tok.size() < values.size()) header.fail("expected " + std::to_string(values.size()) + " values");
        for (std::size_t i = 0; i < values.size(); ++i) {
          auto v = parse_double(tok[i]);
          if (!v) header.fail("invalid number '" + std::string(tok[i]) + "'");
          values[i] = *v;
        }
        emit(values);
      }
      if (&el == &vertex) break;
    }
  } else {
    std::size_t pos = header.offset();
    auto need = [&](std::size_t bytes, const std::string& what) {
      if (pos + bytes > data.size()) {
        throw ParseError(name + ": truncated binary body in " + what + ": expected " + std::to_string(bytes) +
                         " bytes, got " + std::to_string(data.size() - pos));
      }
    };
    for (const PlyElement& el : elements) {
      if (&el == &vertex) {
        std::size_t stride = 0;
        for (const auto& p : el.props) stride += scalar_size(p.type);
        need(stride * el.count, "element 'vertex'");
        for (std::size_t n = 0; n < el.count; ++n) {
          for (std::size_t i = 0; i < el.props.size(); ++i) {
            values[i] = load_scalar(el.props[i].type, data.data() + pos);
            pos += scalar_size(el.props[i].type);
          }
          emit(values);
        }
        break;
      }
      // Skip an element preceding the vertices.
      for (std::size_t n = 0; n < el.count; ++n) {
        for (const auto& p : el.props) {
          if (p.is_list) {
            need(scalar_size(p.count_type), "element '" + el.name + "'");
            const auto len = static_cast<std::size_t>(load_scalar(p.count_type, data.data() + pos));
            pos += scalar_size(p.count_type);
            need(len * scalar_size(p.type), "element '" + el.name + "'");
            pos += len * scalar_size(p.type);
          } else {
            need(scalar_size(p.type), "element '" + el.name + "'");
            pos += scalar_size(p.type);
          }
        }
      }
    }
  }
  return {std::move(acc.cloud), acc.dropped};
}

// ---------------------------------------------------------------- PCD

ReadResult read_pcd(const std::string& data, const std::string& name) {
  HeaderReader header(data, name);
  std::vector<std::string> fields;
  std::vector<std::size_t> sizes, counts;
  std::vector<char> types;
  std::optional<std::size_t> width, height, points;
  std::string mode;

  for (;;) {
    auto line = header.next();
    if (!line) header.fail("missing DATA line");
    const auto tok = split_ws(*line);
    if (tok.empty() || tok[0].front() == '#') continue;
    const std::string_view key = tok[0];
    auto parse_counts = [&](std::vector<std::size_t>& out) {
      out.clear();
      for (std::size_t i = 1; i < tok.size(); ++i) {
        auto v = parse_count(tok[i]);
        if (!v) header.fail("invalid integer '" + std::string(tok[i]) + "' in " + std::string(key));
        out.push_back(*v);
      }
    };
    if (key == "VERSION" || key == "VIEWPOINT") {
      continue;
    } else if (key == "FIELDS") {
      fields.clear();
      for (std::size_t i = 1; i < tok.size(); ++i) fields.emplace_back(tok[i]);
    } else if (key == "SIZE") {
      parse_counts(sizes);
    } else if (key == "TYPE") {
      types.clear();
      for (std::size_t i = 1; i < tok.size(); ++i) {
        if (tok[i].size() != 1 || std::string_view("IUF").find(tok[i][0]) == std::string_view::npos) {
          header.fail("invalid TYPE '" + std::string(tok[i]) + "'");
        }
        types.push_back(tok[i][0]);
      }
    } else if (key == "COUNT") {
      parse_counts(counts);
    } else if (key == "WIDTH" || key == "HEIGHT" || key == "POINTS") {
      if (tok.size() != 2) header.fail(std::string(key) + " needs one value");
      auto v = parse_count(tok[1]);
      if (!v) header.fail("invalid " + std::string(key) + " '" + std::string(tok[1]) + "'");
      (key == "WIDTH" ? width : key == "HEIGHT" ? height : points) = *v;
    } else if (key == "DATA") {
      if (tok.size() != 2) header.fail("DATA needs one value");
      mode = std::string(tok[1]);
      if (mode == "binary_compressed") header.fail("binary_compressed PCD is not supported");
      if (mode != "ascii" && mode != "binary") header.fail("unknown DATA mode '" + mode + "'");
      break;
    } else {
      header.fail("unexpected header keyword '" + std::string(key) + "'");
    }
  }

  if (fields.empty()) throw ParseError(name + ": missing FIELDS");
  if (counts.empty()) counts.assign(fields.size(), 1);
  if (sizes.size() != fields.size() || types.size() != fields.size() || counts.size() != fields.size()) {
    throw ParseError(name + ": FIELDS, SIZE, TYPE and COUNT lengths differ");
  }
  std::size_t n = 0;
  if (points) n = *points;
  else if (width) n = *width * height.value_or(1);
  else throw ParseError(name + ": missing POINTS/WIDTH");

  // Offsets of each field within a binary record and within an ASCII line.
  int fx = -1, fy = -1, fz = -1;
  std::vector<std::size_t> byte_offset(fields.size()), value_offset(fields.size());
  std::size_t stride = 0, values_per_point = 0;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    byte_offset[i] = stride;
    value_offset[i] = values_per_point;
    stride += sizes[i] * counts[i];
    values_per_point += counts[i];
    const int idx = static_cast<int>(i);
    if (fields[i] == "x") fx = idx;
    else if (fields[i] == "y") fy = idx;
    else if (fields[i] == "z") fz = idx;
  }
  if (fx < 0 || fy < 0 || fz < 0) throw ParseError(name + ": FIELDS lacks x/y/z");
  auto scalar_of = [&](int f) {
    const auto i = static_cast<std::size_t>(f);
    if (types[i] != 'F' || (sizes[i] != 4 && sizes[i] != 8)) {
      throw ParseError(name + ": field '" + fields[i] + "' must be FLOAT32 or FLOAT64");
    }
    return sizes[i] == 4 ? ScalarType::kFloat32 : ScalarType::kFloat64;
  };
  const ScalarType tx = scalar_of(fx), ty = scalar_of(fy), tz = scalar_of(fz);

  Accumulated acc;
  acc.cloud.points.reserve(n);
  if (mode == "ascii") {
    for (std::size_t k = 0; k < n; ++k) {
      auto line = header.next();
      if (!line) throw ParseError(name + ": body ended after " + std::to_string(k) + " of " + std::to_string(n) + " points");
      const auto tok = split_ws(*line);
      if (tok.size() < values_per_point) header.fail("expected " + std::to_string(values_per_point) + " values");
      auto value = [&](int f) {
        auto v = parse_double(tok[value_offset[static_cast<std::size_t>(f)]]);
        if (!v) header.fail("invalid number in field '" + fields[static_cast<std::size_t>(f)] + "'");
        return *v;
      };
      acc.add(value(fx), value(fy), value(fz), nullptr);
    }
  } else {
    const std::size_t pos = header.offset();
    const std::size_t expected = n * stride;
    if (data.size() - pos < expected) {
      throw ParseError(name + ": truncated binary body: expected " + std::to_string(expected) + " bytes, got " +
                       std::to_string(data.size() - pos));
    }
    const char* base = data.data() + pos;
    for (std::size_t k = 0; k < n; ++k) {
      const char* rec = base + k * stride;
      acc.add(load_scalar(tx, rec + byte_offset[static_cast<std::size_t>(fx)]),
              load_scalar(ty, rec + byte_offset[static_cast<std::size_t>(fy)]),
              load_scalar(tz, rec + byte_offset[static_cast<std::size_t>(fz)]), nullptr);
    }
  }
  return {std::move(acc.cloud), acc.dropped};
}

std::string lower_extension(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

void append_fixed(std::string& out, double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, 6);
  if (ec != std::errc()) throw std::runtime_error("number formatting failed");
  out.append(buf, ptr);
}

void write_file(const fs::path& path, const std::string& contents) {
  const fs::path parent = path.has_parent_path() ? path.parent_path() : fs::path(".");
  std::error_code ec;
  if (!fs::is_directory(parent, ec)) throw IoError("cannot write " + path.string() + ": directory does not exist");
  if (fs::is_directory(path, ec)) throw IoError("cannot write " + path.string() + ": path is a directory");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  out.close();
  if (!out) throw IoError("failed writing " + path.string());
}

std::string encode_ply(const PointCloud& cloud, Encoding encoding) {
  const bool colors = cloud.has_colors();
  if (colors && cloud.colors.size() != cloud.size()) throw std::invalid_argument("color count differs from point count");
  std::string out = "ply\n";
  out += encoding == Encoding::kAscii ? "format ascii 1.0\n" : "format binary_little_endian 1.0\n";
  out += "element vertex " + std::to_string(cloud.size()) + "\n";
  out += "property double x\nproperty double y\nproperty double z\n";
  if (colors) out += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out += "end_header\n";

  if (encoding == Encoding::kBinary) {
    out.reserve(out.size() + cloud.size() * (24 + (colors ? 3 : 0)));
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const Point3& p = cloud.points[i];
      store_le(out, p.x());
      store_le(out, p.y());
      store_le(out, p.z());
      if (colors) {
        out.push_back(static_cast<char>(cloud.colors[i].r));
        out.push_back(static_cast<char>(cloud.colors[i].g));
        out.push_back(static_cast<char>(cloud.colors[i].b));
      }
    }
  } else {
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const Point3& p = cloud.points[i];
      append_fixed(out, p.x());
      out += ' ';
      append_fixed(out, p.y());
      out += ' ';
      append_fixed(out, p.z());
      if (colors) {
        out += ' ' + std::to_string(cloud.colors[i].r) + ' ' + std::to_string(cloud.colors[i].g) + ' ' +
               std::to_string(cloud.colors[i].b);
      }
      out += '\n';
    }
  }
  return out;
}

std::string encode_pcd(const PointCloud& cloud, Encoding encoding) {
  const std::string n = std::to_string(cloud.size());
  std::string out = "# .PCD v0.7 - Point Cloud Data file format\nVERSION 0.7\nFIELDS x y z\n";
  out += encoding == Encoding::kBinary ? "SIZE 8 8 8\n" : "SIZE 4 4 4\n";
  out += "TYPE F F F\nCOUNT 1 1 1\nWIDTH " + n + "\nHEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0\nPOINTS " + n + "\n";
  if (encoding == Encoding::kBinary) {
    out += "DATA binary\n";
    out.reserve(out.size() + cloud.size() * 24);
    for (const Point3& p : cloud.points) {
      store_le(out, p.x());
      store_le(out, p.y());
      store_le(out, p.z());
    }
  } else {
    out += "DATA ascii\n";
    for (const Point3& p : cloud.points) {
      append_fixed(out, p.x());
      out += ' ';
      append_fixed(out, p.y());
      out += ' ';
      append_fixed(out, p.z());
      out += '\n';
    }
  }
  return out;
}

}  // namespace

ReadResult read_cloud(const fs::path& path) {
  const std::string ext = lower_extension(path);
  if (ext != ".ply" && ext != ".pcd") throw ParseError(path.string() + ": unsupported extension '" + ext + "'");
  const std::string data = read_file(path);
  return ext == ".ply" ? read_ply(data, path.string()) : read_pcd(data, path.string());
}

void write_cloud(const fs::path& path, const PointCloud& cloud, Encoding encoding) {
  const std::string ext = lower_extension(path);
  if (ext == ".ply") write_file(path, encode_ply(cloud, encoding));
  else if (ext == ".pcd") write_file(path, encode_pcd(cloud, encoding));
  else throw IoError(path.string() + ": unsupported extension '" + ext + "'");
}

Rgb error_color(double distance, double max_distance) {
  const double t = std::clamp(distance / max_distance, 0.0, 1.0);
  const auto red = static_cast<std::uint8_t>(std::lround(255.0 * t));
  return {red, 0, static_cast<std::uint8_t>(255 - red)};
}

PointCloud export_error_map(const PointCloud& cloud, std::span<const double> distances, double max_distance) {
  if (distances.size() != cloud.size()) {
    throw std::invalid_argument("error map needs one distance per point (" + std::to_string(cloud.size()) +
                                " points, " + std::to_string(distances.size()) + " distances)");
  }
  if (!(max_distance > 0.0)) throw std::invalid_argument("error map maximum must be positive");
  PointCloud out;
  out.points = cloud.points;
  out.colors.reserve(cloud.size());
  for (double d : distances) out.colors.push_back(error_color(d, max_distance));
  return out;
}

}  // namespace mapeval
