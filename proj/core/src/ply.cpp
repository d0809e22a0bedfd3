#include "gspr/ply.hpp"

#include <algorithm>
#include <cmath>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "gspr/error.hpp"

namespace gspr::ply {
namespace {

constexpr std::size_t kNoColumn = std::numeric_limits<std::size_t>::max();

std::optional<ScalarType> parse_type(const std::string& s) {
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

template <typename T>
T load(const char* p, bool swap) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  if (swap) {
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    std::reverse(b, b + sizeof(T));
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

double decode(ScalarType t, const char* p, bool swap) {
  switch (t) {
    case ScalarType::kInt8: return load<std::int8_t>(p, swap);
    case ScalarType::kUInt8: return load<std::uint8_t>(p, swap);
    case ScalarType::kInt16: return load<std::int16_t>(p, swap);
    case ScalarType::kUInt16: return load<std::uint16_t>(p, swap);
    case ScalarType::kInt32: return load<std::int32_t>(p, swap);
    case ScalarType::kUInt32: return load<std::uint32_t>(p, swap);
    case ScalarType::kFloat32: return load<float>(p, swap);
    case ScalarType::kFloat64: return load<double>(p, swap);
  }
  return 0.0;
}

template <typename T>
void store(std::string& out, double v) {
  T x;
  if constexpr (std::is_integral_v<T>) {
    x = static_cast<T>(std::clamp<double>(std::round(v), std::numeric_limits<T>::lowest(),
                                          std::numeric_limits<T>::max()));
  } else {
    x = static_cast<T>(v);
  }
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  char b[sizeof(T)];
  std::memcpy(b, &x, sizeof(T));
  out.append(b, sizeof(T));
}

void encode(std::string& out, ScalarType t, double v) {
  switch (t) {
    case ScalarType::kInt8: store<std::int8_t>(out, v); break;
    case ScalarType::kUInt8: store<std::uint8_t>(out, v); break;
    case ScalarType::kInt16: store<std::int16_t>(out, v); break;
    case ScalarType::kUInt16: store<std::uint16_t>(out, v); break;
    case ScalarType::kInt32: store<std::int32_t>(out, v); break;
    case ScalarType::kUInt32: store<std::uint32_t>(out, v); break;
    case ScalarType::kFloat32: store<float>(out, v); break;
    case ScalarType::kFloat64: store<double>(out, v); break;
  }
}

class Cursor {
 public:
  Cursor(const std::string& data, std::size_t pos, const std::filesystem::path& path)
      : data_(data), pos_(pos), path_(path) {}

  const char* take(std::size_t n) {
    if (pos_ + n > data_.size()) throw FormatError("PLY body truncated: " + path_.string());
    const char* p = data_.data() + pos_;
    pos_ += n;
    return p;
  }

  double token() {
    while (pos_ < data_.size() && std::isspace(static_cast<unsigned char>(data_[pos_]))) ++pos_;
    if (pos_ >= data_.size()) throw FormatError("PLY body truncated: " + path_.string());
    const char* begin = data_.data() + pos_;
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) throw FormatError("PLY ascii body has a non-numeric token: " + path_.string());
    pos_ += static_cast<std::size_t>(end - begin);
    return v;
  }

 private:
  const std::string& data_;
  std::size_t pos_;
  const std::filesystem::path& path_;
};

}  // namespace

std::size_t type_size(ScalarType t) {
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

const char* type_name(ScalarType t) {
  switch (t) {
    case ScalarType::kInt8: return "char";
    case ScalarType::kUInt8: return "uchar";
    case ScalarType::kInt16: return "short";
    case ScalarType::kUInt16: return "ushort";
    case ScalarType::kInt32: return "int";
    case ScalarType::kUInt32: return "uint";
    case ScalarType::kFloat32: return "float";
    case ScalarType::kFloat64: return "double";
  }
  return "?";
}

std::optional<std::size_t> Element::find(const std::string& property) const {
  for (std::size_t i = 0; i < properties.size(); ++i) {
    if (properties[i].name == property) return i;
  }
  return std::nullopt;
}

const Table* File::find(const std::string& element) const {
  for (const auto& t : elements) {
    if (t.element.name == element) return &t;
  }
  return nullptr;
}

File read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open PLY file: " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  File file;
  std::vector<Element> elements;
  std::size_t pos = 0;
  bool magic = false;
  bool have_format = false;
  while (true) {
    const std::size_t eol = data.find('\n', pos);
    if (eol == std::string::npos) throw FormatError("PLY header not terminated: " + path.string());
    std::string line = data.substr(pos, eol - pos);
    pos = eol + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (!magic) {
      if (key != "ply") throw FormatError("not a PLY file: " + path.string());
      magic = true;
      continue;
    }
    if (key == "end_header") break;
    if (key == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "ascii") file.format = Format::kAscii;
      else if (fmt == "binary_little_endian") file.format = Format::kBinaryLittleEndian;
      else if (fmt == "binary_big_endian") file.format = Format::kBinaryBigEndian;
      else throw FormatError("unsupported PLY format '" + fmt + "': " + path.string());
      have_format = true;
    } else if (key == "comment" || key == "obj_info") {
      file.comments.push_back(line.size() > key.size() + 1 ? line.substr(key.size() + 1) : std::string{});
    } else if (key == "element") {
      Element e;
      long long count = -1;
      ls >> e.name >> count;
      if (e.name.empty() || count < 0) throw FormatError("bad PLY element line '" + line + "'");
      e.count = static_cast<std::size_t>(count);
      elements.push_back(std::move(e));
    } else if (key == "property") {
      if (elements.empty()) throw FormatError("PLY property before any element: " + path.string());
      Property p;
      std::string t;
      ls >> t;
      if (t == "list") {
        std::string ct, it;
        ls >> ct >> it >> p.name;
        auto c = parse_type(ct);
        auto i = parse_type(it);
        if (!c || !i) throw FormatError("bad PLY list property '" + line + "'");
        p.is_list = true;
        p.count_type = *c;
        p.type = *i;
      } else {
        auto st = parse_type(t);
        if (!st) throw FormatError("unknown PLY property type '" + t + "'");
        p.type = *st;
        ls >> p.name;
      }
      if (p.name.empty()) throw FormatError("PLY property without a name: " + path.string());
      elements.back().properties.push_back(std::move(p));
    } else if (!key.empty()) {
      throw FormatError("unexpected PLY header line '" + line + "'");
    }
  }
  if (!have_format) throw FormatError("PLY header lacks a format line: " + path.string());

  const bool ascii = file.format == Format::kAscii;
  const bool swap = file.format == Format::kBinaryBigEndian;
  Cursor cur(data, pos, path);
  for (auto& e : elements) {
    Table t;
    t.element = e;
    for (const auto& p : e.properties) {
      t.scalar_columns.push_back(p.is_list ? kNoColumn : t.columns++);
    }
    t.values.resize(e.count * t.columns);
    for (std::size_t r = 0; r < e.count; ++r) {
      double* row = t.values.data() + r * t.columns;
      for (std::size_t k = 0; k < e.properties.size(); ++k) {
        const auto& p = e.properties[k];
        if (p.is_list) {
          const double n = ascii ? cur.token() : decode(p.count_type, cur.take(type_size(p.count_type)), swap);
          if (n < 0) throw FormatError("negative PLY list length in " + path.string());
          for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
            if (ascii) cur.token();
            else cur.take(type_size(p.type));
          }
        } else {
          row[t.scalar_columns[k]] = ascii ? cur.token() : decode(p.type, cur.take(type_size(p.type)), swap);
        }
      }
    }
    file.elements.push_back(std::move(t));
  }
  return file;
}

void write(const std::filesystem::path& path, const std::vector<std::string>& comments,
           const std::string& element, const std::vector<Property>& properties,
           const std::vector<double>& rows) {
  const std::size_t cols = properties.size();
  if (cols == 0 || rows.size() % cols != 0) throw InputError("PLY row data does not match property count");
  std::string out = "ply\nformat binary_little_endian 1.0\n";
  for (const auto& c : comments) out += "comment " + c + "\n";
  out += "element " + element + " " + std::to_string(rows.size() / cols) + "\n";
  for (const auto& p : properties) {
    out += std::string("property ") + type_name(p.type) + " " + p.name + "\n";
  }
  out += "end_header\n";
  for (std::size_t i = 0; i < rows.size(); ++i) encode(out, properties[i % cols].type, rows[i]);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("cannot write PLY file: " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw FormatError("failed writing PLY file: " + path.string());
}

}  // namespace gspr::ply
