#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace gspr::ply {

enum class Format { kAscii, kBinaryLittleEndian, kBinaryBigEndian };

enum class ScalarType : std::uint8_t { kInt8, kUInt8, kInt16, kUInt16, kInt32, kUInt32, kFloat32, kFloat64 };

std::size_t type_size(ScalarType t);
const char* type_name(ScalarType t);

struct Property {
  std::string name;
  ScalarType type = ScalarType::kFloat32;
  bool is_list = false;
  ScalarType count_type = ScalarType::kUInt8;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> properties;

  std::optional<std::size_t> find(const std::string& property) const;
};

// Decoded PLY file. Scalar properties of each element are widened to double
// and stored row-major (count x properties); list properties are skipped.
struct Table {
  Element element;
  std::vector<std::size_t> scalar_columns;  // property index -> column, or npos for lists
  std::vector<double> values;
  std::size_t columns = 0;

  double at(std::size_t row, std::size_t column) const { return values[row * columns + column]; }
};

struct File {
  Format format = Format::kBinaryLittleEndian;
  std::vector<std::string> comments;
  std::vector<Table> elements;

  const Table* find(const std::string& element) const;
};

// Throws FormatError on malformed headers or truncated bodies.
File read(const std::filesystem::path& path);

// Binary little-endian writer for one element of scalar properties.
// `rows` holds count x properties values, converted to each property's type.
void write(const std::filesystem::path& path, const std::vector<std::string>& comments,
           const std::string& element, const std::vector<Property>& properties,
           const std::vector<double>& rows);

}  // namespace gspr::ply
