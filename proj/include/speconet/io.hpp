/// @file io.hpp
/// @brief Persistence: flat key=value configs, SPFD field files, SPON
///        checkpoints and CSV tables.
#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <type_traits>
#include <vector>

#include "speconet/trainer.hpp"

namespace speconet {

// ---------------------------------------------------------------------------
// key=value configuration
// ---------------------------------------------------------------------------

// Ordered key -> value map; '#' starts a comment, blank lines are skipped.
// Duplicate keys and malformed lines throw ConfigError with the line number.
std::map<std::string, std::string> parse_config_text(const std::string& text, const std::string& origin = "config");
std::map<std::string, std::string> parse_config_file(const std::filesystem::path& path);

// Typed accessors that consume keys; leftover keys are reported by
// ConfigReader::finish().
class ConfigReader {
 public:
  explicit ConfigReader(std::map<std::string, std::string> kv) : kv_(std::move(kv)) {}

  bool has(const std::string& key) const { return kv_.count(key) != 0; }
  void get(const std::string& key, int& v);
  void get(const std::string& key, std::uint64_t& v);
  void get(const std::string& key, double& v);
  void get(const std::string& key, bool& v);
  void get(const std::string& key, std::string& v);
  void get(const std::string& key, std::vector<int>& v);
  void get(const std::string& key, std::vector<double>& v);
  // Throws ConfigError naming the first unknown key.
  void finish() const;

 private:
  const std::string* take(const std::string& key);
  std::map<std::string, std::string> kv_;
  std::set<std::string> used_;
};

// ---------------------------------------------------------------------------
// SPFD field files
// ---------------------------------------------------------------------------

struct FieldFile {
  std::vector<BasisKind> kinds;  // per axis
  std::vector<std::uint32_t> sizes;
  std::uint32_t components = 1;
  bool complex = false;
  double time = 0.0;
  std::vector<double> payload;  // components x prod(sizes) x (1 or 2)

  std::size_t expected_length() const;
};

inline constexpr std::uint32_t kFieldVersion = 1;
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_field(const std::filesystem::path& path, const FieldFile& f);
FieldFile read_field(const std::filesystem::path& path);

// Coefficient field of one role (all components share the basis).
FieldFile make_field(const Discretization& space, Role r, const Components& c, double time);

// ---------------------------------------------------------------------------
// SPON checkpoints
// ---------------------------------------------------------------------------

// Model plus the metadata needed to rebuild its problem.
struct Checkpoint {
  TrainedModel model;
  std::string metadata;  // JSON text
};

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
// Throws IntegrityError on bad magic, version, checksum or shapes.
Checkpoint read_checkpoint(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

std::string fmt_double(double v);  // %.17g

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  void row(const std::vector<std::string>& cells);
  template <class... T>
  void values(const T&... v) {
    row({cell(v)...});
  }

 private:
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  static std::string cell(char c) { return std::string(1, c); }
  static std::string cell(double v) { return fmt_double(v); }
  template <class I>
    requires std::is_integral_v<I>
  static std::string cell(I v) {
    return std::to_string(v);
  }
  std::FILE* f_ = nullptr;
  std::size_t columns_;
};

}  // namespace speconet
