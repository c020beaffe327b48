#include "speconet/io.hpp"

#include <bit>
#include <cctype>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "speconet/errors.hpp"
#include "speconet/rng.hpp"

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace speconet {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool valid_key(const std::string& k) {
  if (k.empty() || k.front() == '.' || k.back() == '.') return false;
  for (char c : k)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-')) return false;
  return true;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* b = text.data();
  const char* e = b + text.size();
  const auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e) throw ConfigError("config: key '" + key + "' has invalid value '" + text + "'");
  return v;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& b) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  if (!out) throw ConfigError("write failed for '" + path.string() + "'");
}

class Writer {
 public:
  template <class T>
  void put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    buf.insert(buf.end(), p, p + sizeof(T));
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    buf.insert(buf.end(), p, p + n);
  }
  void put_doubles(const std::vector<double>& v) { put_bytes(v.data(), v.size() * sizeof(double)); }
  std::vector<std::uint8_t> buf;
};

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& b, std::size_t end, std::string what) : b_(b), end_(end), what_(std::move(what)) {}
  template <class T>
  T get() {
    T v;
    std::memcpy(&v, need(sizeof(T)), sizeof(T));
    return v;
  }
  std::string get_string(std::size_t n) {
    const auto* p = need(n);
    return {reinterpret_cast<const char*>(p), n};
  }
  void get_doubles(std::vector<double>& v, std::size_t n) {
    const auto* p = need(n * sizeof(double));
    v.resize(n);
    std::memcpy(v.data(), p, n * sizeof(double));
  }
  std::size_t remaining() const { return end_ - pos_; }

 private:
  const std::uint8_t* need(std::size_t n) {
    if (n > end_ - pos_) throw IntegrityError(what_ + ": truncated");
    const auto* p = b_.data() + pos_;
    pos_ += n;
    return p;
  }
  const std::vector<std::uint8_t>& b_;
  std::size_t end_, pos_ = 0;
  std::string what_;
};

constexpr char kFieldMagic[4] = {'S', 'P', 'F', 'D'};
constexpr char kCheckpointMagic[4] = {'S', 'P', 'O', 'N'};

void check_magic(Reader& r, const char (&magic)[4], const std::string& what) {
  if (r.get_string(4) != std::string(magic, 4)) throw IntegrityError(what + ": bad magic");
}

nlohmann::json net_shape(const ConvNet& n) {
  return {{"dim", n.conv.dim},          {"in_channels", n.conv.in_channels}, {"out_channels", n.conv.out_channels},
          {"kernel", n.conv.kernel},    {"grid", n.conv.grid},               {"out_len", n.out_len},
          {"heads", n.heads.size()}};
}

ConvNet net_from_shape(const nlohmann::json& j) {
  ConvNet n;
  n.conv.dim = j.at("dim").get<int>();
  n.conv.in_channels = j.at("in_channels").get<int>();
  n.conv.out_channels = j.at("out_channels").get<int>();
  n.conv.kernel = j.at("kernel").get<int>();
  n.conv.grid = j.at("grid").get<int>();
  n.out_len = j.at("out_len").get<int>();
  const auto heads = j.at("heads").get<std::size_t>();
  if (n.conv.dim < 1 || n.conv.dim > 3 || n.conv.kernel < 1 || n.conv.grid < n.conv.kernel || n.out_len < 1 ||
      n.conv.in_channels < 1 || n.conv.out_channels < 1 || heads < 1)
    throw IntegrityError("checkpoint: invalid network shape in header");
  n.heads.resize(heads);
  return n;
}

// Blob order per network: kernel, bias, [in_scale, out_scale...], heads.
void put_blob(Writer& w, const std::vector<double>& v) {
  w.put<std::uint64_t>(v.size());
  w.put_doubles(v);
}

void get_blob(Reader& r, std::vector<double>& v, std::size_t expected) {
  const auto n = r.get<std::uint64_t>();
  if (n != expected) throw IntegrityError("checkpoint: blob length does not match header shape");
  r.get_doubles(v, expected);
}

void put_net(Writer& w, const ConvNet& n) {
  put_blob(w, n.kernel);
  put_blob(w, n.bias);
  std::vector<double> scales{n.in_scale};
  scales.insert(scales.end(), n.out_scale.begin(), n.out_scale.end());
  put_blob(w, scales);
  for (const auto& h : n.heads) put_blob(w, h);
}

void get_net(Reader& r, ConvNet& n) {
  get_blob(r, n.kernel, n.conv.kernel_len());
  get_blob(r, n.bias, static_cast<std::size_t>(n.conv.out_channels));
  std::vector<double> scales;
  get_blob(r, scales, n.heads.size() + 1);
  n.in_scale = scales[0];
  n.out_scale.assign(scales.begin() + 1, scales.end());
  for (auto& h : n.heads) get_blob(r, h, n.head_len());
}

}  // namespace

// ---------------------------------------------------------------------------
// configuration
// ---------------------------------------------------------------------------

std::map<std::string, std::string> parse_config_text(const std::string& text, const std::string& origin) {
  std::map<std::string, std::string> kv;
  std::stringstream ss(text);
  std::string line;
  int no = 0;
  while (std::getline(ss, line)) {
    ++no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = origin + ":" + std::to_string(no);
    if (eq == std::string::npos) throw ConfigError(where + ": expected key=value");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (!valid_key(key)) throw ConfigError(where + ": invalid key '" + key + "'");
    if (!kv.emplace(key, value).second) throw ConfigError(where + ": duplicate key '" + key + "'");
  }
  return kv;
}

std::map<std::string, std::string> parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.string());
}

const std::string* ConfigReader::take(const std::string& key) {
  auto it = kv_.find(key);
  if (it == kv_.end()) return nullptr;
  used_.insert(key);
  return &it->second;
}

void ConfigReader::get(const std::string& key, int& v) {
  if (const auto* s = take(key)) v = parse_number<int>(key, *s);
}

void ConfigReader::get(const std::string& key, std::uint64_t& v) {
  if (const auto* s = take(key)) v = parse_number<std::uint64_t>(key, *s);
}

void ConfigReader::get(const std::string& key, double& v) {
  if (const auto* s = take(key)) v = parse_number<double>(key, *s);
}

void ConfigReader::get(const std::string& key, bool& v) {
  const auto* s = take(key);
  if (!s) return;
  if (*s == "true" || *s == "1" || *s == "yes") {
    v = true;
  } else if (*s == "false" || *s == "0" || *s == "no") {
    v = false;
  } else {
    throw ConfigError("config: key '" + key + "' expects a boolean, got '" + *s + "'");
  }
}

void ConfigReader::get(const std::string& key, std::string& v) {
  if (const auto* s = take(key)) v = *s;
}

void ConfigReader::get(const std::string& key, std::vector<int>& v) {
  const auto* s = take(key);
  if (!s) return;
  v.clear();
  for (const auto& item : split_list(*s)) v.push_back(parse_number<int>(key, item));
}

void ConfigReader::get(const std::string& key, std::vector<double>& v) {
  const auto* s = take(key);
  if (!s) return;
  v.clear();
  for (const auto& item : split_list(*s)) v.push_back(parse_number<double>(key, item));
}

void ConfigReader::finish() const {
  for (const auto& [k, _] : kv_)
    if (!used_.count(k)) throw ConfigError("unknown config key '" + k + "'");
}

// ---------------------------------------------------------------------------
// field files
// ---------------------------------------------------------------------------

std::size_t FieldFile::expected_length() const {
  std::size_t n = components * (complex ? 2u : 1u);
  for (auto s : sizes) n *= s;
  return n;
}

void write_field(const std::filesystem::path& path, const FieldFile& f) {
  require(f.kinds.size() == f.sizes.size() && !f.sizes.empty(), "write_field: axis metadata mismatch");
  require(f.payload.size() == f.expected_length(), "write_field: payload length mismatch");
  Writer w;
  w.put_bytes(kFieldMagic, 4);
  w.put<std::uint32_t>(kFieldVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(f.sizes.size()));
  for (auto k : f.kinds) w.put<std::uint32_t>(static_cast<std::uint32_t>(k));
  for (auto s : f.sizes) w.put<std::uint32_t>(s);
  w.put<std::uint32_t>(f.components);
  w.put<std::uint32_t>(f.complex ? 1u : 0u);
  w.put<double>(f.time);
  w.put_doubles(f.payload);
  write_bytes(path, w.buf);
}

FieldFile read_field(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  const std::string what = "field file '" + path.string() + "'";
  Reader r(bytes, bytes.size(), what);
  check_magic(r, kFieldMagic, what);
  if (r.get<std::uint32_t>() != kFieldVersion) throw IntegrityError(what + ": unsupported version");
  const auto dim = r.get<std::uint32_t>();
  if (dim < 1 || dim > 3) throw IntegrityError(what + ": invalid dimension");
  FieldFile f;
  for (std::uint32_t i = 0; i < dim; ++i) {
    const auto k = r.get<std::uint32_t>();
    if (k > static_cast<std::uint32_t>(BasisKind::NodalUniform)) throw IntegrityError(what + ": unknown basis kind");
    f.kinds.push_back(static_cast<BasisKind>(k));
  }
  for (std::uint32_t i = 0; i < dim; ++i) f.sizes.push_back(r.get<std::uint32_t>());
  f.components = r.get<std::uint32_t>();
  const auto cflag = r.get<std::uint32_t>();
  if (cflag > 1) throw IntegrityError(what + ": invalid complex flag");
  f.complex = cflag == 1;
  f.time = r.get<double>();
  const std::size_t n = f.expected_length();
  if (r.remaining() != n * sizeof(double)) throw IntegrityError(what + ": payload length does not match header");
  r.get_doubles(f.payload, n);
  return f;
}

FieldFile make_field(const Discretization& space, Role r, const Components& c, double time) {
  FieldFile f;
  const BasisSpec b = space.basis(r);
  f.kinds.assign(static_cast<std::size_t>(space.dim()), b.kind);
  f.sizes.assign(static_cast<std::size_t>(space.dim()), static_cast<std::uint32_t>(b.n_modes));
  f.complex = b.kind == BasisKind::Fourier;
  f.components = static_cast<std::uint32_t>(c.size());
  f.time = time;
  for (const auto& comp : c) {
    require(comp.size() == space.coeff_count(r), "make_field: component length mismatch");
    f.payload.insert(f.payload.end(), comp.begin(), comp.end());
  }
  require(f.payload.size() == f.expected_length(), "make_field: layout mismatch");
  return f;
}

// ---------------------------------------------------------------------------
// checkpoints
// ---------------------------------------------------------------------------

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t n, std::uint64_t h) {
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  const TrainedModel& m = c.model;
  nlohmann::json header;
  header["meta"] = c.metadata.empty() ? nlohmann::json::object() : nlohmann::json::parse(c.metadata);
  header["prng"] = kPrngName;
  header["arch"] = {{"u_filters", m.arch.u_filters},
                    {"u_kernel", m.arch.u_kernel},
                    {"phi_filters", m.arch.phi_filters},
                    {"phi_kernel", m.arch.phi_kernel}};
  header["block_size"] = m.block_size;
  header["share_phi_conv"] = m.share_phi_conv;
  header["steps"] = m.steps;
  header["u_blocks"] = nlohmann::json::array();
  for (const auto& n : m.u_blocks) header["u_blocks"].push_back(net_shape(n));
  header["phi_nets"] = nlohmann::json::array();
  for (const auto& n : m.phi_nets) header["phi_nets"].push_back(net_shape(n));
  const std::string text = header.dump();

  Writer w;
  w.put_bytes(kCheckpointMagic, 4);
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint64_t>(text.size());
  w.put_bytes(text.data(), text.size());
  for (const auto& n : m.u_blocks) put_net(w, n);
  for (const auto& n : m.phi_nets) put_net(w, n);
  w.put<std::uint64_t>(fnv1a64(w.buf.data(), w.buf.size()));
  write_bytes(path, w.buf);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  const std::string what = "checkpoint '" + path.string() + "'";
  if (bytes.size() < 24) throw IntegrityError(what + ": truncated");
  const std::size_t body = bytes.size() - 8;
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + body, 8);
  Reader r(bytes, body, what);
  check_magic(r, kCheckpointMagic, what);
  if (r.get<std::uint32_t>() != kCheckpointVersion) throw IntegrityError(what + ": unsupported version");
  if (stored != fnv1a64(bytes.data(), body)) throw IntegrityError(what + ": checksum mismatch");
  const auto len = r.get<std::uint64_t>();
  if (len > r.remaining()) throw IntegrityError(what + ": truncated header");

  Checkpoint c;
  TrainedModel& m = c.model;
  try {
    const auto header = nlohmann::json::parse(r.get_string(len));
    c.metadata = header.at("meta").dump();
    const auto& a = header.at("arch");
    m.arch = {a.at("u_filters").get<int>(), a.at("u_kernel").get<int>(), a.at("phi_filters").get<int>(),
              a.at("phi_kernel").get<int>()};
    m.block_size = header.at("block_size").get<int>();
    m.share_phi_conv = header.at("share_phi_conv").get<bool>();
    m.steps = header.at("steps").get<int>();
    for (const auto& j : header.at("u_blocks")) m.u_blocks.push_back(net_from_shape(j));
    for (const auto& j : header.at("phi_nets")) m.phi_nets.push_back(net_from_shape(j));
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(what + ": malformed header (" + e.what() + ")");
  }
  if (m.block_size < 1 || m.steps < 0 || m.blocks() != (m.steps + m.block_size - 1) / m.block_size ||
      m.phi_nets.size() != static_cast<std::size_t>(m.share_phi_conv ? m.blocks() : m.steps))
    throw IntegrityError(what + ": inconsistent model layout");
  for (auto& n : m.u_blocks) get_net(r, n);
  for (auto& n : m.phi_nets) get_net(r, n);
  if (r.remaining() != 0) throw IntegrityError(what + ": trailing data");
  return c;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : columns_(header.size()) {
  f_ = std::fopen(path.string().c_str(), "wb");
  if (!f_) throw ConfigError("cannot write '" + path.string() + "'");
  row(header);
}

CsvWriter::~CsvWriter() {
  if (f_) std::fclose(f_);
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  require(cells.size() == columns_, "CsvWriter: column count mismatch");
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) line += ',';
    line += cells[i];
  }
  line += '\n';
  std::fwrite(line.data(), 1, line.size(), f_);
}

}  // namespace speconet
