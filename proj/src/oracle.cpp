#include "keyshap/oracle.hpp"

#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <bit>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "keyshap/error.hpp"
#include "keyshap/io.hpp"
#include "keyshap/rng.hpp"

namespace keyshap {

using nlohmann::json;
using nlohmann::ordered_json;

std::uint64_t full_mask(std::size_t width) noexcept {
  return width >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << width) - 1;
}

Coalition::Coalition(std::size_t width, std::uint64_t bits) : width_(width), bits_(bits) {
  if (width == 0 || width > kMaxKeypoints)
    throw Error(ErrorKind::kOutOfRange, "coalition width " + std::to_string(width) +
                                            " outside 1.." + std::to_string(kMaxKeypoints));
  if (bits & ~full_mask(width))
    throw Error(ErrorKind::kSchemaMismatch, "coalition bits exceed width " + std::to_string(width));
}

Coalition Coalition::full(std::size_t width) { return {width, full_mask(width)}; }

Coalition Coalition::from_indices(std::size_t width, std::span<const std::size_t> visible) {
  std::uint64_t bits = 0;
  for (std::size_t i : visible) {
    if (i >= width)
      throw Error(ErrorKind::kSchemaMismatch,
                  "keypoint index " + std::to_string(i) + " outside width " + std::to_string(width));
    bits |= std::uint64_t{1} << i;
  }
  return {width, bits};
}

std::size_t Coalition::count() const noexcept { return static_cast<std::size_t>(std::popcount(bits_)); }

std::vector<std::size_t> Coalition::indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < width_; ++i)
    if (contains(i)) out.push_back(i);
  return out;
}

std::string Coalition::hex() const {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(bits_));
  return buf;
}

Coalition Coalition::parse_hex(std::string_view text, std::size_t width) {
  std::string_view t = text;
  while (!t.empty() && t.front() == ' ') t.remove_prefix(1);
  while (!t.empty() && t.back() == ' ') t.remove_suffix(1);
  if (t.starts_with("0x") || t.starts_with("0X")) t.remove_prefix(2);
  if (t.empty() || t.size() > 16)
    throw Error(ErrorKind::kMalformedInput, "bad coalition hex '" + std::string(text) + "'");
  std::uint64_t bits = 0;
  for (char c : t) {
    int d = 0;
    if (c >= '0' && c <= '9') d = c - '0';
    else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
    else if (c >= 'A' && c <= 'F') d = c - 'A' + 10;
    else throw Error(ErrorKind::kMalformedInput, "bad coalition hex '" + std::string(text) + "'");
    bits = (bits << 4) | static_cast<std::uint64_t>(d);
  }
  if (bits & ~full_mask(width))
    throw Error(ErrorKind::kMalformedInput,
                "coalition " + std::string(text) + " exceeds width " + std::to_string(width));
  return {width, bits};
}

std::uint64_t InstanceSet::key() const noexcept {
  std::uint64_t h = 0x5851F42D4C957F2DULL;
  for (const auto& id : ids) h = mix_key(h, {fnv1a64(id)});
  return h;
}

PerfVector CoalitionValueOracle::eval(const InstanceSet& instances, const Coalition& coalition,
                                      std::uint64_t trial) const {
  if (coalition.width() != size())
    throw Error(ErrorKind::kSchemaMismatch, "coalition width " + std::to_string(coalition.width()) +
                                                " != oracle schema size " + std::to_string(size()));
  if (instances.ids.empty()) throw Error(ErrorKind::kConfig, "instance set is empty");
  PerfVector v = do_eval(instances, coalition, trial);
  if (v.size() != size())
    throw Error(ErrorKind::kOracleIo, "oracle returned " + std::to_string(v.size()) +
                                          " values, expected " + std::to_string(size()));
  for (double x : v)
    if (!std::isfinite(x) || x < 0.0 || x > 1.0)
      throw Error(ErrorKind::kOracleIo, "oracle value " + format_number(x) + " outside [0, 1]");
  return v;
}

// ---------------------------------------------------------------------------
// Tabular

TabularOracle::TabularOracle(KeypointSchema schema, std::map<std::uint64_t, PerfVector> table,
                             std::string source)
    : schema_(std::move(schema)), table_(std::move(table)), source_(std::move(source)) {
  const auto n = schema_.size();
  if (!table_.contains(full_mask(n)))
    throw Error(ErrorKind::kMalformedInput, "tabular oracle lacks the full coalition " +
                                                Coalition::full(n).hex());
  for (const auto& [bits, values] : table_) {
    if (values.size() != n)
      throw Error(ErrorKind::kMalformedInput, "tabular row " + Coalition(n, bits).hex() + " has " +
                                                  std::to_string(values.size()) + " values");
    for (double v : values)
      if (!(v >= 0.0 && v <= 1.0))
        throw Error(ErrorKind::kMalformedInput,
                    "tabular value " + format_number(v) + " outside [0, 1] at " + Coalition(n, bits).hex());
  }
}

std::string TabularOracle::identity() const {
  return "tabular:" + source_ + ":" + std::to_string(table_.size()) + "-rows";
}

PerfVector TabularOracle::do_eval(const InstanceSet&, const Coalition& coalition,
                                  std::uint64_t) const {
  const auto it = table_.find(coalition.bits());
  if (it == table_.end())
    throw Error(ErrorKind::kMissingCoalition, "no tabulated value for coalition " + coalition.hex(),
                coalition.hex());
  return it->second;
}

TabularOracle parse_tabular_oracle(std::string_view csv, const KeypointSchema& schema,
                                   std::string source) {
  const auto rows = parse_csv(csv);
  const auto n = schema.size();
  if (rows.empty()) throw Error(ErrorKind::kMalformedInput, "empty tabular oracle file");
  std::size_t first = 0;
  if (!rows[0].empty() && rows[0][0] == "coalition_hex") {
    if (rows[0].size() != n + 1)
      throw Error(ErrorKind::kSchemaMismatch, "tabular header has " +
                                                 std::to_string(rows[0].size() - 1) +
                                                 " value columns, schema has " + std::to_string(n));
    first = 1;
  }
  std::map<std::uint64_t, PerfVector> table;
  for (std::size_t r = first; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != n + 1)
      throw Error(ErrorKind::kMalformedInput,
                  "tabular row " + std::to_string(r + 1) + " has " + std::to_string(row.size()) +
                      " fields, expected " + std::to_string(n + 1));
    const auto c = Coalition::parse_hex(row[0], n);
    PerfVector values(n);
    for (std::size_t i = 0; i < n; ++i) values[i] = parse_double(row[i + 1], "tabular oracle");
    if (!table.emplace(c.bits(), std::move(values)).second)
      throw Error(ErrorKind::kMalformedInput, "duplicate tabular row " + c.hex());
  }
  return TabularOracle(schema, std::move(table), std::move(source));
}

TabularOracle load_tabular_oracle(const std::filesystem::path& path, const KeypointSchema& schema) {
  return parse_tabular_oracle(read_text_file(path), schema, path.filename().string());
}

std::string write_tabular_oracle(const TabularOracle& oracle) {
  const auto n = oracle.size();
  std::string out = "coalition_hex";
  for (std::size_t i = 0; i < n; ++i) out += ",v_" + std::to_string(i);
  out += "\n";
  for (const auto& [bits, values] : oracle.table()) {
    out += Coalition(n, bits).hex();
    for (double v : values) out += "," + format_number(v);
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic

void SyntheticModelConfig::validate(std::size_t n) const {
  if (base.size() != n || recovery.size() != n)
    throw Error(ErrorKind::kConfig, "synthetic config sized for " + std::to_string(base.size()) +
                                        " keypoints, schema has " + std::to_string(n));
  if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd))
    throw Error(ErrorKind::kConfig, "noise_sd must be >= 0");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(base[i] > 0.0 && base[i] <= 1.0))
      throw Error(ErrorKind::kConfig, "base[" + std::to_string(i) + "] outside (0, 1]");
    if (recovery(i, i) != 0.0)
      throw Error(ErrorKind::kConfig, "recovery diagonal must be 0 at " + std::to_string(i));
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (!(recovery(i, j) >= 0.0) || !std::isfinite(recovery(i, j)))
        throw Error(ErrorKind::kConfig, "recovery weights must be finite and >= 0");
      sum += recovery(i, j);
    }
    if (sum > 1.0 + 1e-12)
      throw Error(ErrorKind::kConfig, "recovery row " + std::to_string(i) + " sums to " +
                                          format_number(sum) + " > 1");
  }
}

std::string SyntheticModelConfig::to_json() const {
  ordered_json doc;
  doc["base"] = base;
  doc["recovery"] = ordered_json::array();
  for (std::size_t i = 0; i < recovery.size(); ++i) {
    const auto r = recovery.row(i);
    doc["recovery"].push_back(std::vector<double>(r.begin(), r.end()));
  }
  doc["noise_sd"] = noise_sd;
  doc["seed"] = seed;
  return doc.dump(2) + "\n";
}

SyntheticModelConfig SyntheticModelConfig::from_json(std::string_view text) {
  try {
    const auto doc = json::parse(text);
    SyntheticModelConfig cfg;
    cfg.base = doc.at("base").get<std::vector<double>>();
    const auto rows = doc.at("recovery").get<std::vector<std::vector<double>>>();
    cfg.recovery = SquareMatrix(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows.size())
        throw Error(ErrorKind::kConfig, "recovery matrix must be square");
      for (std::size_t j = 0; j < rows.size(); ++j) cfg.recovery(i, j) = rows[i][j];
    }
    cfg.noise_sd = doc.value("noise_sd", 0.0);
    cfg.seed = doc.value("seed", std::uint64_t{0});
    return cfg;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kConfig, std::string("bad synthetic config: ") + e.what());
  }
}

SyntheticOracle::SyntheticOracle(SyntheticModelConfig config, KeypointSchema schema)
    : config_(std::move(config)), schema_(std::move(schema)) {
  config_.validate(schema_.size());
}

std::string SyntheticOracle::identity() const {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(config_.to_json())));
  return std::string("synthetic:") + buf;
}

PerfVector SyntheticOracle::do_eval(const InstanceSet& instances, const Coalition& coalition,
                                    std::uint64_t trial) const {
  const auto n = schema_.size();
  PerfVector mean(n, 0.0);
  for (const auto& id : instances.ids) {
    const std::uint64_t instance_key = fnv1a64(id);
    for (std::size_t i = 0; i < n; ++i) {
      double v = 0.0;
      if (coalition.contains(i)) {
        v = config_.base[i];
      } else {
        double recovered = 0.0;
        for (std::size_t j = 0; j < n; ++j)
          if (coalition.contains(j)) recovered += config_.recovery(i, j);
        v = config_.base[i] * recovered;
      }
      if (config_.noise_sd > 0.0) {
        CounterRng rng(mix_key(config_.seed, {instance_key, coalition.bits(), trial, i}));
        v += config_.noise_sd * rng.normal();
      }
      mean[i] += std::clamp(v, 0.0, 1.0);
    }
  }
  for (auto& v : mean) v /= static_cast<double>(instances.ids.size());
  return mean;
}

std::unique_ptr<SyntheticOracle> make_synthetic_oracle(SyntheticModelConfig config,
                                                       KeypointSchema schema) {
  return std::make_unique<SyntheticOracle>(std::move(config), std::move(schema));
}

// ---------------------------------------------------------------------------
// External process

ExternalOracle::ExternalOracle(std::string command, KeypointSchema schema, int timeout_ms)
    : command_(std::move(command)), schema_(std::move(schema)), timeout_ms_(timeout_ms) {
  int sv[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0)
    throw Error(ErrorKind::kOracleIo, std::string("socketpair: ") + std::strerror(errno));
  const pid_t pid = ::fork();
  if (pid < 0) {
    ::close(sv[0]);
    ::close(sv[1]);
    throw Error(ErrorKind::kOracleIo, std::string("fork: ") + std::strerror(errno));
  }
  if (pid == 0) {
    ::dup2(sv[1], STDIN_FILENO);
    ::dup2(sv[1], STDOUT_FILENO);
    ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(sv[1]);
  fd_ = sv[0];
  pid_ = pid;

  std::string hello;
  try {
    hello = read_line();
  } catch (...) {
    shutdown();
    throw;
  }
  auto fail = [&](const std::string& why) {
    shutdown();
    throw Error(ErrorKind::kSchemaMismatch, "oracle handshake: " + why, hello);
  };
  json doc;
  try {
    doc = json::parse(hello);
  } catch (const json::exception&) {
    fail("hello line is not JSON");
  }
  if (!doc.is_object() || doc.value("op", "") != "hello") fail("first line is not a hello");
  if (!doc.contains("n") || !doc["n"].is_number_integer() ||
      doc["n"].get<std::size_t>() != schema_.size())
    fail("keypoint count differs from the active schema");
  if (!doc.contains("names") || !doc["names"].is_array() ||
      doc["names"].get<std::vector<std::string>>() != schema_.names())
    fail("keypoint names differ from the active schema");
}

ExternalOracle::~ExternalOracle() { shutdown(); }

void ExternalOracle::shutdown() noexcept {
  if (fd_ >= 0) {
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
    fd_ = -1;
  }
  if (pid_ > 0) {
    int status = 0;
    for (int i = 0; i < 100; ++i) {
      if (::waitpid(pid_, &status, WNOHANG) != 0) {
        pid_ = -1;
        return;
      }
      ::usleep(10000);
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, &status, 0);
    pid_ = -1;
  }
}

std::string ExternalOracle::identity() const { return "external:" + command_; }

std::string ExternalOracle::read_line() const {
  using clock = std::chrono::steady_clock;
  const auto deadline = clock::now() + std::chrono::milliseconds(timeout_ms_);
  for (;;) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now());
    if (left.count() <= 0)
      throw Error(ErrorKind::kOracleIo, "timed out waiting for oracle response", buffer_);
    pollfd p{fd_, POLLIN, 0};
    const int r = ::poll(&p, 1, static_cast<int>(left.count()));
    if (r < 0 && errno == EINTR) continue;
    if (r < 0) throw Error(ErrorKind::kOracleIo, std::string("poll: ") + std::strerror(errno));
    if (r == 0) continue;
    char chunk[4096];
    const ssize_t got = ::read(fd_, chunk, sizeof chunk);
    if (got < 0 && errno == EINTR) continue;
    if (got <= 0) throw Error(ErrorKind::kOracleIo, "oracle process closed its output", buffer_);
    buffer_.append(chunk, static_cast<std::size_t>(got));
  }
}

void ExternalOracle::write_line(const std::string& line) const {
  std::string data = line + "\n";
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t w = ::send(fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (w < 0 && errno == EINTR) continue;
    if (w <= 0) throw Error(ErrorKind::kOracleIo, "failed writing to oracle process", line);
    off += static_cast<std::size_t>(w);
  }
}

PerfVector ExternalOracle::do_eval(const InstanceSet& instances, const Coalition& coalition,
                                   std::uint64_t trial) const {
  ordered_json req;
  req["op"] = "eval";
  req["instances"] = instances.ids;
  req["visible"] = coalition.indices();
  req["trial"] = trial;
  const std::string request = req.dump();

  std::lock_guard lock(mutex_);
  write_line(request);
  const std::string line = read_line();
  json resp;
  try {
    resp = json::parse(line);
  } catch (const json::exception&) {
    throw Error(ErrorKind::kOracleIo, "oracle response is not JSON", line);
  }
  if (resp.is_object() && resp.contains("error"))
    throw Error(ErrorKind::kOracleIo, "oracle reported: " + resp["error"].dump(), line);
  if (!resp.is_object() || !resp.contains("values") || !resp["values"].is_array())
    throw Error(ErrorKind::kOracleIo, "oracle response lacks 'values'", line);
  PerfVector out;
  for (const auto& v : resp["values"]) {
    if (!v.is_number()) throw Error(ErrorKind::kOracleIo, "non-numeric oracle value", line);
    out.push_back(v.get<double>());
  }
  return out;
}

void serve_oracle(const CoalitionValueOracle& oracle, std::istream& in, std::ostream& out) {
  ordered_json hello;
  hello["op"] = "hello";
  hello["n"] = oracle.size();
  hello["names"] = oracle.schema().names();
  out << hello.dump() << "\n" << std::flush;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ordered_json resp;
    try {
      const auto req = json::parse(line);
      if (req.value("op", "") != "eval") throw Error(ErrorKind::kMalformedInput, "unknown op");
      InstanceSet instances{req.at("instances").get<std::vector<std::string>>()};
      const auto visible = req.at("visible").get<std::vector<std::size_t>>();
      const auto trial = req.at("trial").get<std::uint64_t>();
      resp["values"] = oracle.eval(instances, Coalition::from_indices(oracle.size(), visible), trial);
    } catch (const std::exception& e) {
      resp = ordered_json{{"error", e.what()}};
    }
    out << resp.dump() << "\n" << std::flush;
  }
}

// ---------------------------------------------------------------------------
// Counting

PerfVector CountingOracle::do_eval(const InstanceSet& instances, const Coalition& coalition,
                                   std::uint64_t trial) const {
  ++calls_;
  {
    std::lock_guard lock(mutex_);
    ++seen_[{coalition.bits(), trial}];
  }
  return inner_.eval(instances, coalition, trial);
}

std::size_t CountingOracle::distinct_coalitions() const {
  std::lock_guard lock(mutex_);
  std::set<std::uint64_t> bits;
  for (const auto& [key, count] : seen_) bits.insert(key.first);
  return bits.size();
}

std::map<std::pair<std::uint64_t, std::uint64_t>, std::size_t> CountingOracle::histogram() const {
  std::lock_guard lock(mutex_);
  return seen_;
}

void CountingOracle::reset() {
  std::lock_guard lock(mutex_);
  seen_.clear();
  calls_ = 0;
}

}  // namespace keyshap
