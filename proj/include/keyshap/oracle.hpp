#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "keyshap/matrix.hpp"
#include "keyshap/skeleton.hpp"

namespace keyshap {

inline constexpr std::size_t kMaxKeypoints = 64;

// Visible-keypoint subset over a fixed schema width. Bit i set = keypoint i
// is left unperturbed.
class Coalition {
 public:
  Coalition(std::size_t width, std::uint64_t bits);

  static Coalition full(std::size_t width);
  static Coalition empty(std::size_t width) { return Coalition(width, 0); }
  static Coalition from_indices(std::size_t width, std::span<const std::size_t> visible);

  std::size_t width() const noexcept { return width_; }
  std::uint64_t bits() const noexcept { return bits_; }
  bool contains(std::size_t i) const noexcept { return (bits_ >> i) & 1U; }
  std::size_t count() const noexcept;
  std::vector<std::size_t> indices() const;

  Coalition with(std::size_t i) const { return {width_, bits_ | (std::uint64_t{1} << i)}; }
  Coalition without(std::size_t i) const { return {width_, bits_ & ~(std::uint64_t{1} << i)}; }

  // Lower-case hex with 0x prefix, e.g. "0x1ffff".
  std::string hex() const;
  static Coalition parse_hex(std::string_view text, std::size_t width);

  friend bool operator==(const Coalition&, const Coalition&) = default;
  friend auto operator<=>(const Coalition&, const Coalition&) = default;

 private:
  std::size_t width_;
  std::uint64_t bits_;
};

std::uint64_t full_mask(std::size_t width) noexcept;

// Instances an evaluation averages over. The single id "all" stands for the
// evaluator's whole dataset.
struct InstanceSet {
  std::vector<std::string> ids;

  static InstanceSet all() { return {{"all"}}; }
  bool is_all() const noexcept { return ids.size() == 1 && ids[0] == "all"; }
  std::uint64_t key() const noexcept;
};

// Per-keypoint performance in [0, 1].
using PerfVector = std::vector<double>;

// Black-box coalition value function v(instances, visible set, trial) -> per
// keypoint performance. Implementations must be safe for concurrent eval()
// and deterministic in their arguments.
class CoalitionValueOracle {
 public:
  virtual ~CoalitionValueOracle() = default;

  virtual const KeypointSchema& schema() const = 0;
  virtual std::string identity() const = 0;

  std::size_t size() const { return schema().size(); }

  // Checks the coalition width and the returned vector (length n, finite, in [0,1]).
  PerfVector eval(const InstanceSet& instances, const Coalition& coalition,
                  std::uint64_t trial) const;

 protected:
  virtual PerfVector do_eval(const InstanceSet& instances, const Coalition& coalition,
                             std::uint64_t trial) const = 0;
};

// Exact lookup table keyed by coalition bitmask; ignores instances and trial.
class TabularOracle final : public CoalitionValueOracle {
 public:
  TabularOracle(KeypointSchema schema, std::map<std::uint64_t, PerfVector> table,
                std::string source = "inline");

  const KeypointSchema& schema() const override { return schema_; }
  std::string identity() const override;
  const std::map<std::uint64_t, PerfVector>& table() const noexcept { return table_; }

 protected:
  PerfVector do_eval(const InstanceSet&, const Coalition& coalition, std::uint64_t) const override;

 private:
  KeypointSchema schema_;
  std::map<std::uint64_t, PerfVector> table_;
  std::string source_;
};

// CSV "coalition_hex,v_0,...,v_{n-1}"; must contain the full coalition.
TabularOracle parse_tabular_oracle(std::string_view csv, const KeypointSchema& schema,
                                   std::string source = "inline");
TabularOracle load_tabular_oracle(const std::filesystem::path& path, const KeypointSchema& schema);
std::string write_tabular_oracle(const TabularOracle& oracle);

struct SyntheticModelConfig {
  std::vector<double> base;  // b_i in (0, 1]
  SquareMatrix recovery;     // w_ij >= 0, zero diagonal, rows sum to <= 1
  double noise_sd = 0.0;
  std::uint64_t seed = 0;

  void validate(std::size_t n) const;
  std::string to_json() const;
  static SyntheticModelConfig from_json(std::string_view text);
};

// values[i] = clamp(b_i [i in S] + b_i sum_{j in S} w_ij [i not in S] + eps, 0, 1)
// with eps ~ N(0, noise_sd^2) drawn from a counter-based stream keyed on
// (seed, instance, coalition, trial, i). Multi-instance sets average per-id values.
class SyntheticOracle final : public CoalitionValueOracle {
 public:
  SyntheticOracle(SyntheticModelConfig config, KeypointSchema schema);

  const KeypointSchema& schema() const override { return schema_; }
  std::string identity() const override;
  const SyntheticModelConfig& config() const noexcept { return config_; }

 protected:
  PerfVector do_eval(const InstanceSet& instances, const Coalition& coalition,
                     std::uint64_t trial) const override;

 private:
  SyntheticModelConfig config_;
  KeypointSchema schema_;
};

std::unique_ptr<SyntheticOracle> make_synthetic_oracle(SyntheticModelConfig config,
                                                       KeypointSchema schema);

// Child process speaking line-delimited JSON on stdin/stdout:
//   <- {"op":"hello","n":17,"names":[...]}            (first line, checked against the schema)
//   -> {"op":"eval","instances":[...],"visible":[...],"trial":0}
//   <- {"values":[...]}  or  {"error":"..."}
// Requests are serialized over the pipe.
class ExternalOracle final : public CoalitionValueOracle {
 public:
  ExternalOracle(std::string command, KeypointSchema schema, int timeout_ms = 30000);
  ~ExternalOracle() override;
  ExternalOracle(const ExternalOracle&) = delete;
  ExternalOracle& operator=(const ExternalOracle&) = delete;

  const KeypointSchema& schema() const override { return schema_; }
  std::string identity() const override;

 protected:
  PerfVector do_eval(const InstanceSet& instances, const Coalition& coalition,
                     std::uint64_t trial) const override;

 private:
  void shutdown() noexcept;
  std::string read_line() const;
  void write_line(const std::string& line) const;

  std::string command_;
  KeypointSchema schema_;
  int timeout_ms_;
  int fd_ = -1;
  int pid_ = -1;
  mutable std::string buffer_;
  mutable std::mutex mutex_;
};

// Runs the server half of the external protocol over the given streams until EOF.
void serve_oracle(const CoalitionValueOracle& oracle, std::istream& in, std::ostream& out);

// Pass-through wrapper that records every query.
class CountingOracle final : public CoalitionValueOracle {
 public:
  explicit CountingOracle(const CoalitionValueOracle& inner) : inner_(inner) {}

  const KeypointSchema& schema() const override { return inner_.schema(); }
  std::string identity() const override { return inner_.identity(); }

  std::size_t calls() const noexcept { return calls_.load(); }
  std::size_t distinct_coalitions() const;
  // Number of calls per (coalition, trial).
  std::map<std::pair<std::uint64_t, std::uint64_t>, std::size_t> histogram() const;
  void reset();

 protected:
  PerfVector do_eval(const InstanceSet& instances, const Coalition& coalition,
                     std::uint64_t trial) const override;

 private:
  const CoalitionValueOracle& inner_;
  mutable std::atomic<std::size_t> calls_{0};
  mutable std::mutex mutex_;
  mutable std::map<std::pair<std::uint64_t, std::uint64_t>, std::size_t> seen_;
};

}  // namespace keyshap
