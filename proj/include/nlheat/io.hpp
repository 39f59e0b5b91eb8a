#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "nlheat/convolution.hpp"
#include "nlheat/error.hpp"
#include "nlheat/grid.hpp"

namespace nlheat {

// nlohmann::json keeps object keys in a std::map, so dumps have sorted keys.
using Json = nlohmann::json;

inline constexpr const char* kToolVersion = "0.1.0";

/// JSON number, or null for a non-finite value (JSON has no inf/nan).
inline Json json_number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidArgument("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw InvalidArgument("write failed for " + path.string());
}

inline void write_json(const std::filesystem::path& path, const Json& j) {
  write_text(path, j.dump(2) + "\n");
}

/// 64-bit FNV-1a, hex encoded.
inline std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string file_hash(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidArgument("cannot open " + path.string());
  const std::string data{std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
  return fnv1a_hex(data);
}

/// One CSV per iterate (jstar_<n>.csv) plus index.json; returns the file names written.
inline std::vector<std::string> dump_iterates(const IteratedConvolutions& its,
                                              const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> files;
  Json index = Json::array();
  for (int n = 0; n <= its.n_max(); ++n) {
    const std::string name = "jstar_" + std::to_string(n) + ".csv";
    write_csv((dir / name).string(), its[static_cast<std::size_t>(n)]);
    files.push_back(name);
    index.push_back({{"n", n},
                     {"mass", its.masses[static_cast<std::size_t>(n)]},
                     {"support_radius", its.support_radii[static_cast<std::size_t>(n)]},
                     {"file", name}});
  }
  write_json(dir / "index.json", index);
  files.push_back("index.json");
  return files;
}

/// Run record written after every other output of a run.
class RunManifest {
 public:
  RunManifest(std::string subcommand, std::filesystem::path out_dir)
      : subcommand_(std::move(subcommand)),
        out_dir_(std::move(out_dir)),
        start_(std::chrono::steady_clock::now()),
        started_at_(std::time(nullptr)) {}

  const std::filesystem::path& out_dir() const noexcept { return out_dir_; }
  Json& config() noexcept { return config_; }

  void add_input(const std::string& path) { inputs_[path] = file_hash(path); }
  void add_output(const std::string& name) { outputs_.push_back(name); }
  void warn(const std::string& message) { warnings_.push_back(message); }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

  /// Writes a file into the output directory and records it.
  void write_output_json(const std::string& name, const Json& j) {
    write_json(out_dir_ / name, j);
    add_output(name);
  }
  void write_output_text(const std::string& name, const std::string& text) {
    write_text(out_dir_ / name, text);
    add_output(name);
  }

  void finish(int exit_code = 0) const {
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    char stamp[32];
    std::tm tm{};
    gmtime_r(&started_at_, &tm);
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
    Json m;
    m["tool_version"] = kToolVersion;
    m["subcommand"] = subcommand_;
    m["config"] = config_;
    m["inputs"] = inputs_;
    m["outputs"] = outputs_;
    m["warnings"] = warnings_;
    m["exit_code"] = exit_code;
    m["timestamp"] = {{"started_at", stamp}, {"wall_clock_seconds", secs}};
    write_json(out_dir_ / "manifest.json", m);
  }

 private:
  std::string subcommand_;
  std::filesystem::path out_dir_;
  std::chrono::steady_clock::time_point start_;
  std::time_t started_at_;
  Json config_ = Json::object();
  std::map<std::string, std::string> inputs_;
  std::vector<std::string> outputs_;
  std::vector<std::string> warnings_;
};

}  // namespace nlheat
