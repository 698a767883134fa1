#pragma once

// Command execution with persisted, auditable outputs. Every command writes its
// files atomically into the output directory and finishes with a manifest
// "<command>.manifest.json" listing each file and its SHA-256 digest.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "molwg/config.hpp"

namespace molwg::cli {

/// A sub-module failure, prefixed with the command and operation it came from.
class CommandError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OutputRecord {
  std::string path;    ///< relative to the output directory
  std::string sha256;  ///< lowercase hex
};

struct RunManifest {
  std::string command;
  std::string config_digest;
  std::map<std::string, std::uint64_t> seeds;
  std::string tool_version;
  std::string timestamp;  ///< UTC, ISO 8601
  std::vector<OutputRecord> outputs;

  std::string to_json() const;
  static RunManifest from_json(const std::string& text);
};

struct RunOptions {
  std::string out_dir;  ///< overrides the config's output directory when non-empty
  std::map<std::string, std::uint64_t> seed_overrides;
  unsigned threads = 1;
};

const std::vector<std::string>& commands();
std::string tool_version();

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::string& path);

/// Runs one of commands(). Warnings are appended to `warnings` when given.
/// Throws CommandError on failure; nothing is left half-written.
RunManifest run_command(const std::string& command, const config::ExperimentConfig& cfg,
                        const RunOptions& opt, std::vector<std::string>* warnings = nullptr);

struct AuditReport {
  std::size_t manifests = 0;
  std::size_t outputs = 0;
  std::vector<std::string> problems;  ///< orphans, missing files, digest mismatches, duplicates

  bool ok() const { return problems.empty(); }
};

/// Cross-checks every manifest in `dir` against the files present.
AuditReport audit(const std::string& dir);

}  // namespace molwg::cli
