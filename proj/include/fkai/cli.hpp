#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fkai/io.hpp"

namespace fkai::cli {

inline constexpr const char* tool_version = "0.1.0";

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int usage = 1;
inline constexpr int certification = 2;
inline constexpr int nonconvergence = 3;
inline constexpr int domain = 4;
inline constexpr int hyperbolicity = 5;
} // namespace exit_code

/// Malformed or inconsistent experiment configuration.
class ConfigError : public Error
{
public:
  using Error::Error;
};

struct ExperimentConfig
{
  Potential<double> potential;
  Interaction<double> interaction = Interaction<double>::generating_nn(Coupling<double>::quadratic());
  AubryOptions<double> aubry;
  bool has_search_window = false;
  std::optional<std::filesystem::path> certificate_path;

  std::vector<double> lambdas;
  std::vector<Vector<double>> rhos;
  Vector<double> anchor_offset;
  Index half_width = 64;
  double tol = 1e-10;
  Index max_iter = 10000;
  double inner_tol = 1e-12;

  Index horizon = 20;
  Index samples = 256;
  std::optional<std::filesystem::path> solution_path;

  std::filesystem::path output = "out";
  std::uint64_t seed = 0;

  /// Every field with defaults filled in; embedded in reports and hashed.
  io::json resolved() const;
};

/// Strict parse: unknown keys are rejected.
ExperimentConfig parse_config(const io::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// FNV-1a over the compact dump of the resolved config.
std::uint64_t config_hash(const ExperimentConfig& config);

struct RunOptions
{
  std::optional<std::filesystem::path> out;
  unsigned workers = 1;
  std::optional<std::uint64_t> seed;
};

int cmd_certify(const ExperimentConfig& config, std::ostream& log);
int cmd_solve(const ExperimentConfig& config, std::ostream& log);
int cmd_hyperbolicity(const ExperimentConfig& config, std::ostream& log);
int cmd_sweep(const ExperimentConfig& config, unsigned workers, std::ostream& log);

/// Loads the config, applies overrides and dispatches; never throws.
int run(const std::string& command, const std::filesystem::path& config_path, const RunOptions& options,
        std::ostream& log, std::ostream& err);

} // namespace fkai::cli
