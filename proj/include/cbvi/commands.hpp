#pragma once

#include <filesystem>
#include <optional>
#include <ostream>

namespace cbvi {

/// Process exit codes of the batch driver.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,     // parse, validation, usage or compatibility error
  kExitNumerical = 3,  // integrator or solver failure
};

/// Runs the configured integrator; writes trajectory.csv and summary.txt to the output
/// directory and echoes the summary to out.
int cmd_run(const std::filesystem::path& config, std::ostream& out, std::ostream& err);

/// Convergence study; writes convergence.csv. levels overrides converge.levels.
int cmd_converge(const std::filesystem::path& config, std::optional<int> levels, std::ostream& out,
                 std::ostream& err);

/// PASS/FAIL line per hypothesis plus the model constants. Failed hypotheses are
/// report lines, not errors.
int cmd_validate(const std::filesystem::path& config, std::ostream& out, std::ostream& err);

int cmd_mesh_info(const std::filesystem::path& mesh, std::ostream& out, std::ostream& err);

}  // namespace cbvi
