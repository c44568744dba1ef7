#pragma once

#include <map>
#include <string>

#include "fracmin/kernel.hpp"
#include "fracmin/quadrature.hpp"

namespace fracmin {

// One experiment invocation: a command name, the ambient fractional
// parameters, quadrature controls, an output destination, and a flat bag of
// command-specific options. Option values stay strings until the command
// handler parses them, so a single config schema covers every command and
// flag overrides are trivial.
//
// Commands: kernel, hs-eval, slab-check, slab-stability, separation-fit,
// toda, cone, variation-oracle. Each documents its options in the tool's
// --help output.
struct ExperimentConfig {
  std::string command;
  FractionalParams params{3, 0.5};
  QuadratureSpec quadrature{};
  std::string output_path;      // empty: print the summary line only
  std::string format = "csv";   // "csv" or "json"
  int threads = 0;              // 0 keeps FRACMIN_THREADS / the auto default
  std::map<std::string, std::string> options;

  // Stable serialization of the experiment identity, hashed into every
  // artifact. threads and output_path are execution details, not identity:
  // results are deterministic for any pool size, so moving the file or
  // resizing the pool must not change the embedded hash.
  std::string canonical() const;

  // Command, format, and thread count sanity. Numerical parameters are
  // checked where they are used and fail as NumericalError, not here.
  void validate() const;
};

// Parses the JSON config document (the same schema the tool's --config flag
// accepts):
//
//   {"command": "kernel", "n": 3, "s": 0.5,
//    "quadrature": {"h": 1e-3, "r_core": 0.1, "r_tail": 1.0, "tol": 1e-8},
//    "output": "out.csv", "format": "csv", "threads": 4,
//    "options": {"resolution": 201, "sigmas": [0.2, 0.1]}}
//
// Every top-level key is optional except command. Option values may be
// strings, numbers, booleans, or arrays of numbers (joined with commas).
// Unknown keys are rejected rather than ignored.
ExperimentConfig parse_config(const std::string& json_text);

// Runs one experiment: computes, writes the artifact atomically when an
// output path is set, prints a one-line summary with the key numbers to
// stdout. Re-running with the same config byte-reproduces the artifact.
// Throws ConfigInvalid for malformed requests and NumericalError subclasses
// when the computation itself fails.
void run(const ExperimentConfig& config);

// run() wrapped in the process exit-code policy: 0 on success, 2 for
// ConfigInvalid, 3 for NumericalError. Failures print a one-line diagnostic
// JSON ({"error": code, "detail": message, "command": ...}) to stderr.
int run_guarded(const ExperimentConfig& config);

}  // namespace fracmin
