#pragma once

#include <cstdio>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "scansnap/experiments.hpp"
#include "scansnap/model.hpp"
#include "scansnap/seqgen.hpp"
#include "scansnap/theory.hpp"

namespace scansnap {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

// Shortest round-trip-safe rendering: 17 significant digits.
std::string fmt_double(double x);

// Dataset files are JSON objects:
//   {"vocab_size": M, "class_prior": [...]?,
//    "classes": [{"next_token": n, "last_token": m, "cond_prob": [M values]}, ...]}
DatasetSpec dataset_from_json_text(const std::string& text);
std::string dataset_to_json_text(const DatasetSpec& spec);
DatasetSpec load_dataset(const std::filesystem::path& path);
void save_dataset(const DatasetSpec& spec, const std::filesystem::path& path);

// "syn-small", "syn-medium" (with K and seed) or a dataset file path.
DatasetSpec resolve_dataset(const std::string& name, std::size_t K = 2, std::uint64_t seed = 0);

// Binary checkpoint, little-endian:
//   char[8] "SSNPCKPT", u32 version, u64 M, f64 Y[M*M] row-major,
//   f64 Z[M*M] row-major, u64 len, char rng_state[len].
void save_checkpoint(const std::filesystem::path& path, const ModelState<double>& st, const std::string& rng_state);
ModelState<double> load_checkpoint(const std::filesystem::path& path, std::string* rng_state = nullptr);

// Writes `text` to path via a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

// CSV writers. Schemas are listed in docs/schemas.md.
void write_metrics_header(std::ostream& os);
void write_metric_row(std::ostream& os, const MetricRow& r);
void write_snapshots_header(std::ostream& os);
void write_snapshot(std::ostream& os, const AttentionSnapshot& s);

void write_limit_header(std::ostream& os);
// One row per (class, support token) of the record.
void write_limit_record(std::ostream& os, const DatasetSpec& spec, const std::vector<Token>& rows,
                        const LimitRecord& r0, const LimitRecord& r);

struct TheoryParams {
  std::size_t M = 1000;
  std::size_t K = 10;
  double eta_y = 0.5;
  double eta_z = 0.5;
  double rho0 = 1.0;
  double f0_sq = 0.5;
  double c_prime = 1.0;
};
// Parameter comment line, header, then one row per t in t_grid.
void write_theory_csv(std::ostream& os, const TheoryParams& p, const std::vector<double>& t_grid);
// 0 followed by `points` log-spaced values in [1, t_max].
std::vector<double> log_grid(double t_max, std::size_t points);

void write_sweep_runs_csv(std::ostream& os, const SweepResult& r);
void write_sweep_cells_csv(std::ostream& os, const SweepResult& r);
void write_crossings_csv(std::ostream& os, const std::vector<RatioCrossing>& c);
void write_consistency_csv(std::ostream& os, const ConsistencyReport& r);
void write_growth_csv(std::ostream& os, const std::vector<GrowthCurve>& curves, std::size_t stride = 1);
void write_growth_markers_csv(std::ostream& os, const std::vector<GrowthCurve>& curves);

}  // namespace scansnap
