#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "koopid/estimators.hpp"

namespace koopid {

// Single-file model archive:
//   "KOOPIDAR"                    8-byte magic
//   u64 n, n bytes                JSON manifest (family, dims, dt, fit rank,
//                                 dictionary spec, format and monomial-order versions)
//   u64 count, then per array:    u64 name length, name,
//                                 u64 rows, u64 cols, rows*cols f64 (column-major)
// All integers and floats are little-endian. Matrices are stored as A, B
// (linear families), An, Cn (nonlinear) or Ac, Bc, Cc (nonlinear controlled);
// a reduced model adds Phi, eigenvalues, Ared, Bred, Cred.

inline constexpr int kArchiveFormatVersion = 1;

struct ModelBundle {
  KoopmanModel model;
  std::optional<ReducedModel> reduced;
};

std::string encode_model(const KoopmanModel& model, const ReducedModel* reduced = nullptr);
ModelBundle decode_model(const std::string& bytes);

void save_model(const std::filesystem::path& path, const KoopmanModel& model,
                const ReducedModel* reduced = nullptr);
/// Throws FormatError on a malformed archive or a version mismatch.
ModelBundle load_model(const std::filesystem::path& path);

} // namespace koopid
