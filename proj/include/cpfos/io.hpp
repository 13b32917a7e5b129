#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "cpfos/bayes_glm.hpp"
#include "cpfos/cp_als.hpp"
#include "cpfos/rank_cv.hpp"
#include "cpfos/simbas.hpp"
#include "cpfos/tensor.hpp"

namespace cpfos::io {

namespace fs = std::filesystem;

/// %.17g: enough digits to round-trip any double.
std::string format_double(double x);

std::string read_file(const fs::path& path);
void write_file(const fs::path& path, std::string_view bytes);

// ---- tensor format ----
// "TNSR", u8 version (1), u8 order K, 6 zero bytes, K x u64 dims, then the
// values as float64, first index fastest. All integers and floats little-endian.

inline constexpr std::uint8_t kTensorVersion = 1;
inline constexpr std::size_t kTensorHeaderBytes = 12;

std::string encode_tensor(const Tensor& t);
Tensor decode_tensor(std::string_view bytes);
void write_tensor(const fs::path& path, const Tensor& t);
Tensor read_tensor(const fs::path& path);

Tensor matrix_to_tensor(const Matrix& m);
Matrix tensor_to_matrix(const Tensor& t);
Tensor vector_to_tensor(const Vector& v);
Vector tensor_to_vector(const Tensor& t);

// ---- key=value text ----

using KeyValues = std::map<std::string, std::string>;

/// Lines "key = value"; blank lines and lines starting with '#' are ignored.
KeyValues parse_key_values(std::string_view text, const std::string& source);
KeyValues read_key_values(const fs::path& path);
void write_key_values(const fs::path& path, const KeyValues& kv);

// ---- CP model: lambda.tnsr, factor_<n>.tnsr (1-based), model.txt ----

void write_model(const fs::path& dir, const CpModel& model);
CpModel read_model(const fs::path& dir);

// ---- chain: gamma_star.tnsr (M' x p x R), sigma.tnsr (M' x R x R), chain.txt ----

struct StoredChain {
  McmcChain chain;
  std::vector<std::string> column_names;
};

void write_chain(const fs::path& dir, const McmcChain& chain, const std::vector<std::string>& column_names);
StoredChain read_chain(const fs::path& dir);

// ---- covariates ----

struct CovariateOptions {
  bool add_intercept = true;
  // Subject ids in tensor order; when empty, file rows are taken in file order.
  std::vector<std::string> subject_order;
  // Number of subjects the design must have; negative skips the check.
  Index expected_rows = -1;
};

struct CovariateTable {
  Matrix z;
  std::vector<std::string> column_names;
  std::vector<std::string> subject_ids;
};

/// CSV with a header whose first column is subject_id; all other cells numeric.
CovariateTable parse_covariates(std::string_view text, const std::string& source, const CovariateOptions& opts = {});
CovariateTable read_covariates(const fs::path& path, const CovariateOptions& opts = {});
/// Writes the given columns (no intercept is added or removed).
void write_covariates(const fs::path& path, const std::vector<std::string>& subject_ids, const Matrix& columns,
                      const std::vector<std::string>& column_names);

// ---- NIfTI-1 (single-file .nii, float32 or float64, 3D, unscaled) ----

struct NiftiVolume {
  Tensor data;
  std::array<double, 3> voxel_size{};
};

NiftiVolume decode_nifti1(std::string_view bytes);
NiftiVolume read_nifti1(const fs::path& path);

/// A 3D volume from a .nii file or a tensor file of order 3.
Tensor read_volume(const fs::path& path);

/// Stacks per-subject volumes into a p1 x p2 x p3 x N tensor.
Tensor read_volume_stack(const std::vector<fs::path>& paths);

/// Non-empty, non-comment lines of a text file; relative entries resolve against its directory.
std::vector<fs::path> read_path_list(const fs::path& list);

// ---- result tables ----

struct ClusterRow {
  Index id = 0;
  Index size = 0;
  Voxel peak{};
  double peak_value = 0;
};

void write_clusters_csv(const fs::path& path, const std::vector<Cluster>& clusters);
std::vector<ClusterRow> read_clusters_csv(const fs::path& path);

/// rank,mean_error,fold_1,...,fold_k
void write_rank_table(const fs::path& path, const CvResult& result);
CvResult read_rank_table(const fs::path& path);

}  // namespace cpfos::io
