#pragma once

// Minimal NIfTI-1 volumes: single-file (n+1) and header/image pairs (ni1),
// either byte order, int16/int32/float32/float64 voxels, up to 4 dimensions.

#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ncreg {

/// Orientation fields copied verbatim from an input header to outputs.
struct NiftiGeometry {
  std::int16_t qform_code = 0;
  std::int16_t sform_code = 0;
  float qfac = 1.0f;  // pixdim[0]
  std::array<float, 3> quatern{};
  std::array<float, 3> qoffset{};
  std::array<float, 4> srow_x{};
  std::array<float, 4> srow_y{};
  std::array<float, 4> srow_z{};
  std::uint8_t xyzt_units = 0;
};

struct VolumeLite {
  std::array<int, 4> dims{1, 1, 1, 1};  // nx, ny, nz, nt
  std::array<float, 3> voxel_size{1.0f, 1.0f, 1.0f};  // mm
  float tr = 0.0f;  // pixdim[4]
  std::vector<double> data;  // x fastest, scaling already applied
  float scl_slope = 1.0f;    // as stored in the file
  float scl_inter = 0.0f;
  std::int16_t datatype = 16;  // on-disk type: 4 int16, 8 int32, 16 float32, 64 float64
  NiftiGeometry geometry;

  VolumeLite() = default;
  VolumeLite(std::array<int, 4> d, double fill = 0.0);

  std::size_t spatial_size() const;
  std::size_t size() const;
  std::size_t index(int i, int j, int k, int t = 0) const;
  double& at(int i, int j, int k, int t = 0) { return data[index(i, j, k, t)]; }
  double at(int i, int j, int k, int t = 0) const { return data[index(i, j, k, t)]; }
  /// Throws std::invalid_argument if dims < 1 or the data length is wrong.
  void validate() const;
};

enum class NiftiErrorKind { Io, Truncated, HeaderSize, Magic, Datatype, Dimensions, Range };

class NiftiError : public std::runtime_error {
 public:
  NiftiError(NiftiErrorKind kind, std::size_t offset, const std::string& what);
  NiftiErrorKind kind() const { return kind_; }
  std::size_t offset() const { return offset_; }

 private:
  NiftiErrorKind kind_;
  std::size_t offset_;
};

const char* to_string(NiftiErrorKind kind);

/// Reads a .nii (n+1) or .hdr (ni1, voxels from the matching .img) file.
/// scl_slope = 0 counts as 1.
VolumeLite read_nifti1(const std::string& path);

/// Writes a single-file n+1 volume in host byte order using vol.datatype.
/// Float types are written unscaled (slope 1, intercept 0). Integer types
/// store round((v - scl_inter) / scl_slope) and throw NiftiError(Range) when
/// a value does not fit.
void write_nifti1(const std::string& path, const VolumeLite& vol);

}  // namespace ncreg
