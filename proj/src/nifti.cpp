#include "ncreg/nifti.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

namespace ncreg {

namespace {

constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kSingleFileOffset = 352;

// Header field offsets.
constexpr std::size_t kDim = 40;
constexpr std::size_t kDatatype = 70;
constexpr std::size_t kBitpix = 72;
constexpr std::size_t kPixdim = 76;
constexpr std::size_t kVoxOffset = 108;
constexpr std::size_t kSclSlope = 112;
constexpr std::size_t kSclInter = 116;
constexpr std::size_t kXyztUnits = 123;
constexpr std::size_t kQformCode = 252;
constexpr std::size_t kSformCode = 254;
constexpr std::size_t kQuatern = 256;
constexpr std::size_t kQoffset = 268;
constexpr std::size_t kSrowX = 280;
constexpr std::size_t kSrowY = 296;
constexpr std::size_t kSrowZ = 312;
constexpr std::size_t kMagic = 344;

int bytes_per_voxel(std::int16_t datatype) {
  switch (datatype) {
    case 4:
      return 2;
    case 8:
      return 4;
    case 16:
      return 4;
    case 64:
      return 8;
    default:
      return 0;
  }
}

// Reads a scalar of type T at an offset, reversing bytes when swap is set.
class HeaderView {
 public:
  HeaderView(const unsigned char* p, bool swap) : p_(p), swap_(swap) {}
  template <class T>
  T get(std::size_t off) const {
    unsigned char b[sizeof(T)];
    std::memcpy(b, p_ + off, sizeof(T));
    if (swap_) std::reverse(b, b + sizeof(T));
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
  }

 private:
  const unsigned char* p_;
  bool swap_;
};

template <class T>
void put(std::vector<unsigned char>& buf, std::size_t off, T v) {
  std::memcpy(buf.data() + off, &v, sizeof(T));
}

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NiftiError(NiftiErrorKind::Io, 0, "cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string offset_text(std::size_t off) { return " (byte offset " + std::to_string(off) + ")"; }

template <class T>
void decode(const unsigned char* src, std::size_t n, bool swap, double slope, double inter, std::vector<double>& out) {
  out.resize(n);
  unsigned char b[sizeof(T)];
  for (std::size_t i = 0; i < n; ++i) {
    std::memcpy(b, src + i * sizeof(T), sizeof(T));
    if (swap) std::reverse(b, b + sizeof(T));
    T v;
    std::memcpy(&v, b, sizeof(T));
    out[i] = static_cast<double>(v) * slope + inter;
  }
}

template <class T>
void encode_int(const std::vector<double>& data, double slope, double inter, unsigned char* dst) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double r = std::round((data[i] - inter) / slope);
    if (!(r >= std::numeric_limits<T>::min() && r <= std::numeric_limits<T>::max())) {
      throw NiftiError(NiftiErrorKind::Range, kSingleFileOffset + i * sizeof(T),
                       "value " + std::to_string(data[i]) + " at voxel " + std::to_string(i) +
                           " does not fit the integer datatype");
    }
    const T v = static_cast<T>(r);
    std::memcpy(dst + i * sizeof(T), &v, sizeof(T));
  }
}

}  // namespace

VolumeLite::VolumeLite(std::array<int, 4> d, double fill) : dims(d) {
  for (int v : dims)
    if (v < 1) throw std::invalid_argument("volume: dimensions must be >= 1");
  data.assign(size(), fill);
}

std::size_t VolumeLite::spatial_size() const {
  return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
}

std::size_t VolumeLite::size() const { return spatial_size() * static_cast<std::size_t>(dims[3]); }

std::size_t VolumeLite::index(int i, int j, int k, int t) const {
  return static_cast<std::size_t>(i) +
         static_cast<std::size_t>(dims[0]) *
             (static_cast<std::size_t>(j) +
              static_cast<std::size_t>(dims[1]) * (static_cast<std::size_t>(k) + static_cast<std::size_t>(dims[2]) * t));
}

void VolumeLite::validate() const {
  for (int v : dims)
    if (v < 1) throw std::invalid_argument("volume: dimensions must be >= 1");
  if (data.size() != size()) {
    throw std::invalid_argument("volume: data length " + std::to_string(data.size()) + " does not match dims (" +
                                std::to_string(size()) + ")");
  }
}

NiftiError::NiftiError(NiftiErrorKind kind, std::size_t offset, const std::string& what)
    : std::runtime_error(std::string("nifti ") + to_string(kind) + " error: " + what), kind_(kind), offset_(offset) {}

const char* to_string(NiftiErrorKind kind) {
  switch (kind) {
    case NiftiErrorKind::Io:
      return "io";
    case NiftiErrorKind::Truncated:
      return "truncated";
    case NiftiErrorKind::HeaderSize:
      return "header-size";
    case NiftiErrorKind::Magic:
      return "magic";
    case NiftiErrorKind::Datatype:
      return "datatype";
    case NiftiErrorKind::Dimensions:
      return "dimensions";
    case NiftiErrorKind::Range:
      return "range";
  }
  return "unknown";
}

VolumeLite read_nifti1(const std::string& path) {
  const std::vector<unsigned char> file = read_file(path);
  if (file.size() < kHeaderSize) {
    throw NiftiError(NiftiErrorKind::Truncated, file.size(),
                     "'" + path + "' has " + std::to_string(file.size()) + " bytes, a header needs 348");
  }
  std::int32_t sizeof_hdr;
  std::memcpy(&sizeof_hdr, file.data(), 4);
  bool swap = false;
  if (sizeof_hdr != 348) {
    swap = true;
    if (HeaderView(file.data(), true).get<std::int32_t>(0) != 348) {
      throw NiftiError(NiftiErrorKind::HeaderSize, 0,
                       "sizeof_hdr is " + std::to_string(sizeof_hdr) + " in either byte order, expected 348" +
                           offset_text(0));
    }
  }
  const HeaderView h(file.data(), swap);

  const char* magic = reinterpret_cast<const char*>(file.data() + kMagic);
  const bool single = std::memcmp(magic, "n+1\0", 4) == 0;
  const bool pair = std::memcmp(magic, "ni1\0", 4) == 0;
  if (!single && !pair) {
    std::string shown;
    for (int i = 0; i < 3; ++i) shown += std::isprint(static_cast<unsigned char>(magic[i])) ? magic[i] : '?';
    throw NiftiError(NiftiErrorKind::Magic, kMagic, "magic is '" + shown + "', expected 'n+1' or 'ni1'" + offset_text(kMagic));
  }

  VolumeLite vol;
  const std::int16_t ndim = h.get<std::int16_t>(kDim);
  if (ndim < 1 || ndim > 7) {
    throw NiftiError(NiftiErrorKind::Dimensions, kDim, "dim[0] = " + std::to_string(ndim) + offset_text(kDim));
  }
  for (int d = 1; d <= 7; ++d) {
    const std::size_t off = kDim + 2 * static_cast<std::size_t>(d);
    const int v = d <= ndim ? h.get<std::int16_t>(off) : 1;
    if (v < 1) throw NiftiError(NiftiErrorKind::Dimensions, off, "dim[" + std::to_string(d) + "] = " + std::to_string(v) + offset_text(off));
    if (d <= 4) {
      vol.dims[static_cast<std::size_t>(d - 1)] = v;
    } else if (v != 1) {
      throw NiftiError(NiftiErrorKind::Dimensions, off, "more than 4 dimensions are not supported" + offset_text(off));
    }
  }

  vol.datatype = h.get<std::int16_t>(kDatatype);
  const int bpv = bytes_per_voxel(vol.datatype);
  if (bpv == 0) {
    throw NiftiError(NiftiErrorKind::Datatype, kDatatype,
                     "datatype " + std::to_string(vol.datatype) + " is not one of 4, 8, 16, 64" + offset_text(kDatatype));
  }
  const std::int16_t bitpix = h.get<std::int16_t>(kBitpix);
  if (bitpix != 8 * bpv) {
    throw NiftiError(NiftiErrorKind::Datatype, kBitpix,
                     "bitpix " + std::to_string(bitpix) + " does not match datatype " + std::to_string(vol.datatype) +
                         offset_text(kBitpix));
  }

  vol.geometry.qfac = h.get<float>(kPixdim);
  for (int d = 0; d < 3; ++d) vol.voxel_size[static_cast<std::size_t>(d)] = h.get<float>(kPixdim + 4 * (d + 1));
  vol.tr = h.get<float>(kPixdim + 16);
  vol.scl_slope = h.get<float>(kSclSlope);
  vol.scl_inter = h.get<float>(kSclInter);
  vol.geometry.xyzt_units = file[kXyztUnits];
  vol.geometry.qform_code = h.get<std::int16_t>(kQformCode);
  vol.geometry.sform_code = h.get<std::int16_t>(kSformCode);
  for (int d = 0; d < 3; ++d) {
    vol.geometry.quatern[static_cast<std::size_t>(d)] = h.get<float>(kQuatern + 4 * d);
    vol.geometry.qoffset[static_cast<std::size_t>(d)] = h.get<float>(kQoffset + 4 * d);
  }
  for (int d = 0; d < 4; ++d) {
    vol.geometry.srow_x[static_cast<std::size_t>(d)] = h.get<float>(kSrowX + 4 * d);
    vol.geometry.srow_y[static_cast<std::size_t>(d)] = h.get<float>(kSrowY + 4 * d);
    vol.geometry.srow_z[static_cast<std::size_t>(d)] = h.get<float>(kSrowZ + 4 * d);
  }

  const float vox_offset = h.get<float>(kVoxOffset);
  std::vector<unsigned char> image_file;
  const std::vector<unsigned char>* img = &file;
  std::size_t start = 0;
  if (single) {
    if (!(vox_offset >= static_cast<float>(kSingleFileOffset)) || vox_offset != std::floor(vox_offset)) {
      throw NiftiError(NiftiErrorKind::Truncated, kVoxOffset,
                       "vox_offset " + std::to_string(vox_offset) + " is not an integer >= 352" + offset_text(kVoxOffset));
    }
    start = static_cast<std::size_t>(vox_offset);
  } else {
    std::string img_path = path;
    const std::size_t dot = img_path.rfind('.');
    img_path = (dot == std::string::npos ? img_path : img_path.substr(0, dot)) + ".img";
    image_file = read_file(img_path);
    img = &image_file;
    start = vox_offset > 0.0f ? static_cast<std::size_t>(vox_offset) : 0;
  }

  const std::size_t n = vol.size();
  const std::size_t need = start + n * static_cast<std::size_t>(bpv);
  if (img->size() < need) {
    throw NiftiError(NiftiErrorKind::Truncated, img->size(),
                     "voxel data end at byte " + std::to_string(need) + " but the file has " +
                         std::to_string(img->size()) + " bytes");
  }
  const double slope = vol.scl_slope == 0.0f || !std::isfinite(vol.scl_slope) ? 1.0 : vol.scl_slope;
  const double inter = std::isfinite(vol.scl_inter) && vol.scl_slope != 0.0f ? vol.scl_inter : 0.0;
  const unsigned char* src = img->data() + start;
  switch (vol.datatype) {
    case 4:
      decode<std::int16_t>(src, n, swap, slope, inter, vol.data);
      break;
    case 8:
      decode<std::int32_t>(src, n, swap, slope, inter, vol.data);
      break;
    case 16:
      decode<float>(src, n, swap, slope, inter, vol.data);
      break;
    default:
      decode<double>(src, n, swap, slope, inter, vol.data);
      break;
  }
  return vol;
}

void write_nifti1(const std::string& path, const VolumeLite& vol) {
  vol.validate();
  const int bpv = bytes_per_voxel(vol.datatype);
  if (bpv == 0) {
    throw NiftiError(NiftiErrorKind::Datatype, kDatatype, "cannot write datatype " + std::to_string(vol.datatype));
  }
  for (int v : vol.dims) {
    if (v > std::numeric_limits<std::int16_t>::max()) {
      throw NiftiError(NiftiErrorKind::Dimensions, kDim, "dimension " + std::to_string(v) + " exceeds 32767");
    }
  }
  const bool is_float = vol.datatype == 16 || vol.datatype == 64;
  const double slope = is_float || vol.scl_slope == 0.0f ? 1.0 : vol.scl_slope;
  const double inter = is_float ? 0.0 : vol.scl_inter;

  std::vector<unsigned char> buf(kSingleFileOffset + vol.size() * static_cast<std::size_t>(bpv), 0);
  put<std::int32_t>(buf, 0, 348);
  buf[38] = 'r';  // regular
  const int ndim = vol.dims[3] > 1 ? 4 : 3;
  put<std::int16_t>(buf, kDim, static_cast<std::int16_t>(ndim));
  for (int d = 1; d <= 7; ++d) {
    put<std::int16_t>(buf, kDim + 2 * static_cast<std::size_t>(d),
                      static_cast<std::int16_t>(d <= 4 ? vol.dims[static_cast<std::size_t>(d - 1)] : 1));
  }
  put<std::int16_t>(buf, kDatatype, vol.datatype);
  put<std::int16_t>(buf, kBitpix, static_cast<std::int16_t>(8 * bpv));
  put<float>(buf, kPixdim, vol.geometry.qfac);
  for (int d = 0; d < 3; ++d) put<float>(buf, kPixdim + 4 * (d + 1), vol.voxel_size[static_cast<std::size_t>(d)]);
  put<float>(buf, kPixdim + 16, vol.tr);
  for (int d = 5; d < 8; ++d) put<float>(buf, kPixdim + 4 * d, 1.0f);
  put<float>(buf, kVoxOffset, static_cast<float>(kSingleFileOffset));
  put<float>(buf, kSclSlope, static_cast<float>(slope));
  put<float>(buf, kSclInter, static_cast<float>(inter));
  buf[kXyztUnits] = vol.geometry.xyzt_units;
  put<std::int16_t>(buf, kQformCode, vol.geometry.qform_code);
  put<std::int16_t>(buf, kSformCode, vol.geometry.sform_code);
  for (int d = 0; d < 3; ++d) {
    put<float>(buf, kQuatern + 4 * d, vol.geometry.quatern[static_cast<std::size_t>(d)]);
    put<float>(buf, kQoffset + 4 * d, vol.geometry.qoffset[static_cast<std::size_t>(d)]);
  }
  for (int d = 0; d < 4; ++d) {
    put<float>(buf, kSrowX + 4 * d, vol.geometry.srow_x[static_cast<std::size_t>(d)]);
    put<float>(buf, kSrowY + 4 * d, vol.geometry.srow_y[static_cast<std::size_t>(d)]);
    put<float>(buf, kSrowZ + 4 * d, vol.geometry.srow_z[static_cast<std::size_t>(d)]);
  }
  std::memcpy(buf.data() + kMagic, "n+1\0", 4);

  unsigned char* dst = buf.data() + kSingleFileOffset;
  switch (vol.datatype) {
    case 4:
      encode_int<std::int16_t>(vol.data, slope, inter, dst);
      break;
    case 8:
      encode_int<std::int32_t>(vol.data, slope, inter, dst);
      break;
    case 16:
      for (std::size_t i = 0; i < vol.data.size(); ++i) {
        const float v = static_cast<float>(vol.data[i]);
        std::memcpy(dst + 4 * i, &v, 4);
      }
      break;
    default:
      std::memcpy(dst, vol.data.data(), 8 * vol.data.size());
      break;
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw NiftiError(NiftiErrorKind::Io, 0, "cannot create '" + path + "'");
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw NiftiError(NiftiErrorKind::Io, 0, "write to '" + path + "' failed");
}

}  // namespace ncreg
