#ifndef NLOS_IO_HPP
#define NLOS_IO_HPP

#include <string>
#include <utility>
#include <vector>

#include "nlos/transient.hpp"
#include "nlos/voxel.hpp"

namespace nlos {

inline constexpr char kDatasetMagic[4] = {'N', 'L', 'T', 'D'};
inline constexpr char kVolumeMagic[4] = {'N', 'L', 'V', 'G'};
inline constexpr std::uint16_t kFormatVersion = 1;

// Binary dataset container ("NLTD", little-endian):
//   magic[4] version:u16 S:u32 P:u32 T:u32 c:f64 t0:f64 dt:f64
//   laser positions S*3 f64, laser offsets S f64,
//   wall positions P*3 f64, camera offsets P f64,
//   intensity S*P*T f32 (s-major, then p, then t)
TransientDataset read_dataset(const std::string& path);
void write_dataset(const TransientDataset& ds, const std::string& path);

// Binary volume container ("NLVG", little-endian):
//   magic[4] version:u16 nx:u32 ny:u32 nz:u32 bounds min/max 6*f64 mode:u8
//   payload u32 or f64, x-fastest
VoxelGrid read_volume(const std::string& path);
void write_volume(const VoxelGrid& grid, const std::string& path);

/// Parses the JSON scene description; throws SceneParseError with field context.
HiddenScene read_scene(const std::string& path);
HiddenScene parse_scene_json(const std::string& text);

/// Point cloud of voxel centers with confidence >= threshold * max.
/// Vertices carry x, y, z and confidence, all float64.
void export_ply(const VoxelGrid& grid, double threshold, const std::string& path,
                bool binary = false);

/// One max-normalized 8-bit PGM (binary "P5") per layer along `axis` (0..2),
/// written as <prefix>_NNN.pgm. Returns the written paths.
std::vector<std::string> export_slices(const VoxelGrid& grid, int axis,
                                       const std::string& prefix);

/// key=value report lines, one per entry.
void write_report(const std::vector<std::pair<std::string, std::string>>& entries,
                  const std::string& path);

}  // namespace nlos

#endif
