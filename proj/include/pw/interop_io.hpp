#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pw/camera.hpp"
#include "pw/geometry.hpp"
#include "pw/image.hpp"
#include "pw/point_cloud_map.hpp"

namespace pw::io {

namespace fs = std::filesystem;

/// Writes to `path`.tmp then renames over `path`. Errors name the path.
void write_file_atomic(const fs::path& path, const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> read_file(const fs::path& path);

// PFM: "Pf\n<w> <h>\n-1.0\n", float32 LE rows bottom-to-top. 0.0 marks invalid pixels.
std::vector<std::uint8_t> encode_depth_pfm(const DepthMap& depth);
DepthMap decode_depth_pfm(const std::vector<std::uint8_t>& bytes);
void write_depth_pfm(const fs::path& path, const DepthMap& depth);
DepthMap read_depth_pfm(const fs::path& path);

// PPM P6, 8 bit. Channels quantised by round(c * 255).
std::vector<std::uint8_t> encode_color_ppm(const ColorImage& image);
ColorImage decode_color_ppm(const std::vector<std::uint8_t>& bytes);
void write_color_ppm(const fs::path& path, const ColorImage& image);
ColorImage read_color_ppm(const fs::path& path);

// PGM P5, 8 bit.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> values;
};
std::vector<std::uint8_t> encode_pgm(const GrayImage& image);
GrayImage decode_pgm(const std::vector<std::uint8_t>& bytes);
void write_pgm(const fs::path& path, const GrayImage& image);
GrayImage read_pgm(const fs::path& path);

/// 255 = supervise, 0 = ignore (inpainted, mask >= 0.5).
GrayImage loss_mask_image(const WeightMap& inpaint_mask);
void write_loss_mask(const fs::path& path, const WeightMap& inpaint_mask);
/// Inverse of write_loss_mask: 1 where the file says ignore. Rejects values other than 0 and 255.
WeightMap read_loss_mask(const fs::path& path);

// FLO2: "FLO2", u32 width, u32 height, u32 channels (= 2), then interleaved float32 (dx, dy), all LE.
std::vector<std::uint8_t> encode_flow(const FlowField& flow);
FlowField decode_flow(const std::vector<std::uint8_t>& bytes);
void write_flow(const fs::path& path, const FlowField& flow);
FlowField read_flow(const fs::path& path);

/// Splat initialisation points. confidence = 1 - (point came from an inpainted pixel).
struct GaussianSeedCloud {
    std::vector<Eigen::Vector3f> positions;
    std::vector<std::array<double, 3>> colors;
    std::vector<double> confidence;

    std::size_t size() const { return positions.size(); }
    void validate() const;
};

GaussianSeedCloud make_seed_cloud(const PointCloudMap& map, const std::vector<FrameRecord>& frames);

// binary_little_endian 1.0 PLY with float x y z, uchar red green blue.
std::string ply_header(std::size_t vertex_count);
std::vector<std::uint8_t> encode_ply_seeds(const GaussianSeedCloud& cloud);
/// Reads files in the layout above. Colours come back as byte / 255, confidence as 1.
GaussianSeedCloud decode_ply_seeds(const std::vector<std::uint8_t>& bytes);
void write_ply_seeds(const fs::path& path, const GaussianSeedCloud& cloud);
GaussianSeedCloud read_ply_seeds(const fs::path& path);

// ---------------------------------------------------------------------------------------------
// Frame-exchange protocol: one directory per frame holding manifest.json and the referenced files.

inline constexpr int kManifestSchemaVersion = 1;

struct ManifestPaths {
    std::string color;      // required
    std::string raw_color;  // optional (empty = absent)
    std::string depth;      // required
    std::string flow;       // backward flow into the previous frame; empty on the first frame
    std::string loss_mask;
    std::string occlusion;  // visibility of this frame's pixels in the previous frame (PGM, 255 = visible)

    friend bool operator==(const ManifestPaths&, const ManifestPaths&) = default;
};

struct FrameManifest {
    int schema_version = kManifestSchemaVersion;
    int frame_id = 0;
    CameraIntrinsics intrinsics;
    Eigen::Matrix4d camera_to_world = Eigen::Matrix4d::Identity();  // row-major in JSON
    ManifestPaths paths;
    std::string provenance = "engine";  // oracle | adapter | engine

    CameraRig rig() const;
};

/// Canonical serialisation: sorted keys, two-space indent, trailing newline.
std::string manifest_to_json(const FrameManifest& m);
/// Rejects unknown keys (named in the message), schema mismatch, bad provenance, a bottom row other
/// than (0,0,0,1), and paths that are absolute or escape the frame directory.
FrameManifest manifest_from_json(const std::string& text);

void write_manifest(const fs::path& path, const FrameManifest& m);
/// Also checks that every referenced file exists next to the manifest.
FrameManifest read_manifest(const fs::path& path);

/// A fully loaded frame of an exchange directory.
struct ExchangeFrame {
    FrameManifest manifest;
    ColorImage color;
    std::optional<ColorImage> raw_color;
    DepthMap depth;
    std::optional<FlowField> flow;
    std::optional<WeightMap> loss_mask;  // 1 = ignore
    std::optional<WeightMap> occlusion;  // 1 = visible
};

inline constexpr char kManifestName[] = "manifest.json";

/// Sub-directory name of a frame: frame_<id, 4 digits>.
std::string frame_dir_name(int frame_id);

/// Writes the frame's files under dir/frame_XXXX, filling manifest.paths from what is present.
void write_exchange_frame(const fs::path& dir, ExchangeFrame frame);
ExchangeFrame read_exchange_frame(const fs::path& frame_dir);
/// Every frame_* sub-directory, ordered by frame id. Throws FormatError if there is none.
std::vector<ExchangeFrame> read_exchange_dir(const fs::path& dir);

}  // namespace pw::io
