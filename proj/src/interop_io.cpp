#include "pw/interop_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "pw/errors.hpp"

namespace pw::io {

namespace {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(std::uint8_t(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

std::uint32_t get_u32(const std::uint8_t* p) {
    return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}

float get_f32(const std::uint8_t* p) { return std::bit_cast<float>(get_u32(p)); }

void put_text(std::vector<std::uint8_t>& out, const std::string& s) { out.insert(out.end(), s.begin(), s.end()); }

/// Reads whitespace-separated ASCII header tokens of a netpbm-style file.
class HeaderReader {
public:
    HeaderReader(const std::vector<std::uint8_t>& bytes, const char* format) : bytes_(bytes), format_(format) {}

    std::string token() {
        while (pos_ < bytes_.size() && std::isspace(bytes_[pos_])) ++pos_;
        if (pos_ < bytes_.size() && bytes_[pos_] == '#') {
            while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            return token();
        }
        std::string t;
        while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_])) t.push_back(char(bytes_[pos_++]));
        if (t.empty()) throw FormatError(std::string(format_) + ": truncated header");
        return t;
    }

    int positive_int() {
        const std::string t = token();
        int v = 0;
        try {
            std::size_t used = 0;
            v = std::stoi(t, &used);
            if (used != t.size()) throw std::invalid_argument(t);
        } catch (const std::exception&) {
            throw FormatError(std::string(format_) + ": bad header integer '" + t + "'");
        }
        if (v <= 0) throw FormatError(std::string(format_) + ": header value must be positive");
        return v;
    }

    /// Consumes the single whitespace byte that ends the header.
    std::size_t payload_start() {
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) throw FormatError(std::string(format_) + ": truncated header");
        return pos_ + 1;
    }

private:
    const std::vector<std::uint8_t>& bytes_;
    const char* format_;
    std::size_t pos_ = 0;
};

void expect_payload(const std::vector<std::uint8_t>& bytes, std::size_t start, std::size_t size, const char* format) {
    if (bytes.size() < start + size) throw FormatError(std::string(format) + ": truncated payload");
    if (bytes.size() > start + size) throw FormatError(std::string(format) + ": trailing bytes after payload");
}

std::uint8_t quantise(double c) { return std::uint8_t(std::lround(std::clamp(c, 0.0, 1.0) * 255.0)); }

}  // namespace

void write_file_atomic(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
    if (path.empty()) throw ValidationError("output path is empty");
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open " + tmp.string() + " for writing");
        out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
        if (!out) throw Error("write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error("cannot rename onto " + path.string());
    }
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
    if (path.empty()) throw ValidationError("input path is empty");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// --- PFM ----------------------------------------------------------------------------------------

std::vector<std::uint8_t> encode_depth_pfm(const DepthMap& depth) {
    depth.validate();
    std::vector<std::uint8_t> out;
    put_text(out, "Pf\n" + std::to_string(depth.width) + " " + std::to_string(depth.height) + "\n-1.0\n");
    out.reserve(out.size() + depth.size() * 4);
    for (int r = depth.height - 1; r >= 0; --r)
        for (int c = 0; c < depth.width; ++c)
            put_f32(out, depth.is_valid(r, c) ? float(depth.at(r, c)) : 0.0f);
    return out;
}

DepthMap decode_depth_pfm(const std::vector<std::uint8_t>& bytes) {
    HeaderReader h(bytes, "PFM");
    const std::string magic = h.token();
    if (magic == "PF") throw FormatError("PFM: colour PFM is not a depth map");
    if (magic != "Pf") throw FormatError("PFM: bad magic '" + magic + "'");
    const int w = h.positive_int();
    const int hh = h.positive_int();
    const std::string scale_tok = h.token();
    double scale = 0.0;
    try {
        scale = std::stod(scale_tok);
    } catch (const std::exception&) {
        throw FormatError("PFM: bad scale token '" + scale_tok + "'");
    }
    if (!(scale < 0.0)) throw FormatError("PFM: big-endian payloads (positive scale) are not supported");
    const std::size_t start = h.payload_start();
    expect_payload(bytes, start, std::size_t(w) * hh * 4, "PFM");
    DepthMap d(w, hh);
    const std::uint8_t* p = bytes.data() + start;
    for (int r = hh - 1; r >= 0; --r)
        for (int c = 0; c < w; ++c, p += 4) {
            const float v = get_f32(p);
            if (!std::isfinite(v) || v < 0.0f) throw FormatError("PFM: depth must be finite and non-negative");
            d.values[d.index(r, c)] = v;
            d.valid[d.index(r, c)] = v > 0.0f ? 1 : 0;
        }
    return d;
}

void write_depth_pfm(const fs::path& path, const DepthMap& depth) { write_file_atomic(path, encode_depth_pfm(depth)); }
DepthMap read_depth_pfm(const fs::path& path) { return decode_depth_pfm(read_file(path)); }

// --- PPM / PGM ----------------------------------------------------------------------------------

std::vector<std::uint8_t> encode_color_ppm(const ColorImage& image) {
    image.validate();
    std::vector<std::uint8_t> out;
    put_text(out, "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n");
    for (double v : image.values) out.push_back(quantise(v));
    return out;
}

ColorImage decode_color_ppm(const std::vector<std::uint8_t>& bytes) {
    HeaderReader h(bytes, "PPM");
    if (h.token() != "P6") throw FormatError("PPM: expected P6");
    const int w = h.positive_int();
    const int hh = h.positive_int();
    if (h.positive_int() != 255) throw FormatError("PPM: only maxval 255 is supported");
    const std::size_t start = h.payload_start();
    expect_payload(bytes, start, std::size_t(w) * hh * 3, "PPM");
    ColorImage img(w, hh);
    for (std::size_t i = 0; i < img.values.size(); ++i) img.values[i] = bytes[start + i] / 255.0;
    return img;
}

void write_color_ppm(const fs::path& path, const ColorImage& image) { write_file_atomic(path, encode_color_ppm(image)); }
ColorImage read_color_ppm(const fs::path& path) { return decode_color_ppm(read_file(path)); }

std::vector<std::uint8_t> encode_pgm(const GrayImage& image) {
    if (image.width <= 0 || image.height <= 0 || image.values.size() != std::size_t(image.width) * image.height)
        throw DimensionError("PGM: size does not match pixel count");
    std::vector<std::uint8_t> out;
    put_text(out, "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n");
    out.insert(out.end(), image.values.begin(), image.values.end());
    return out;
}

GrayImage decode_pgm(const std::vector<std::uint8_t>& bytes) {
    HeaderReader h(bytes, "PGM");
    if (h.token() != "P5") throw FormatError("PGM: expected P5");
    GrayImage g;
    g.width = h.positive_int();
    g.height = h.positive_int();
    if (h.positive_int() != 255) throw FormatError("PGM: only maxval 255 is supported");
    const std::size_t start = h.payload_start();
    expect_payload(bytes, start, std::size_t(g.width) * g.height, "PGM");
    g.values.assign(bytes.begin() + std::ptrdiff_t(start), bytes.end());
    return g;
}

void write_pgm(const fs::path& path, const GrayImage& image) { write_file_atomic(path, encode_pgm(image)); }
GrayImage read_pgm(const fs::path& path) { return decode_pgm(read_file(path)); }

GrayImage loss_mask_image(const WeightMap& inpaint_mask) {
    inpaint_mask.validate();
    GrayImage g{inpaint_mask.width, inpaint_mask.height, {}};
    g.values.reserve(inpaint_mask.values.size());
    for (double v : inpaint_mask.values) g.values.push_back(v >= 0.5 ? 0 : 255);
    return g;
}

void write_loss_mask(const fs::path& path, const WeightMap& inpaint_mask) {
    write_pgm(path, loss_mask_image(inpaint_mask));
}

WeightMap read_loss_mask(const fs::path& path) {
    const GrayImage g = read_pgm(path);
    WeightMap m(g.width, g.height);
    for (std::size_t i = 0; i < g.values.size(); ++i) {
        if (g.values[i] != 0 && g.values[i] != 255) throw FormatError("loss mask values must be 0 or 255");
        m.values[i] = g.values[i] == 0 ? 1.0 : 0.0;
    }
    return m;
}

// --- FLO2 ---------------------------------------------------------------------------------------

std::vector<std::uint8_t> encode_flow(const FlowField& flow) {
    flow.validate();
    std::vector<std::uint8_t> out;
    put_text(out, "FLO2");
    put_u32(out, std::uint32_t(flow.width));
    put_u32(out, std::uint32_t(flow.height));
    put_u32(out, 2);
    for (double v : flow.values) put_f32(out, float(v));
    return out;
}

FlowField decode_flow(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 16) throw FormatError("FLO2: truncated header");
    if (std::memcmp(bytes.data(), "FLO2", 4) != 0) throw FormatError("FLO2: bad magic (version mismatch)");
    const std::uint32_t w = get_u32(bytes.data() + 4);
    const std::uint32_t h = get_u32(bytes.data() + 8);
    if (get_u32(bytes.data() + 12) != 2) throw FormatError("FLO2: channel count must be 2");
    if (w == 0 || h == 0 || w > 65536 || h > 65536) throw FormatError("FLO2: bad resolution");
    expect_payload(bytes, 16, std::size_t(w) * h * 8, "FLO2");
    FlowField f(static_cast<int>(w), static_cast<int>(h));
    for (std::size_t i = 0; i < f.values.size(); ++i) f.values[i] = get_f32(bytes.data() + 16 + 4 * i);
    f.validate();
    return f;
}

void write_flow(const fs::path& path, const FlowField& flow) { write_file_atomic(path, encode_flow(flow)); }
FlowField read_flow(const fs::path& path) { return decode_flow(read_file(path)); }

// --- PLY ----------------------------------------------------------------------------------------

void GaussianSeedCloud::validate() const {
    if (colors.size() != positions.size() || confidence.size() != positions.size())
        throw DimensionError("seed cloud arrays differ in length");
    for (const auto& p : positions)
        if (!p.allFinite()) throw ValidationError("seed cloud position is not finite");
    for (const auto& c : colors)
        for (double v : c)
            if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("seed cloud colour outside [0, 1]");
}

GaussianSeedCloud make_seed_cloud(const PointCloudMap& map, const std::vector<FrameRecord>& frames) {
    std::map<int, const FrameRecord*> by_id;
    for (const auto& f : frames) by_id[f.id] = &f;
    const PointCloud& pts = map.global_points();
    GaussianSeedCloud out;
    out.positions.reserve(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        out.positions.push_back(pts.positions[i].cast<float>());
        out.colors.push_back(pts.colors[i]);
        const SourcePixel& s = pts.source_pixel[i];
        const auto it = by_id.find(s.frame);
        const bool inpainted = it != by_id.end() && it->second->inpaint_mask.at(s.row, s.col) >= 0.5;
        out.confidence.push_back(inpainted ? 0.0 : 1.0);
    }
    return out;
}

std::string ply_header(std::size_t vertex_count) {
    return "ply\nformat binary_little_endian 1.0\nelement vertex " + std::to_string(vertex_count) +
           "\nproperty float x\nproperty float y\nproperty float z\n"
           "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
}

std::vector<std::uint8_t> encode_ply_seeds(const GaussianSeedCloud& cloud) {
    cloud.validate();
    if (cloud.size() == 0) throw ValidationError("seed cloud is empty");
    std::vector<std::uint8_t> out;
    put_text(out, ply_header(cloud.size()));
    out.reserve(out.size() + cloud.size() * 15);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        for (int k = 0; k < 3; ++k) put_f32(out, cloud.positions[i][k]);
        for (int k = 0; k < 3; ++k) out.push_back(quantise(cloud.colors[i][k]));
    }
    return out;
}

GaussianSeedCloud decode_ply_seeds(const std::vector<std::uint8_t>& bytes) {
    static const std::string marker = "end_header\n";
    const auto it = std::search(bytes.begin(), bytes.end(), marker.begin(), marker.end());
    if (it == bytes.end()) throw FormatError("PLY: missing end_header");
    const std::string header(bytes.begin(), it + std::ptrdiff_t(marker.size()));
    std::istringstream hs(header);
    std::string line;
    std::size_t count = 0;
    bool have_count = false;
    std::vector<std::string> props;
    std::getline(hs, line);
    if (line != "ply") throw FormatError("PLY: bad magic");
    while (std::getline(hs, line)) {
        std::istringstream ls(line);
        std::string kw;
        ls >> kw;
        if (kw == "format") {
            std::string fmt, ver;
            ls >> fmt >> ver;
            if (fmt != "binary_little_endian" || ver != "1.0") throw FormatError("PLY: unsupported format " + fmt);
        } else if (kw == "element") {
            std::string name;
            ls >> name >> count;
            if (name != "vertex" || have_count) throw FormatError("PLY: only a single vertex element is supported");
            have_count = true;
        } else if (kw == "property") {
            std::string type, name;
            ls >> type >> name;
            props.push_back(type + " " + name);
        } else if (kw == "comment" || kw == "end_header") {
        } else {
            throw FormatError("PLY: unexpected header line '" + line + "'");
        }
    }
    const std::vector<std::string> expected{"float x",   "float y",     "float z",
                                            "uchar red", "uchar green", "uchar blue"};
    if (!have_count || props != expected) throw FormatError("PLY: vertex layout must be float xyz + uchar rgb");
    const std::size_t start = header.size();
    expect_payload(bytes, start, count * 15, "PLY");
    GaussianSeedCloud cloud;
    const std::uint8_t* p = bytes.data() + start;
    for (std::size_t i = 0; i < count; ++i, p += 15) {
        cloud.positions.emplace_back(get_f32(p), get_f32(p + 4), get_f32(p + 8));
        cloud.colors.push_back({p[12] / 255.0, p[13] / 255.0, p[14] / 255.0});
        cloud.confidence.push_back(1.0);
    }
    return cloud;
}

void write_ply_seeds(const fs::path& path, const GaussianSeedCloud& cloud) {
    write_file_atomic(path, encode_ply_seeds(cloud));
}
GaussianSeedCloud read_ply_seeds(const fs::path& path) { return decode_ply_seeds(read_file(path)); }

// --- Manifests ----------------------------------------------------------------------------------

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw FormatError("manifest: " + where + " must be an object");
    for (const auto& [key, _] : obj.items())
        if (!allowed.count(key)) throw FormatError("manifest: unknown key '" + key + "' in " + where);
    for (const auto& key : allowed)
        if (!obj.contains(key)) throw FormatError("manifest: missing key '" + key + "' in " + where);
}

void check_relative(const std::string& p, const std::string& key) {
    if (p.empty()) return;
    const fs::path path(p);
    if (path.is_absolute() || path.has_root_name() || path.has_root_directory())
        throw ValidationError("manifest: path '" + p + "' for " + key + " must be relative");
    for (const auto& part : path)
        if (part == "..") throw ValidationError("manifest: path '" + p + "' for " + key + " leaves the frame directory");
}

const std::set<std::string> kProvenance{"oracle", "adapter", "engine"};

template <class T>
T get_as(const json& j, const std::string& key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw FormatError("manifest: key '" + key + "' has the wrong type");
    }
}

}  // namespace

CameraRig FrameManifest::rig() const {
    CameraRig rig{intrinsics, Pose::from_matrix(camera_to_world)};
    rig.validate();
    return rig;
}

std::string manifest_to_json(const FrameManifest& m) {
    json j;
    j["schema_version"] = m.schema_version;
    j["frame_id"] = m.frame_id;
    j["intrinsics"] = {{"fx", m.intrinsics.fx},       {"fy", m.intrinsics.fy},         {"cx", m.intrinsics.cx},
                       {"cy", m.intrinsics.cy},       {"width", m.intrinsics.width},   {"height", m.intrinsics.height}};
    json mat = json::array();
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) mat.push_back(m.camera_to_world(r, c));
    j["camera_to_world"] = mat;
    j["paths"] = {{"color", m.paths.color},         {"raw_color", m.paths.raw_color},
                  {"depth", m.paths.depth},         {"flow", m.paths.flow},
                  {"loss_mask", m.paths.loss_mask}, {"occlusion", m.paths.occlusion}};
    j["provenance"] = m.provenance;
    return j.dump(2) + "\n";
}

FrameManifest manifest_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("manifest: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw FormatError("manifest: top level must be an object");
    if (j.contains("schema_version") && j["schema_version"] != kManifestSchemaVersion)
        throw FormatError("manifest: schema version mismatch (expected " + std::to_string(kManifestSchemaVersion) +
                          ", got " + j["schema_version"].dump() + ")");
    check_keys(j, {"schema_version", "frame_id", "intrinsics", "camera_to_world", "paths", "provenance"}, "manifest");
    FrameManifest m;
    m.schema_version = get_as<int>(j, "schema_version");
    m.frame_id = get_as<int>(j, "frame_id");
    const json& in = j["intrinsics"];
    check_keys(in, {"fx", "fy", "cx", "cy", "width", "height"}, "intrinsics");
    m.intrinsics.fx = get_as<double>(in, "fx");
    m.intrinsics.fy = get_as<double>(in, "fy");
    m.intrinsics.cx = get_as<double>(in, "cx");
    m.intrinsics.cy = get_as<double>(in, "cy");
    m.intrinsics.width = get_as<int>(in, "width");
    m.intrinsics.height = get_as<int>(in, "height");
    m.intrinsics.validate();
    const auto mat = get_as<std::vector<double>>(j, "camera_to_world");
    if (mat.size() != 16) throw FormatError("manifest: camera_to_world must hold 16 numbers");
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) m.camera_to_world(r, c) = mat[std::size_t(r) * 4 + c];
    if (m.camera_to_world.row(3) != Eigen::RowVector4d(0, 0, 0, 1))
        throw ValidationError("manifest: camera_to_world bottom row must be (0, 0, 0, 1)");
    const json& p = j["paths"];
    check_keys(p, {"color", "raw_color", "depth", "flow", "loss_mask", "occlusion"}, "paths");
    m.paths.color = get_as<std::string>(p, "color");
    m.paths.raw_color = get_as<std::string>(p, "raw_color");
    m.paths.depth = get_as<std::string>(p, "depth");
    m.paths.flow = get_as<std::string>(p, "flow");
    m.paths.loss_mask = get_as<std::string>(p, "loss_mask");
    m.paths.occlusion = get_as<std::string>(p, "occlusion");
    if (m.paths.color.empty() || m.paths.depth.empty())
        throw ValidationError("manifest: color and depth paths are required");
    for (const auto& [k, v] : std::vector<std::pair<std::string, std::string>>{{"color", m.paths.color},
                                                                                {"raw_color", m.paths.raw_color},
                                                                                {"depth", m.paths.depth},
                                                                                {"flow", m.paths.flow},
                                                                                {"loss_mask", m.paths.loss_mask},
                                                                                {"occlusion", m.paths.occlusion}})
        check_relative(v, k);
    m.provenance = get_as<std::string>(j, "provenance");
    if (!kProvenance.count(m.provenance)) throw ValidationError("manifest: unknown provenance '" + m.provenance + "'");
    Pose::from_matrix(m.camera_to_world).validate();
    return m;
}

void write_manifest(const fs::path& path, const FrameManifest& m) {
    const std::string text = manifest_to_json(m);
    manifest_from_json(text);
    write_file_atomic(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

FrameManifest read_manifest(const fs::path& path) {
    const auto bytes = read_file(path);
    FrameManifest m = manifest_from_json(std::string(bytes.begin(), bytes.end()));
    const fs::path dir = path.parent_path();
    for (const std::string* p : {&m.paths.color, &m.paths.raw_color, &m.paths.depth, &m.paths.flow,
                                 &m.paths.loss_mask, &m.paths.occlusion})
        if (!p->empty() && !fs::exists(dir / *p))
            throw FormatError("manifest " + path.string() + " references missing file " + *p);
    return m;
}

// --- Frame-exchange directories -----------------------------------------------------------------

std::string frame_dir_name(int frame_id) {
    if (frame_id < 0) throw ValidationError("frame ids must be non-negative");
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%04d", frame_id);
    return buf;
}

void write_exchange_frame(const fs::path& dir, ExchangeFrame frame) {
    const fs::path fdir = dir / frame_dir_name(frame.manifest.frame_id);
    std::error_code ec;
    fs::create_directories(fdir, ec);
    if (ec) throw Error("cannot create " + fdir.string());
    ManifestPaths& p = frame.manifest.paths;
    p = {};
    p.color = "color.ppm";
    write_color_ppm(fdir / p.color, frame.color);
    if (frame.raw_color) {
        p.raw_color = "raw_color.ppm";
        write_color_ppm(fdir / p.raw_color, *frame.raw_color);
    }
    p.depth = "depth.pfm";
    write_depth_pfm(fdir / p.depth, frame.depth);
    if (frame.flow) {
        p.flow = "flow.flo2";
        write_flow(fdir / p.flow, *frame.flow);
    }
    if (frame.loss_mask) {
        p.loss_mask = "loss_mask.pgm";
        write_loss_mask(fdir / p.loss_mask, *frame.loss_mask);
    }
    if (frame.occlusion) {
        p.occlusion = "occlusion.pgm";
        GrayImage g{frame.occlusion->width, frame.occlusion->height, {}};
        for (double v : frame.occlusion->values) g.values.push_back(v >= 0.5 ? 255 : 0);
        write_pgm(fdir / p.occlusion, g);
    }
    write_manifest(fdir / kManifestName, frame.manifest);
}

ExchangeFrame read_exchange_frame(const fs::path& frame_dir) {
    ExchangeFrame f;
    f.manifest = read_manifest(frame_dir / kManifestName);
    const auto& p = f.manifest.paths;
    const auto& in = f.manifest.intrinsics;
    auto check = [&](int w, int h, const std::string& what) {
        if (w != in.width || h != in.height)
            throw DimensionError(frame_dir.string() + ": " + what + " resolution disagrees with the intrinsics");
    };
    f.color = read_color_ppm(frame_dir / p.color);
    check(f.color.width, f.color.height, "color");
    if (!p.raw_color.empty()) {
        f.raw_color = read_color_ppm(frame_dir / p.raw_color);
        check(f.raw_color->width, f.raw_color->height, "raw_color");
    }
    f.depth = read_depth_pfm(frame_dir / p.depth);
    check(f.depth.width, f.depth.height, "depth");
    if (!p.flow.empty()) {
        f.flow = read_flow(frame_dir / p.flow);
        check(f.flow->width, f.flow->height, "flow");
    }
    if (!p.loss_mask.empty()) {
        f.loss_mask = read_loss_mask(frame_dir / p.loss_mask);
        check(f.loss_mask->width, f.loss_mask->height, "loss_mask");
    }
    if (!p.occlusion.empty()) {
        const GrayImage g = read_pgm(frame_dir / p.occlusion);
        check(g.width, g.height, "occlusion");
        WeightMap w(g.width, g.height);
        for (std::size_t i = 0; i < g.values.size(); ++i) w.values[i] = g.values[i] >= 128 ? 1.0 : 0.0;
        f.occlusion = std::move(w);
    }
    return f;
}

std::vector<ExchangeFrame> read_exchange_dir(const fs::path& dir) {
    if (dir.empty()) throw ValidationError("frame directory path is empty");
    if (!fs::is_directory(dir)) throw FormatError("frame directory " + dir.string() + " does not exist");
    std::vector<fs::path> subdirs;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_directory() && e.path().filename().string().rfind("frame_", 0) == 0) subdirs.push_back(e.path());
    std::sort(subdirs.begin(), subdirs.end());
    if (subdirs.empty()) throw FormatError("frame directory " + dir.string() + " holds no frame_* entries");
    std::vector<ExchangeFrame> frames;
    for (const auto& s : subdirs) frames.push_back(read_exchange_frame(s));
    std::stable_sort(frames.begin(), frames.end(),
                     [](const ExchangeFrame& a, const ExchangeFrame& b) { return a.manifest.frame_id < b.manifest.frame_id; });
    for (std::size_t i = 1; i < frames.size(); ++i)
        if (frames[i].manifest.frame_id == frames[i - 1].manifest.frame_id)
            throw FormatError("frame directory holds duplicate frame id " + std::to_string(frames[i].manifest.frame_id));
    return frames;
}

}  // namespace pw::io
