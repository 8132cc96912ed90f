#include "gsplat/scene_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace gs::io {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Color transfer

float srgb_to_linear(float v) {
    return v <= 0.04045f ? v / 12.92f : std::pow((v + 0.055f) / 1.055f, 2.4f);
}

float linear_to_srgb(float v) {
    return v <= 0.0031308f ? v * 12.92f : 1.055f * std::pow(v, 1.0f / 2.4f) - 0.055f;
}

namespace {

const std::array<float, 256>& srgb_table() {
    static const std::array<float, 256> table = [] {
        std::array<float, 256> t{};
        for (int i = 0; i < 256; ++i)
            t[std::size_t(i)] = srgb_to_linear(static_cast<float>(i) / 255.0f);
        return t;
    }();
    return table;
}

} // namespace

float decode_srgb8(std::uint8_t code) { return srgb_table()[code]; }

std::uint8_t encode_srgb8(float linear) {
    if (!(linear > 0.0f))
        return 0;
    if (linear >= 1.0f)
        return 255;
    const float s = linear_to_srgb(linear) * 255.0f;
    return static_cast<std::uint8_t>(std::clamp(std::lround(s), 0L, 255L));
}

// ---------------------------------------------------------------------------
// File helpers

std::vector<std::uint8_t> read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorKind::Io, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

void write_file_atomic(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw Error(ErrorKind::Io, "cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out)
            throw Error(ErrorKind::Io, "short write to " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec)
        throw Error(ErrorKind::Io, "cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

void write_text_atomic(const fs::path& path, const std::string& text) {
    write_file_atomic(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

// ---------------------------------------------------------------------------
// PPM

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string ppm_token(const std::vector<std::uint8_t>& b, std::size_t& pos) {
    while (pos < b.size()) {
        if (b[pos] == '#') {
            while (pos < b.size() && b[pos] != '\n')
                ++pos;
        } else if (std::isspace(b[pos])) {
            ++pos;
        } else {
            break;
        }
    }
    std::string tok;
    while (pos < b.size() && !std::isspace(b[pos]) && b[pos] != '#')
        tok.push_back(static_cast<char>(b[pos++]));
    return tok;
}

int ppm_int(const std::vector<std::uint8_t>& b, std::size_t& pos, const fs::path& path, const char* what) {
    const std::string tok = ppm_token(b, pos);
    try {
        std::size_t used = 0;
        const int v = std::stoi(tok, &used);
        if (used != tok.size() || v <= 0)
            throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw Error(ErrorKind::Format, path.string() + ": bad PPM " + what + " '" + tok + "'");
    }
}

} // namespace

Rgb8Image read_ppm_bytes(const fs::path& path) {
    const auto b = read_file(path);
    std::size_t pos = 0;
    if (ppm_token(b, pos) != "P6")
        throw Error(ErrorKind::Format, path.string() + ": bad magic, expected P6");
    Rgb8Image img;
    img.width = ppm_int(b, pos, path, "width");
    img.height = ppm_int(b, pos, path, "height");
    if (ppm_int(b, pos, path, "maxval") != 255)
        throw Error(ErrorKind::Format, path.string() + ": only maxval 255 is supported");
    if (pos >= b.size() || !std::isspace(b[pos]))
        throw Error(ErrorKind::Format, path.string() + ": truncated header");
    ++pos;
    const std::size_t need = std::size_t(img.width) * img.height * 3;
    if (b.size() - pos < need)
        throw Error(ErrorKind::Format, path.string() + ": truncated payload (" + std::to_string(b.size() - pos) +
                                           " of " + std::to_string(need) + " bytes)");
    img.bytes.assign(b.begin() + static_cast<std::ptrdiff_t>(pos),
                     b.begin() + static_cast<std::ptrdiff_t>(pos + need));
    return img;
}

void write_ppm_bytes(const Rgb8Image& img, const fs::path& path) {
    const std::string header = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.bytes.begin(), img.bytes.end());
    write_file_atomic(path, out);
}

Image<float> decode_image(const Rgb8Image& img) {
    Image<float> out(img.width, img.height);
    for (std::size_t i = 0; i < img.bytes.size(); ++i)
        out.pixels.data()[i] = decode_srgb8(img.bytes[i]);
    return out;
}

Rgb8Image encode_image(const Image<float>& img) {
    Rgb8Image out{img.width, img.height, std::vector<std::uint8_t>(std::size_t(img.pixels.size()))};
    for (std::size_t i = 0; i < out.bytes.size(); ++i)
        out.bytes[i] = encode_srgb8(img.pixels.data()[i]);
    return out;
}

Image<float> load_ppm(const fs::path& path) { return decode_image(read_ppm_bytes(path)); }

void save_ppm(const Image<float>& img, const fs::path& path) { write_ppm_bytes(encode_image(img), path); }

// ---------------------------------------------------------------------------
// Manifest

Camera<double> frame_camera(const Frame& f, double scene_unit) {
    Camera<double> cam;
    cam.rotation = f.world_to_cam.topLeftCorner<3, 3>();
    cam.translation = f.world_to_cam.topRightCorner<3, 1>();
    cam.fx = f.fx;
    cam.fy = f.fy;
    cam.cx = f.cx;
    cam.cy = f.cy;
    cam.width = f.width;
    cam.height = f.height;
    cam.near_plane = 0.01 * scene_unit;
    cam.far_plane = 100.0 * scene_unit;
    return cam;
}

Frame camera_frame(const Camera<double>& cam, std::string image_path) {
    Frame f;
    f.image_path = std::move(image_path);
    f.world_to_cam.setIdentity();
    f.world_to_cam.topLeftCorner<3, 3>() = cam.rotation;
    f.world_to_cam.topRightCorner<3, 1>() = cam.translation;
    f.fx = cam.fx;
    f.fy = cam.fy;
    f.cx = cam.cx;
    f.cy = cam.cy;
    f.width = cam.width;
    f.height = cam.height;
    return f;
}

namespace {

[[noreturn]] void schema_error(const std::string& where, const std::string& msg) {
    throw Error(ErrorKind::Schema, where + ": " + msg);
}

double json_number(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key))
        schema_error(where, std::string("missing field '") + key + "'");
    if (!obj[key].is_number())
        schema_error(where, std::string("field '") + key + "' must be a number");
    return obj[key].get<double>();
}

int json_positive_int(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key))
        schema_error(where, std::string("missing field '") + key + "'");
    if (!obj[key].is_number_integer() || obj[key].get<long long>() <= 0)
        schema_error(where, std::string("field '") + key + "' must be a positive integer");
    return obj[key].get<int>();
}

Frame parse_frame(const json& jf, const std::string& where, bool require_image) {
    if (!jf.is_object())
        schema_error(where, "frame must be an object");
    Frame f;
    if (jf.contains("image_path")) {
        if (!jf["image_path"].is_string())
            schema_error(where, "field 'image_path' must be a string");
        f.image_path = jf["image_path"].get<std::string>();
    } else if (require_image) {
        schema_error(where, "missing field 'image_path'");
    }

    if (!jf.contains("world_to_cam"))
        schema_error(where, "missing field 'world_to_cam'");
    const auto& m = jf["world_to_cam"];
    if (!m.is_array() || m.size() != 16)
        schema_error(where, "field 'world_to_cam' must be an array of 16 numbers");
    for (int i = 0; i < 16; ++i) {
        if (!m[std::size_t(i)].is_number())
            schema_error(where, "field 'world_to_cam' must be an array of 16 numbers");
        f.world_to_cam(i / 4, i % 4) = m[std::size_t(i)].get<double>();
    }
    if (f.world_to_cam.row(3) != Eigen::RowVector4d(0, 0, 0, 1))
        schema_error(where, "world_to_cam last row must be (0, 0, 0, 1)");
    const Mat3<double> r = f.world_to_cam.topLeftCorner<3, 3>();
    if (!is_rotation(r, kRotationTolerance))
        schema_error(where, "world_to_cam rotation block is not orthonormal with determinant 1 (tolerance 1e-4)");

    f.fx = json_number(jf, "fx", where);
    f.fy = json_number(jf, "fy", where);
    f.cx = json_number(jf, "cx", where);
    f.cy = json_number(jf, "cy", where);
    if (!(f.fx > 0) || !(f.fy > 0))
        schema_error(where, "focal lengths must be positive");
    f.width = json_positive_int(jf, "width", where);
    f.height = json_positive_int(jf, "height", where);
    return f;
}

nlohmann::ordered_json frame_to_json(const Frame& f) {
    nlohmann::ordered_json jf;
    if (!f.image_path.empty())
        jf["image_path"] = f.image_path;
    auto m = nlohmann::ordered_json::array();
    for (int i = 0; i < 16; ++i)
        m.push_back(f.world_to_cam(i / 4, i % 4));
    jf["world_to_cam"] = m;
    jf["fx"] = f.fx;
    jf["fy"] = f.fy;
    jf["cx"] = f.cx;
    jf["cy"] = f.cy;
    jf["width"] = f.width;
    jf["height"] = f.height;
    return jf;
}

std::string read_text(const fs::path& path) {
    const auto bytes = read_file(path);
    return std::string(bytes.begin(), bytes.end());
}

json parse_json(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::Schema, origin + ": invalid JSON: " + e.what());
    }
}

} // namespace

DatasetManifest parse_manifest(const std::string& text, const std::string& origin) {
    const json j = parse_json(text, origin);
    if (!j.is_object())
        schema_error(origin, "top level must be an object");
    DatasetManifest m;
    if (!j.contains("version") || !j["version"].is_number_integer())
        schema_error(origin, "missing integer field 'version'");
    m.version = j["version"].get<int>();
    if (m.version != 1)
        schema_error(origin, "unsupported version " + std::to_string(m.version));
    m.scene_unit = j.contains("scene_unit") ? json_number(j, "scene_unit", origin) : 1.0;
    if (!(m.scene_unit > 0))
        schema_error(origin, "scene_unit must be positive");
    if (!j.contains("frames") || !j["frames"].is_array())
        schema_error(origin, "missing array field 'frames'");
    for (std::size_t i = 0; i < j["frames"].size(); ++i)
        m.frames.push_back(parse_frame(j["frames"][i], origin + ": frames[" + std::to_string(i) + "]", true));
    return m;
}

DatasetManifest read_manifest(const fs::path& path) {
    if (!fs::exists(path))
        throw Error(ErrorKind::Io, "manifest not found: " + path.string());
    return parse_manifest(read_text(path), path.string());
}

std::string manifest_to_json(const DatasetManifest& m) {
    nlohmann::ordered_json j;
    j["version"] = m.version;
    j["scene_unit"] = m.scene_unit;
    auto frames = nlohmann::ordered_json::array();
    for (const auto& f : m.frames)
        frames.push_back(frame_to_json(f));
    j["frames"] = frames;
    return j.dump(2) + "\n";
}

void write_manifest(const DatasetManifest& m, const fs::path& path) { write_text_atomic(path, manifest_to_json(m)); }

Dataset load_manifest(const fs::path& path) {
    Dataset ds;
    ds.manifest = read_manifest(path);
    ds.root = path.parent_path();
    for (std::size_t i = 0; i < ds.manifest.frames.size(); ++i) {
        const auto& f = ds.manifest.frames[i];
        ds.cameras.push_back(frame_camera(f, ds.manifest.scene_unit).cast<float>());
        const fs::path img_path = ds.root / f.image_path;
        if (!fs::exists(img_path))
            throw Error(ErrorKind::Io, path.string() + ": frames[" + std::to_string(i) + "]: image not found: " +
                                           img_path.string());
        auto img = load_ppm(img_path);
        if (img.width != f.width || img.height != f.height)
            throw Error(ErrorKind::Schema, path.string() + ": frames[" + std::to_string(i) + "]: image is " +
                                               std::to_string(img.width) + "x" + std::to_string(img.height) +
                                               ", frame declares " + std::to_string(f.width) + "x" +
                                               std::to_string(f.height));
        ds.images.push_back(std::move(img));
    }
    return ds;
}

Camera<double> load_pose_file(const fs::path& path) {
    if (!fs::exists(path))
        throw Error(ErrorKind::Io, "pose file not found: " + path.string());
    const json j = parse_json(read_text(path), path.string());
    if (j.is_object() && j.contains("frames")) {
        if (!j["frames"].is_array() || j["frames"].empty())
            schema_error(path.string(), "pose file has no frames");
        const double unit = j.contains("scene_unit") ? json_number(j, "scene_unit", path.string()) : 1.0;
        return frame_camera(parse_frame(j["frames"][0], path.string() + ": frames[0]", false), unit);
    }
    return frame_camera(parse_frame(j, path.string(), false));
}

// ---------------------------------------------------------------------------
// PLY

namespace {

enum class PlyType { Int8, Uint8, Int16, Uint16, Int32, Uint32, Float32, Float64 };

PlyType ply_type(const std::string& s, const fs::path& path) {
    static const std::map<std::string, PlyType> types = {
        {"char", PlyType::Int8},     {"int8", PlyType::Int8},       {"uchar", PlyType::Uint8},
        {"uint8", PlyType::Uint8},   {"short", PlyType::Int16},     {"int16", PlyType::Int16},
        {"ushort", PlyType::Uint16}, {"uint16", PlyType::Uint16},   {"int", PlyType::Int32},
        {"int32", PlyType::Int32},   {"uint", PlyType::Uint32},     {"uint32", PlyType::Uint32},
        {"float", PlyType::Float32}, {"float32", PlyType::Float32}, {"double", PlyType::Float64},
        {"float64", PlyType::Float64}};
    const auto it = types.find(s);
    if (it == types.end())
        throw Error(ErrorKind::Format, path.string() + ": unknown PLY property type '" + s + "'");
    return it->second;
}

std::size_t ply_size(PlyType t) {
    switch (t) {
    case PlyType::Int8:
    case PlyType::Uint8: return 1;
    case PlyType::Int16:
    case PlyType::Uint16: return 2;
    case PlyType::Int32:
    case PlyType::Uint32:
    case PlyType::Float32: return 4;
    case PlyType::Float64: return 8;
    }
    return 0;
}

bool ply_is_integer(PlyType t) { return t != PlyType::Float32 && t != PlyType::Float64; }

struct PlyProperty {
    std::string name;
    PlyType type = PlyType::Float32;
    bool is_list = false;
    PlyType count_type = PlyType::Uint8;
};

struct PlyElement {
    std::string name;
    std::size_t count = 0;
    std::vector<PlyProperty> properties;
};

double read_binary_le(const std::uint8_t* p, PlyType t) {
    std::uint64_t raw = 0;
    for (std::size_t i = 0; i < ply_size(t); ++i)
        raw |= std::uint64_t(p[i]) << (8 * i);
    switch (t) {
    case PlyType::Int8: return static_cast<std::int8_t>(raw);
    case PlyType::Uint8: return static_cast<std::uint8_t>(raw);
    case PlyType::Int16: return static_cast<std::int16_t>(raw);
    case PlyType::Uint16: return static_cast<std::uint16_t>(raw);
    case PlyType::Int32: return static_cast<std::int32_t>(raw);
    case PlyType::Uint32: return static_cast<std::uint32_t>(raw);
    case PlyType::Float32: return std::bit_cast<float>(static_cast<std::uint32_t>(raw));
    case PlyType::Float64: return std::bit_cast<double>(raw);
    }
    return 0;
}

} // namespace

PointCloud load_ply_points(const fs::path& path) {
    const auto bytes = read_file(path);
    std::size_t pos = 0;
    auto next_line = [&]() -> std::string {
        if (pos >= bytes.size())
            throw Error(ErrorKind::Format, path.string() + ": PLY header ended without end_header");
        std::string line;
        while (pos < bytes.size() && bytes[pos] != '\n')
            line.push_back(static_cast<char>(bytes[pos++]));
        ++pos;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        return line;
    };

    if (next_line() != "ply")
        throw Error(ErrorKind::Format, path.string() + ": not a PLY file");
    bool binary = false;
    bool have_format = false;
    std::vector<PlyElement> elements;
    for (;;) {
        const std::string line = next_line();
        std::istringstream ss(line);
        std::string kw;
        ss >> kw;
        if (kw == "end_header")
            break;
        if (kw == "comment" || kw == "obj_info" || kw.empty())
            continue;
        if (kw == "format") {
            std::string fmt;
            ss >> fmt;
            if (fmt == "ascii")
                binary = false;
            else if (fmt == "binary_little_endian")
                binary = true;
            else
                throw Error(ErrorKind::Format, path.string() + ": unsupported PLY format '" + fmt + "'");
            have_format = true;
        } else if (kw == "element") {
            PlyElement e;
            ss >> e.name >> e.count;
            if (!ss)
                throw Error(ErrorKind::Format, path.string() + ": malformed element line '" + line + "'");
            elements.push_back(e);
        } else if (kw == "property") {
            if (elements.empty())
                throw Error(ErrorKind::Format, path.string() + ": property before any element");
            PlyProperty p;
            std::string t;
            ss >> t;
            if (t == "list") {
                std::string ct, it;
                ss >> ct >> it >> p.name;
                p.is_list = true;
                p.count_type = ply_type(ct, path);
                p.type = ply_type(it, path);
            } else {
                p.type = ply_type(t, path);
                ss >> p.name;
            }
            elements.back().properties.push_back(p);
        } else {
            throw Error(ErrorKind::Format, path.string() + ": unexpected header line '" + line + "'");
        }
    }
    if (!have_format)
        throw Error(ErrorKind::Format, path.string() + ": missing format line");

    const auto vertex_it = std::find_if(elements.begin(), elements.end(), [](auto& e) { return e.name == "vertex"; });
    if (vertex_it == elements.end())
        throw Error(ErrorKind::Format, path.string() + ": no vertex element");
    const auto& vprops = vertex_it->properties;
    auto find_prop = [&](const char* name) -> int {
        for (std::size_t i = 0; i < vprops.size(); ++i)
            if (vprops[i].name == name && !vprops[i].is_list)
                return static_cast<int>(i);
        throw Error(ErrorKind::Format, path.string() + ": vertex element is missing required property '" +
                                           std::string(name) + "'");
    };
    const std::array<int, 3> pos_idx = {find_prop("x"), find_prop("y"), find_prop("z")};
    const std::array<int, 3> col_idx = {find_prop("red"), find_prop("green"), find_prop("blue")};

    // Text tokens for ascii bodies.
    std::istringstream text;
    if (!binary)
        text.str(std::string(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end()));

    auto truncated = [&] { return Error(ErrorKind::Format, path.string() + ": truncated PLY body"); };
    auto read_value = [&](PlyType t) -> double {
        if (binary) {
            if (pos + ply_size(t) > bytes.size())
                throw truncated();
            const double v = read_binary_le(bytes.data() + pos, t);
            pos += ply_size(t);
            return v;
        }
        double v = 0;
        if (!(text >> v))
            throw truncated();
        return t == PlyType::Float32 ? double(float(v)) : v;
    };

    PointCloud cloud;
    for (auto& e : elements) {
        const bool is_vertex = &e == &*vertex_it;
        std::vector<double> values(e.properties.size());
        for (std::size_t n = 0; n < e.count; ++n) {
            for (std::size_t k = 0; k < e.properties.size(); ++k) {
                const auto& p = e.properties[k];
                if (p.is_list) {
                    const auto len = static_cast<std::size_t>(read_value(p.count_type));
                    for (std::size_t m = 0; m < len; ++m)
                        read_value(p.type);
                } else {
                    values[k] = read_value(p.type);
                }
            }
            if (!is_vertex)
                continue;
            Vec3<double> xyz, rgb;
            for (int a = 0; a < 3; ++a) {
                xyz[a] = values[std::size_t(pos_idx[std::size_t(a)])];
                const auto& cp = vprops[std::size_t(col_idx[std::size_t(a)])];
                const double c = values[std::size_t(col_idx[std::size_t(a)])];
                rgb[a] = ply_is_integer(cp.type) ? c / 255.0 : c;
            }
            cloud.positions.push_back(xyz);
            cloud.colors.push_back(rgb);
        }
        if (is_vertex)
            break;
    }
    return cloud;
}

void save_ply_points(const PointCloud& cloud, const fs::path& path, PlyFormat format) {
    if (cloud.positions.size() != cloud.colors.size())
        throw Error(ErrorKind::DimensionMismatch, "point cloud positions and colors differ in length");
    std::ostringstream hdr;
    hdr << "ply\nformat " << (format == PlyFormat::Ascii ? "ascii" : "binary_little_endian") << " 1.0\n"
        << "element vertex " << cloud.positions.size() << "\n"
        << "property float x\nproperty float y\nproperty float z\n"
        << "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
    const std::string h = hdr.str();
    std::vector<std::uint8_t> out(h.begin(), h.end());

    auto color_byte = [](double c) {
        return static_cast<std::uint8_t>(std::clamp(std::lround(c * 255.0), 0L, 255L));
    };
    for (std::size_t i = 0; i < cloud.positions.size(); ++i) {
        if (format == PlyFormat::Ascii) {
            char line[160];
            const auto& p = cloud.positions[i];
            const int n = std::snprintf(line, sizeof line, "%.9g %.9g %.9g %u %u %u\n", double(float(p.x())),
                                        double(float(p.y())), double(float(p.z())), unsigned(color_byte(cloud.colors[i].x())),
                                        unsigned(color_byte(cloud.colors[i].y())),
                                        unsigned(color_byte(cloud.colors[i].z())));
            out.insert(out.end(), line, line + n);
        } else {
            for (int a = 0; a < 3; ++a) {
                const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(cloud.positions[i][a]));
                for (int k = 0; k < 4; ++k)
                    out.push_back(static_cast<std::uint8_t>(bits >> (8 * k)));
            }
            for (int a = 0; a < 3; ++a)
                out.push_back(color_byte(cloud.colors[i][a]));
        }
    }
    write_file_atomic(path, out);
}

// ---------------------------------------------------------------------------
// Checkpoint

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int k = 0; k < 4; ++k)
        out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

void put_f32(std::vector<std::uint8_t>& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

std::uint32_t get_u32(const std::uint8_t* p) {
    return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}

float get_f32(const std::uint8_t* p) { return std::bit_cast<float>(get_u32(p)); }

std::size_t record_floats(int sh_degree) { return 11 + 3 * std::size_t(sh_coeff_count(sh_degree)); }

} // namespace

std::vector<std::uint8_t> encode_checkpoint(const Scenef& scene) {
    if (scene.sh_degree < 0 || scene.sh_degree > kMaxShDegree)
        throw Error(ErrorKind::UnsupportedDegree, "checkpoint requires SH degree in [0, 3]");
    std::vector<std::uint8_t> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
    put_u32(out, static_cast<std::uint32_t>(scene.size()));
    out.push_back(static_cast<std::uint8_t>(scene.sh_degree));
    out.insert(out.end(), 3, 0);
    out.reserve(16 + scene.size() * record_floats(scene.sh_degree) * 4);
    const int n = sh_coeff_count(scene.sh_degree);
    for (const auto& g : scene.gaussians) {
        for (int a = 0; a < 3; ++a) put_f32(out, g.mean[a]);
        for (int a = 0; a < 3; ++a) put_f32(out, g.log_scale[a]);
        for (int a = 0; a < 4; ++a) put_f32(out, g.quat[a]);
        put_f32(out, g.opacity_logit);
        for (int k = 0; k < n; ++k)
            for (int c = 0; c < 3; ++c) put_f32(out, g.sh(k, c));
    }
    return out;
}

Scenef decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 16 || !std::equal(std::begin(kCheckpointMagic), std::end(kCheckpointMagic), bytes.begin()))
        throw Error(ErrorKind::Format, "checkpoint: bad magic, expected GSPLAT01");
    const std::uint32_t count = get_u32(bytes.data() + 8);
    const int degree = bytes[12];
    if (degree > kMaxShDegree)
        throw Error(ErrorKind::UnsupportedDegree, "checkpoint: SH degree " + std::to_string(degree) + " > 3");
    if (bytes[13] != 0 || bytes[14] != 0 || bytes[15] != 0)
        throw Error(ErrorKind::Format, "checkpoint: reserved header bytes must be zero");
    const std::size_t expected = 16 + std::size_t(count) * record_floats(degree) * 4;
    if (bytes.size() != expected)
        throw Error(ErrorKind::Format, "checkpoint: size " + std::to_string(bytes.size()) + " does not match " +
                                           std::to_string(expected) + " for " + std::to_string(count) + " records");
    Scenef scene;
    scene.sh_degree = degree;
    scene.gaussians.resize(count);
    const int n = sh_coeff_count(degree);
    const std::uint8_t* p = bytes.data() + 16;
    auto next = [&p] {
        const float v = get_f32(p);
        p += 4;
        return v;
    };
    for (auto& g : scene.gaussians) {
        for (int a = 0; a < 3; ++a) g.mean[a] = next();
        for (int a = 0; a < 3; ++a) g.log_scale[a] = next();
        for (int a = 0; a < 4; ++a) g.quat[a] = next();
        g.opacity_logit = next();
        for (int k = 0; k < n; ++k)
            for (int c = 0; c < 3; ++c) g.sh(k, c) = next();
    }
    return scene;
}

void save_checkpoint(const Scenef& scene, const fs::path& path) { write_file_atomic(path, encode_checkpoint(scene)); }

Scenef load_checkpoint(const fs::path& path) {
    try {
        return decode_checkpoint(read_file(path));
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Io)
            throw;
        throw Error(e.kind(), path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Splat export

std::vector<std::uint8_t> encode_splat(const Scenef& scene) {
    std::vector<std::size_t> order(scene.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scene.gaussians[a].opacity_logit > scene.gaussians[b].opacity_logit;
    });

    auto unit_byte = [](double v) {
        return static_cast<std::uint8_t>(std::clamp(std::lround(std::clamp(v, 0.0, 1.0) * 255.0), 0L, 255L));
    };
    std::vector<std::uint8_t> out;
    out.reserve(scene.size() * 32);
    for (const std::size_t i : order) {
        const auto& g = scene.gaussians[i];
        for (int a = 0; a < 3; ++a) put_f32(out, g.mean[a]);
        for (int a = 0; a < 3; ++a) put_f32(out, std::exp(g.log_scale[a]));
        for (int c = 0; c < 3; ++c)
            out.push_back(unit_byte(sh::kC0 * double(g.sh(0, c)) + 0.5));
        out.push_back(unit_byte(sigmoid(double(g.opacity_logit))));
        const double qn = g.quat.cast<double>().norm();
        for (int a = 0; a < 4; ++a) {
            const double c = qn > kQuatNormFloor ? double(g.quat[a]) / qn : (a == 0 ? 1.0 : 0.0);
            out.push_back(static_cast<std::uint8_t>(std::clamp(std::lround(c * 128.0 + 128.0), 0L, 255L)));
        }
    }
    return out;
}

void export_splat(const Scenef& scene, const fs::path& path) { write_file_atomic(path, encode_splat(scene)); }

} // namespace gs::io
