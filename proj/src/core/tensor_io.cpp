#include "tensor_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <Eigen/Dense>

namespace geco {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Io: return "IoError";
    case ErrorKind::Format: return "FormatError";
    case ErrorKind::Validation: return "ValidationError";
    case ErrorKind::Schema: return "SchemaError";
    case ErrorKind::Domain: return "DomainError";
    case ErrorKind::Shape: return "ShapeError";
    case ErrorKind::MissingInput: return "MissingInputError";
    case ErrorKind::Solve: return "SolveError";
    case ErrorKind::Spec: return "SpecError";
    case ErrorKind::BehindCamera: return "BehindCameraError";
  }
  return "Error";
}

namespace {

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

uint32_t get_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

void put_f32(std::vector<uint8_t>& out, float f) { put_u32(out, std::bit_cast<uint32_t>(f)); }

float get_f32(const uint8_t* p) { return std::bit_cast<float>(get_u32(p)); }

}  // namespace

std::vector<uint8_t> encode_raster(const Raster& r) {
  std::vector<uint8_t> out;
  out.reserve(kRasterHeaderSize + r.values().size() * 4 + (r.has_mask() ? r.pixel_count() : 0));
  out.insert(out.end(), kRasterMagic, kRasterMagic + 4);
  put_u32(out, r.width());
  put_u32(out, r.height());
  put_u32(out, r.channels());
  out.push_back(r.has_mask() ? 1 : 0);
  for (float v : r.values()) put_f32(out, v);
  if (r.has_mask())
    for (uint8_t m : r.mask()) out.push_back(m ? 1 : 0);
  return out;
}

Raster decode_raster(std::span<const uint8_t> bytes, const std::string& origin) {
  if (bytes.size() < kRasterHeaderSize)
    throw FormatError(origin + ": truncated GCR1 header (" + std::to_string(bytes.size()) +
                      " bytes)");
  if (std::memcmp(bytes.data(), kRasterMagic, 4) != 0)
    throw FormatError(origin + ": bad magic, expected \"GCR1\"");
  const uint32_t w = get_u32(bytes.data() + 4);
  const uint32_t h = get_u32(bytes.data() + 8);
  const uint32_t c = get_u32(bytes.data() + 12);
  const uint8_t has_mask = bytes[16];
  if (c == 0) throw FormatError(origin + ": channel count is zero");
  if (has_mask > 1) throw FormatError(origin + ": has_mask flag must be 0 or 1");

  const uint64_t pixels = static_cast<uint64_t>(w) * h;
  const uint64_t values = pixels * c;
  const uint64_t expected = kRasterHeaderSize + values * 4 + (has_mask ? pixels : 0);
  if (bytes.size() != expected)
    throw FormatError(origin + ": payload size " + std::to_string(bytes.size()) +
                      " bytes, header declares " + std::to_string(expected));

  std::vector<float> data(values);
  const uint8_t* p = bytes.data() + kRasterHeaderSize;
  for (uint64_t i = 0; i < values; ++i, p += 4) data[i] = get_f32(p);
  std::vector<uint8_t> mask;
  if (has_mask) {
    mask.assign(p, p + pixels);
    for (uint64_t i = 0; i < pixels; ++i)
      if (mask[i] > 1) throw FormatError(origin + ": mask byte must be 0 or 1");
  }
  Raster r(w, h, c, std::move(data), std::move(mask));
  for (size_t i = 0; i < r.pixel_count(); ++i) {
    if (!r.valid(i)) continue;
    for (uint32_t k = 0; k < c; ++k)
      if (!std::isfinite(r.at(i, k)))
        throw ValidationError(origin + ": non-finite value at pixel (" +
                              std::to_string(i % w) + ", " + std::to_string(i / w) +
                              ") under a true mask");
  }
  return r;
}

std::vector<uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    if (!fs::exists(path)) throw MissingInputError(path.string() + ": file not found");
    throw IoError(path.string() + ": cannot open for reading");
  }
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError(path.string() + ": read failed");
  return bytes;
}

void write_file_atomic(const fs::path& path, std::span<const uint8_t> bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path.string() + ": cannot open for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError(path.string() + ": write failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError(path.string() + ": rename failed: " + ec.message());
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  write_file_atomic(path, std::span(reinterpret_cast<const uint8_t*>(text.data()), text.size()));
}

void write_raster(const Raster& r, const fs::path& path) { write_file_atomic(path, encode_raster(r)); }

Raster read_raster(const fs::path& path) { return decode_raster(read_file(path), path.string()); }

// ---------------------------------------------------------------------------
// Manifest parsing
// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

class Node {
 public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

  const json& raw() const { return j_; }
  const std::string& path() const { return path_; }

  void expect_object() const {
    if (!j_.is_object()) throw SchemaError(path_ + ": expected an object");
  }
  void allow_only(std::initializer_list<const char*> keys) const {
    expect_object();
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [k, _] : j_.items())
      if (!allowed.count(k)) throw SchemaError(join(k) + ": unexpected field");
  }
  bool has(const char* key) const { return j_.contains(key); }
  Node field(const char* key) const {
    expect_object();
    auto it = j_.find(key);
    if (it == j_.end()) throw SchemaError(join(key) + ": missing required field");
    return Node(*it, join(key));
  }
  Node element(size_t i) const { return Node(j_.at(i), path_ + "[" + std::to_string(i) + "]"); }

  std::string string() const {
    if (!j_.is_string()) throw SchemaError(path_ + ": expected a string");
    return j_.get<std::string>();
  }
  double number() const {
    if (!j_.is_number()) throw SchemaError(path_ + ": expected a number");
    double v = j_.get<double>();
    if (!std::isfinite(v)) throw SchemaError(path_ + ": expected a finite number");
    return v;
  }
  int integer() const {
    if (!j_.is_number_integer()) throw SchemaError(path_ + ": expected an integer");
    return j_.get<int>();
  }
  size_t array_size() const {
    if (!j_.is_array()) throw SchemaError(path_ + ": expected an array");
    return j_.size();
  }

 private:
  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& j_;
  std::string path_;
};

WorldFromCamera parse_pose(const Node& n) {
  if (n.array_size() != 3) throw SchemaError(n.path() + ": pose must have 3 rows");
  WorldFromCamera pose;
  for (size_t r = 0; r < 3; ++r) {
    Node row = n.element(r);
    if (row.array_size() != 4) throw SchemaError(row.path() + ": pose row must have 4 entries");
    for (size_t c = 0; c < 3; ++c) pose.rotation(r, c) = row.element(c).number();
    pose.translation(r) = row.element(3).number();
  }
  return pose;
}

}  // namespace

void validate_rotation(const Mat3& r, const std::string& what) {
  const double ortho = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (!(ortho <= kRotationTolerance))
    throw ValidationError(what + ": rotation is not orthonormal (max |R^T R - I| = " +
                          std::to_string(ortho) + ")");
  const double det = r.determinant();
  if (!(std::abs(det - 1.0) <= kRotationTolerance))
    throw ValidationError(what + ": rotation determinant is " + std::to_string(det) +
                          ", expected +1");
}

ClipManifest parse_manifest(const nlohmann::json& doc, const fs::path& base_dir) {
  Node root(doc, "");
  root.allow_only({"version", "clip_id", "frame_count", "fps", "frames", "flows", "ground_truth",
                   "metadata"});
  if (root.has("version") && root.field("version").integer() != 1)
    throw SchemaError("version: unsupported manifest version");

  ClipManifest m;
  m.base_dir = base_dir;
  m.clip_id = root.field("clip_id").string();
  m.frame_count = root.field("frame_count").integer();
  if (m.frame_count < 1) throw SchemaError("frame_count: must be at least 1");
  m.fps = root.field("fps").number();
  if (!(m.fps > 0)) throw SchemaError("fps: must be positive");

  Node frames = root.field("frames");
  const size_t nf = frames.array_size();
  std::set<int> seen;
  for (size_t i = 0; i < nf; ++i) {
    Node f = frames.element(i);
    f.allow_only({"frame_index", "depth_path", "intrinsics", "pose"});
    FrameEntry e;
    e.frame_index = f.field("frame_index").integer();
    if (e.frame_index < 0 || e.frame_index >= m.frame_count)
      throw SchemaError(f.path() + ".frame_index: " + std::to_string(e.frame_index) +
                        " outside [0, frame_count)");
    if (!seen.insert(e.frame_index).second)
      throw SchemaError(f.path() + ".frame_index: duplicate frame_index " +
                        std::to_string(e.frame_index));
    e.depth_path = base_dir / f.field("depth_path").string();
    Node k = f.field("intrinsics");
    k.allow_only({"fx", "fy", "cx", "cy"});
    e.intrinsics = {k.field("fx").number(), k.field("fy").number(), k.field("cx").number(),
                    k.field("cy").number()};
    if (!(e.intrinsics.fx > 0) || !(e.intrinsics.fy > 0))
      throw SchemaError(k.path() + ": focal lengths must be positive");
    e.pose = parse_pose(f.field("pose"));
    m.frames.push_back(std::move(e));
  }
  if (static_cast<int>(m.frames.size()) != m.frame_count)
    throw SchemaError("frames: expected " + std::to_string(m.frame_count) + " entries, found " +
                      std::to_string(m.frames.size()));
  std::sort(m.frames.begin(), m.frames.end(),
            [](const FrameEntry& a, const FrameEntry& b) { return a.frame_index < b.frame_index; });
  for (const auto& f : m.frames)
    validate_rotation(f.pose.rotation, "frame " + std::to_string(f.frame_index));

  Node flows = root.field("flows");
  std::set<std::pair<int, int>> pairs;
  for (size_t i = 0, n = flows.array_size(); i < n; ++i) {
    Node f = flows.element(i);
    f.allow_only({"from_index", "to_index", "flow_path"});
    FlowEntry e;
    e.from_index = f.field("from_index").integer();
    e.to_index = f.field("to_index").integer();
    e.flow_path = base_dir / f.field("flow_path").string();
    if (!seen.count(e.from_index) || !seen.count(e.to_index))
      throw SchemaError(f.path() + ": references a frame index that does not exist");
    if (e.from_index == e.to_index) throw SchemaError(f.path() + ": from_index equals to_index");
    if (!pairs.insert({e.from_index, e.to_index}).second)
      throw SchemaError(f.path() + ": duplicate flow pair");
    m.flows.push_back(std::move(e));
  }

  if (root.has("ground_truth")) {
    Node gts = root.field("ground_truth");
    for (size_t i = 0, n = gts.array_size(); i < n; ++i) {
      Node g = gts.element(i);
      g.allow_only({"frame_index", "displacement_path", "mask_path"});
      GroundTruthEntry e;
      e.frame_index = g.field("frame_index").integer();
      if (!seen.count(e.frame_index))
        throw SchemaError(g.path() + ".frame_index: references a frame index that does not exist");
      if (g.has("displacement_path"))
        e.displacement_path = base_dir / g.field("displacement_path").string();
      if (g.has("mask_path")) e.mask_path = base_dir / g.field("mask_path").string();
      if (!e.displacement_path && !e.mask_path)
        throw SchemaError(g.path() + ": needs displacement_path and/or mask_path");
      m.ground_truth.push_back(std::move(e));
    }
  }
  if (root.has("metadata")) {
    if (!doc["metadata"].is_object()) throw SchemaError("metadata: expected an object");
    m.metadata = doc["metadata"];
  }
  return m;
}

ClipManifest load_manifest(const fs::path& path) {
  auto bytes = read_file(path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(path.string() + ": not valid JSON: " + e.what());
  }
  try {
    return parse_manifest(doc, path.parent_path());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Schema) throw SchemaError(path.string() + ": " + e.what());
    if (e.kind() == ErrorKind::Validation) throw ValidationError(path.string() + ": " + e.what());
    throw;
  }
}

// ---------------------------------------------------------------------------
// Clip loading / writing
// ---------------------------------------------------------------------------

void validate_clip(const Clip& clip) {
  for (int t = 0; t < clip.frame_count(); ++t) {
    const Field& d = clip.frames[t].depth;
    if (d.channels() != 1)
      throw ShapeError("frame " + std::to_string(t) + ": depth raster must have 1 channel");
    for (size_t i = 0; i < d.pixel_count(); ++i)
      if (d.valid(i) && !(d.at(i) > 0.0))
        throw ValidationError("frame " + std::to_string(t) + ": non-positive depth at pixel (" +
                              std::to_string(i % d.width()) + ", " +
                              std::to_string(i / d.width()) + ")");
  }
  for (const auto& [key, f] : clip.flows) {
    const auto [a, b] = key;
    if (a < 0 || a >= clip.frame_count() || b < 0 || b >= clip.frame_count() || a == b)
      throw SchemaError("flow (" + std::to_string(a) + ", " + std::to_string(b) +
                        "): bad frame indices");
    if (f.channels() != 2)
      throw ShapeError("flow (" + std::to_string(a) + ", " + std::to_string(b) +
                       "): must have 2 channels");
    if (!f.same_shape(clip.frames[a].depth))
      throw ShapeError("flow (" + std::to_string(a) + ", " + std::to_string(b) +
                       "): resolution differs from the depth of frame " + std::to_string(a));
  }
  for (const auto& [t, gt] : clip.ground_truth) {
    const Field& d = clip.frames.at(t).depth;
    if (gt.displacement && (gt.displacement->channels() != 2 || !gt.displacement->same_shape(d)))
      throw ShapeError("ground truth displacement of frame " + std::to_string(t) +
                       ": shape mismatch");
    if (gt.mask && (gt.mask->width() != d.width() || gt.mask->height() != d.height()))
      throw ShapeError("ground truth mask of frame " + std::to_string(t) + ": shape mismatch");
  }
}

namespace {

Mask mask_from_raster(const Raster& r) {
  Mask m(r.width(), r.height(), false);
  for (size_t i = 0; i < m.pixel_count(); ++i) m.set(i, r.valid(i) && r.at(i) > 0.5f);
  return m;
}

Raster raster_from_mask(const Mask& m) {
  Raster r(m.width(), m.height(), 1);
  for (size_t i = 0; i < m.pixel_count(); ++i) r.at(i) = m[i] ? 1.0f : 0.0f;
  return r;
}

std::string frame_name(const char* prefix, int t) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%05d.gcr", prefix, t);
  return buf;
}

std::string flow_name(int a, int b) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "flow_%05d_%05d.gcr", a, b);
  return buf;
}

}  // namespace

Clip load_clip(const ClipManifest& m) {
  Clip clip;
  clip.clip_id = m.clip_id;
  clip.fps = m.fps;
  clip.metadata = m.metadata;
  clip.frames.resize(m.frames.size());
  for (const auto& f : m.frames) {
    Frame& fr = clip.frames[f.frame_index];
    fr.intrinsics = f.intrinsics;
    fr.pose = f.pose;
    fr.depth = grid_cast<double>(read_raster(f.depth_path));
  }
  for (const auto& f : m.flows)
    clip.flows.emplace(std::make_pair(f.from_index, f.to_index),
                       grid_cast<double>(read_raster(f.flow_path)));
  for (const auto& g : m.ground_truth) {
    GroundTruth& gt = clip.ground_truth[g.frame_index];
    if (g.displacement_path) gt.displacement = grid_cast<double>(read_raster(*g.displacement_path));
    if (g.mask_path) gt.mask = mask_from_raster(read_raster(*g.mask_path));
  }
  validate_clip(clip);
  return clip;
}

Clip load_clip(const fs::path& manifest_path) { return load_clip(load_manifest(manifest_path)); }

nlohmann::ordered_json manifest_json(const Clip& clip) {
  using oj = nlohmann::ordered_json;
  oj doc;
  doc["version"] = 1;
  doc["clip_id"] = clip.clip_id;
  doc["frame_count"] = clip.frame_count();
  doc["fps"] = clip.fps;
  oj frames = oj::array();
  for (int t = 0; t < clip.frame_count(); ++t) {
    const Frame& f = clip.frames[t];
    oj pose = oj::array();
    for (int r = 0; r < 3; ++r)
      pose.push_back({f.pose.rotation(r, 0), f.pose.rotation(r, 1), f.pose.rotation(r, 2),
                      f.pose.translation(r)});
    frames.push_back({{"frame_index", t},
                      {"depth_path", frame_name("depth", t)},
                      {"intrinsics",
                       {{"fx", f.intrinsics.fx},
                        {"fy", f.intrinsics.fy},
                        {"cx", f.intrinsics.cx},
                        {"cy", f.intrinsics.cy}}},
                      {"pose", pose}});
  }
  doc["frames"] = frames;
  oj flows = oj::array();
  for (const auto& [key, _] : clip.flows)
    flows.push_back(
        {{"from_index", key.first}, {"to_index", key.second}, {"flow_path", flow_name(key.first, key.second)}});
  doc["flows"] = flows;
  if (!clip.ground_truth.empty()) {
    oj gts = oj::array();
    for (const auto& [t, gt] : clip.ground_truth) {
      oj e = {{"frame_index", t}};
      if (gt.displacement) e["displacement_path"] = frame_name("gt_displacement", t);
      if (gt.mask) e["mask_path"] = frame_name("gt_mask", t);
      gts.push_back(e);
    }
    doc["ground_truth"] = gts;
  }
  if (clip.metadata.is_object()) doc["metadata"] = clip.metadata;
  return doc;
}

fs::path write_clip(const Clip& clip, const fs::path& dir) {
  validate_clip(clip);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir.string() + ": cannot create directory: " + ec.message());
  for (int t = 0; t < clip.frame_count(); ++t)
    write_raster(grid_cast<float>(clip.frames[t].depth), dir / frame_name("depth", t));
  for (const auto& [key, f] : clip.flows)
    write_raster(grid_cast<float>(f), dir / flow_name(key.first, key.second));
  for (const auto& [t, gt] : clip.ground_truth) {
    if (gt.displacement)
      write_raster(grid_cast<float>(*gt.displacement), dir / frame_name("gt_displacement", t));
    if (gt.mask) write_raster(raster_from_mask(*gt.mask), dir / frame_name("gt_mask", t));
  }
  const fs::path manifest = dir / "manifest.json";
  write_text_atomic(manifest, manifest_json(clip).dump(2) + "\n");
  return manifest;
}

}  // namespace geco
