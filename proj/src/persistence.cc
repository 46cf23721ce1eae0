#include "v2vssc/persistence.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>

#include "json.hpp"

namespace v2vssc {

namespace {

constexpr std::uint16_t kGridVersion = 1;

using nlohmann::json;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

json Vec3(const Point3& p) { return json::array({p.x, p.y, p.z}); }

Point3 ReadVec3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw std::invalid_argument("expected [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json PoseJson(const Pose6D& p) {
  return {{"x", p.x}, {"y", p.y}, {"z", p.z},
          {"yaw", p.yaw}, {"pitch", p.pitch}, {"roll", p.roll}};
}

Pose6D ReadPose(const json& j) {
  return {j.at("x").get<double>(),   j.at("y").get<double>(),
          j.at("z").get<double>(),   j.at("yaw").get<double>(),
          j.at("pitch").get<double>(), j.at("roll").get<double>()};
}

json ShapeJson(const Shape& s) {
  return std::visit(
      Overloaded{
          [](const Box& b) {
            return json{{"type", "box"},
                        {"params", {{"center", Vec3(b.center)},
                                    {"dims", Vec3(b.dims)},
                                    {"yaw", b.yaw}}}};
          },
          [](const Cylinder& c) {
            return json{{"type", "cylinder"},
                        {"params", {{"center", Vec3(c.center)},
                                    {"radius", c.radius},
                                    {"height", c.height}}}};
          },
          [](const Ellipsoid& e) {
            return json{{"type", "ellipsoid"},
                        {"params", {{"center", Vec3(e.center)},
                                    {"radii", Vec3(e.radii)}}}};
          }},
      s);
}

Shape ReadShape(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  const json& p = j.at("params");
  if (type == "box") {
    return Box{ReadVec3(p.at("center")), ReadVec3(p.at("dims")),
               p.at("yaw").get<double>()};
  }
  if (type == "cylinder") {
    return Cylinder{ReadVec3(p.at("center")), p.at("radius").get<double>(),
                    p.at("height").get<double>()};
  }
  if (type == "ellipsoid") {
    return Ellipsoid{ReadVec3(p.at("center")), ReadVec3(p.at("radii"))};
  }
  throw std::invalid_argument("unknown shape type \"" + type + "\"");
}

// Shortest decimal that round-trips the float, read back as a double, so
// 0.4f comes back as 0.4 rather than 0.4000000059604645.
double WidenFloat(float f) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), f);
  double d = f;
  std::from_chars(buf, res.ptr, d);
  return d;
}

}  // namespace

std::vector<std::uint8_t> ReadFileBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path + " for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void WriteFileBytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path);
}

std::vector<std::uint8_t> EncodeGrid(const SemanticGrid& g) {
  std::vector<std::uint8_t> out;
  ByteWriter w(&out);
  const GridSpec& s = g.spec;
  w.PutBytes("VSSC");
  w.Put<std::uint16_t>(kGridVersion);
  w.Put<std::uint16_t>(static_cast<std::uint16_t>(s.nx));
  w.Put<std::uint16_t>(static_cast<std::uint16_t>(s.ny));
  w.Put<std::uint16_t>(static_cast<std::uint16_t>(s.nz));
  for (double v : {s.dx, s.dy, s.dz, s.x_min, s.y_min, s.z_min}) {
    w.Put<float>(static_cast<float>(v));
  }
  w.Put<std::uint8_t>(kNumLabels);
  for (int l = 0; l < kNumLabels; ++l) {
    w.PutBytes(LabelName(static_cast<SemanticLabel>(l)));
    w.Put<std::uint8_t>(0);
  }
  std::size_t i = 0;
  while (i < g.labels.size()) {
    std::size_t j = i;
    while (j < g.labels.size() && g.labels[j] == g.labels[i] &&
           j - i < std::numeric_limits<std::uint32_t>::max()) {
      ++j;
    }
    w.Put<std::uint8_t>(static_cast<std::uint8_t>(g.labels[i]));
    w.Put<std::uint32_t>(static_cast<std::uint32_t>(j - i));
    i = j;
  }
  return out;
}

SemanticGrid DecodeGrid(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes);
  r.ExpectMagic("VSSC");
  r.ExpectVersion(kGridVersion);
  GridSpec spec;
  const std::size_t dims_at = r.pos();
  spec.nx = r.Get<std::uint16_t>("nx");
  spec.ny = r.Get<std::uint16_t>("ny");
  spec.nz = r.Get<std::uint16_t>("nz");
  if (spec.nx == 0 || spec.ny == 0 || spec.nz == 0) {
    throw ParseError(ParseError::Kind::kInvalidValue, dims_at, "zero grid dimension");
  }
  spec.dx = WidenFloat(r.Get<float>("voxel size"));
  spec.dy = WidenFloat(r.Get<float>("voxel size"));
  spec.dz = WidenFloat(r.Get<float>("voxel size"));
  spec.x_min = WidenFloat(r.Get<float>("origin"));
  spec.y_min = WidenFloat(r.Get<float>("origin"));
  spec.z_min = WidenFloat(r.Get<float>("origin"));

  const int table_size = r.Get<std::uint8_t>("label table count");
  std::vector<SemanticLabel> table;
  for (int i = 0; i < table_size; ++i) {
    const std::size_t at = r.pos();
    const std::string name = r.GetCString("label name");
    const auto label = LabelFromName(name);
    if (!label) {
      throw ParseError(ParseError::Kind::kInvalidValue, at,
                       "unknown label name \"" + name + "\"");
    }
    table.push_back(*label);
  }

  SemanticGrid g(spec);
  const std::size_t n = spec.num_voxels();
  std::size_t filled = 0;
  while (filled < n) {
    const std::size_t at = r.pos();
    const auto code = r.Get<std::uint8_t>("run label");
    const auto run = r.Get<std::uint32_t>("run length");
    if (code >= table.size()) {
      throw ParseError(ParseError::Kind::kInvalidValue, at,
                       "label code " + std::to_string(code) + " outside table");
    }
    if (run == 0 || run > n - filled) {
      throw ParseError(ParseError::Kind::kInvalidValue, at, "bad run length");
    }
    std::fill_n(g.labels.begin() + static_cast<std::ptrdiff_t>(filled), run,
                table[code]);
    filled += run;
  }
  if (r.remaining() != 0) {
    throw ParseError(ParseError::Kind::kInvalidValue, r.pos(), "trailing bytes");
  }
  return g;
}

void SaveGrid(const SemanticGrid& g, const std::string& path) {
  WriteFileBytes(path, EncodeGrid(g));
}

SemanticGrid LoadGrid(const std::string& path) { return DecodeGrid(ReadFileBytes(path)); }

std::string SceneToJson(const Scene& s) {
  json j;
  j["seed"] = s.seed;
  j["clock"] = s.clock();
  json objects = json::array();
  for (const SceneObject& o : s.objects) {
    objects.push_back({{"kind", std::string(LabelName(o.kind))},
                       {"shape", ShapeJson(o.shape)},
                       {"velocity", json::array({o.vx, o.vy})}});
  }
  j["objects"] = std::move(objects);
  json agents = json::array();
  for (const AgentSpec& a : s.agents) {
    agents.push_back({{"id", a.id}, {"host", a.host},
                      {"sensor_offset", PoseJson(a.sensor_offset)}});
  }
  j["agents"] = std::move(agents);
  return j.dump(2) + "\n";
}

Scene SceneFromJson(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(ParseError::Kind::kInvalidValue, e.byte, e.what());
  }
  try {
    Scene s;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.clock_ns = std::llround(j.at("clock").get<double>() * 1e9);
    for (const json& o : j.at("objects")) {
      const auto kind = LabelFromName(o.at("kind").get<std::string>());
      if (!kind || *kind == SemanticLabel::kEmpty) {
        throw std::invalid_argument("bad object kind " + o.at("kind").dump());
      }
      const json& vel = o.at("velocity");
      s.objects.push_back({*kind, ReadShape(o.at("shape")),
                           vel.at(0).get<double>(), vel.at(1).get<double>()});
    }
    std::set<int> ids;
    for (const json& a : j.at("agents")) {
      AgentSpec agent{a.at("id").get<int>(), ReadPose(a.at("sensor_offset")),
                      a.at("host").get<std::size_t>()};
      if (!ids.insert(agent.id).second) {
        throw std::invalid_argument("duplicate agent id " + std::to_string(agent.id));
      }
      if (agent.host >= s.objects.size() ||
          s.objects[agent.host].kind != SemanticLabel::kCar ||
          !std::holds_alternative<Box>(s.objects[agent.host].shape)) {
        throw std::invalid_argument("agent " + std::to_string(agent.id) +
                                    " host is not a car box");
      }
      s.agents.push_back(agent);
    }
    return s;
  } catch (const json::exception& e) {
    throw ParseError(ParseError::Kind::kInvalidValue, 0,
                     std::string("scene document: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ParseError(ParseError::Kind::kInvalidValue, 0,
                     std::string("scene document: ") + e.what());
  }
}

void SaveScene(const Scene& s, const std::string& path) {
  const std::string text = SceneToJson(s);
  WriteFileBytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

Scene LoadScene(const std::string& path) {
  const auto bytes = ReadFileBytes(path);
  return SceneFromJson(std::string(bytes.begin(), bytes.end()));
}

}  // namespace v2vssc
