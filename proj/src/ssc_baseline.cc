#include "v2vssc/ssc_baseline.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "v2vssc/binary_io.h"

namespace v2vssc {

namespace {

constexpr std::uint16_t kFeatureGridVersion = 1;

bool IsGroundLabel(SemanticLabel l) {
  return l == SemanticLabel::kRoad || l == SemanticLabel::kTerrain;
}

bool IsColumnFillLabel(SemanticLabel l) {
  return l == SemanticLabel::kBuilding || l == SemanticLabel::kVegetation ||
         l == SemanticLabel::kCar;
}

}  // namespace

double FeatureGrid::Hits(std::size_t voxel) const {
  double h = 0.0;
  for (int c = kRoadHits; c <= kPoleHits; ++c) h += at(c, voxel);
  return h;
}

double FeatureGrid::Passes(std::size_t voxel) const {
  return std::expm1(static_cast<double>(at(kLogPasses, voxel)));
}

std::vector<std::size_t> TraverseSegment(const Point3& origin, const Point3& end,
                                         const GridSpec& spec) {
  std::vector<std::size_t> out;
  const double mins[3] = {spec.x_min, spec.y_min, spec.z_min};
  const double sizes[3] = {spec.dx, spec.dy, spec.dz};
  const int dims[3] = {spec.nx, spec.ny, spec.nz};
  const double o[3] = {origin.x, origin.y, origin.z};
  const double e[3] = {end.x, end.y, end.z};

  // Work in continuous voxel coordinates; the segment is t in [0, 1].
  double g[3], gd[3];
  double t0 = 0.0, t1 = 1.0;
  for (int a = 0; a < 3; ++a) {
    g[a] = (o[a] - mins[a]) / sizes[a];
    gd[a] = (e[a] - o[a]) / sizes[a];
    if (std::abs(gd[a]) < 1e-15) {
      if (g[a] < 0.0 || g[a] >= dims[a]) return out;
      continue;
    }
    double ta = (0.0 - g[a]) / gd[a];
    double tb = (dims[a] - g[a]) / gd[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (!(t0 < t1)) return out;

  const auto end_voxel = WorldToVoxel(end, spec);
  const std::size_t end_index =
      end_voxel ? spec.Index(end_voxel->ix, end_voxel->iy, end_voxel->iz)
                : std::numeric_limits<std::size_t>::max();

  int idx[3], step[3];
  double t_max[3], t_delta[3];
  for (int a = 0; a < 3; ++a) {
    const double s = g[a] + gd[a] * t0;
    double f = std::floor(s);
    if (gd[a] < 0.0 && f == s) f -= 1.0;
    idx[a] = std::clamp(static_cast<int>(f), 0, dims[a] - 1);
    if (gd[a] > 0.0) {
      step[a] = 1;
      t_max[a] = (idx[a] + 1 - g[a]) / gd[a];
      t_delta[a] = 1.0 / gd[a];
    } else if (gd[a] < 0.0) {
      step[a] = -1;
      t_max[a] = (idx[a] - g[a]) / gd[a];
      t_delta[a] = -1.0 / gd[a];
    } else {
      step[a] = 0;
      t_max[a] = std::numeric_limits<double>::infinity();
      t_delta[a] = std::numeric_limits<double>::infinity();
    }
  }

  while (true) {
    const std::size_t cur = spec.Index(idx[0], idx[1], idx[2]);
    if (cur == end_index) break;
    out.push_back(cur);
    int axis = 0;
    if (t_max[1] < t_max[axis]) axis = 1;
    if (t_max[2] < t_max[axis]) axis = 2;
    if (t_max[axis] >= t1) break;
    idx[axis] += step[axis];
    if (idx[axis] < 0 || idx[axis] >= dims[axis]) break;
    t_max[axis] += t_delta[axis];
  }
  return out;
}

FeatureGrid ExtractFeatures(const LabeledPointCloud& cloud,
                            const Point3& sensor_origin, const GridSpec& spec) {
  FeatureGrid f(spec);
  const std::size_t n = spec.num_voxels();
  std::vector<std::uint32_t> passes(n, 0);
  std::vector<double> z_sum(n, 0.0);
  std::vector<std::uint32_t> hits(n, 0);

  for (const LabeledPoint& p : cloud.points) {
    if (p.label == SemanticLabel::kEmpty) continue;
    const Point3 q{p.x, p.y, p.z};
    for (std::size_t v : TraverseSegment(sensor_origin, q, spec)) ++passes[v];
    const auto vox = WorldToVoxel(q, spec);
    if (!vox) continue;
    const std::size_t v = spec.Index(vox->ix, vox->iy, vox->iz);
    f.at(ClassChannel(p.label), v) += 1.0f;
    ++hits[v];
    z_sum[v] += p.z;
  }
  for (std::size_t v = 0; v < n; ++v) {
    f.at(kLogHits, v) = static_cast<float>(std::log1p(static_cast<double>(hits[v])));
    f.at(kLogPasses, v) =
        static_cast<float>(std::log1p(static_cast<double>(passes[v])));
    f.at(kMeanHeight, v) =
        hits[v] > 0 ? static_cast<float>(z_sum[v] / hits[v]) : 0.0f;
  }
  return f;
}

void CompletionConfig::Validate() const {
  if (ground_fill_radius < 0 || !(hit_threshold >= 1.0)) {
    throw std::invalid_argument(
        "CompletionConfig: radius >= 0 and hit threshold >= 1 required");
  }
}

Prediction Predict(const FeatureGrid& f, const CompletionConfig& cfg) {
  cfg.Validate();
  const GridSpec& spec = f.spec;
  const std::size_t n = spec.num_voxels();
  Prediction out{SemanticGrid(spec), ConfidenceGrid(spec)};
  auto& labels = out.labels.labels;
  auto& conf = out.confidence.conf;

  std::vector<double> hits(n), passes(n);
  std::vector<bool> observed(n, false);
  for (std::size_t v = 0; v < n; ++v) {
    hits[v] = f.Hits(v);
    passes[v] = std::max(0.0, f.Passes(v));
    if (hits[v] < cfg.hit_threshold) continue;
    observed[v] = true;
    SemanticLabel best = SemanticLabel::kEmpty;
    double best_count = -1.0;
    for (SemanticLabel c : kSemanticClasses) {
      const double count = f.at(ClassChannel(c), v);
      if (count > best_count ||
          (count == best_count && PriorityRank(c) > PriorityRank(best))) {
        best = c;
        best_count = count;
      }
    }
    labels[v] = best;
    conf[v] = static_cast<float>(hits[v] / (hits[v] + passes[v] + 1.0));
  }

  // Ground fill over the bottom two layers from observed Road/Terrain voxels.
  const int radius = cfg.ground_fill_radius;
  for (int iz = 0; iz < std::min(2, spec.nz); ++iz) {
    for (int iy = 0; iy < spec.ny; ++iy) {
      for (int ix = 0; ix < spec.nx; ++ix) {
        const std::size_t v = spec.Index(ix, iy, iz);
        if (observed[v] || passes[v] > 0.0) continue;
        for (int d = 1; d <= radius; ++d) {
          bool road = false, terrain = false;
          float road_conf = 0.0f, terrain_conf = 0.0f;
          for (int ny = iy - d; ny <= iy + d; ++ny) {
            for (int nx = ix - d; nx <= ix + d; ++nx) {
              if (std::max(std::abs(nx - ix), std::abs(ny - iy)) != d) continue;
              if (!spec.Contains(nx, ny, iz)) continue;
              const std::size_t u = spec.Index(nx, ny, iz);
              if (!observed[u] || !IsGroundLabel(labels[u])) continue;
              if (labels[u] == SemanticLabel::kRoad) {
                road = true;
                road_conf = std::max(road_conf, conf[u]);
              } else {
                terrain = true;
                terrain_conf = std::max(terrain_conf, conf[u]);
              }
            }
          }
          if (road || terrain) {
            labels[v] = road ? SemanticLabel::kRoad : SemanticLabel::kTerrain;
            conf[v] = 0.5f * (road ? road_conf : terrain_conf);
            break;
          }
        }
      }
    }
  }

  // Vertical fill between same-label occupied voxels of a column.
  if (cfg.vertical_fill) {
    for (int iy = 0; iy < spec.ny; ++iy) {
      for (int ix = 0; ix < spec.nx; ++ix) {
        int last = -1;
        for (int iz = 0; iz < spec.nz; ++iz) {
          const std::size_t v = spec.Index(ix, iy, iz);
          if (labels[v] == SemanticLabel::kEmpty) continue;
          if (last >= 0 && iz - last > 1) {
            const std::size_t lv = spec.Index(ix, iy, last);
            if (labels[lv] == labels[v] && IsColumnFillLabel(labels[v])) {
              const float c = 0.5f * std::min(conf[lv], conf[v]);
              for (int z = last + 1; z < iz; ++z) {
                const std::size_t u = spec.Index(ix, iy, z);
                if (passes[u] > 0.0) continue;
                labels[u] = labels[v];
                conf[u] = c;
              }
            }
          }
          last = iz;
        }
      }
    }
  }

  for (std::size_t v = 0; v < n; ++v) {
    if (labels[v] != SemanticLabel::kEmpty) continue;
    conf[v] = static_cast<float>(passes[v] / (hits[v] + passes[v] + 1.0));
  }
  return out;
}

std::vector<std::uint8_t> EncodeFeatureGrid(const FeatureGrid& f) {
  std::vector<std::uint8_t> out;
  out.reserve(13 + f.data.size() * 4);
  ByteWriter w(&out);
  w.PutBytes("VFTG");
  w.Put<std::uint16_t>(kFeatureGridVersion);
  w.Put<std::uint16_t>(static_cast<std::uint16_t>(f.spec.nx));
  w.Put<std::uint16_t>(static_cast<std::uint16_t>(f.spec.ny));
  w.Put<std::uint16_t>(static_cast<std::uint16_t>(f.spec.nz));
  w.Put<std::uint8_t>(static_cast<std::uint8_t>(f.channels));
  const auto* p = reinterpret_cast<const std::uint8_t*>(f.data.data());
  out.insert(out.end(), p, p + f.data.size() * sizeof(float));
  return out;
}

FeatureGrid DecodeFeatureGrid(const std::vector<std::uint8_t>& bytes,
                              const GridSpec& extents) {
  ByteReader r(bytes);
  r.ExpectMagic("VFTG");
  r.ExpectVersion(kFeatureGridVersion);
  const std::size_t dims_at = r.pos();
  GridSpec spec = extents;
  spec.nx = r.Get<std::uint16_t>("nx");
  spec.ny = r.Get<std::uint16_t>("ny");
  spec.nz = r.Get<std::uint16_t>("nz");
  if (spec.nx == 0 || spec.ny == 0 || spec.nz == 0) {
    throw ParseError(ParseError::Kind::kInvalidValue, dims_at, "zero grid dimension");
  }
  const int channels = r.Get<std::uint8_t>("channel count");
  FeatureGrid f(spec, channels);
  const std::size_t payload = f.data.size() * sizeof(float);
  r.Need(payload, "feature payload");
  std::memcpy(f.data.data(), bytes.data() + r.pos(), payload);
  return f;
}

void SaveFeatureGrid(const FeatureGrid& f, const std::string& path) {
  WriteFileBytes(path, EncodeFeatureGrid(f));
}

FeatureGrid LoadFeatureGrid(const std::string& path) {
  return DecodeFeatureGrid(ReadFileBytes(path));
}

}  // namespace v2vssc
