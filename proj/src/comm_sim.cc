#include "v2vssc/comm_sim.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>

#include "v2vssc/binary_io.h"

namespace v2vssc {

namespace {

constexpr std::uint16_t kMessageVersion = 1;
constexpr std::size_t kCodecHeaderBytes = 8;   // rate, channels, dims
constexpr std::size_t kQuantEntryBytes = 6;    // f32 min + bf16 range

// ---- 8-bit quantizer --------------------------------------------------------

// Range rounded up to bfloat16 so the table entry stays small while the
// reconstruction error remains within (max - min) / 255.
std::uint16_t RangeToBf16Ceil(double range) {
  float r = static_cast<float>(range);
  if (static_cast<double>(r) < range) {
    r = std::nextafter(r, std::numeric_limits<float>::infinity());
  }
  std::uint32_t bits = std::bit_cast<std::uint32_t>(r);
  if ((bits & 0xFFFFu) != 0) bits += 0x10000u;
  return static_cast<std::uint16_t>(bits >> 16);
}

float Bf16ToFloat(std::uint16_t v) {
  return std::bit_cast<float>(static_cast<std::uint32_t>(v) << 16);
}

struct Quantizer {
  float min = 0.0f;
  std::uint16_t range_bits = 0;

  static Quantizer Fit(const float* values, std::size_t n) {
    Quantizer q;
    if (n == 0) return q;
    const auto [lo, hi] = std::minmax_element(values, values + n);
    q.min = *lo;
    q.range_bits = RangeToBf16Ceil(static_cast<double>(*hi) - *lo);
    return q;
  }
  double range() const { return Bf16ToFloat(range_bits); }
  std::uint8_t Encode(float v) const {
    const double r = range();
    if (r <= 0.0) return 0;
    const double code = std::round((static_cast<double>(v) - min) / r * 255.0);
    return static_cast<std::uint8_t>(std::clamp(code, 0.0, 255.0));
  }
  float Decode(std::uint8_t code) const {
    if (code == 0) return min;
    return static_cast<float>(min + code * range() / 255.0);
  }
  void Write(ByteWriter& w) const {
    w.Put<float>(min);
    w.Put<std::uint16_t>(range_bits);
  }
  static Quantizer Read(ByteReader& r) {
    Quantizer q;
    q.min = r.Get<float>("quantizer min");
    q.range_bits = r.Get<std::uint16_t>("quantizer range");
    return q;
  }
};

// Argmax class of a voxel's hit counts (priority breaks ties); Empty when
// there are no hits.
SemanticLabel DominantClass(const FeatureGrid& f, std::size_t v) {
  SemanticLabel best = SemanticLabel::kEmpty;
  float best_count = 0.0f;
  for (SemanticLabel c : kSemanticClasses) {
    const float count = f.at(ClassChannel(c), v);
    if (count > best_count ||
        (count > 0.0f && count == best_count &&
         PriorityRank(c) > PriorityRank(best))) {
      best = c;
      best_count = count;
    }
  }
  return best;
}

void WriteCodecHeader(ByteWriter& w, int rate, int channels, const GridSpec& s) {
  w.Put<std::uint8_t>(static_cast<std::uint8_t>(rate));
  w.Put<std::uint8_t>(static_cast<std::uint8_t>(channels));
  w.Put<std::uint16_t>(static_cast<std::uint16_t>(s.nx));
  w.Put<std::uint16_t>(static_cast<std::uint16_t>(s.ny));
  w.Put<std::uint16_t>(static_cast<std::uint16_t>(s.nz));
}

std::size_t CompressedBodySize(int rate, const GridSpec& s, std::size_t occupied) {
  const std::size_t n = s.num_voxels();
  switch (rate) {
    case 1: return kCodecHeaderBytes + n * kNumFeatureChannels * 4;
    case 4:
      return kCodecHeaderBytes + kNumFeatureChannels * kQuantEntryBytes +
             n * kNumFeatureChannels;
    case 16: return kCodecHeaderBytes + kQuantEntryBytes + 2 * n;
    case 64: return kCodecHeaderBytes + (n + 7) / 8 + (3 * occupied + 7) / 8;
  }
  return 0;
}

// ---- payload bodies ---------------------------------------------------------

std::size_t EarlyBodySize(const LabeledPointCloud& c) { return 8 + 13 * c.size(); }

std::size_t LateBodySize(const Prediction& p) {
  return 6 + 5 * p.labels.spec.num_voxels();
}

void WriteEarlyBody(ByteWriter& w, const LabeledPointCloud& c) {
  w.Put<std::uint64_t>(c.size());
  for (const LabeledPoint& p : c.points) {
    w.Put<float>(static_cast<float>(p.x));
    w.Put<float>(static_cast<float>(p.y));
    w.Put<float>(static_cast<float>(p.z));
    w.Put<std::uint8_t>(static_cast<std::uint8_t>(p.label));
  }
}

void WriteLateBody(ByteWriter& w, const Prediction& p) {
  const GridSpec& s = p.labels.spec;
  w.Put<std::uint16_t>(static_cast<std::uint16_t>(s.nx));
  w.Put<std::uint16_t>(static_cast<std::uint16_t>(s.ny));
  w.Put<std::uint16_t>(static_cast<std::uint16_t>(s.nz));
  for (SemanticLabel l : p.labels.labels) w.Put<std::uint8_t>(static_cast<std::uint8_t>(l));
  for (float c : p.confidence.conf) w.Put<float>(c);
}

GridSpec ReadDims(ByteReader& r, const GridSpec& extents) {
  GridSpec s = extents;
  const std::size_t at = r.pos();
  s.nx = r.Get<std::uint16_t>("nx");
  s.ny = r.Get<std::uint16_t>("ny");
  s.nz = r.Get<std::uint16_t>("nz");
  if (s.nx == 0 || s.ny == 0 || s.nz == 0) {
    throw ParseError(ParseError::Kind::kInvalidValue, at, "zero grid dimension");
  }
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<int> SpatialGraph::Neighbors() const {
  std::vector<int> out;
  for (const auto& [a, b] : edges) out.push_back(a == ego ? b : a);
  return out;
}

SpatialGraph UpdateSpatialGraph(const SpatialGraph& g,
                                const std::map<int, Pose6D>& poses,
                                double range_m) {
  const auto ego_it = poses.find(g.ego);
  if (ego_it == poses.end()) {
    throw std::invalid_argument("UpdateSpatialGraph: ego " +
                                std::to_string(g.ego) + " missing from poses");
  }
  SpatialGraph out;
  out.ego = g.ego;
  out.nodes.emplace(g.ego, ego_it->second);
  for (const auto& [id, pose] : poses) {
    if (id == g.ego) continue;
    if (PlanarDistance(pose, ego_it->second) <= range_m) {
      out.nodes.emplace(id, pose);
      out.edges.emplace_back(g.ego, id);
    }
  }
  return out;
}

void CompressionSpec::Validate() const {
  if (!IsSupportedRate(rate)) {
    throw std::invalid_argument("compression rate must be one of 1, 4, 16, 64; got " +
                                std::to_string(rate));
  }
}

CompressedFeatures Compress(const FeatureGrid& f, const CompressionSpec& spec) {
  spec.Validate();
  if (f.channels != kNumFeatureChannels) {
    throw std::invalid_argument("Compress: expected 9-channel features");
  }
  const std::size_t n = f.voxels();
  CompressedFeatures out;
  out.spec = f.spec;
  out.rate = spec.rate;
  ByteWriter w(&out.body);

  switch (spec.rate) {
    case 1: {
      out.body.reserve(CompressedBodySize(1, f.spec, 0));
      WriteCodecHeader(w, 1, f.channels, f.spec);
      const auto* p = reinterpret_cast<const std::uint8_t*>(f.data.data());
      out.body.insert(out.body.end(), p, p + f.data.size() * sizeof(float));
      break;
    }
    case 4: {
      out.body.reserve(CompressedBodySize(4, f.spec, 0));
      WriteCodecHeader(w, 4, f.channels, f.spec);
      std::vector<Quantizer> qs;
      for (int c = 0; c < f.channels; ++c) {
        qs.push_back(Quantizer::Fit(&f.data[c * n], n));
        qs.back().Write(w);
      }
      for (int c = 0; c < f.channels; ++c) {
        for (std::size_t v = 0; v < n; ++v) {
          out.body.push_back(qs[c].Encode(f.at(c, v)));
        }
      }
      break;
    }
    case 16: {
      out.body.reserve(CompressedBodySize(16, f.spec, 0));
      WriteCodecHeader(w, 16, 2, f.spec);
      const Quantizer q = Quantizer::Fit(&f.data[kLogHits * n], n);
      q.Write(w);
      for (std::size_t v = 0; v < n; ++v) out.body.push_back(q.Encode(f.at(kLogHits, v)));
      for (std::size_t v = 0; v < n; ++v) {
        out.body.push_back(static_cast<std::uint8_t>(DominantClass(f, v)));
      }
      break;
    }
    case 64: {
      WriteCodecHeader(w, 64, 1, f.spec);
      std::vector<std::uint8_t> plane((n + 7) / 8, 0);
      std::vector<std::uint8_t> classes;
      std::uint32_t acc = 0;
      int acc_bits = 0;
      for (std::size_t v = 0; v < n; ++v) {
        const SemanticLabel cls = DominantClass(f, v);
        if (cls == SemanticLabel::kEmpty) continue;
        plane[v / 8] |= static_cast<std::uint8_t>(1u << (v % 8));
        acc |= static_cast<std::uint32_t>(cls) << acc_bits;
        acc_bits += 3;
        while (acc_bits >= 8) {
          classes.push_back(static_cast<std::uint8_t>(acc & 0xFF));
          acc >>= 8;
          acc_bits -= 8;
        }
      }
      if (acc_bits > 0) classes.push_back(static_cast<std::uint8_t>(acc & 0xFF));
      out.body.insert(out.body.end(), plane.begin(), plane.end());
      out.body.insert(out.body.end(), classes.begin(), classes.end());
      break;
    }
  }
  return out;
}

FeatureGrid Decompress(const CompressedFeatures& c) {
  ByteReader r(c.body);
  const std::size_t rate_at = r.pos();
  const int rate = r.Get<std::uint8_t>("rate");
  if (!CompressionSpec::IsSupportedRate(rate)) {
    throw ParseError(ParseError::Kind::kInvalidValue, rate_at,
                     "unsupported compression rate " + std::to_string(rate));
  }
  r.Get<std::uint8_t>("channels");
  const GridSpec spec = ReadDims(r, c.spec);
  const std::size_t n = spec.num_voxels();
  FeatureGrid f(spec);

  switch (rate) {
    case 1: {
      r.Need(f.data.size() * sizeof(float), "feature payload");
      std::memcpy(f.data.data(), c.body.data() + r.pos(),
                  f.data.size() * sizeof(float));
      break;
    }
    case 4: {
      std::vector<Quantizer> qs;
      for (int ch = 0; ch < kNumFeatureChannels; ++ch) qs.push_back(Quantizer::Read(r));
      r.Need(n * kNumFeatureChannels, "quantized payload");
      const std::uint8_t* codes = c.body.data() + r.pos();
      for (int ch = 0; ch < kNumFeatureChannels; ++ch) {
        for (std::size_t v = 0; v < n; ++v) {
          f.at(ch, v) = qs[ch].Decode(codes[ch * n + v]);
        }
      }
      break;
    }
    case 16: {
      const Quantizer q = Quantizer::Read(r);
      r.Need(2 * n, "rate-16 payload");
      const std::uint8_t* codes = c.body.data() + r.pos();
      for (std::size_t v = 0; v < n; ++v) {
        const std::uint8_t cls = codes[n + v];
        if (cls == 0) continue;
        if (!IsValidLabel(cls)) {
          throw ParseError(ParseError::Kind::kInvalidValue, r.pos() + n + v,
                           "invalid class code");
        }
        // Hit counts are integral before fusion; snap after decoding.
        const double hits = std::round(std::expm1(static_cast<double>(q.Decode(codes[v]))));
        if (hits <= 0.0) continue;
        f.at(kLogHits, v) = static_cast<float>(std::log1p(hits));
        f.at(ClassChannel(static_cast<SemanticLabel>(cls)), v) = static_cast<float>(hits);
      }
      break;
    }
    case 64: {
      const std::size_t plane_bytes = (n + 7) / 8;
      r.Need(plane_bytes, "occupancy plane");
      const std::uint8_t* plane = c.body.data() + r.pos();
      const std::uint8_t* classes = plane + plane_bytes;
      const std::size_t class_bytes = r.remaining() - plane_bytes;
      std::size_t bit = 0;
      for (std::size_t v = 0; v < n; ++v) {
        if (!(plane[v / 8] & (1u << (v % 8)))) continue;
        if ((bit + 3 + 7) / 8 > class_bytes) {
          throw ParseError(ParseError::Kind::kTruncated, r.pos() + plane_bytes,
                           "truncated class codes");
        }
        std::uint32_t code = 0;
        for (int b = 0; b < 3; ++b, ++bit) {
          code |= ((classes[bit / 8] >> (bit % 8)) & 1u) << b;
        }
        if (code == 0 || !IsValidLabel(static_cast<std::uint8_t>(code))) {
          throw ParseError(ParseError::Kind::kInvalidValue, r.pos() + plane_bytes,
                           "invalid class code");
        }
        f.at(kLogHits, v) = static_cast<float>(std::log1p(1.0));
        f.at(ClassChannel(static_cast<SemanticLabel>(code)), v) = 1.0f;
      }
      break;
    }
  }
  return f;
}

// ---------------------------------------------------------------------------

std::size_t PayloadSize(const V2VMessage& m) {
  std::size_t body = 0;
  if (const auto* cloud = std::get_if<std::shared_ptr<const LabeledPointCloud>>(&m.payload)) {
    body = EarlyBodySize(**cloud);
  } else if (const auto* cf = std::get_if<CompressedFeatures>(&m.payload)) {
    body = cf->body.size();
  } else if (const auto* pred = std::get_if<std::shared_ptr<const Prediction>>(&m.payload)) {
    body = LateBodySize(**pred);
  }
  return kMessageHeaderBytes + body;
}

std::vector<std::uint8_t> EncodeMessage(const V2VMessage& m) {
  std::vector<std::uint8_t> out;
  out.reserve(PayloadSize(m));
  ByteWriter w(&out);
  w.PutBytes("V2VM");
  w.Put<std::uint16_t>(kMessageVersion);
  w.Put<std::uint32_t>(static_cast<std::uint32_t>(m.sender));
  w.Put<std::uint8_t>(static_cast<std::uint8_t>(m.kind));
  w.Put<double>(m.stamp);
  for (double v : {m.sender_pose.x, m.sender_pose.y, m.sender_pose.z,
                   m.sender_pose.yaw, m.sender_pose.pitch, m.sender_pose.roll}) {
    w.Put<float>(static_cast<float>(v));
  }
  w.Put<std::uint64_t>(PayloadSize(m) - kMessageHeaderBytes);
  w.PutZeros(kMessageHeaderBytes - w.size());

  if (const auto* cloud = std::get_if<std::shared_ptr<const LabeledPointCloud>>(&m.payload)) {
    WriteEarlyBody(w, **cloud);
  } else if (const auto* cf = std::get_if<CompressedFeatures>(&m.payload)) {
    out.insert(out.end(), cf->body.begin(), cf->body.end());
  } else if (const auto* pred = std::get_if<std::shared_ptr<const Prediction>>(&m.payload)) {
    WriteLateBody(w, **pred);
  }
  return out;
}

V2VMessage DecodeMessage(const std::vector<std::uint8_t>& bytes,
                         const GridSpec& extents) {
  ByteReader r(bytes);
  r.ExpectMagic("V2VM");
  r.ExpectVersion(kMessageVersion);
  V2VMessage m;
  m.sender = static_cast<int>(r.Get<std::uint32_t>("sender"));
  const std::size_t kind_at = r.pos();
  const auto kind = r.Get<std::uint8_t>("kind");
  if (kind > 3) {
    throw ParseError(ParseError::Kind::kInvalidValue, kind_at, "unknown message kind");
  }
  m.kind = static_cast<MessageKind>(kind);
  m.stamp = r.Get<double>("stamp");
  double pose[6];
  for (double& v : pose) v = r.Get<float>("pose");
  m.sender_pose = {pose[0], pose[1], pose[2], pose[3], pose[4], pose[5]};
  const auto body_len = r.Get<std::uint64_t>("payload length");
  r.Skip(kMessageHeaderBytes - r.pos(), "header padding");
  if (body_len > r.remaining()) {
    throw ParseError(ParseError::Kind::kTruncated, r.pos(), "truncated payload");
  }
  const std::size_t body_start = r.pos();

  switch (m.kind) {
    case MessageKind::kMetadata: break;
    case MessageKind::kEarly: {
      auto cloud = std::make_shared<LabeledPointCloud>();
      const auto count = r.Get<std::uint64_t>("point count");
      if (count > r.remaining() / 13) {
        throw ParseError(ParseError::Kind::kTruncated, r.pos(), "truncated points");
      }
      cloud->stamp = m.stamp;
      for (std::uint64_t i = 0; i < count; ++i) {
        LabeledPoint p;
        p.x = r.Get<float>("x");
        p.y = r.Get<float>("y");
        p.z = r.Get<float>("z");
        const std::size_t at = r.pos();
        const auto label = r.Get<std::uint8_t>("label");
        if (!IsValidLabel(label)) {
          throw ParseError(ParseError::Kind::kInvalidValue, at, "invalid label");
        }
        p.label = static_cast<SemanticLabel>(label);
        cloud->points.push_back(p);
      }
      m.payload = std::shared_ptr<const LabeledPointCloud>(std::move(cloud));
      break;
    }
    case MessageKind::kIntermediate: {
      CompressedFeatures cf;
      cf.spec = extents;
      cf.body.assign(bytes.begin() + body_start, bytes.begin() + body_start + body_len);
      if (!cf.body.empty()) cf.rate = cf.body[0];
      cf.spec = Decompress(cf).spec;
      m.payload = std::move(cf);
      break;
    }
    case MessageKind::kLate: {
      const GridSpec s = ReadDims(r, extents);
      const std::size_t n = s.num_voxels();
      r.Need(5 * n, "late payload");
      auto pred = std::make_shared<Prediction>(Prediction{SemanticGrid(s), ConfidenceGrid(s)});
      for (std::size_t v = 0; v < n; ++v) {
        const std::size_t at = r.pos();
        const auto l = r.Get<std::uint8_t>("label");
        if (!IsValidLabel(l)) {
          throw ParseError(ParseError::Kind::kInvalidValue, at, "invalid label");
        }
        pred->labels.labels[v] = static_cast<SemanticLabel>(l);
      }
      for (std::size_t v = 0; v < n; ++v) pred->confidence.conf[v] = r.Get<float>("confidence");
      m.payload = std::shared_ptr<const Prediction>(std::move(pred));
      break;
    }
  }
  return m;
}

// ---------------------------------------------------------------------------

SnapshotBuffer::SnapshotBuffer(double retention_s) : retention_s_(retention_s) {
  if (!(retention_s >= 0.4)) {
    throw std::invalid_argument("SnapshotBuffer: retention must be >= 0.4 s");
  }
}

void SnapshotBuffer::Push(int agent, Snapshot snapshot) {
  auto& h = history_[agent];
  if (!h.empty() && !(snapshot.stamp > h.back().stamp)) {
    throw std::invalid_argument("SnapshotBuffer: stamps must be strictly increasing");
  }
  h.push_back(std::move(snapshot));
  const double horizon = h.back().stamp - retention_s_ - kStampTolerance;
  auto keep = std::find_if(h.begin(), h.end(),
                           [&](const Snapshot& s) { return s.stamp >= horizon; });
  h.erase(h.begin(), keep);
}

const Snapshot* SnapshotBuffer::Select(int agent, double t) const {
  const auto it = history_.find(agent);
  if (it == history_.end()) return nullptr;
  const Snapshot* best = nullptr;
  for (const Snapshot& s : it->second) {
    if (s.stamp <= t + kStampTolerance) best = &s;
  }
  return best;
}

std::vector<int> SnapshotBuffer::Agents() const {
  std::vector<int> out;
  for (const auto& [id, h] : history_) out.push_back(id);
  return out;
}

const std::vector<Snapshot>& SnapshotBuffer::History(int agent) const {
  return history_.at(agent);
}

void ChannelConfig::Validate() const {
  if (!(range_m > 0.0)) throw std::invalid_argument("ChannelConfig: range must be > 0");
  if (!(delay_s >= 0.0)) throw std::invalid_argument("ChannelConfig: delay must be >= 0");
  if (!(pos_std_m >= 0.0) || !(heading_std_rad >= 0.0)) {
    throw std::invalid_argument("ChannelConfig: noise stds must be >= 0");
  }
  compression.Validate();
}

Rng ChannelRng(std::uint64_t seed, int sender, std::int64_t frame) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(sender),
                    static_cast<std::uint32_t>(frame),
                    static_cast<std::uint32_t>(static_cast<std::uint64_t>(frame) >> 32)};
  return Rng(seq);
}

DeliveredMessage Transmit(const SnapshotBuffer& buffer, int sender,
                          MessageKind kind, const ChannelConfig& cfg,
                          double now, Rng& rng) {
  cfg.Validate();
  const Snapshot* snap = buffer.Select(sender, now - cfg.delay_s);
  if (snap == nullptr) {
    throw DeliveryError("agent " + std::to_string(sender) +
                        ": no snapshot at or before t = " +
                        std::to_string(now - cfg.delay_s));
  }
  DeliveredMessage d;
  d.sender = sender;
  d.kind = kind;
  d.stamp = snap->stamp;
  d.sender_pose = PerturbPose(snap->pose, cfg.pos_std_m, cfg.heading_std_rad, rng);

  V2VMessage m{sender, kind, d.sender_pose, snap->stamp, std::monostate{}};
  switch (kind) {
    case MessageKind::kMetadata: break;
    case MessageKind::kEarly:
      d.cloud = snap->cloud;
      m.payload = snap->cloud;
      break;
    case MessageKind::kIntermediate: {
      CompressedFeatures cf = Compress(*snap->features, cfg.compression);
      d.features = cfg.compression.rate == 1
                       ? snap->features
                       : std::make_shared<const FeatureGrid>(Decompress(cf));
      m.payload = std::move(cf);
      break;
    }
    case MessageKind::kLate:
      d.prediction = snap->prediction;
      m.payload = snap->prediction;
      break;
  }
  d.payload_bytes = PayloadSize(m);
  return d;
}

}  // namespace v2vssc
