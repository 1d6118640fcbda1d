#include "visrec/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include "visrec/binio.hpp"
#include "visrec/errors.hpp"

using nlohmann::json;

namespace visrec {

namespace {

json layer_to_json(const LayerSpec& ls) {
  json j;
  j["kind"] = layer_kind_name(ls.kind);
  switch (ls.kind) {
    case LayerKind::conv:
      j["kernel"] = ls.kernel;
      j["stride"] = ls.stride;
      j["padding"] = ls.padding;
      j["out_channels"] = ls.out_channels;
      break;
    case LayerKind::batchnorm:
      j["epsilon"] = ls.epsilon;
      j["momentum"] = ls.momentum;
      break;
    case LayerKind::maxpool:
      j["kernel"] = ls.kernel;
      j["stride"] = ls.stride;
      break;
    case LayerKind::dense:
      j["units"] = ls.units;
      break;
    default:
      break;
  }
  return j;
}

LayerSpec layer_from_json(const json& j) {
  LayerSpec ls;
  ls.kind = layer_kind_from_name(j.at("kind").get<std::string>());
  switch (ls.kind) {
    case LayerKind::conv:
      ls.kernel = j.at("kernel").get<int>();
      ls.stride = j.at("stride").get<int>();
      ls.padding = j.at("padding").get<int>();
      ls.out_channels = j.at("out_channels").get<int>();
      break;
    case LayerKind::batchnorm:
      ls.epsilon = j.at("epsilon").get<double>();
      ls.momentum = j.at("momentum").get<double>();
      break;
    case LayerKind::maxpool:
      ls.kernel = j.at("kernel").get<int>();
      ls.stride = j.at("stride").get<int>();
      break;
    case LayerKind::dense:
      ls.units = j.at("units").get<int>();
      break;
    default:
      break;
  }
  return ls;
}

}  // namespace

void save_checkpoint(const Network<float>& net,
                     const std::string& provenance_json,
                     const std::string& path) {
  json meta;
  meta["format"] = 1;
  const ModelSpec& spec = net.spec();
  meta["profile"] = spec.profile;
  meta["input"] = {{"h", spec.input_h}, {"w", spec.input_w},
                   {"c", spec.input_c}};
  json body = json::array();
  for (const LayerSpec& ls : spec.body) body.push_back(layer_to_json(ls));
  meta["body"] = body;
  meta["class_names"] = spec.class_names;
  meta["feature_dim"] = net.feature_dim();
  if (!provenance_json.empty()) {
    meta["provenance"] = json::parse(provenance_json);
  }
  std::string meta_str = meta.dump();

  ByteWriter w;
  w.u32(static_cast<uint32_t>(meta_str.size()));
  w.raw(meta_str.data(), meta_str.size());
  w.magic("NNW1");
  w.u64(net.params().size() + net.running().size());
  w.f32_array(net.params().data(), net.params().size());
  w.f32_array(net.running().data(), net.running().size());
  write_file_with_crc(path, w);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::string bytes = read_file_check_crc(path, "checkpoint");
  ByteReader r(bytes);
  uint32_t meta_len = r.u32();
  std::string meta_str(meta_len, '\0');
  r.raw(meta_str.data(), meta_len);
  json meta;
  try {
    meta = json::parse(meta_str);
  } catch (const json::exception& e) {
    throw DataError("checkpoint: bad metadata: " + std::string(e.what()));
  }
  if (meta.at("format").get<int>() != 1) {
    throw DataError("checkpoint: unsupported format version");
  }

  Checkpoint ckpt;
  ckpt.spec.profile = meta.at("profile").get<std::string>();
  ckpt.spec.input_h = meta.at("input").at("h").get<int>();
  ckpt.spec.input_w = meta.at("input").at("w").get<int>();
  ckpt.spec.input_c = meta.at("input").at("c").get<int>();
  for (const json& j : meta.at("body")) {
    ckpt.spec.body.push_back(layer_from_json(j));
  }
  ckpt.spec.class_names =
      meta.at("class_names").get<std::vector<std::string>>();
  if (meta.contains("provenance")) {
    ckpt.provenance_json = meta["provenance"].dump();
  }

  r.expect_magic("NNW1", "checkpoint");
  uint64_t count = r.u64();
  // reconstruct the partition sizes from the specs
  Network<float> probe(ckpt.spec, 0);
  if (count != probe.params().size() + probe.running().size()) {
    throw DataError("checkpoint: weight count " + std::to_string(count) +
                    " does not match layer specs");
  }
  ckpt.params.resize(probe.params().size());
  ckpt.running.resize(probe.running().size());
  r.f32_array(ckpt.params.data(), ckpt.params.size());
  r.f32_array(ckpt.running.data(), ckpt.running.size());
  if (r.remaining() != 0) throw DataError("checkpoint: trailing bytes");
  int expected_dim = meta.at("feature_dim").get<int>();
  if (probe.feature_dim() != expected_dim) {
    throw DataError("checkpoint: feature_dim mismatch");
  }
  return ckpt;
}

Network<float> network_from_checkpoint(const Checkpoint& ckpt) {
  Network<float> net(ckpt.spec, 0);
  if (net.params().size() != ckpt.params.size() ||
      net.running().size() != ckpt.running.size()) {
    throw DataError("checkpoint weights do not fit the model spec");
  }
  net.params() = ckpt.params;
  net.running() = ckpt.running;
  return net;
}

}  // namespace visrec
