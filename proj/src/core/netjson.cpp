#include "core/netjson.hpp"

#include "core/common.hpp"

namespace faceqr {

namespace {

using nlohmann::json;

const char* role_name(NetworkRole role) {
  return role == NetworkRole::generator ? "generator" : "discriminator";
}

NetworkRole role_from_name(const std::string& name) {
  if (name == "generator") return NetworkRole::generator;
  if (name == "discriminator") return NetworkRole::discriminator;
  raise(ErrorCode::format, "unknown network role: " + name);
}

}  // namespace

json network_spec_to_json(const NetworkSpec& spec) {
  json j;
  j["role"] = role_name(spec.role);
  j["input_shape"] = {FaceImage::kSize, FaceImage::kSize, FaceImage::kChannels};
  json layers = json::array();
  for (const LayerSpec& l : spec.layers) {
    json jl;
    jl["kind"] = layer_kind_name(l.kind);
    switch (l.kind) {
      case LayerKind::conv:
      case LayerKind::transposed_conv:
        jl["filters"] = l.filters;
        jl["kernel"] = {l.kernel_h, l.kernel_w};
        jl["stride"] = l.stride;
        break;
      case LayerKind::fully_connected:
        jl["out_features"] = l.out_features;
        break;
      case LayerKind::leaky_relu:
        jl["slope"] = l.slope;
        break;
      case LayerKind::batch_norm:
      case LayerKind::sigmoid:
        break;
    }
    layers.push_back(jl);
  }
  j["layers"] = layers;
  return j;
}

NetworkSpec network_spec_from_json(const json& j) {
  require(j.is_object(), ErrorCode::format, "network spec must be a JSON object");
  require(j.contains("role") && j.at("role").is_string(), ErrorCode::format,
          "network spec is missing a string \"role\"");
  require(j.contains("layers") && j.at("layers").is_array(), ErrorCode::format,
          "network spec is missing a \"layers\" array");
  if (j.contains("input_shape")) {
    const json& s = j.at("input_shape");
    bool ok = s.is_array() && s.size() == 3 &&
              s[0].get<int>() == FaceImage::kSize &&
              s[1].get<int>() == FaceImage::kSize &&
              s[2].get<int>() == FaceImage::kChannels;
    require(ok, ErrorCode::format, "network spec input_shape must be [32,32,3]");
  }

  NetworkSpec spec;
  spec.role = role_from_name(j.at("role").get<std::string>());
  for (std::size_t i = 0; i < j.at("layers").size(); ++i) {
    const json& jl = j.at("layers")[i];
    auto fail = [&](const std::string& why) {
      raise(ErrorCode::format, "layer " + std::to_string(i) + ": " + why);
    };
    if (!jl.is_object() || !jl.contains("kind") || !jl.at("kind").is_string())
      fail("missing string \"kind\"");
    LayerKind kind = layer_kind_from_name(jl.at("kind").get<std::string>());
    LayerSpec l;
    switch (kind) {
      case LayerKind::conv:
      case LayerKind::transposed_conv: {
        if (!jl.contains("filters") || !jl.contains("kernel") || !jl.contains("stride"))
          fail("conv layers need filters, kernel, stride");
        const json& k = jl.at("kernel");
        if (!k.is_array() || k.size() != 2) fail("kernel must be [k_h, k_w]");
        l = LayerSpec::conv2d(jl.at("filters").get<int>(), 1, jl.at("stride").get<int>());
        l.kind = kind;
        l.kernel_h = k[0].get<int>();
        l.kernel_w = k[1].get<int>();
        break;
      }
      case LayerKind::fully_connected:
        if (!jl.contains("out_features")) fail("fully_connected layers need out_features");
        l = LayerSpec::fc(jl.at("out_features").get<int>());
        break;
      case LayerKind::leaky_relu:
        l = LayerSpec::lrelu(jl.value("slope", 0.2));
        break;
      case LayerKind::batch_norm:
        l = LayerSpec::batchnorm();
        break;
      case LayerKind::sigmoid:
        l = LayerSpec::sigmoid_out();
        break;
    }
    spec.layers.push_back(l);
  }
  infer_shapes(spec);
  return spec;
}

}  // namespace faceqr
