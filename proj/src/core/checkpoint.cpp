#include "core/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "core/netjson.hpp"

namespace faceqr {

namespace {

constexpr char kMagic[8] = {'F', 'Q', 'R', 'C', 'K', 'P', 'T', '\0'};

// Tensor slots in serialization order.
enum class Slot : std::uint8_t {
  weight = 0,
  bias = 1,
  gamma = 2,
  beta = 3,
  running_mean = 4,
  running_var = 5,
};

const Tensor& slot_tensor(const LayerParams& p, Slot s) {
  switch (s) {
    case Slot::weight: return p.weight;
    case Slot::bias: return p.bias;
    case Slot::gamma: return p.gamma;
    case Slot::beta: return p.beta;
    case Slot::running_mean: return p.running_mean;
    case Slot::running_var: return p.running_var;
  }
  raise(ErrorCode::internal, "unknown tensor slot");
}

Tensor& slot_tensor(LayerParams& p, Slot s) {
  return const_cast<Tensor&>(slot_tensor(static_cast<const LayerParams&>(p), s));
}

constexpr Slot kAllSlots[] = {Slot::weight,       Slot::bias,
                              Slot::gamma,        Slot::beta,
                              Slot::running_mean, Slot::running_var};

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  put_u32(out, static_cast<std::uint32_t>(v & 0xffffffffu));
  put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

void put_f32(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  put_u32(out, bits);
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    require(pos + n <= buf.size(), ErrorCode::format, "truncated checkpoint file");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i)
      v = (v << 8) | static_cast<std::uint8_t>(buf[pos + static_cast<std::size_t>(i)]);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t lo = u32();
    std::uint64_t hi = u32();
    return lo | (hi << 32);
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(buf[pos++]);
  }
  float f32() {
    std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

void save_checkpoint(const Parameters& params, const std::filesystem::path& path) {
  std::string out;
  out.append(kMagic, sizeof kMagic);
  put_u32(out, kCheckpointVersion);

  std::string spec_json = network_spec_to_json(params.spec).dump();
  put_u64(out, spec_json.size());
  out += spec_json;

  put_u32(out, static_cast<std::uint32_t>(params.layers.size()));
  for (const LayerParams& p : params.layers) {
    std::uint32_t present = 0;
    for (Slot s : kAllSlots)
      if (!slot_tensor(p, s).empty()) ++present;
    put_u32(out, present);
    for (Slot s : kAllSlots) {
      const Tensor& t = slot_tensor(p, s);
      if (t.empty()) continue;
      out.push_back(static_cast<char>(s));
      put_u32(out, static_cast<std::uint32_t>(t.ndim()));
      for (int d = 0; d < t.ndim(); ++d)
        put_u32(out, static_cast<std::uint32_t>(t.dim(d)));
      for (std::size_t i = 0; i < t.size(); ++i)
        put_f32(out, static_cast<float>(t[i]));
    }
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  require(f.good(), ErrorCode::io, "cannot open checkpoint for writing: " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  f.flush();
  require(f.good(), ErrorCode::io, "failed writing checkpoint: " + path.string());
}

Parameters load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), ErrorCode::io, "cannot open checkpoint: " + path.string());
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  Reader r{buf};
  std::string magic = r.bytes(sizeof kMagic);
  require(std::memcmp(magic.data(), kMagic, sizeof kMagic) == 0, ErrorCode::format,
          "not a checkpoint file: " + path.string());
  std::uint32_t version = r.u32();
  require(version == kCheckpointVersion, ErrorCode::format,
          "unsupported checkpoint format-version " + std::to_string(version) +
              " (expected " + std::to_string(kCheckpointVersion) + ")");

  std::uint64_t spec_len = r.u64();
  require(spec_len <= buf.size(), ErrorCode::format, "truncated checkpoint file");
  std::string spec_json = r.bytes(static_cast<std::size_t>(spec_len));
  nlohmann::json j = nlohmann::json::parse(spec_json, nullptr, false);
  require(!j.is_discarded(), ErrorCode::format, "corrupt checkpoint: spec block is not valid JSON");
  NetworkSpec spec = network_spec_from_json(j);
  if (spec.role == NetworkRole::generator)
    validate_generator_spec(spec);
  else
    validate_discriminator_spec(spec);

  // Shapes implied by the spec are the ground truth the file must match.
  Parameters params = init_parameters(spec, 0);

  std::uint32_t n_layers = r.u32();
  require(n_layers == params.layers.size(), ErrorCode::format,
          "corrupt checkpoint: layer count does not match spec");
  for (std::uint32_t li = 0; li < n_layers; ++li) {
    LayerParams& p = params.layers[li];
    std::uint32_t present = r.u32();
    std::uint32_t expected = 0;
    for (Slot s : kAllSlots)
      if (!slot_tensor(p, s).empty()) ++expected;
    require(present == expected, ErrorCode::format,
            "corrupt checkpoint: tensor count mismatch at layer " + std::to_string(li));
    for (std::uint32_t ti = 0; ti < present; ++ti) {
      std::uint8_t slot_id = r.u8();
      require(slot_id <= static_cast<std::uint8_t>(Slot::running_var), ErrorCode::format,
              "corrupt checkpoint: unknown tensor slot");
      Tensor& t = slot_tensor(p, static_cast<Slot>(slot_id));
      require(!t.empty(), ErrorCode::format,
              "corrupt checkpoint: unexpected tensor at layer " + std::to_string(li));
      std::uint32_t ndim = r.u32();
      require(ndim == static_cast<std::uint32_t>(t.ndim()), ErrorCode::format,
              "corrupt checkpoint: tensor rank mismatch at layer " + std::to_string(li));
      for (std::uint32_t d = 0; d < ndim; ++d)
        require(r.u32() == static_cast<std::uint32_t>(t.dim(static_cast<int>(d))),
                ErrorCode::format,
                "corrupt checkpoint: tensor shape mismatch at layer " + std::to_string(li));
      for (std::size_t i = 0; i < t.size(); ++i)
        t[i] = static_cast<double>(r.f32());
    }
  }
  require(r.pos == buf.size(), ErrorCode::format,
          "corrupt checkpoint: trailing bytes after parameter data");
  return params;
}

}  // namespace faceqr
