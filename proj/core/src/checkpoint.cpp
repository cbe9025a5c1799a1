#include "artdet/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "artdet/errors.hpp"

namespace artdet {
namespace {

using nlohmann::json;

constexpr std::array<char, 8> kMagic = {'A', 'R', 'T', 'D', 'E', 'T', 'C', 'K'};

json layer_to_json(const LayerSpec& l) {
  json j{{"name", l.name}, {"kind", to_string(l.kind())}, {"frozen", l.frozen}};
  if (const auto* c = std::get_if<ConvParams>(&l.hyper)) {
    j["out_channels"] = c->out_channels;
    j["kernel"] = c->kernel;
    j["stride"] = c->stride;
    j["pad"] = c->pad;
  } else if (const auto* p = std::get_if<MaxPoolParams>(&l.hyper)) {
    j["window"] = p->window;
    j["stride"] = p->stride;
  } else if (const auto* f = std::get_if<FcParams>(&l.hyper)) {
    j["out_dims"] = f->out_dims;
  } else if (const auto* d = std::get_if<DropoutParams>(&l.hyper)) {
    j["keep_prob"] = d->keep_prob;
  }
  return j;
}

LayerSpec layer_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  const std::string name = j.at("name").get<std::string>();
  LayerSpec l;
  if (kind == "conv") {
    l = LayerSpec::conv(name, j.at("out_channels"), j.at("kernel"),
                        j.at("stride"), j.at("pad"));
  } else if (kind == "relu") {
    l = LayerSpec::relu(name);
  } else if (kind == "maxpool") {
    l = LayerSpec::maxpool(name, j.at("window"), j.at("stride"));
  } else if (kind == "fc") {
    l = LayerSpec::fc(name, j.at("out_dims"));
  } else if (kind == "dropout") {
    l = LayerSpec::dropout(name, j.at("keep_prob"));
  } else {
    throw DataError("unknown layer kind '" + kind + "'");
  }
  l.frozen = j.value("frozen", false);
  return l;
}

json spec_to_json(const NetworkSpec& s) {
  json j;
  j["profile"] = s.profile;
  j["input_channels"] = s.input_channels;
  j["backbone"] = json::array();
  for (const auto& l : s.backbone) j["backbone"].push_back(layer_to_json(l));
  j["head"] = json::array();
  for (const auto& l : s.head) j["head"].push_back(layer_to_json(l));
  j["pool"] = {{"grid_h", s.pool.grid_h},
               {"grid_w", s.pool.grid_w},
               {"spatial_scale", s.pool.spatial_scale}};
  j["init"] = to_string(s.init);
  j["init_std"] = s.init_std;
  j["bbox_init_std"] = s.bbox_init_std;
  return j;
}

NetworkSpec spec_from_json(const json& j) {
  NetworkSpec s;
  s.profile = j.at("profile").get<std::string>();
  s.input_channels = j.at("input_channels");
  for (const auto& l : j.at("backbone")) s.backbone.push_back(layer_from_json(l));
  for (const auto& l : j.at("head")) s.head.push_back(layer_from_json(l));
  s.pool.grid_h = j.at("pool").at("grid_h");
  s.pool.grid_w = j.at("pool").at("grid_w");
  s.pool.spatial_scale = j.at("pool").at("spatial_scale");
  s.init = init_scheme_from_string(j.at("init").get<std::string>());
  s.init_std = j.at("init_std");
  s.bbox_init_std = j.at("bbox_init_std");
  return s;
}

json shape_json(const Shape& s) { return json::array({s.n, s.c, s.h, s.w}); }

Shape shape_from(const json& j) {
  return {j.at(0).get<int>(), j.at(1).get<int>(), j.at(2).get<int>(),
          j.at(3).get<int>()};
}

void put_u32(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) {
    throw DataError("checkpoint truncated in preamble");
  }
  return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_floats(std::ostream& os, const Tensor& t) {
  for (const float f : t.data()) {
    put_u32(os, std::bit_cast<std::uint32_t>(f));
  }
}

void get_floats(std::istream& is, Tensor& t) {
  for (auto& f : t.data()) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) {
      throw DataError("checkpoint truncated in parameter data");
    }
    const std::uint32_t u = b[0] | (b[1] << 8) | (b[2] << 16) |
                            (static_cast<std::uint32_t>(b[3]) << 24);
    f = std::bit_cast<float>(u);
  }
}

}  // namespace

std::string network_spec_to_json(const NetworkSpec& spec) {
  return spec_to_json(spec).dump();
}

NetworkSpec network_spec_from_json(const std::string& text) {
  try {
    return spec_from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw DataError(std::string("bad network spec: ") + e.what());
  }
}

void save_checkpoint(const Network<float>& net,
                     const std::filesystem::path& path) {
  json header;
  header["network"] = spec_to_json(net.spec());
  std::ostringstream rng_state;
  rng_state << net.rng();
  header["rng_state"] = rng_state.str();
  header["params"] = json::array();
  for (const auto& slot : net.param_slots()) {
    header["params"].push_back({{"layer", slot.spec->name},
                                {"weight_shape", shape_json(slot.params->weight.shape())},
                                {"bias_shape", shape_json(slot.params->bias.shape())}});
  }
  const std::string text = header.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write checkpoint " + path.string());
  os.write(kMagic.data(), kMagic.size());
  put_u32(os, kCheckpointVersion);
  put_u32(os, static_cast<std::uint32_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& slot : net.param_slots()) {
    put_floats(os, slot.params->weight);
    put_floats(os, slot.params->bias);
  }
  if (!os) throw DataError("failed writing checkpoint " + path.string());
}

Network<float> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + path.string());
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) {
    throw DataError(path.string() + " is not a checkpoint (bad magic)");
  }
  const std::uint32_t version = get_u32(is);
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t len = get_u32(is);
  std::string text(len, '\0');
  if (!is.read(text.data(), len)) throw DataError("checkpoint header truncated");

  json header;
  NetworkSpec spec;
  try {
    header = json::parse(text);
    spec = spec_from_json(header.at("network"));
  } catch (const json::exception& e) {
    throw DataError(std::string("bad checkpoint header: ") + e.what());
  }
  Network<float> net(spec, 0);
  auto slots = net.param_slots();
  const auto& table = header.at("params");
  if (table.size() != slots.size()) {
    throw DataError("checkpoint parameter table does not match the network");
  }
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (table[i].at("layer").get<std::string>() != slots[i].spec->name ||
        shape_from(table[i].at("weight_shape")) !=
            slots[i].params->weight.shape() ||
        shape_from(table[i].at("bias_shape")) != slots[i].params->bias.shape()) {
      throw DataError("checkpoint entry " + std::to_string(i) +
                      " does not match layer '" + slots[i].spec->name + "'");
    }
    get_floats(is, slots[i].params->weight);
    get_floats(is, slots[i].params->bias);
  }
  std::istringstream rng_state(header.at("rng_state").get<std::string>());
  rng_state >> net.rng();
  if (!rng_state) throw DataError("bad rng state in checkpoint");
  return net;
}

}  // namespace artdet
