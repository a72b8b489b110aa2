#include "ltood/model/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "ltood/error.hpp"

namespace ltood::model {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path strip_suffix(const fs::path& stem) {
  const auto ext = stem.extension();
  if (ext == ".json" || ext == ".bin") return fs::path(stem).replace_extension();
  return stem;
}

void put_le(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
  }
}

double get_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

fs::path manifest_path(const fs::path& stem) {
  return fs::path(strip_suffix(stem).string() + ".json");
}

fs::path data_path(const fs::path& stem) {
  return fs::path(strip_suffix(stem).string() + ".bin");
}

json config_to_json(const ModelConfig& c) {
  return json{{"input_dim", c.input_dim},
              {"hidden_dim", c.hidden_dim},
              {"feature_dim", c.feature_dim},
              {"proj_hidden_dim", c.proj_hidden_dim},
              {"proj_dim", c.proj_dim},
              {"num_classes", c.num_classes}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.input_dim = j.value("input_dim", c.input_dim);
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.feature_dim = j.value("feature_dim", c.feature_dim);
  c.proj_hidden_dim = j.value("proj_hidden_dim", c.proj_hidden_dim);
  c.proj_dim = j.value("proj_dim", c.proj_dim);
  c.num_classes = j.value("num_classes", c.num_classes);
  return c;
}

void save_checkpoint(const fs::path& stem, const Checkpoint& ckpt) {
  json layout = json::array();
  std::string blob;
  std::size_t offset = 0;
  auto add = [&](const std::string& name, const nd::Tensor& t) {
    layout.push_back(
        {{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    for (double v : t.values()) put_le(blob, v);
    offset += t.numel();
  };
  for (std::size_t i = 0; i < kNumParams; ++i) {
    add(std::string(param_name(i)), ckpt.params.tensors[i]);
  }
  for (const auto& [name, t] : ckpt.blocks) add(name, t);

  const fs::path data = data_path(stem);
  json manifest = {
      {"format", "ltood-checkpoint"},
      {"version", 1},
      {"dtype", "float64"},
      {"byte_order", "little"},
      {"data_file", data.filename().string()},
      {"dims", config_to_json(ckpt.params.config)},
      {"seed", ckpt.meta.seed},
      {"epoch", ckpt.meta.epoch},
      {"model_tensors", kNumParams},
      {"layout", layout},
      {"value_count", offset},
      {"extra", ckpt.meta.extra},
  };
  {
    std::ofstream os(data, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + data.string());
    os.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  }
  std::ofstream os(manifest_path(stem), std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + manifest_path(stem).string());
  os << manifest.dump(2) << '\n';
}

Checkpoint load_checkpoint(const fs::path& stem) {
  const fs::path mpath = manifest_path(stem);
  std::ifstream ms(mpath, std::ios::binary);
  if (!ms) throw ParseError("missing checkpoint manifest " + mpath.string());
  json manifest;
  try {
    manifest = json::parse(ms);
  } catch (const json::exception& e) {
    throw ParseError(mpath.string() + ": " + e.what());
  }
  if (manifest.value("format", "") != "ltood-checkpoint") {
    throw ParseError(mpath.string() + ": not an ltood checkpoint");
  }
  const fs::path dpath = mpath.parent_path() / manifest.at("data_file").get<std::string>();
  std::ifstream ds(dpath, std::ios::binary);
  if (!ds) throw ParseError("missing checkpoint data " + dpath.string());
  std::string blob((std::istreambuf_iterator<char>(ds)), std::istreambuf_iterator<char>());
  const auto count = manifest.at("value_count").get<std::size_t>();
  if (blob.size() != count * 8) {
    throw ParseError(dpath.string() + ": expected " + std::to_string(count * 8) +
                     " bytes, found " + std::to_string(blob.size()));
  }

  Checkpoint ck;
  ck.params = zero_params(config_from_json(manifest.at("dims")));
  ck.meta.seed = manifest.value("seed", std::uint64_t{0});
  ck.meta.epoch = manifest.value("epoch", 0);
  ck.meta.extra = manifest.value("extra", json::object());
  const auto* bytes = reinterpret_cast<const unsigned char*>(blob.data());
  std::size_t index = 0;
  for (const auto& entry : manifest.at("layout")) {
    const auto name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape").get<nd::Shape>();
    const auto offset = entry.at("offset").get<std::size_t>();
    const std::size_t n = nd::shape_numel(shape);
    if (offset + n > count) throw ParseError("layout entry " + name + " out of range");
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = get_le(bytes + 8 * (offset + i));
    nd::Tensor t(shape, std::move(v));
    if (index < kNumParams) {
      if (name != param_name(index) || t.shape() != ck.params.tensors[index].shape()) {
        throw ParseError("checkpoint tensor " + name + " does not match the model layout");
      }
      ck.params.tensors[index] = std::move(t);
    } else {
      ck.blocks.emplace(name, std::move(t));
    }
    ++index;
  }
  if (index < kNumParams) throw ParseError("checkpoint is missing model tensors");
  return ck;
}

}  // namespace ltood::model
