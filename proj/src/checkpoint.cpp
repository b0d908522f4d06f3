#include "foldcast/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include <json.hpp>

namespace foldcast {

namespace {

constexpr char kMagic[8] = {'F', 'C', 'S', 'T', 'C', 'K', 'P', '1'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_u64(std::ofstream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::ifstream& in, const std::string& path) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
    throw DataError("'" + path + "': truncated checkpoint");
  return v;
}

std::uint64_t read_u64(std::ifstream& in, const std::string& path) {
  std::uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
    throw DataError("'" + path + "': truncated checkpoint");
  return v;
}

nlohmann::json config_to_json(const ModelConfig& c, const std::vector<int>& periods) {
  return nlohmann::json{{"context", c.context},
                        {"horizon", c.horizon},
                        {"embed_dim", c.embed_dim},
                        {"heads", c.heads},
                        {"top_k", c.top_k},
                        {"rho", c.rho},
                        {"blocks", c.blocks},
                        {"dropout", c.dropout},
                        {"periods", periods},
                        {"ablation",
                         {{"use_decomposition", c.ablation.use_decomposition},
                          {"use_intra", c.ablation.use_intra},
                          {"use_inter", c.ablation.use_inter},
                          {"use_cross", c.ablation.use_cross}}}};
}

CheckpointHeader header_from_json(const nlohmann::json& j) {
  CheckpointHeader h;
  h.config.context = j.at("context").get<std::int64_t>();
  h.config.horizon = j.at("horizon").get<std::int64_t>();
  h.config.embed_dim = j.at("embed_dim").get<int>();
  h.config.heads = j.at("heads").get<int>();
  h.config.top_k = j.at("top_k").get<int>();
  h.config.rho = j.at("rho").get<int>();
  h.config.blocks = j.at("blocks").get<int>();
  h.config.dropout = j.at("dropout").get<double>();
  h.periods = j.at("periods").get<std::vector<int>>();
  const auto& a = j.at("ablation");
  h.config.ablation.use_decomposition = a.at("use_decomposition").get<bool>();
  h.config.ablation.use_intra = a.at("use_intra").get<bool>();
  h.config.ablation.use_inter = a.at("use_inter").get<bool>();
  h.config.ablation.use_cross = a.at("use_cross").get<bool>();
  return h;
}

CheckpointHeader read_header(std::ifstream& in, const std::string& path) {
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw DataError("'" + path + "' is not a checkpoint (bad magic)");
  const std::uint32_t version = read_u32(in, path);
  if (version != kVersion)
    throw DataError("'" + path + "': unsupported checkpoint version " + std::to_string(version));
  const std::uint32_t json_len = read_u32(in, path);
  std::string blob(json_len, '\0');
  if (!in.read(blob.data(), json_len)) throw DataError("'" + path + "': truncated checkpoint");
  try {
    return header_from_json(nlohmann::json::parse(blob));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("'" + path + "': bad checkpoint config: " + e.what());
  }
}

}  // namespace

template <typename T>
void save_checkpoint(const std::string& path, const Model<T>& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out.write(kMagic, sizeof kMagic);
  write_u32(out, kVersion);
  const std::string blob = config_to_json(model.config(), model.ranked_periods()).dump();
  write_u32(out, static_cast<std::uint32_t>(blob.size()));
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  write_u32(out, static_cast<std::uint32_t>(model.parameters().size()));
  std::vector<float> f32;
  for (const auto& p : model.parameters()) {
    write_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    write_u32(out, static_cast<std::uint32_t>(p.tensor.ndim()));
    for (auto d : p.tensor.shape()) write_u64(out, static_cast<std::uint64_t>(d));
    f32.resize(p.tensor.data().size());
    for (std::size_t i = 0; i < f32.size(); ++i) f32[i] = static_cast<float>(p.tensor.data()[i]);
    out.write(reinterpret_cast<const char*>(f32.data()),
              static_cast<std::streamsize>(f32.size() * sizeof(float)));
  }
  if (!out) throw DataError("write to '" + path + "' failed");
}

CheckpointHeader peek_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_header(in, path);
}

template <typename T>
Model<T> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  CheckpointHeader h = read_header(in, path);
  Model<T> model(h.config, h.periods, 0);

  const std::uint32_t count = read_u32(in, path);
  std::map<std::string, std::vector<float>> arrays;
  std::map<std::string, Shape> shapes;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = read_u32(in, path);
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw DataError("'" + path + "': truncated checkpoint");
    const std::uint32_t ndim = read_u32(in, path);
    Shape shape;
    for (std::uint32_t d = 0; d < ndim; ++d)
      shape.push_back(static_cast<std::int64_t>(read_u64(in, path)));
    std::vector<float> data(static_cast<std::size_t>(numel(shape)));
    if (!in.read(reinterpret_cast<char*>(data.data()),
                 static_cast<std::streamsize>(data.size() * sizeof(float))))
      throw DataError("'" + path + "': truncated checkpoint");
    shapes[name] = std::move(shape);
    arrays[name] = std::move(data);
  }

  for (auto& p : model.parameters()) {
    auto it = arrays.find(p.name);
    if (it == arrays.end())
      throw DataError("'" + path + "': checkpoint is missing array '" + p.name + "'");
    if (shapes[p.name] != p.tensor.shape())
      throw DataError("'" + path + "': array '" + p.name + "' has shape " +
                      shape_str(shapes[p.name]) + ", model expects " +
                      shape_str(p.tensor.shape()));
    auto& dst = p.tensor.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(it->second[i]);
    arrays.erase(it);
  }
  if (!arrays.empty())
    throw DataError("'" + path + "': checkpoint holds " + std::to_string(arrays.size()) +
                    " arrays the model does not expect (first: '" + arrays.begin()->first + "')");
  return model;
}

template void save_checkpoint<float>(const std::string&, const Model<float>&);
template void save_checkpoint<double>(const std::string&, const Model<double>&);
template Model<float> load_checkpoint<float>(const std::string&);
template Model<double> load_checkpoint<double>(const std::string&);

}  // namespace foldcast
