#include "rmlab/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "rmlab/config_json.hpp"
#include "rmlab/rng.hpp"

namespace rmlab {
namespace {

constexpr char kMagic[4] = {'R', 'M', 'C', 'K'};

void put_u32(std::string* buf, std::uint32_t v) {
  char bytes[4];
  std::memcpy(bytes, &v, 4);
  buf->append(bytes, 4);
}

void put_u64(std::string* buf, std::uint64_t v) {
  char bytes[8];
  std::memcpy(bytes, &v, 8);
  buf->append(bytes, 8);
}

void put_f64(std::string* buf, double v) {
  char bytes[8];
  std::memcpy(bytes, &v, 8);
  buf->append(bytes, 8);
}

// Bounds-checked cursor over the loaded file body.
class Reader {
 public:
  Reader(const std::string& data, std::size_t offset) : data_(data), pos_(offset) {}

  std::uint32_t u32() {
    std::uint32_t v;
    std::memcpy(&v, take(4), 4);
    return v;
  }

  std::uint64_t u64() {
    std::uint64_t v;
    std::memcpy(&v, take(8), 8);
    return v;
  }

  double f64() {
    double v;
    std::memcpy(&v, take(8), 8);
    return v;
  }

  std::string bytes(std::size_t n) { return std::string(take(n), n); }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  const char* take(std::size_t n) {
    if (remaining() < n) throw DataError("checkpoint file is truncated");
    const char* p = data_.data() + pos_;
    pos_ += n;
    return p;
  }

  const std::string& data_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::string& path, const RewardModel& model) {
  std::string body;
  put_u32(&body, kCheckpointVersion);
  const std::string header = model_config_json(model.backbone, model.head);
  put_u32(&body, static_cast<std::uint32_t>(header.size()));
  body += header;
  put_u32(&body, static_cast<std::uint32_t>(model.params.names().size()));
  for (const auto& name : model.params.names()) {
    const Tensor& t = model.params.get(name);
    put_u32(&body, static_cast<std::uint32_t>(name.size()));
    body += name;
    put_u32(&body, static_cast<std::uint32_t>(t.shape.size()));
    for (int dim : t.shape) put_u32(&body, static_cast<std::uint32_t>(dim));
    for (double v : t.data) put_f64(&body, v);
  }
  put_u64(&body, fnv1a64(body));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open checkpoint file for writing: " + path);
  out.write(kMagic, sizeof kMagic);
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  out.flush();
  if (!out) throw Error("failed writing checkpoint file: " + path);
}

RewardModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint file: " + path);
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (data.size() < sizeof kMagic + 8 || std::memcmp(data.data(), kMagic, sizeof kMagic) != 0)
    throw DataError("not a checkpoint file: " + path);
  const std::string body = data.substr(sizeof kMagic, data.size() - sizeof kMagic - 8);
  Reader tail(data, data.size() - 8);
  if (tail.u64() != fnv1a64(body))
    throw DataError("checkpoint checksum mismatch (file is corrupt): " + path);

  Reader r(data, sizeof kMagic);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(version) + " in " + path);

  BackboneConfig backbone;
  HeadConfig head;
  parse_model_config_json(r.bytes(r.u32()), &backbone, &head);

  // Rebuild the architecture from the header, then insist that the stored
  // tensors are exactly its parameter set.
  RewardModel model = init_reward_model(backbone, head, 0);
  const std::uint32_t count = r.u32();
  if (count != model.params.names().size())
    throw DataError("checkpoint parameter count does not match its config header");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.bytes(r.u32());
    if (name != model.params.names()[i])
      throw DataError("checkpoint parameter order mismatch at '" + name + "'");
    Tensor& t = model.params.get(name);
    const std::uint32_t rank = r.u32();
    std::vector<int> shape(rank);
    for (auto& dim : shape) dim = static_cast<int>(r.u32());
    if (shape != t.shape)
      throw DataError("checkpoint shape mismatch for parameter '" + name + "'");
    for (double& v : t.data) v = r.f64();
  }
  if (r.pos() != data.size() - 8)
    throw DataError("checkpoint has trailing bytes (file is corrupt): " + path);
  return model;
}

}  // namespace rmlab
