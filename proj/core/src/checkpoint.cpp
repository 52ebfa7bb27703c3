#include "ivdoa/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace ivdoa {

namespace {

constexpr char kMagic[8] = {'I', 'V', 'D', 'O', 'A', 'N', 'E', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) {
  std::uint64_t raw;
  std::memcpy(&raw, &d, 8);
  put_u64(out, raw);
}

struct Reader {
  const unsigned char* p;
  std::size_t size;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > size) throw CheckpointError("truncated checkpoint");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }
  double f64() {
    const std::uint64_t raw = u64();
    double d;
    std::memcpy(&d, &raw, 8);
    return d;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(p + pos), n);
    pos += n;
    return s;
  }
};

void append_tensor(std::string& out, const std::string& name, const Tensor& t) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out.append(name);
  put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
  for (const std::size_t d : t.shape) put_u64(out, d);
  for (const double v : t.v) put_f64(out, v);
}

std::string describe(const NetConfig& cfg) {
  std::ostringstream out;
  out << "in_channels=" << cfg.in_channels << "\n";
  out << "bands=" << cfg.bands << "\n";
  out << "conv_channels=" << cfg.conv_channels[0] << "," << cfg.conv_channels[1] << ","
      << cfg.conv_channels[2] << "\n";
  out << "gru_hidden=" << cfg.gru_hidden << "\n";
  out << "bn_eps=" << cfg.bn_eps << "\n";
  out << "bn_momentum=" << cfg.bn_momentum << "\n";
  return out.str();
}

NetConfig parse_descriptor(const std::string& text) {
  NetConfig cfg;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    try {
      if (key == "in_channels") cfg.in_channels = std::stoul(value);
      else if (key == "bands") cfg.bands = std::stoul(value);
      else if (key == "gru_hidden") cfg.gru_hidden = std::stoul(value);
      else if (key == "bn_eps") cfg.bn_eps = std::stod(value);
      else if (key == "bn_momentum") cfg.bn_momentum = std::stod(value);
      else if (key == "conv_channels") {
        std::stringstream ss(value);
        std::string item;
        std::size_t i = 0;
        while (std::getline(ss, item, ',') && i < 3) cfg.conv_channels[i++] = std::stoul(item);
      }
    } catch (const std::exception&) {
      throw CheckpointError("bad architecture descriptor entry: " + line);
    }
  }
  return cfg;
}

}  // namespace

void save_checkpoint(const std::string& path, const NetworkParams& p) {
  std::string out;
  out.append(kMagic, sizeof kMagic);
  put_u32(out, kVersion);
  const std::string desc = describe(p.cfg);
  put_u32(out, static_cast<std::uint32_t>(desc.size()));
  out.append(desc);

  std::vector<std::pair<std::string, const Tensor*>> tensors;
  p.for_each_tensor([&](const std::string& name, const Tensor& t) { tensors.emplace_back(name, &t); });
  for (std::size_t k = 0; k < 3; ++k) {
    tensors.emplace_back("bn" + std::to_string(k) + ".running_mean", &p.bn_running_mean[k]);
    tensors.emplace_back("bn" + std::to_string(k) + ".running_var", &p.bn_running_var[k]);
  }
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) append_tensor(out, name, *t);

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw CheckpointError("cannot write checkpoint: " + path);
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!os) throw CheckpointError("short write: " + path);
}

NetworkParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r{reinterpret_cast<const unsigned char*>(buf.data()), buf.size()};

  if (r.bytes(8) != std::string(kMagic, sizeof kMagic))
    throw CheckpointError("bad magic, not an ivdoa checkpoint: " + path);
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const std::uint32_t desc_len = r.u32();
  const NetConfig cfg = parse_descriptor(r.bytes(desc_len));
  cfg.validate();

  std::map<std::string, Tensor> loaded;
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = r.u32();
    const std::string name = r.bytes(name_len);
    const std::uint32_t ndim = r.u32();
    Tensor t;
    std::size_t total = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      t.shape.push_back(static_cast<std::size_t>(r.u64()));
      total *= t.shape.back();
    }
    t.v.resize(total);
    for (double& v : t.v) v = r.f64();
    loaded.emplace(name, std::move(t));
  }

  NetworkParams p = NetworkParams::make(cfg);
  auto take = [&](const std::string& name, Tensor& dst) {
    const auto it = loaded.find(name);
    if (it == loaded.end()) throw CheckpointError("checkpoint missing tensor: " + name);
    if (it->second.shape != dst.shape)
      throw CheckpointError("checkpoint tensor shape mismatch: " + name);
    dst = it->second;
  };
  p.for_each_tensor([&](const std::string& name, Tensor& t) { take(name, t); });
  for (std::size_t k = 0; k < 3; ++k) {
    take("bn" + std::to_string(k) + ".running_mean", p.bn_running_mean[k]);
    take("bn" + std::to_string(k) + ".running_var", p.bn_running_var[k]);
  }
  return p;
}

}  // namespace ivdoa
