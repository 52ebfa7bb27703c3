#include "ivdoa/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ivdoa {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  std::size_t b = s.find_last_not_of(" \t");
  return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw std::invalid_argument("config: bad boolean for " + key + ": " + v);
}

void apply_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  try {
    if (key == "sample_rate") cfg.sample_rate = std::stod(value);
    else if (key == "fft_size") cfg.fft_size = std::stoul(value);
    else if (key == "hop_ms") cfg.hop_ms = std::stod(value);
    else if (key == "mel_bands") cfg.mel_bands = std::stoul(value);
    else if (key == "sad_alpha") cfg.sad_alpha = std::stod(value);
    else if (key == "epochs") cfg.epochs = std::stoul(value);
    else if (key == "lr") cfg.schedule.lr0 = std::stod(value);
    else if (key == "lr_flat_epochs") cfg.schedule.flat_epochs = std::stoul(value);
    else if (key == "lr_final_epoch") cfg.schedule.final_epoch = std::stoul(value);
    else if (key == "lr_final_factor") cfg.schedule.final_factor = std::stod(value);
    else if (key == "augment") cfg.augment = parse_bool(value, key);
    else if (key == "mask") cfg.use_mask = parse_bool(value, key);
    else if (key == "channel_order") cfg.channel_order = value;
    else if (key == "seed") cfg.seed = std::stoull(value);
    else if (key == "jobs") cfg.jobs = std::stoul(value);
    else if (key == "net_conv_channels") {
      std::stringstream ss(value);
      std::string item;
      std::size_t i = 0;
      while (std::getline(ss, item, ',') && i < 3) cfg.net.conv_channels[i++] = std::stoul(item);
    } else if (key == "net_gru_hidden") {
      cfg.net.gru_hidden = std::stoul(value);
    } else {
      throw std::invalid_argument("config: unknown key: " + key);
    }
  } catch (const std::invalid_argument&) {
    throw;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad value for " + key + ": " + value);
  }
}

}  // namespace

void RunConfig::validate() const {
  if (sample_rate <= 0.0 || fft_size < 4 || hop_ms <= 0.0 || mel_bands == 0)
    throw std::invalid_argument("config: stft/mel parameters must be positive");
  if ((fft_size & (fft_size - 1)) != 0)
    throw std::invalid_argument("config: fft_size must be a power of two");
  if (!(sad_alpha >= 0.0 && sad_alpha <= 1.0))
    throw std::invalid_argument("config: sad_alpha must lie in [0,1]");
  if (channel_order != "wxyz" && channel_order != "acn")
    throw std::invalid_argument("config: channel_order must be wxyz or acn");
  if (jobs == 0) throw std::invalid_argument("config: jobs must be >= 1");
  if (mel_bands % 8 != 0)
    throw std::invalid_argument("config: mel_bands must be a multiple of 8 for the network");
}

void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: expected key = value at " + path + ":" +
                                  std::to_string(lineno));
    apply_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  cfg.net.bands = cfg.mel_bands;
}

void apply_environment(RunConfig& cfg) {
  static const char* keys[] = {"sample_rate", "fft_size",  "hop_ms",        "mel_bands",
                               "sad_alpha",   "epochs",    "lr",            "augment",
                               "mask",        "channel_order", "seed",      "jobs"};
  for (const char* key : keys) {
    std::string env = "IVDOA_";
    for (const char* c = key; *c; ++c) env.push_back(static_cast<char>(std::toupper(*c)));
    if (const char* v = std::getenv(env.c_str())) apply_key(cfg, key, v);
  }
  cfg.net.bands = cfg.mel_bands;
}

std::string render_config(const RunConfig& cfg) {
  std::ostringstream out;
  out << "sample_rate = " << cfg.sample_rate << "\n";
  out << "fft_size = " << cfg.fft_size << "\n";
  out << "hop_ms = " << cfg.hop_ms << "\n";
  out << "mel_bands = " << cfg.mel_bands << "\n";
  out << "sad_alpha = " << cfg.sad_alpha << "\n";
  out << "epochs = " << cfg.epochs << "\n";
  out << "lr = " << cfg.schedule.lr0 << "\n";
  out << "lr_flat_epochs = " << cfg.schedule.flat_epochs << "\n";
  out << "lr_final_epoch = " << cfg.schedule.final_epoch << "\n";
  out << "lr_final_factor = " << cfg.schedule.final_factor << "\n";
  out << "augment = " << (cfg.augment ? "on" : "off") << "\n";
  out << "mask = " << (cfg.use_mask ? "on" : "off") << "\n";
  out << "channel_order = " << cfg.channel_order << "\n";
  out << "seed = " << cfg.seed << "\n";
  out << "jobs = " << cfg.jobs << "\n";
  out << "net_conv_channels = " << cfg.net.conv_channels[0] << "," << cfg.net.conv_channels[1]
      << "," << cfg.net.conv_channels[2] << "\n";
  out << "net_gru_hidden = " << cfg.net.gru_hidden << "\n";
  return out.str();
}

}  // namespace ivdoa
