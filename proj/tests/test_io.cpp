#include <doctest.h>

#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "ivdoa/checkpoint.hpp"
#include "ivdoa/config.hpp"
#include "ivdoa/csv.hpp"
#include "ivdoa/rng.hpp"
#include "ivdoa/wav.hpp"

using namespace ivdoa;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("ivdoa_test_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("wav float32 round trip") {
  TempDir dir;
  WavData wav;
  wav.sample_rate = 48000.0;
  Rng rng(3);
  wav.channels.assign(4, std::vector<double>(333));
  for (auto& ch : wav.channels)
    for (double& v : ch) v = rng.normal() * 0.3;
  write_wav(dir.file("a.wav"), wav);
  const WavData back = read_wav(dir.file("a.wav"));
  REQUIRE(back.channels.size() == 4);
  REQUIRE(back.num_frames() == 333);
  CHECK(back.sample_rate == 48000.0);
  for (int c = 0; c < 4; ++c)
    for (std::size_t i = 0; i < 333; ++i)
      CHECK(back.channels[c][i] ==
            doctest::Approx(wav.channels[c][i]).epsilon(1e-6));  // float32 quantization
}

TEST_CASE("wav writer output is byte-stable") {
  TempDir dir;
  WavData wav;
  wav.sample_rate = 48000.0;
  wav.channels.assign(2, std::vector<double>(100, 0.25));
  write_wav(dir.file("a.wav"), wav);
  write_wav(dir.file("b.wav"), wav);
  std::ifstream a(dir.file("a.wav"), std::ios::binary), b(dir.file("b.wav"), std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  const std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  CHECK(sa == sb);
  CHECK(sa.size() == 44 + 100 * 2 * 4);
}

TEST_CASE("wav reader rejects junk") {
  TempDir dir;
  std::ofstream(dir.file("junk.wav")) << "this is not audio";
  CHECK_THROWS_AS(read_wav(dir.file("junk.wav")), WavError);
  CHECK_THROWS_AS(read_wav(dir.file("missing.wav")), WavError);
}

TEST_CASE("wav reader handles PCM16") {
  TempDir dir;
  // hand-build a tiny PCM16 mono file
  std::string body;
  auto u16 = [&](std::uint16_t v) {
    body.push_back(static_cast<char>(v & 0xff));
    body.push_back(static_cast<char>(v >> 8));
  };
  auto u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) body.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  body += "RIFF";
  u32(36 + 8);
  body += "WAVEfmt ";
  u32(16);
  u16(1);      // PCM
  u16(1);      // mono
  u32(48000);  // rate
  u32(48000 * 2);
  u16(2);
  u16(16);
  body += "data";
  u32(8);
  u16(0x4000);  // 0.5
  u16(0xC000);  // -0.5
  u16(0x7FFF);
  u16(0x8000);  // -1.0
  std::ofstream(dir.file("pcm.wav"), std::ios::binary) << body;

  const WavData wav = read_wav(dir.file("pcm.wav"));
  REQUIRE(wav.channels.size() == 1);
  REQUIRE(wav.num_frames() == 4);
  CHECK(wav.channels[0][0] == doctest::Approx(0.5).epsilon(1e-4));
  CHECK(wav.channels[0][1] == doctest::Approx(-0.5).epsilon(1e-4));
  CHECK(wav.channels[0][3] == doctest::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("event csv round trip and validation") {
  TempDir dir;
  std::vector<EventRow> rows = {{0.5, 1.25, 30.0, -10.0}, {2.0, 3.5, -170.0, 45.0}};
  write_event_csv(dir.file("meta.csv"), rows);
  const auto back = read_event_csv(dir.file("meta.csv"));
  REQUIRE(back.size() == 2);
  CHECK(back[0].onset_s == doctest::Approx(0.5));
  CHECK(back[1].azimuth_deg == doctest::Approx(-170.0));

  std::ofstream(dir.file("bad.csv")) << "onset_s,offset_s,azimuth_deg,elevation_deg\n1.0,0.5,0,0\n";
  CHECK_THROWS_AS(read_event_csv(dir.file("bad.csv")), CsvError);
  std::ofstream(dir.file("bad2.csv")) << "0.1,0.5,500,0\n";
  CHECK_THROWS_AS(read_event_csv(dir.file("bad2.csv")), CsvError);
  std::ofstream(dir.file("bad3.csv")) << "0.1,0.5,nonsense,0\n";
  CHECK_THROWS_AS(read_event_csv(dir.file("bad3.csv")), CsvError);
}

TEST_CASE("frame csv round trip") {
  TempDir dir;
  std::vector<FrameRow> rows = {{0, 1, 12.5, -3.25}, {1, 0, 0.0, 0.0}};
  write_frame_csv(dir.file("frames.csv"), rows);
  const auto back = read_frame_csv(dir.file("frames.csv"));
  REQUIRE(back.size() == 2);
  CHECK(back[0].frame_index == 0);
  CHECK(back[0].active == 1);
  CHECK(back[0].azimuth_deg == doctest::Approx(12.5));
  CHECK(back[1].active == 0);
}

TEST_CASE("checkpoint round trip preserves every tensor") {
  TempDir dir;
  NetConfig cfg;
  cfg.bands = 16;
  cfg.conv_channels = {4, 5, 6};
  cfg.gru_hidden = 3;
  NetworkParams p = NetworkParams::init(cfg, 123);
  p.bn_running_mean[1].v[2] = 0.77;
  save_checkpoint(dir.file("net.ckpt"), p);
  const NetworkParams q = load_checkpoint(dir.file("net.ckpt"));
  CHECK(q.cfg.bands == 16);
  CHECK(q.cfg.conv_channels[2] == 6);
  CHECK(q.cfg.gru_hidden == 3);

  bool all_equal = true;
  p.for_each_tensor([&](const std::string& name, const Tensor& t) {
    q.for_each_tensor([&](const std::string& qname, const Tensor& qt) {
      if (qname != name) return;
      if (t.shape != qt.shape || t.v != qt.v) all_equal = false;
    });
  });
  CHECK(all_equal);
  CHECK(q.bn_running_mean[1].v[2] == 0.77);
}

TEST_CASE("checkpoint loader rejects damaged files") {
  TempDir dir;
  std::ofstream(dir.file("bad.ckpt"), std::ios::binary) << "NOTACKPT" << std::string(64, '\0');
  CHECK_THROWS_AS(load_checkpoint(dir.file("bad.ckpt")), CheckpointError);
  CHECK_THROWS_AS(load_checkpoint(dir.file("missing.ckpt")), CheckpointError);

  // truncated real checkpoint
  NetConfig cfg;
  cfg.bands = 8;
  cfg.conv_channels = {2, 2, 2};
  cfg.gru_hidden = 2;
  save_checkpoint(dir.file("ok.ckpt"), NetworkParams::make(cfg));
  std::ifstream in(dir.file("ok.ckpt"), std::ios::binary);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::ofstream(dir.file("trunc.ckpt"), std::ios::binary)
      << buf.substr(0, buf.size() / 2);
  CHECK_THROWS_AS(load_checkpoint(dir.file("trunc.ckpt")), CheckpointError);
}

TEST_CASE("config file parsing, environment and rendering") {
  TempDir dir;
  std::ofstream(dir.file("run.cfg")) << "# comment\n"
                                     << "mel_bands = 48\n"
                                     << "sad_alpha = 0.4\n"
                                     << "augment = on\n"
                                     << "seed = 99\n";
  RunConfig cfg;
  apply_config_file(cfg, dir.file("run.cfg"));
  CHECK(cfg.mel_bands == 48);
  CHECK(cfg.sad_alpha == doctest::Approx(0.4));
  CHECK(cfg.augment);
  CHECK(cfg.seed == 99);
  CHECK(cfg.net.bands == 48);
  cfg.validate();

  SUBCASE("rendered config parses back to the same values") {
    const std::string text = render_config(cfg);
    std::ofstream(dir.file("echo.cfg")) << text;
    RunConfig cfg2;
    apply_config_file(cfg2, dir.file("echo.cfg"));
    CHECK(cfg2.mel_bands == cfg.mel_bands);
    CHECK(cfg2.sad_alpha == doctest::Approx(cfg.sad_alpha));
    CHECK(cfg2.seed == cfg.seed);
    CHECK(cfg2.augment == cfg.augment);
  }

  SUBCASE("environment overrides the file") {
    setenv("IVDOA_SEED", "1234", 1);
    RunConfig cfg3;
    apply_config_file(cfg3, dir.file("run.cfg"));
    apply_environment(cfg3);
    CHECK(cfg3.seed == 1234);
    unsetenv("IVDOA_SEED");
  }

  SUBCASE("unknown keys and malformed lines are rejected") {
    std::ofstream(dir.file("bad.cfg")) << "no_such_key = 1\n";
    RunConfig c;
    CHECK_THROWS_AS(apply_config_file(c, dir.file("bad.cfg")), std::invalid_argument);
    std::ofstream(dir.file("bad2.cfg")) << "mel_bands 48\n";
    CHECK_THROWS_AS(apply_config_file(c, dir.file("bad2.cfg")), std::invalid_argument);
  }

  SUBCASE("validation rejects inconsistent settings") {
    RunConfig c;
    c.fft_size = 1000;  // not a power of two
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = RunConfig{};
    c.channel_order = "bad";
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = RunConfig{};
    c.mel_bands = 50;  // not a multiple of 8
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  }
}

TEST_CASE("deterministic rng streams fork independently") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng f1 = Rng::fork(7, "noise", 0);
  Rng f2 = Rng::fork(7, "noise", 1);
  Rng f3 = Rng::fork(7, "event", 0);
  CHECK(f1.next_u64() != f2.next_u64());
  CHECK(f1.next_u64() != f3.next_u64());

  Rng u(5);
  for (int i = 0; i < 1000; ++i) {
    const double v = u.uniform();
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
  }
}
