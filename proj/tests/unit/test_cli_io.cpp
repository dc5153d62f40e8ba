#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "deepadc/cli_io.hpp"

using namespace deepadc;
using namespace deepadc::app;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kSmall = R"([data]
constellations = 64,256
train_symbols = 2
eval_symbols = 8
[train]
epochs = 1
[quant]
bits = 16,8
calibration_windows = 1000
[eval]
overlay_start = 100
overlay_length = 50
)";

fs::path scratch(const char* name) {
  auto p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  return p;
}

int run_cli(const std::string& args) {
  const int status = std::system((std::string(DEEPADC_CLI) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config parsing") {
  const auto d = RunConfig::parse("");
  CHECK(d.ofdm.n_subcarriers == 128);
  CHECK(d.ofdm.center_frequency == 1.3e9);
  CHECK(d.resolution_bits == 13);
  CHECK(d.impairments.jitter_rms == 390e-15);
  CHECK(d.window.current_index == 31);
  CHECK(d.train.batch_size == 256);
  CHECK(d.quant_bits == std::vector<int>{16, 12, 10, 8});
  CHECK(d.constellations.size() == 5);
  CHECK(RunConfig::parse(d.to_ini()).to_ini() == d.to_ini());

  const auto s = RunConfig::parse(kSmall);
  CHECK(s.constellations == std::vector<int>{64, 256});
  CHECK(s.train.epochs == 1);
  CHECK(s.quant_bits == std::vector<int>{16, 8});

  CHECK_THROWS_AS(RunConfig::parse("[train]\nepoch = 2\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("[nope]\nx = 1\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("x = 1\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("[train]\nepochs = ten\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("[train]\nlearning_rate = 1e-3x\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("[train]\noptimizer = rmsprop\n"), ConfigError);
  CHECK(RunConfig::parse("[eval]\npapr = per_record\n").papr_mode == signal::PaprMode::per_record);
  CHECK_THROWS_AS(RunConfig::parse("[eval]\npapr = peak\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("[data]\ntrain_symbols = 0\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("[data]\nconstellations = 64,100\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("[quant]\nbits = 16,2\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("[window]\ncurrent_index = 64\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("[ofdm]\ncenter_frequency = 4e9\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::load("/nonexistent/run.ini"), ConfigError);
}

TEST_CASE("output root override") {
  RunConfig c;
  c.output_dir = "configured";
  ::unsetenv("DEEPADC_OUT");
  CHECK(output_root(c) == fs::path("configured"));
  ::setenv("DEEPADC_OUT", "/tmp/elsewhere", 1);
  CHECK(output_root(c) == fs::path("/tmp/elsewhere"));
  ::unsetenv("DEEPADC_OUT");
}

TEST_CASE("pipeline commands are reproducible") {
  const auto cfg = RunConfig::parse(kSmall);
  const auto a = scratch("deepadc_cli_a"), b = scratch("deepadc_cli_b");
  std::ostringstream log;

  const auto manifest = cmd_gen(cfg, a / "data");
  CHECK(cmd_gen(cfg, b / "data") == manifest);
  for (int k = 0; k < 8; ++k) CHECK(manifest.find("channel." + std::to_string(k) + " = ") != std::string::npos);
  for (const char* f : {"train/qam64.cap", "train/qam256.wfm", "eval/qam256.cap", "manifest.txt"}) {
    REQUIRE(fs::exists(a / "data" / f));
    CHECK(slurp(a / "data" / f) == slurp(b / "data" / f));
  }

  const auto ta = cmd_train(cfg, a / "data", a / "model.bin", std::nullopt, log);
  cmd_train(cfg, b / "data", b / "model.bin", std::nullopt, log);
  CHECK(slurp(a / "model.bin") == slurp(b / "model.bin"));
  CHECK(ta.report_path == a / "model_train.csv");
  CHECK(fs::exists(ta.report_path));
  CHECK(log.str().find("latency: 32 samples") != std::string::npos);

  const auto ea = cmd_eval(cfg, a / "model.bin", a / "data", a / "eval", log);
  cmd_eval(cfg, b / "model.bin", b / "data", b / "eval", log);
  CHECK(ea.size() == 2 * 4);
  CHECK(slurp(a / "eval" / "summary.csv") == slurp(b / "eval" / "summary.csv"));
  for (const char* order : {"qam64", "qam256"}) {
    const auto dir = a / "eval" / order;
    for (const char* f : {"enob.csv", "ser.csv", "papr_ccdf.csv"}) CHECK(fs::exists(dir / f));
    for (const char* v : {"ideal", "nonideal", "shift", "nn"}) {
      for (const char* kind : {"lsb_error_", "spectrum_", "phase_", "time_"}) {
        const auto p = dir / (std::string(kind) + v + ".csv");
        REQUIRE(fs::exists(p));
        CHECK(slurp(p) == slurp(b / "eval" / order / p.filename()));
      }
    }
    const auto enob = slurp(dir / "enob.csv");
    CHECK(enob.rfind("variant,sndr_db,enob_bits\n", 0) == 0);
    CHECK(std::count(enob.begin(), enob.end(), '\n') == 5);
  }
  const auto t = slurp(a / "eval" / "qam256" / "time_nn.csv");
  CHECK(std::count(t.begin(), t.end(), '\n') == 51);

  const auto rows = cmd_quant_sweep(cfg, a / "model.bin", a / "data" / "eval" / "qam256.cap",
                                    a / "data" / "train" / "qam256.cap", a / "sweep.csv");
  CHECK(rows.size() == 3);
  const auto csv = slurp(a / "sweep.csv");
  CHECK(csv.rfind("bits,enob,sndr,mse,max_abs_error\n0,", 0) == 0);

  // resume continues from the saved weights
  const auto tr = cmd_train(cfg, a / "data", a / "resumed.bin", a / "model.bin", log);
  CHECK(tr.report.epochs.size() == 1);
  CHECK(slurp(a / "resumed.bin") != slurp(a / "model.bin"));

  CHECK_THROWS_AS(cmd_train(cfg, a / "missing", a / "never.bin", std::nullopt, log), DataError);
  CHECK_FALSE(fs::exists(a / "never.bin"));
  CHECK_THROWS_AS(cmd_eval(cfg, a / "missing.bin", a / "data", a / "eval", log), DataError);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("command-line exit codes") {
  const auto dir = scratch("deepadc_cli_exit");
  fs::create_directories(dir);
  const auto ini = dir / "run.ini";
  {
    std::ofstream(ini) << kSmall << "[output]\ndir = " << (dir / "out").string() << "\n";
  }
  const std::string c = " --config " + ini.string();
  CHECK(run_cli("") == 1);
  CHECK(run_cli("bogus") == 1);
  CHECK(run_cli("gen") == 1);
  CHECK(run_cli("--help") == 0);
  {
    std::ofstream(dir / "bad.ini") << "[train]\nepoch = 1\n";
  }
  CHECK(run_cli("gen --config " + (dir / "bad.ini").string()) == 1);
  CHECK(run_cli("eval" + c + " --model " + (dir / "none.bin").string()) == 2);
  CHECK(run_cli("gen" + c) == 0);
  CHECK(fs::exists(dir / "out" / "data" / "manifest.txt"));
  // a learning rate this large overflows on the first update
  std::string text = kSmall;
  text.replace(text.find("[train]\n"), 8, "[train]\noptimizer = sgd\nlearning_rate = 1e30\n");
  {
    std::ofstream(dir / "diverge.ini") << text << "[output]\ndir = " << (dir / "out").string() << "\n";
  }
  CHECK(run_cli("train --config " + (dir / "diverge.ini").string()) == 3);
  CHECK_FALSE(fs::exists(dir / "out" / "model.bin"));
  fs::remove_all(dir);
}
