// deepadc: gen | train | eval | quant-sweep
#include <CLI11.hpp>
#include <iostream>
#include <optional>

#include "deepadc/cli_io.hpp"

namespace fs = std::filesystem;
using namespace deepadc;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-interleaved ADC simulation and neural-network calibration"};
  app.require_subcommand(1);
  std::string config_path;
  auto add_config = [&](CLI::App* cmd) { cmd->add_option("--config", config_path, "INI run configuration")->required(); };

  auto* gen = app.add_subcommand("gen", "generate waveforms and ADC captures");
  add_config(gen);
  std::string gen_out;
  gen->add_option("--out", gen_out, "dataset directory (default <root>/data)");

  auto* train = app.add_subcommand("train", "train the calibration network");
  add_config(train);
  std::string train_data, train_model, resume;
  train->add_option("--data", train_data, "dataset directory (default <root>/data)");
  train->add_option("--model", train_model, "model file to write (default <root>/model.bin)");
  train->add_option("--resume", resume, "continue from this model file");

  auto* eval = app.add_subcommand("eval", "score all variants on the held-out captures");
  add_config(eval);
  std::string eval_model, eval_data, eval_out;
  eval->add_option("--model", eval_model, "model file (default <root>/model.bin)");
  eval->add_option("--data", eval_data, "dataset directory (default <root>/data)");
  eval->add_option("--out", eval_out, "report directory (default <root>/eval)");

  auto* sweep = app.add_subcommand("quant-sweep", "fixed-point bit-width sweep");
  add_config(sweep);
  std::string sweep_model, sweep_capture, sweep_calibration, sweep_out;
  sweep->add_option("--model", sweep_model, "model file (default <root>/model.bin)");
  sweep->add_option("--capture", sweep_capture, "capture to score (default <root>/data/eval/qam256.cap)");
  sweep->add_option("--calibration", sweep_calibration, "capture for activation ranges (default <root>/data/train/ twin of --capture, else --capture)");
  sweep->add_option("--out", sweep_out, "CSV file (default <root>/quant_sweep.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    const auto cfg = app::RunConfig::load(config_path);
    const fs::path root = app::output_root(cfg);
    auto or_default = [](const std::string& s, const fs::path& d) { return s.empty() ? d : fs::path(s); };
    const std::string& model_arg = train->parsed() ? train_model : eval->parsed() ? eval_model : sweep_model;
    const fs::path model = or_default(model_arg, root / "model.bin");

    if (gen->parsed()) {
      std::cout << app::cmd_gen(cfg, or_default(gen_out, root / "data"));
    } else if (train->parsed()) {
      std::optional<fs::path> from;
      if (!resume.empty()) from = resume;
      app::cmd_train(cfg, or_default(train_data, root / "data"), model, from, std::cout);
    } else if (eval->parsed()) {
      app::cmd_eval(cfg, model, or_default(eval_data, root / "data"), or_default(eval_out, root / "eval"), std::cout);
    } else {
      const auto capture = or_default(sweep_capture, root / "data" / "eval" / (app::capture_name(256) + ".cap"));
      std::optional<fs::path> cal;
      if (!sweep_calibration.empty()) {
        cal = sweep_calibration;
      } else if (const auto twin = root / "data" / "train" / capture.filename(); fs::exists(twin)) {
        cal = twin;
      }
      const auto out = or_default(sweep_out, root / "quant_sweep.csv");
      const auto rows = app::cmd_quant_sweep(cfg, model, capture, cal, out);
      for (const auto& r : rows) {
        std::cout << (r.bits ? std::to_string(r.bits) + "-bit" : std::string("float")) << ": ENOB " << r.enob
                  << ", max |error| " << r.max_abs_error << "\n";
      }
    }
  } catch (const app::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kOk;
}
