#include "deepadc/cli_io.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "deepadc/baseline_calib.hpp"
#include "deepadc/container.hpp"

namespace deepadc::app {

namespace fs = std::filesystem;

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError("bad value for " + key + ": '" + text + "'");
  return v;
}

std::vector<int> parse_list(const std::string& key, const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto a = item.find_first_not_of(" \t"), b = item.find_last_not_of(" \t");
    if (a == std::string::npos) throw ConfigError("empty entry in " + key);
    out.push_back(parse_number<int>(key, item.substr(a, b - a + 1)));
  }
  return out;
}

std::string join(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

struct Field {
  const char* section;
  const char* key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T, typename Member>
Field number(const char* section, const char* key, Member m) {
  return {section, key,
          [m, section, key](RunConfig& c, const std::string& v) {
            std::invoke(m, c) = parse_number<T>(std::string(section) + "." + key, v);
          },
          [m](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return io::format_double(std::invoke(m, c));
            } else {
              return std::to_string(std::invoke(m, c));
            }
          }};
}

#define DEEPADC_FIELD(T, SECTION, KEY, EXPR) \
  number<T>(SECTION, KEY, [](auto& c) -> auto& { return c.EXPR; })

const std::vector<Field>& fields() {
  static const std::vector<Field> all = {
      DEEPADC_FIELD(int, "ofdm", "n_subcarriers", ofdm.n_subcarriers),
      DEEPADC_FIELD(double, "ofdm", "subcarrier_spacing", ofdm.subcarrier_spacing),
      DEEPADC_FIELD(double, "ofdm", "center_frequency", ofdm.center_frequency),
      DEEPADC_FIELD(double, "ofdm", "analog_rate", ofdm.analog_rate),
      DEEPADC_FIELD(int, "ofdm", "cyclic_prefix", ofdm.cyclic_prefix_samples),
      DEEPADC_FIELD(double, "ofdm", "peak_fraction", ofdm.peak_fraction),

      DEEPADC_FIELD(int, "adc", "n_channels", n_channels),
      DEEPADC_FIELD(double, "adc", "channel_rate", channel_rate),
      DEEPADC_FIELD(int, "adc", "resolution_bits", resolution_bits),
      DEEPADC_FIELD(double, "adc", "full_scale", full_scale),
      DEEPADC_FIELD(std::uint64_t, "adc", "seed", adc_seed),
      DEEPADC_FIELD(double, "adc", "skew_spread", impairments.skew_spread),
      DEEPADC_FIELD(double, "adc", "jitter_rms", impairments.jitter_rms),
      DEEPADC_FIELD(double, "adc", "jitter_bandwidth", impairments.jitter_bandwidth),
      DEEPADC_FIELD(double, "adc", "ripple_db_min", impairments.ripple_db_min),
      DEEPADC_FIELD(double, "adc", "ripple_db_max", impairments.ripple_db_max),
      DEEPADC_FIELD(double, "adc", "corner_hz_min", impairments.corner_hz_min),
      DEEPADC_FIELD(double, "adc", "corner_hz_max", impairments.corner_hz_max),
      DEEPADC_FIELD(int, "adc", "filter_order", impairments.filter_order),
      DEEPADC_FIELD(double, "adc", "nonlinearity_min", impairments.nonlinearity_min),
      DEEPADC_FIELD(double, "adc", "nonlinearity_max", impairments.nonlinearity_max),

      {"data", "constellations", [](RunConfig& c, const std::string& v) { c.constellations = parse_list("data.constellations", v); },
       [](const RunConfig& c) { return join(c.constellations); }},
      DEEPADC_FIELD(int, "data", "train_symbols", train_symbols),
      DEEPADC_FIELD(int, "data", "eval_symbols", eval_symbols),
      DEEPADC_FIELD(std::uint64_t, "data", "seed", data_seed),

      DEEPADC_FIELD(std::size_t, "window", "length", window.window_length),
      DEEPADC_FIELD(std::size_t, "window", "current_index", window.current_index),

      DEEPADC_FIELD(double, "train", "learning_rate", train.learning_rate),
      DEEPADC_FIELD(std::size_t, "train", "batch_size", train.batch_size),
      DEEPADC_FIELD(std::size_t, "train", "epochs", train.epochs),
      DEEPADC_FIELD(std::uint64_t, "train", "seed", train.seed),
      DEEPADC_FIELD(std::uint64_t, "train", "model_seed", model_seed),
      DEEPADC_FIELD(double, "train", "validation_fraction", train.validation_fraction),
      DEEPADC_FIELD(double, "train", "stop_below", train.stop_below),
      {"train", "optimizer",
       [](RunConfig& c, const std::string& v) {
         if (v == "adam") {
           c.train.optimizer = calib::OptimizerKind::adam;
         } else if (v == "sgd") {
           c.train.optimizer = calib::OptimizerKind::sgd;
         } else {
           throw ConfigError("train.optimizer must be adam or sgd, got '" + v + "'");
         }
       },
       [](const RunConfig& c) { return std::string(c.train.optimizer == calib::OptimizerKind::adam ? "adam" : "sgd"); }},

      {"quant", "bits", [](RunConfig& c, const std::string& v) { c.quant_bits = parse_list("quant.bits", v); },
       [](const RunConfig& c) { return join(c.quant_bits); }},
      DEEPADC_FIELD(std::size_t, "quant", "lut_size", quant.lut_size),
      DEEPADC_FIELD(double, "quant", "sigmoid_range", quant.sigmoid_range),
      DEEPADC_FIELD(double, "quant", "tanh_range", quant.tanh_range),
      DEEPADC_FIELD(std::size_t, "quant", "calibration_windows", calibration_windows),

      DEEPADC_FIELD(double, "eval", "rbw", rbw),
      DEEPADC_FIELD(std::size_t, "eval", "overlay_start", overlay_start),
      DEEPADC_FIELD(std::size_t, "eval", "overlay_length", overlay_length),
      {"eval", "papr",
       [](RunConfig& c, const std::string& v) {
         if (v == "per_symbol") {
           c.papr_mode = signal::PaprMode::per_symbol;
         } else if (v == "per_record") {
           c.papr_mode = signal::PaprMode::per_record;
         } else {
           throw ConfigError("eval.papr must be per_symbol or per_record, got '" + v + "'");
         }
       },
       [](const RunConfig& c) {
         return std::string(c.papr_mode == signal::PaprMode::per_symbol ? "per_symbol" : "per_record");
       }},

      {"output", "dir", [](RunConfig& c, const std::string& v) { c.output_dir = v; },
       [](const RunConfig& c) { return c.output_dir.string(); }},
  };
  return all;
}

#undef DEEPADC_FIELD

signal::OfdmConfig ofdm_of(const RunConfig& cfg) {
  auto o = cfg.ofdm;
  o.full_scale = cfg.full_scale;
  return o;
}

fs::path capture_path(const fs::path& data, const char* split, int order) {
  return data / split / (capture_name(order) + ".cap");
}

std::string num(double v) { return io::format_double(v); }

void write_csv(const fs::path& path, const std::string& header, const std::vector<std::vector<double>>& columns) {
  std::string text = header + "\n";
  const std::size_t n = columns.empty() ? 0 : columns.front().size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < columns.size(); ++c) text += (c ? "," : "") + num(columns[c][i]);
    text += '\n';
  }
  io::write_text_file(path, text);
}

std::vector<double> index_column(std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<double>(i);
  return v;
}

void require_file(const fs::path& p, const char* what) {
  if (!fs::is_regular_file(p)) throw DataError(std::string(what) + " not found: " + p.string());
}

}  // namespace

RunConfig RunConfig::parse(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax error: ") + e.what());
  }
  RunConfig cfg;
  for (const auto& [section, body] : tree) {
    if (!body.data().empty()) throw ConfigError("key outside any section: " + section);
    for (const auto& [key, value] : body) {
      const auto& all = fields();
      auto it = std::find_if(all.begin(), all.end(), [&](const Field& f) { return section == f.section && key == f.key; });
      if (it == all.end()) throw ConfigError("unknown config key: " + section + "." + key);
      it->set(cfg, value.get_value<std::string>());
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string RunConfig::to_ini() const {
  std::string out, section;
  for (const auto& f : fields()) {
    if (section != f.section) {
      section = f.section;
      out += (out.empty() ? "[" : "\n[") + section + "]\n";
    }
    out += std::string(f.key) + " = " + f.get(*this) + "\n";
  }
  return out;
}

void RunConfig::validate() const {
  try {
    ofdm_of(*this).validate();
    window.validate();
    quant.validate();
    draw_adc().validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
  if (constellations.empty()) throw ConfigError("data.constellations is empty");
  for (int o : constellations) {
    if (std::find(std::begin(signal::kSupportedOrders), std::end(signal::kSupportedOrders), o) ==
        std::end(signal::kSupportedOrders)) {
      throw ConfigError("unsupported constellation order " + std::to_string(o));
    }
  }
  if (train_symbols < 1 || eval_symbols < 1) throw ConfigError("symbol counts must be positive");
  if (quant_bits.empty()) throw ConfigError("quant.bits is empty");
  for (int b : quant_bits) {
    if (b < 4 || b > 24) throw ConfigError("quant.bits entries must lie in [4, 24]");
  }
  if (calibration_windows < 1000) throw ConfigError("quant.calibration_windows must be at least 1000");
  if (train.batch_size == 0 || train.epochs == 0) throw ConfigError("train.batch_size and train.epochs must be positive");
  if (!(train.learning_rate > 0.0)) throw ConfigError("train.learning_rate must be positive");
  if (!(train.validation_fraction >= 0.0 && train.validation_fraction < 1.0)) {
    throw ConfigError("train.validation_fraction must lie in [0, 1)");
  }
  if (!(rbw > 0.0)) throw ConfigError("eval.rbw must be positive");
}

adc::AdcConfig RunConfig::draw_adc() const {
  return adc::draw_adc_config(impairments, ofdm.analog_rate, adc_seed, n_channels, channel_rate, resolution_bits,
                              full_scale);
}

std::uint64_t RunConfig::record_seed(int order, int split) const {
  return data_seed * 1000003ULL + static_cast<std::uint64_t>(order) * 10ULL + static_cast<std::uint64_t>(split);
}

fs::path output_root(const RunConfig& cfg) {
  if (const char* env = std::getenv("DEEPADC_OUT"); env && *env) return env;
  return cfg.output_dir;
}

std::string capture_name(int order) { return "qam" + std::to_string(order); }

std::string cmd_gen(const RunConfig& cfg, const fs::path& out) {
  cfg.validate();
  const auto adc_cfg = cfg.draw_adc();
  const auto ofdm = ofdm_of(cfg);
  std::error_code ec;
  for (const char* split : {"train", "eval"}) {
    fs::create_directories(out / split, ec);
    if (ec) throw DataError("cannot create " + (out / split).string() + ": " + ec.message());
  }

  struct Job {
    int order, split;
  };
  std::vector<Job> jobs;
  for (int split : {0, 1})
    for (int o : cfg.constellations) jobs.push_back({o, split});
  std::vector<std::string> errors(jobs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(jobs.size()); ++j) {
    const auto& job = jobs[static_cast<std::size_t>(j)];
    try {
      const int symbols = job.split == 0 ? cfg.train_symbols : cfg.eval_symbols;
      const char* split = job.split == 0 ? "train" : "eval";
      const auto rec = signal::generate_record(job.order, symbols, ofdm, cfg.record_seed(job.order, job.split));
      save_waveform(out / split / (capture_name(job.order) + ".wfm"), rec);
      adc::save_capture(capture_path(out, split, job.order), adc::simulate_interleaved(rec, adc_cfg));
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(j)] = e.what();
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw DataError(e);
  }

  std::ostringstream m;
  m << cfg.to_ini() << "\n[channels]\n";
  for (std::size_t i = 0; i < adc_cfg.channels.size(); ++i) {
    const auto& ch = adc_cfg.channels[i];
    m << "channel." << i << " = skew_s=" << num(ch.skew) << " jitter_rms_s=" << num(ch.jitter_rms)
      << " jitter_bandwidth_hz=" << num(ch.jitter_bandwidth) << " nonlinearity_v=" << num(ch.nonlinearity_scale);
    if (ch.memory_filter) {
      m << " filter_order=" << ch.memory_filter->order << " ripple_db=" << num(ch.memory_filter->ripple_db)
        << " corner_hz=" << num(ch.memory_filter->corner_hz);
    }
    m << "\n";
  }
  m << "\n[records]\n";
  for (const auto& job : jobs) {
    m << (job.split == 0 ? "train." : "eval.") << capture_name(job.order) << " = seed=" << cfg.record_seed(job.order, job.split)
      << " symbols=" << (job.split == 0 ? cfg.train_symbols : cfg.eval_symbols) << "\n";
  }
  io::write_text_file(out / "manifest.txt", m.str());
  return m.str();
}

TrainOutcome cmd_train(const RunConfig& cfg, const fs::path& data, const fs::path& model_out,
                       const std::optional<fs::path>& resume, std::ostream& log) {
  cfg.validate();
  std::vector<adc::AdcCapture> caps;
  for (int o : cfg.constellations) {
    const auto p = capture_path(data, "train", o);
    require_file(p, "training capture");
    caps.push_back(adc::load_capture(p));
  }
  if (resume) require_file(*resume, "model to resume");
  const auto dataset = calib::make_dataset(caps, cfg.window, cfg.train.seed);
  caps.clear();

  auto model = resume ? calib::load_model(*resume) : calib::build_network(cfg.model_seed, cfg.window, cfg.resolution_bits);
  const double rate = cfg.n_channels * cfg.channel_rate;
  log << "windows: " << dataset.size() << ", parameters: " << model.net.parameter_count() << "\n";
  log << "latency: " << model.window.latency() << " samples (" << std::setprecision(4)
      << 1e9 * static_cast<double>(model.window.latency()) / rate << " ns at " << rate / 1e9 << " GS/s)\n";
  log.flush();

  TrainOutcome out;
  out.report = calib::train(model, dataset, cfg.train, [&](const calib::EpochStats& e) {
    log << "epoch " << e.epoch << ": train " << std::setprecision(6) << e.train_loss << ", val " << e.val_loss << ", "
        << std::setprecision(1) << std::fixed << e.seconds << std::defaultfloat << " s\n";
    log.flush();
  });
  out.model_path = model_out;
  out.report_path = model_out.parent_path() / (model_out.stem().string() + "_train.csv");
  if (!model_out.parent_path().empty()) fs::create_directories(model_out.parent_path());
  calib::save_model(model_out, model);
  io::write_text_file(out.report_path, out.report.to_csv());
  log << "best epoch " << out.report.best_epoch << ", validation loss " << std::setprecision(6)
      << out.report.best_val_loss << "\n";
  return out;
}

std::vector<VariantSummary> cmd_eval(const RunConfig& cfg, const fs::path& model_path, const fs::path& data,
                                     const fs::path& out, std::ostream& log) {
  using metrics::Variant;
  cfg.validate();
  require_file(model_path, "model");
  auto model = calib::load_model(model_path);
  const auto ofdm = ofdm_of(cfg);
  std::vector<VariantSummary> summary;
  for (int order : cfg.constellations) {
    const auto cp = capture_path(data, "eval", order);
    require_file(cp, "evaluation capture");
    const auto cap = adc::load_capture(cp);
    if (cap.config.resolution_bits != model.resolution_bits) {
      throw DataError("model resolution " + std::to_string(model.resolution_bits) + " does not match capture " +
                      cp.string());
    }
    const std::size_t n = cap.size();
    if (n < 2 * kEdgeExclusion + model.window.window_length) throw DataError("capture too short: " + cp.string());

    std::vector<std::pair<Variant, std::vector<double>>> variants;
    variants.emplace_back(Variant::ideal, std::vector<double>(cap.ideal_codes.begin(), cap.ideal_codes.end()));
    variants.emplace_back(Variant::nonideal, std::vector<double>(cap.nonideal_codes.begin(), cap.nonideal_codes.end()));
    variants.emplace_back(Variant::shift, baseline::shift_correct(cap).corrected);
    auto nn_out = calib::infer_stream(model, cap.nonideal_codes);
    for (auto& v : nn_out) v *= model.normalization;
    variants.emplace_back(Variant::nn, std::move(nn_out));

    const fs::path dir = out / capture_name(order);
    fs::create_directories(dir);
    std::string enob = "variant,sndr_db,enob_bits\n", ser = "variant,ser\n";
    const double dt_ns = 1e9 / cap.config.aggregate_rate();
    for (const auto& [variant, codes] : variants) {
      const auto r = metrics::evaluate_variant(variant, codes, cap, ofdm, cfg.rbw, cfg.papr_mode);
      const auto name = metrics::variant_name(variant);
      enob += name + "," + num(r.sndr.sndr_capped()) + "," + num(r.sndr.enob_capped()) + "\n";
      ser += name + "," + num(r.ser) + "\n";
      summary.push_back({order, variant, r.sndr.sndr_capped(), r.sndr.enob_capped(), r.ser});

      write_csv(dir / ("lsb_error_" + name + ".csv"), "sample,error_lsb", {index_column(n), r.lsb_error});
      write_csv(dir / ("spectrum_" + name + ".csv"), "freq_hz,magnitude_db", {r.spectrum.freq_hz, r.spectrum.magnitude_db});
      std::vector<double> pf, pv;
      for (std::size_t i = 0; i < r.spectrum.phase_rad.size(); ++i) {
        if (std::isfinite(r.spectrum.phase_rad[i])) {
          pf.push_back(r.spectrum.freq_hz[i]);
          pv.push_back(r.spectrum.phase_rad[i]);
        }
      }
      write_csv(dir / ("phase_" + name + ".csv"), "freq_hz,phase_rad", {pf, pv});
      std::vector<double> t, c;
      for (std::size_t i = cfg.overlay_start; i < std::min(n, cfg.overlay_start + cfg.overlay_length); ++i) {
        t.push_back(static_cast<double>(i) * dt_ns);
        c.push_back(codes[i]);
      }
      write_csv(dir / ("time_" + name + ".csv"), "time_ns,code", {t, c});
      if (variant == Variant::ideal) {
        std::vector<double> th, p;
        for (const auto& pt : r.papr_ccdf) {
          th.push_back(pt.threshold_db);
          p.push_back(pt.probability);
        }
        write_csv(dir / "papr_ccdf.csv", "papr_db,probability", {th, p});
      }
      log << capture_name(order) << " " << name << ": ENOB " << std::fixed << std::setprecision(3)
          << r.sndr.enob_capped() << " bits, SER " << std::defaultfloat << r.ser << "\n";
    }
    io::write_text_file(dir / "enob.csv", enob);
    io::write_text_file(dir / "ser.csv", ser);
  }
  std::string s = "constellation,variant,sndr_db,enob_bits,ser\n";
  for (const auto& v : summary) {
    s += std::to_string(v.constellation_order) + "," + metrics::variant_name(v.variant) + "," + num(v.sndr_db) + "," +
         num(v.enob) + "," + num(v.ser) + "\n";
  }
  io::write_text_file(out / "summary.csv", s);
  return summary;
}

std::vector<quant::SweepRow> cmd_quant_sweep(const RunConfig& cfg, const fs::path& model_path,
                                             const fs::path& capture_path_, const std::optional<fs::path>& calibration,
                                             const fs::path& out_csv) {
  cfg.validate();
  require_file(model_path, "model");
  require_file(capture_path_, "capture");
  if (calibration) require_file(*calibration, "calibration capture");
  auto model = calib::load_model(model_path);
  const auto cap = adc::load_capture(capture_path_);
  const auto cal_cap = calibration ? adc::load_capture(*calibration) : cap;
  if (cap.config.resolution_bits != model.resolution_bits || cal_cap.config.resolution_bits != model.resolution_bits) {
    throw DataError("model resolution does not match the capture");
  }
  const auto cal = quant::select_calibration_windows(calib::make_windows(cal_cap, model.window), cfg.calibration_windows);
  const auto rows = quant::sweep_bitwidths(model, cfg.quant_bits, cap, cal, cfg.quant);
  if (!out_csv.parent_path().empty()) fs::create_directories(out_csv.parent_path());
  io::write_text_file(out_csv, quant::sweep_csv(rows));
  return rows;
}

}  // namespace deepadc::app
