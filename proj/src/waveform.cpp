#include "deepadc/waveform.hpp"

#include "deepadc/container.hpp"
#include "deepadc/error.hpp"

namespace deepadc {

void save_waveform(const std::filesystem::path& path, const WaveformRecord& r) {
  io::Header h;
  h.set("format", std::string("deepadc-waveform"));
  h.set("version", 1);
  h.set("kind", std::string(r.is_complex() ? "complex" : "real"));
  h.set("sample_rate", r.sample_rate);
  h.set("n_samples", static_cast<std::int64_t>(r.size()));
  h.set("scale", r.scale);
  h.set("constellation_order", r.constellation_order);
  h.set("n_subcarriers", r.n_subcarriers);
  h.set("n_symbols", r.n_symbols);
  h.set("cyclic_prefix", r.cyclic_prefix);
  h.set("seed", r.seed);
  h.set("tx_symbols", io::join_ints(r.tx_symbols));
  std::vector<std::byte> payload;
  payload.reserve(r.samples.size() * 4);
  for (double v : r.samples) io::append_f32(payload, static_cast<float>(v));
  io::write_container(path, h, payload);
}

WaveformRecord load_waveform(const std::filesystem::path& path) {
  const auto c = io::read_container(path);
  const auto& h = c.header;
  if (h.get("format") != "deepadc-waveform") throw DataError("not a waveform file: " + path.string());
  if (h.get_int("version") != 1) throw DataError("unsupported waveform version in " + path.string());
  WaveformRecord r;
  const auto& kind = h.get("kind");
  if (kind == "real") {
    r.kind = SampleKind::real;
  } else if (kind == "complex") {
    r.kind = SampleKind::complex;
  } else {
    throw DataError("unknown waveform kind: " + kind);
  }
  r.sample_rate = h.get_double("sample_rate");
  r.scale = h.get_double("scale");
  r.constellation_order = static_cast<int>(h.get_int("constellation_order"));
  r.n_subcarriers = static_cast<int>(h.get_int("n_subcarriers"));
  r.n_symbols = static_cast<int>(h.get_int("n_symbols"));
  r.cyclic_prefix = static_cast<int>(h.get_int("cyclic_prefix"));
  r.seed = h.get_uint("seed");
  r.tx_symbols = io::split_ints(h.get("tx_symbols"));
  const auto n = static_cast<std::size_t>(h.get_int("n_samples")) * (r.is_complex() ? 2 : 1);
  if (c.payload.size() != n * 4) throw DataError("waveform payload size mismatch in " + path.string());
  r.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) r.samples[i] = io::read_f32(c.payload, 4 * i);
  return r;
}

}  // namespace deepadc
