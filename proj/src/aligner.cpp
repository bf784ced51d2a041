#include "cbdsel/aligner.hpp"

#include <cmath>

#include "cbdsel/detail/binary_io.hpp"

namespace cbdsel {

std::vector<std::uint8_t> encode_aligner(const AlignerModel& model) {
  if (model.bias.size() != model.target_dim()) throw ShapeError("aligner bias length does not match d_t");
  require_finite(model.weights, "aligner weights");
  require_finite(model.bias, "aligner bias");
  detail::ByteWriter w;
  w.magic("ALN1");
  w.u32(static_cast<std::uint32_t>(model.source_dim()));
  w.u32(static_cast<std::uint32_t>(model.target_dim()));
  w.f64(model.lambda);
  w.f64(model.r_squared);
  const double* data = model.weights.data();
  for (Eigen::Index i = 0; i < model.weights.size(); ++i) w.f64(data[i]);
  for (Eigen::Index i = 0; i < model.bias.size(); ++i) w.f64(model.bias[i]);
  return w.bytes();
}

AlignerModel decode_aligner(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  detail::ByteReader r(bytes, source);
  r.expect_magic("ALN1");
  const std::uint32_t ds = r.u32("d_s");
  const std::uint32_t dt = r.u32("d_t");
  if (ds == 0 || dt == 0) throw FormatError(source + ": aligner dimensions must be positive", 4);
  AlignerModel model;
  model.lambda = r.f64("lambda");
  model.r_squared = r.f64("r_squared");
  if (!(model.lambda >= 0.0) || !std::isfinite(model.lambda)) throw FormatError(source + ": invalid lambda", 12);
  r.need((static_cast<std::uint64_t>(ds) * dt + dt) * 8, "payload");
  model.weights.resize(ds, dt);
  double* data = model.weights.data();
  for (std::uint64_t i = 0; i < static_cast<std::uint64_t>(ds) * dt; ++i) {
    const auto at = r.offset();
    data[i] = r.f64("weight");
    if (!std::isfinite(data[i])) throw FormatError(source + ": non-finite weight", at);
  }
  model.bias.resize(dt);
  for (std::uint32_t i = 0; i < dt; ++i) {
    const auto at = r.offset();
    model.bias[i] = r.f64("bias");
    if (!std::isfinite(model.bias[i])) throw FormatError(source + ": non-finite bias", at);
  }
  r.expect_end();
  return model;
}

void save_aligner(const AlignerModel& model, const std::filesystem::path& path) {
  detail::write_file(path, encode_aligner(model));
}

AlignerModel load_aligner(const std::filesystem::path& path) {
  return decode_aligner(detail::read_file(path), path.string());
}

}  // namespace cbdsel
