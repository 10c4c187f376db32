// Copyright (c) 2026 The CDS Authors
// SPDX-License-Identifier: Apache-2.0

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "cds/errors.hpp"
#include "cds/superpixel.hpp"
#include "cds/training.hpp"

namespace cds {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view v, std::string_view key) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("invalid value '" + std::string(v) + "' for " + std::string(key));
  }
  return out;
}

using Setter = std::function<void(TrainConfig&, std::string_view, const std::filesystem::path&)>;

template <typename T, typename M>
Setter number(M TrainConfig::*member) {
  return [member](TrainConfig& c, std::string_view v, const std::filesystem::path&) {
    c.*member = static_cast<M>(parse_number<T>(v, "key"));
  };
}

Setter weight(double LossWeights::*member) {
  return [member](TrainConfig& c, std::string_view v, const std::filesystem::path&) {
    c.weights.*member = parse_number<double>(v, "loss weight");
  };
}

Setter path(std::filesystem::path TrainConfig::*member) {
  return [member](TrainConfig& c, std::string_view v, const std::filesystem::path& base) {
    std::filesystem::path p{std::string(v)};
    c.*member = p.is_relative() && !base.empty() ? base / p : p;
  };
}

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"lr_main", number<double>(&TrainConfig::lr_main)},
      {"lr_h", number<double>(&TrainConfig::lr_h)},
      {"iters", number<long>(&TrainConfig::iters)},
      {"batch", number<int>(&TrainConfig::batch)},
      {"crop", number<int>(&TrainConfig::crop)},
      {"d", number<int>(&TrainConfig::d)},
      {"poly_power", number<double>(&TrainConfig::poly_power)},
      {"seed", number<std::uint64_t>(&TrainConfig::seed)},
      {"modality",
       [](TrainConfig& c, std::string_view v, const std::filesystem::path&) { c.modality = parse_modality(v); }},
      {"w_sp_i", weight(&LossWeights::sp_i)},
      {"w_sp_a", weight(&LossWeights::sp_a)},
      {"w_align", weight(&LossWeights::align)},
      {"w_mi", weight(&LossWeights::mi)},
      {"lambda_pos", number<double>(&TrainConfig::lambda_pos)},
      {"channels", number<int>(&TrainConfig::channels)},
      {"gate_reduction", number<int>(&TrainConfig::gate_reduction)},
      {"max_regions", number<int>(&TrainConfig::max_regions)},
      {"scale_min", number<double>(&TrainConfig::scale_min)},
      {"scale_max", number<double>(&TrainConfig::scale_max)},
      {"flip_prob", number<double>(&TrainConfig::flip_prob)},
      {"log_every", number<long>(&TrainConfig::log_every)},
      {"checkpoint_every", number<long>(&TrainConfig::checkpoint_every)},
      {"manifest", path(&TrainConfig::manifest)},
      {"out", path(&TrainConfig::out_dir)},
  };
  return table;
}

}  // namespace

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (!(lr_main > 0.0) || !(lr_h > 0.0)) fail("learning rates must be positive");
  if (iters < 1) fail("iters must be >= 1");
  if (batch < 1) fail("batch must be >= 1");
  if (!is_power_of_two(d)) fail("d=" + std::to_string(d) + " is not a power of two");
  if (crop < d || crop % d != 0) fail("crop " + std::to_string(crop) + " is not divisible by d=" + std::to_string(d));
  if (!(poly_power > 0.0)) fail("poly_power must be positive");
  if (channels < 1 || gate_reduction < 1) fail("channels and gate_reduction must be >= 1");
  if (max_regions < 1) fail("max_regions must be >= 1");
  if (lambda_pos < 0.0) fail("lambda_pos must be >= 0");
  if (weights.sp_i < 0 || weights.sp_a < 0 || weights.align < 0 || weights.mi < 0) fail("loss weights must be >= 0");
  if (!(scale_min > 0.0) || scale_max < scale_min) fail("invalid resize scale range");
  if (flip_prob < 0.0 || flip_prob > 1.0) fail("flip_prob must lie in [0,1]");
  if (log_every < 1 || checkpoint_every < 1) fail("log_every and checkpoint_every must be >= 1");
}

TrainConfig preset_config(std::string_view name) {
  TrainConfig c;
  if (name == "paper") return c;
  if (name == "desk") {
    c.crop = 64;
    c.d = 8;
    c.iters = 2000;
    c.batch = 4;
    return c;
  }
  throw ConfigError("unknown preset '" + std::string(name) + "' (expected desk|paper)");
}

void apply_config_text(TrainConfig& cfg, std::string_view text, const std::filesystem::path& base,
                       std::string_view source) {
  std::size_t lineno = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++lineno;
    if (lineno == 1 && line.substr(0, 3) == "\xEF\xBB\xBF") line.remove_prefix(3);
    if (const std::size_t hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    const std::string where = std::string(source) + ":" + std::to_string(lineno);
    if (eq == std::string_view::npos) throw ConfigError(where + ": expected `key = value`");
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError(where + ": unknown key '" + std::string(key) + "'");
    if (value.empty()) throw ConfigError(where + ": empty value for '" + std::string(key) + "'");
    try {
      it->second(cfg, value, base);
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + std::string(key) + ": " + e.what());
    }
  }
}

void apply_config_file(TrainConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(cfg, ss.str(), path.parent_path(), path.string());
}

std::string config_to_text(const TrainConfig& c) {
  std::ostringstream o;
  o.precision(17);
  o << "lr_main = " << c.lr_main << "\nlr_h = " << c.lr_h << "\niters = " << c.iters << "\nbatch = " << c.batch
    << "\ncrop = " << c.crop << "\nd = " << c.d << "\npoly_power = " << c.poly_power << "\nseed = " << c.seed
    << "\nmodality = " << modality_name(c.modality) << "\nw_sp_i = " << c.weights.sp_i
    << "\nw_sp_a = " << c.weights.sp_a << "\nw_align = " << c.weights.align << "\nw_mi = " << c.weights.mi
    << "\nlambda_pos = " << c.lambda_pos << "\nchannels = " << c.channels << "\ngate_reduction = " << c.gate_reduction
    << "\nmax_regions = " << c.max_regions << "\nscale_min = " << c.scale_min << "\nscale_max = " << c.scale_max
    << "\nflip_prob = " << c.flip_prob << "\nlog_every = " << c.log_every
    << "\ncheckpoint_every = " << c.checkpoint_every << '\n';
  if (!c.manifest.empty()) o << "manifest = " << c.manifest.generic_string() << '\n';
  o << "out = " << c.out_dir.generic_string() << '\n';
  return o.str();
}

}  // namespace cds
