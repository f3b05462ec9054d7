// Copyright 2026 The nist-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "nist/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <stdexcept>

namespace nist {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename V> V parse_number(const std::string& key, const std::string& text) {
  V value{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw std::invalid_argument("invalid value '" + text + "' for key '" + key + "'");
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "1" || text == "true" || text == "on") return true;
  if (text == "0" || text == "false" || text == "off") return false;
  throw std::invalid_argument("invalid boolean '" + text + "' for key '" + key + "'");
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

template <typename V> Setter number(V RunConfig::*field) {
  return [field](RunConfig& c, const std::string& k, const std::string& v) { c.*field = parse_number<V>(k, v); };
}

template <typename V, typename S> Setter nested(S RunConfig::*outer, V S::*inner) {
  return [outer, inner](RunConfig& c, const std::string& k, const std::string& v) {
    (c.*outer).*inner = parse_number<V>(k, v);
  };
}

template <typename V, typename S> Setter train_field(S TrainConfig::*outer, V S::*inner) {
  return [outer, inner](RunConfig& c, const std::string& k, const std::string& v) {
    (c.train.*outer).*inner = parse_number<V>(k, v);
  };
}

template <typename V> Setter train_value(V TrainConfig::*field) {
  return [field](RunConfig& c, const std::string& k, const std::string& v) { c.train.*field = parse_number<V>(k, v); };
}

const std::vector<std::pair<std::string, Setter>>& setters() {
  static const std::vector<std::pair<std::string, Setter>> table = {
      {"scene", [](RunConfig& c, const std::string&, const std::string& v) { parse_shape(v); c.scene = v; }},
      {"material",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v != "flat" && v != "checker") throw std::invalid_argument("invalid value '" + v + "' for key '" + k + "'");
         c.material = v;
       }},
      {"ambient", number(&RunConfig::ambient)},
      {"background", number(&RunConfig::background)},
      {"light_seed", number(&RunConfig::light_seed)},
      {"frames", number(&RunConfig::frames)},
      {"width", number(&RunConfig::width)},
      {"height", number(&RunConfig::height)},
      {"res",
       [](RunConfig& c, const std::string&, const std::string& v) {
         std::tie(c.width, c.height) = parse_resolution(v);
       }},
      {"tess_level", nested(&RunConfig::tess, &TessellationConfig::level)},
      {"alpha", nested(&RunConfig::tess, &TessellationConfig::alpha)},
      {"data_seed", number(&RunConfig::data_seed)},
      {"scales", train_field(&TrainConfig::model, &ModelConfig::scales)},
      {"working_levels", train_field(&TrainConfig::model, &ModelConfig::working_levels)},
      {"guidance_channels", train_field(&TrainConfig::model, &ModelConfig::guidance_channels)},
      {"deform_channels", train_field(&TrainConfig::model, &ModelConfig::deform_channels)},
      {"color_channels", train_field(&TrainConfig::model, &ModelConfig::color_channels)},
      {"channels",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         const int n = parse_number<int>(k, v);
         c.train.model.guidance_channels = c.train.model.deform_channels = c.train.model.color_channels = n;
       }},
      {"flow_scale", train_field(&TrainConfig::model, &ModelConfig::flow_scale)},
      {"leaky_slope", train_field(&TrainConfig::model, &ModelConfig::leaky_slope)},
      {"compose_flow",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.train.model.compose_flow = parse_bool(k, v); }},
      {"variant",
       [](RunConfig& c, const std::string&, const std::string& v) { c.train.model.variant = parse_variant(v); }},
      {"loss_preset",
       [](RunConfig& c, const std::string&, const std::string& v) { c.train.loss = LossConfig::preset(v); }},
      {"epsilon", train_field(&TrainConfig::loss, &LossConfig::epsilon)},
      {"k_fraction", train_field(&TrainConfig::loss, &LossConfig::k_fraction)},
      {"lambda_rr", train_field(&TrainConfig::loss, &LossConfig::lambda_rr)},
      {"lambda_shade", train_field(&TrainConfig::loss, &LossConfig::lambda_shade)},
      {"lambda_percep", train_field(&TrainConfig::loss, &LossConfig::lambda_percep)},
      {"lr", train_field(&TrainConfig::adam, &AdamConfig::lr)},
      {"weight_decay", train_field(&TrainConfig::adam, &AdamConfig::weight_decay)},
      {"beta1", train_field(&TrainConfig::adam, &AdamConfig::beta1)},
      {"beta2", train_field(&TrainConfig::adam, &AdamConfig::beta2)},
      {"adam_eps", train_field(&TrainConfig::adam, &AdamConfig::eps)},
      {"steps", train_value(&TrainConfig::steps)},
      {"batch_size", train_value(&TrainConfig::batch_size)},
      {"seed", train_value(&TrainConfig::seed)},
      {"crop", train_value(&TrainConfig::crop)},
      {"silhouette_bias", train_value(&TrainConfig::silhouette_bias)},
      {"checkpoint_interval", train_value(&TrainConfig::checkpoint_interval)},
      {"sil_angle", train_field(&TrainConfig::silhouette, &SilhouetteConfig::angle_degrees)},
      {"sil_radius", train_field(&TrainConfig::silhouette, &SilhouetteConfig::radius)},
  };
  return table;
}

} // namespace

SceneSpec RunConfig::scene_spec() const {
  SceneSpec s;
  s.shape = parse_shape(scene);
  if (material == "checker") s.material = scene::Checker{};
  s.ambient = ambient;
  s.background = background;
  s.rng_seed = light_seed;
  return s;
}

void RunConfig::validate() const {
  scene_spec().validate();
  nist::validate(tess);
  if (frames < 0) throw std::invalid_argument("frames must be >= 0");
  if (width <= 0 || height <= 0) throw std::invalid_argument("resolution must be positive");
  train.validate();
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, setter] : setters()) k.push_back(name);
    return k;
  }();
  return keys;
}

void apply_setting(RunConfig& config, const std::string& key, const std::string& value) {
  for (const auto& [name, setter] : setters()) {
    if (name == key) {
      setter(config, key, value);
      return;
    }
  }
  throw std::invalid_argument("unknown config key '" + key + "'");
}

std::pair<std::string, std::string> split_setting(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw std::invalid_argument("expected key=value, got '" + text + "'");
  return {trim(text.substr(0, eq)), trim(text.substr(eq + 1))};
}

std::pair<int, int> parse_resolution(const std::string& text) {
  const auto x = text.find('x');
  if (x == std::string::npos) throw std::invalid_argument("resolution must look like WxH, got '" + text + "'");
  return {parse_number<int>("res", text.substr(0, x)), parse_number<int>("res", text.substr(x + 1))};
}

void load_config_file(const std::filesystem::path& path, RunConfig& config) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    try {
      const auto [key, value] = split_setting(t);
      apply_setting(config, key, value);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
}

} // namespace nist
