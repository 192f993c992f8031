#include "mimdarts/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mimdarts {

namespace {

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: bad boolean for " + key + ": '" + v + "'");
}

template <typename T>
T parse_num(const std::string& v, const std::string& key) {
  std::istringstream ss(v);
  T out;
  ss >> out;
  if (ss.fail() || !ss.eof()) throw ConfigError("config: bad value for " + key + ": '" + v + "'");
  return out;
}

}  // namespace

void SearchConfig::validate() const {
  if (space != "darts" && space != "nb201") throw ConfigError("config: space must be darts or nb201");
  if (epochs < 0) throw ConfigError("config: epochs must be >= 0");
  if (batch_size <= 0) throw ConfigError("config: batch_size must be > 0");
  if (order != "first" && order != "second") throw ConfigError("config: order must be first or second");
  if (mask_ratio < 0 || mask_ratio > 1) throw ConfigError("config: mask_ratio must be in [0,1]");
  if (patch_size <= 0 || image_size % patch_size != 0)
    throw ConfigError("config: image_size must be divisible by patch_size");
  if (image_size % 4 != 0) throw ConfigError("config: image_size must be divisible by 4");
  if (lambda_mode != "adaptive" && lambda_mode != "fixed")
    throw ConfigError("config: lambda_mode must be adaptive or fixed");
  if (mse_reduction != "mean" && mse_reduction != "sum" && mse_reduction != "norm")
    throw ConfigError("config: mse_reduction must be mean, sum, or norm");
  if (input_mode != "masked" && input_mode != "clean")
    throw ConfigError("config: input_mode must be masked or clean");
  if (dataset != "synthetic" && dataset != "cifar")
    throw ConfigError("config: dataset must be synthetic or cifar");
  if (dataset == "cifar" && cifar_path.empty())
    throw ConfigError("config: cifar dataset requires cifar_path");
  if (!task_cls && !task_mim) throw ConfigError("config: at least one task must be enabled");
  if (split_search_train + split_search_val + split_eval_train >= 1.0)
    throw ConfigError("config: split fractions must leave room for eval_test");
  if (decoder_width % 4 != 0) throw ConfigError("config: decoder_width must be divisible by 4");
  if (cells < 2) throw ConfigError("config: cells must be >= 2");
}

void SearchConfig::set_key(const std::string& key, const std::string& value) {
  if (key == "space") space = value;
  else if (key == "init_channels") init_channels = parse_num<int>(value, key);
  else if (key == "cells") cells = parse_num<int>(value, key);
  else if (key == "n_nodes") n_nodes = parse_num<int>(value, key);
  else if (key == "decoder_width") decoder_width = parse_num<int>(value, key);
  else if (key == "epochs") epochs = parse_num<int>(value, key);
  else if (key == "batch_size") batch_size = parse_num<int>(value, key);
  else if (key == "w_lr") w_lr = parse_num<double>(value, key);
  else if (key == "w_lr_min") w_lr_min = parse_num<double>(value, key);
  else if (key == "w_momentum") w_momentum = parse_num<double>(value, key);
  else if (key == "w_weight_decay") w_weight_decay = parse_num<double>(value, key);
  else if (key == "alpha_lr") alpha_lr = parse_num<double>(value, key);
  else if (key == "alpha_beta1") alpha_beta1 = parse_num<double>(value, key);
  else if (key == "alpha_beta2") alpha_beta2 = parse_num<double>(value, key);
  else if (key == "alpha_weight_decay") alpha_weight_decay = parse_num<double>(value, key);
  else if (key == "order") order = value;
  else if (key == "xi") xi = parse_num<double>(value, key);
  else if (key == "patch_size") patch_size = parse_num<int>(value, key);
  else if (key == "mask_ratio") mask_ratio = parse_num<double>(value, key);
  else if (key == "lambda_mode") lambda_mode = value;
  else if (key == "lambda_fixed") lambda_fixed = parse_num<double>(value, key);
  else if (key == "mse_reduction") mse_reduction = value;
  else if (key == "mim_on_val") mim_on_val = parse_bool(value, key);
  else if (key == "task_cls") task_cls = parse_bool(value, key);
  else if (key == "task_mim") task_mim = parse_bool(value, key);
  else if (key == "input_mode") input_mode = value;
  else if (key == "dataset") dataset = value;
  else if (key == "cifar_path") cifar_path = value;
  else if (key == "cifar_meta") cifar_meta = value;
  else if (key == "synthetic_n") synthetic_n = parse_num<int>(value, key);
  else if (key == "image_size") image_size = parse_num<int>(value, key);
  else if (key == "num_classes") num_classes = parse_num<int>(value, key);
  else if (key == "synthetic_noise") synthetic_noise = parse_num<double>(value, key);
  else if (key == "synthetic_phase_jitter") synthetic_phase_jitter = parse_num<double>(value, key);
  else if (key == "synthetic_freq") synthetic_freq = parse_num<double>(value, key);
  else if (key == "split_search_train") split_search_train = parse_num<double>(value, key);
  else if (key == "split_search_val") split_search_val = parse_num<double>(value, key);
  else if (key == "split_eval_train") split_eval_train = parse_num<double>(value, key);
  else if (key == "eval_epochs") eval_epochs = parse_num<int>(value, key);
  else if (key == "eval_batch_size") eval_batch_size = parse_num<int>(value, key);
  else if (key == "seed") seed = parse_num<uint64_t>(value, key);
  else if (key == "snapshot_every") snapshot_every = parse_num<int>(value, key);
  else if (key == "checkpoint_every") checkpoint_every = parse_num<int>(value, key);
  else throw ConfigError("config: unknown key '" + key + "'");
}

std::string SearchConfig::to_text() const {
  std::ostringstream f;
  f.precision(17);
  f << "[model]\n"
    << "space=" << space << "\n"
    << "init_channels=" << init_channels << "\n"
    << "cells=" << cells << "\n"
    << "n_nodes=" << n_nodes << "\n"
    << "decoder_width=" << decoder_width << "\n"
    << "\n[optimization]\n"
    << "epochs=" << epochs << "\n"
    << "batch_size=" << batch_size << "\n"
    << "w_lr=" << w_lr << "\n"
    << "w_lr_min=" << w_lr_min << "\n"
    << "w_momentum=" << w_momentum << "\n"
    << "w_weight_decay=" << w_weight_decay << "\n"
    << "alpha_lr=" << alpha_lr << "\n"
    << "alpha_beta1=" << alpha_beta1 << "\n"
    << "alpha_beta2=" << alpha_beta2 << "\n"
    << "alpha_weight_decay=" << alpha_weight_decay << "\n"
    << "order=" << order << "\n"
    << "xi=" << xi << "\n"
    << "\n[tasks]\n"
    << "patch_size=" << patch_size << "\n"
    << "mask_ratio=" << mask_ratio << "\n"
    << "lambda_mode=" << lambda_mode << "\n"
    << "lambda_fixed=" << lambda_fixed << "\n"
    << "mse_reduction=" << mse_reduction << "\n"
    << "mim_on_val=" << (mim_on_val ? "true" : "false") << "\n"
    << "task_cls=" << (task_cls ? "true" : "false") << "\n"
    << "task_mim=" << (task_mim ? "true" : "false") << "\n"
    << "input_mode=" << input_mode << "\n"
    << "\n[data]\n"
    << "dataset=" << dataset << "\n"
    << "cifar_path=" << cifar_path << "\n"
    << "cifar_meta=" << cifar_meta << "\n"
    << "synthetic_n=" << synthetic_n << "\n"
    << "image_size=" << image_size << "\n"
    << "num_classes=" << num_classes << "\n"
    << "synthetic_noise=" << synthetic_noise << "\n"
    << "synthetic_phase_jitter=" << synthetic_phase_jitter << "\n"
    << "synthetic_freq=" << synthetic_freq << "\n"
    << "split_search_train=" << split_search_train << "\n"
    << "split_search_val=" << split_search_val << "\n"
    << "split_eval_train=" << split_eval_train << "\n"
    << "\n[evaluation]\n"
    << "eval_epochs=" << eval_epochs << "\n"
    << "eval_batch_size=" << eval_batch_size << "\n"
    << "\n[run]\n"
    << "seed=" << seed << "\n"
    << "snapshot_every=" << snapshot_every << "\n"
    << "checkpoint_every=" << checkpoint_every << "\n";
  return f.str();
}

SearchConfig SearchConfig::from_text(const std::string& text) {
  SearchConfig cfg;
  std::istringstream f(text);
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#' || line[0] == '[') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: malformed line " + std::to_string(lineno) + ": '" + line + "'");
    std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (value.empty() && (key == "cifar_path" || key == "cifar_meta")) continue;
    cfg.set_key(key, value);
  }
  return cfg;
}

SearchConfig SearchConfig::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return from_text(ss.str());
}

void SearchConfig::save(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("config: cannot write " + path);
  f << to_text();
}

}  // namespace mimdarts
