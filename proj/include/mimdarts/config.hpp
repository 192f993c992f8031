#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mimdarts {

/// Raised for invalid user-supplied configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Full hyperparameter set of one search run. Serialized as a plain-text
/// key=value file with sections; command-line flags override file values.
struct SearchConfig {
  // search space / model
  std::string space = "darts";
  int init_channels = 16;
  int cells = 3;
  int n_nodes = 4;
  int decoder_width = 128;

  // optimization
  int epochs = 30;
  int batch_size = 32;
  double w_lr = 0.025;
  double w_lr_min = 1e-3;
  double w_momentum = 0.9;
  double w_weight_decay = 3e-4;
  double alpha_lr = 3e-4;
  double alpha_beta1 = 0.5;
  double alpha_beta2 = 0.999;
  double alpha_weight_decay = 1e-3;
  std::string order = "first";  // first | second
  double xi = -1.0;             // second-order virtual step; <0 means "use w_lr"

  // masking / tasks
  int patch_size = 8;
  double mask_ratio = 0.6;
  std::string lambda_mode = "adaptive";  // adaptive | fixed
  double lambda_fixed = 1.0;
  std::string mse_reduction = "mean";  // mean | sum | norm
  bool mim_on_val = true;
  bool task_cls = true;
  bool task_mim = true;
  std::string input_mode = "masked";  // masked | clean

  // data
  std::string dataset = "synthetic";  // synthetic | cifar
  std::string cifar_path;
  std::string cifar_meta;
  int synthetic_n = 4000;
  int image_size = 32;
  int num_classes = 10;
  double synthetic_noise = 0.1;
  double synthetic_phase_jitter = 1.0;
  double synthetic_freq = 2.0;
  double split_search_train = 0.3;
  double split_search_val = 0.3;
  double split_eval_train = 0.3;

  // evaluation of discretized genotypes
  int eval_epochs = 30;
  int eval_batch_size = 64;

  // run control
  uint64_t seed = 0;
  int snapshot_every = 10;    // alpha snapshot period in epochs (also at the end)
  int checkpoint_every = 1;   // checkpoint period in epochs

  double effective_xi() const { return xi < 0 ? w_lr : xi; }
  void validate() const;

  std::string to_text() const;
  static SearchConfig from_text(const std::string& text);
  static SearchConfig load(const std::string& path);
  void save(const std::string& path) const;
  /// Apply one "key=value" override (flag form); throws ConfigError on
  /// unknown keys or unparseable values.
  void set_key(const std::string& key, const std::string& value);
};

}  // namespace mimdarts
