#pragma once

#include "mimdarts/config.hpp"
#include "mimdarts/data.hpp"
#include "mimdarts/heads.hpp"
#include "mimdarts/masking.hpp"
#include "mimdarts/optim.hpp"
#include "mimdarts/record.hpp"
#include "mimdarts/search_space.hpp"

#include <functional>
#include <memory>
#include <optional>

namespace mimdarts {

/// One-step-forward (2nd order) architecture gradient:
///   g = d/dα L_val(w', α) - ξ · H_vp,   w' = w - ξ ∇_w L_train(w, α),
/// with the mixed second derivative approximated by a symmetric
/// finite-difference Hessian-vector product around w using
/// ε = 0.01 / ‖∇_{w'} L_val‖ (1e-3 absolute fallback for a zero norm).
/// Weights are restored before returning. ξ = 0 short-circuits to the exact
/// first-order gradient. Loss builders must rebuild their graph per call.
std::vector<Buffer> second_order_alpha_grad(const std::function<Tensor()>& train_loss,
                                            const std::function<Tensor()>& val_loss,
                                            const std::vector<Tensor>& weights,
                                            const std::vector<Tensor>& alphas, double xi);

/// Alternating bi-level search: α steps on the validation split, w steps on
/// the training split, one of each per iteration.
class SearchEngine {
 public:
  explicit SearchEngine(const SearchConfig& cfg);

  /// Full search. If run_dir is non-empty, checkpoints are written there and
  /// an existing checkpoint is resumed from.
  RunRecord run(const std::string& run_dir = "");

  // single steps, exposed for tests and the engine loop
  JointLossReport w_step(const Batch& train_batch);
  JointLossReport alpha_step_first_order(const Batch& val_batch);
  JointLossReport alpha_step_second_order(const Batch& train_batch, const Batch& val_batch);

  double validation_accuracy();
  Genotype current_genotype() const { return discretize(alpha_, net_cfg_.n_nodes); }
  AlphaSnapshot snapshot_alpha(int epoch) const;

  const SearchConfig& config() const { return cfg_; }
  const ImageDataset& dataset() const { return dataset_; }
  const SplitPlan& split_plan() const { return plan_; }
  Alpha& alpha() { return alpha_; }
  const std::vector<Tensor>& weight_params() const { return weights_.params; }

  void save_checkpoint(const std::string& path, int next_epoch) const;
  /// Returns the epoch to resume from.
  int load_checkpoint(const std::string& path);

 private:
  struct LossParts;
  Tensor build_loss(const Batch& batch, bool training, const std::optional<MaskPlan>& plan,
                    JointLossReport& report);
  std::optional<MaskPlan> maybe_sample_plan(int batch_size);
  void zero_all_grads();

  SearchConfig cfg_;
  SupernetConfig net_cfg_;
  ImageDataset dataset_;
  SplitPlan plan_;
  std::unique_ptr<Supernet> supernet_;
  std::unique_ptr<ClassifierHead> classifier_;
  std::unique_ptr<ReconstructionDecoder> decoder_;
  Alpha alpha_;
  ModuleState weights_;
  std::unique_ptr<SgdMomentum> w_opt_;
  std::unique_ptr<Adam> alpha_opt_;
  Rng mask_rng_;
  int n_patches_ = 0;
};

/// Run the bi-level search for a config (convenience wrapper).
RunRecord run_search(const SearchConfig& cfg, const std::string& run_dir = "");

/// Train the discretized network from scratch (classification only, clean
/// images) on the eval-train split; report top-1 accuracy on eval-test.
EvalReport evaluate_genotype(const Genotype& genotype, const SearchConfig& cfg,
                             const ImageDataset& dataset, const SplitPlan& plan);
EvalReport evaluate_genotype(const Genotype& genotype, const SearchConfig& cfg);

/// Dataset + split construction shared by search and evaluation.
ImageDataset make_dataset(const SearchConfig& cfg);
SplitPlan make_plan_for(const SearchConfig& cfg, const ImageDataset& ds);

}  // namespace mimdarts
