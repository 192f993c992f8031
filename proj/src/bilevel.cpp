#include "mimdarts/bilevel.hpp"

#include "mimdarts/masking.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace mimdarts {

namespace {

std::vector<Buffer> copy_grads(const std::vector<Tensor>& params) {
  std::vector<Buffer> out;
  out.reserve(params.size());
  for (const auto& p : params)
    out.push_back(p.has_grad() ? const_cast<Tensor&>(p).grad() : Buffer::Zero(p.numel()));
  return out;
}

void zero_grads(const std::vector<Tensor>& params) {
  for (const auto& p : params) const_cast<Tensor&>(p).zero_grad();
}

}  // namespace

std::vector<Buffer> second_order_alpha_grad(const std::function<Tensor()>& train_loss,
                                            const std::function<Tensor()>& val_loss,
                                            const std::vector<Tensor>& weights,
                                            const std::vector<Tensor>& alphas, double xi) {
  auto grads_after_backward = [&](const std::function<Tensor()>& f) {
    zero_grads(weights);
    zero_grads(alphas);
    Tensor loss = f();
    loss.backward();
  };

  if (xi == 0.0) {
    grads_after_backward(val_loss);
    return copy_grads(alphas);
  }

  // inner gradient at the current weights
  grads_after_backward(train_loss);
  std::vector<Buffer> g_w = copy_grads(weights);

  // virtual step w' = w - xi * g_w
  std::vector<Buffer> w_orig;
  w_orig.reserve(weights.size());
  for (size_t i = 0; i < weights.size(); ++i) {
    w_orig.push_back(weights[i].data());
    const_cast<Tensor&>(weights[i]).data() -= Scalar(xi) * g_w[i];
  }

  grads_after_backward(val_loss);
  std::vector<Buffer> g_alpha = copy_grads(alphas);
  std::vector<Buffer> g_wprime = copy_grads(weights);

  double norm_sq = 0.0;
  for (const auto& g : g_wprime)
    for (int64_t i = 0; i < g.size(); ++i) norm_sq += double(g[i]) * double(g[i]);
  const double norm = std::sqrt(norm_sq);
  const double eps = norm > 0 ? 0.01 / norm : 1e-3;

  // symmetric finite-difference HVP: dα ∇_w L_train · v, v = g_wprime
  for (size_t i = 0; i < weights.size(); ++i)
    const_cast<Tensor&>(weights[i]).data() = w_orig[i] + Scalar(eps) * g_wprime[i];
  grads_after_backward(train_loss);
  std::vector<Buffer> g_alpha_plus = copy_grads(alphas);

  for (size_t i = 0; i < weights.size(); ++i)
    const_cast<Tensor&>(weights[i]).data() = w_orig[i] - Scalar(eps) * g_wprime[i];
  grads_after_backward(train_loss);
  std::vector<Buffer> g_alpha_minus = copy_grads(alphas);

  for (size_t i = 0; i < weights.size(); ++i)
    const_cast<Tensor&>(weights[i]).data() = w_orig[i];

  const Scalar c = Scalar(xi / (2.0 * eps));
  for (size_t i = 0; i < alphas.size(); ++i)
    g_alpha[i] -= c * (g_alpha_plus[i] - g_alpha_minus[i]);
  return g_alpha;
}

// ---- engine ----

ImageDataset make_dataset(const SearchConfig& cfg) {
  ImageDataset ds;
  if (cfg.dataset == "synthetic") {
    SyntheticSpec spec;
    spec.num_classes = cfg.num_classes;
    spec.n = cfg.synthetic_n;
    spec.H = spec.W = cfg.image_size;
    spec.seed = cfg.seed;
    spec.noise_std = float(cfg.synthetic_noise);
    spec.phase_jitter = float(cfg.synthetic_phase_jitter);
    spec.freq_base = float(cfg.synthetic_freq);
    ds = make_synthetic(spec);
  } else {
    DatasetMeta meta;
    if (!cfg.cifar_meta.empty()) meta = load_meta_sidecar(cfg.cifar_meta);
    meta.num_classes = cfg.num_classes;
    ds = load_cifar_binary(cfg.cifar_path, meta);
  }
  return ds;
}

SplitPlan make_plan_for(const SearchConfig& cfg, const ImageDataset& ds) {
  return make_split_plan(ds.size(), cfg.split_search_train, cfg.split_search_val,
                         cfg.split_eval_train, cfg.seed);
}

SearchEngine::SearchEngine(const SearchConfig& cfg)
    : cfg_(cfg), mask_rng_(cfg.seed ^ 0xa5ca7e11u) {
  cfg_.validate();
  dataset_ = make_dataset(cfg_);
  plan_ = make_plan_for(cfg_, dataset_);
  {
    // standardization from everything except the held-out test split
    std::vector<int> train_pool = plan_.search_train;
    train_pool.insert(train_pool.end(), plan_.search_val.begin(), plan_.search_val.end());
    train_pool.insert(train_pool.end(), plan_.eval_train.begin(), plan_.eval_train.end());
    dataset_.compute_stats(train_pool);
  }

  net_cfg_.space = space_from_name(cfg_.space);
  net_cfg_.in_channels = dataset_.C;
  net_cfg_.num_classes = dataset_.num_classes;
  net_cfg_.init_channels = cfg_.init_channels;
  net_cfg_.cells = cfg_.cells;
  net_cfg_.n_nodes = net_cfg_.space == SpaceId::kDarts ? cfg_.n_nodes : 3;

  Rng init_rng(cfg_.seed);
  supernet_ = std::make_unique<Supernet>(net_cfg_, init_rng);
  classifier_ = std::make_unique<ClassifierHead>(supernet_->out_channels(),
                                                 dataset_.num_classes, init_rng);
  DecoderConfig dec;
  dec.in_channels = supernet_->out_channels();
  dec.width = cfg_.decoder_width;
  dec.out_channels = dataset_.C;
  dec.hardtanh_lo = dataset_.norm_lo;
  dec.hardtanh_hi = dataset_.norm_hi;
  decoder_ = std::make_unique<ReconstructionDecoder>(dec, init_rng);
  alpha_ = Alpha::init(net_cfg_.space, net_cfg_.n_nodes, init_rng);

  supernet_->collect(weights_);
  classifier_->collect(weights_);
  decoder_->collect(weights_);

  w_opt_ = std::make_unique<SgdMomentum>(weights_.params, cfg_.w_lr, cfg_.w_momentum,
                                         cfg_.w_weight_decay);
  alpha_opt_ = std::make_unique<Adam>(alpha_.params(), cfg_.alpha_lr, cfg_.alpha_beta1,
                                      cfg_.alpha_beta2, cfg_.alpha_weight_decay);

  PatchGeometry geom(dataset_.H, dataset_.W, dataset_.C, cfg_.patch_size);
  n_patches_ = geom.N;
}

std::optional<MaskPlan> SearchEngine::maybe_sample_plan(int batch_size) {
  if (cfg_.input_mode != "masked") return std::nullopt;
  PatchGeometry geom(dataset_.H, dataset_.W, dataset_.C, cfg_.patch_size);
  // keep the mask non-empty while the MIM loss is active
  double ratio = cfg_.mask_ratio;
  if (cfg_.task_mim && ratio * geom.N < 1.0) ratio = 1.0 / double(geom.N);
  return sample_mask(geom, batch_size, float(ratio), mask_rng_);
}

Tensor SearchEngine::build_loss(const Batch& batch, bool training,
                                const std::optional<MaskPlan>& plan, JointLossReport& report) {
  const Tensor& x = batch.images;
  Tensor x_input = plan ? apply_mask(x, *plan) : x;
  Tensor x_inter = supernet_->forward_features(x_input, alpha_, training);

  Tensor l_cls, l_mse;
  bool guard = false;
  if (cfg_.task_cls) l_cls = cross_entropy(classifier_->forward(x_inter, training), batch.labels);
  if (cfg_.task_mim) {
    Tensor x_rec = decoder_->forward(x_inter, training);
    Tensor pixel_mask =
        plan ? plan->pixel_mask() : Tensor::full({x.shape()[0], dataset_.C, dataset_.H, dataset_.W}, 1.f);
    MseReduction red = cfg_.mse_reduction == "mean"  ? MseReduction::kMean
                       : cfg_.mse_reduction == "sum" ? MseReduction::kSum
                                                     : MseReduction::kNorm;
    l_mse = masked_mse(x_rec, x, pixel_mask, red, &guard);
  }

  Tensor total;
  if (cfg_.task_cls && cfg_.task_mim) {
    LambdaMode mode = cfg_.lambda_mode == "adaptive" ? LambdaMode::kAdaptive : LambdaMode::kFixed;
    total = joint_loss(l_cls, l_mse, mode, cfg_.lambda_fixed, report);
    report.epsilon_guard_triggered = report.epsilon_guard_triggered || guard;
  } else if (cfg_.task_cls) {
    total = l_cls;
    report = {double(l_cls.item()), 0.0, 0.0, double(l_cls.item()), false};
  } else {
    total = l_mse;
    report = {0.0, double(l_mse.item()), 0.0, double(l_mse.item()), guard};
  }
  if (!std::isfinite(report.total))
    throw std::runtime_error("non-finite loss encountered (total=" + std::to_string(report.total) + ")");
  return total;
}

void SearchEngine::zero_all_grads() {
  zero_grads(weights_.params);
  zero_grads(alpha_.params());
}

JointLossReport SearchEngine::w_step(const Batch& train_batch) {
  if (train_batch.tag != SplitTag::kSearchTrain)
    throw std::logic_error("w_step: batch is not from the search-train split");
  JointLossReport report;
  auto plan = maybe_sample_plan(train_batch.images.shape()[0]);
  zero_all_grads();
  Tensor loss = build_loss(train_batch, /*training=*/true, plan, report);
  loss.backward();
  w_opt_->step();
  return report;
}

JointLossReport SearchEngine::alpha_step_first_order(const Batch& val_batch) {
  if (val_batch.tag != SplitTag::kSearchVal)
    throw std::logic_error("alpha_step: batch is not from the search-val split");
  // optionally disable the MIM term for the validation objective
  const bool mim_saved = cfg_.task_mim;
  if (!cfg_.mim_on_val) cfg_.task_mim = false;
  JointLossReport report;
  auto plan = maybe_sample_plan(val_batch.images.shape()[0]);
  zero_all_grads();
  Tensor loss = build_loss(val_batch, /*training=*/true, plan, report);
  loss.backward();
  cfg_.task_mim = mim_saved;
  alpha_opt_->step();
  return report;
}

JointLossReport SearchEngine::alpha_step_second_order(const Batch& train_batch,
                                                      const Batch& val_batch) {
  if (val_batch.tag != SplitTag::kSearchVal || train_batch.tag != SplitTag::kSearchTrain)
    throw std::logic_error("alpha_step_second_order: wrong split provenance");
  JointLossReport report;
  auto train_plan = maybe_sample_plan(train_batch.images.shape()[0]);
  const bool mim_saved = cfg_.task_mim;
  if (!cfg_.mim_on_val) cfg_.task_mim = false;
  auto val_plan = maybe_sample_plan(val_batch.images.shape()[0]);
  cfg_.task_mim = mim_saved;

  JointLossReport train_rep;
  auto train_loss = [&]() {
    return build_loss(train_batch, true, train_plan, train_rep);
  };
  auto val_loss = [&]() {
    const bool saved = cfg_.task_mim;
    if (!cfg_.mim_on_val) cfg_.task_mim = false;
    Tensor l = build_loss(val_batch, true, val_plan, report);
    cfg_.task_mim = saved;
    return l;
  };
  auto grads = second_order_alpha_grad(train_loss, val_loss, weights_.params, alpha_.params(),
                                       cfg_.effective_xi());
  alpha_opt_->step_with(grads);
  return report;
}

double SearchEngine::validation_accuracy() {
  const auto& idx = plan_.search_val;
  const int B = cfg_.batch_size;
  int correct = 0, total = 0;
  Rng dummy(0);
  for (size_t start = 0; start < idx.size(); start += size_t(B)) {
    std::vector<int> chunk(idx.begin() + start,
                           idx.begin() + std::min(start + size_t(B), idx.size()));
    Batch batch = assemble_batch(dataset_, chunk, SplitTag::kSearchVal, /*augment=*/false, dummy);
    Tensor x_inter = supernet_->forward_features(batch.images, alpha_, /*training=*/false);
    Tensor logits = classifier_->forward(x_inter, /*training=*/false);
    const int K = logits.shape()[1];
    for (size_t b = 0; b < chunk.size(); ++b) {
      const Scalar* row = logits.data().data() + int64_t(b) * K;
      int best = 0;
      for (int k = 1; k < K; ++k)
        if (row[k] > row[best]) best = k;
      correct += (best == batch.labels[b]);
      ++total;
    }
  }
  return total == 0 ? 0.0 : double(correct) / double(total);
}

AlphaSnapshot SearchEngine::snapshot_alpha(int epoch) const {
  AlphaSnapshot s;
  s.epoch = epoch;
  s.num_edges = alpha_.normal.shape()[0];
  s.num_ops = alpha_.normal.shape()[1];
  s.normal.assign(alpha_.normal.data().data(), alpha_.normal.data().data() + alpha_.normal.numel());
  if (alpha_.reduce.defined())
    s.reduce.assign(alpha_.reduce.data().data(),
                    alpha_.reduce.data().data() + alpha_.reduce.numel());
  return s;
}

RunRecord SearchEngine::run(const std::string& run_dir) {
  RunRecord rec;
  rec.config = cfg_;
  const std::string ckpt_path = run_dir.empty() ? "" : run_dir + "/checkpoint.bin";
  if (!run_dir.empty()) std::filesystem::create_directories(run_dir);
  int start_epoch = 0;
  if (!ckpt_path.empty() && std::filesystem::exists(ckpt_path)) {
    start_epoch = load_checkpoint(ckpt_path);
    if (std::filesystem::exists(run_dir + "/metrics.csv"))
      rec.rows = read_metrics_csv(run_dir + "/metrics.csv");
  }

  BatchStream train_w(dataset_, plan_.search_train, cfg_.batch_size, SplitTag::kSearchTrain,
                      /*shuffle=*/true, /*augment=*/true, cfg_.seed * 3 + 1);
  BatchStream train_alpha(dataset_, plan_.search_train, cfg_.batch_size, SplitTag::kSearchTrain,
                          true, true, cfg_.seed * 3 + 2);
  BatchStream val_stream(dataset_, plan_.search_val, cfg_.batch_size, SplitTag::kSearchVal,
                         /*shuffle=*/true, /*augment=*/false, cfg_.seed * 3 + 3);

  const bool second_order = cfg_.order == "second";
  for (int epoch = start_epoch; epoch < cfg_.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    w_opt_->set_lr(cosine_lr(cfg_.w_lr, cfg_.w_lr_min, epoch, cfg_.epochs));
    mask_rng_ = Rng(cfg_.seed * 7919 + uint64_t(epoch) * 104729 + 13);
    train_w.start_epoch(epoch);
    train_alpha.start_epoch(epoch);
    val_stream.start_epoch(epoch);
    const int iters = std::min(train_w.batches_per_epoch(), val_stream.batches_per_epoch());

    double sum_cls = 0, sum_mse = 0, sum_lambda = 0, sum_total = 0;
    bool any_guard = false;
    try {
      for (int it = 0; it < iters; ++it) {
        Batch val_batch, train_batch;
        val_stream.next(val_batch);
        train_w.next(train_batch);
        if (second_order) {
          Batch train_batch2;
          train_alpha.next(train_batch2);
          alpha_step_second_order(train_batch2, val_batch);
        } else {
          alpha_step_first_order(val_batch);
        }
        JointLossReport rep = w_step(train_batch);
        rec.step_reports.push_back(rep);
        sum_cls += rep.l_cls;
        sum_mse += rep.l_mse;
        sum_lambda += rep.lambda;
        sum_total += rep.total;
        any_guard = any_guard || rep.epsilon_guard_triggered;
      }
    } catch (const std::runtime_error& e) {
      rec.abort_reason = e.what();
    }

    MetricRow row;
    row.epoch = epoch;
    if (iters > 0) {
      row.l_cls = sum_cls / iters;
      row.l_mse = sum_mse / iters;
      row.lambda = sum_lambda / iters;
      row.total = sum_total / iters;
    }
    row.epsilon_guard_triggered = any_guard;
    Genotype g = current_genotype();
    row.skip_fraction = skip_fraction(g);
    row.alpha_std_total = alpha_std_total(alpha_);
    row.val_acc = validation_accuracy();
    row.wall_clock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rec.rows.push_back(row);

    const bool last = epoch + 1 == cfg_.epochs || !rec.abort_reason.empty();
    if (cfg_.snapshot_every > 0 && ((epoch + 1) % cfg_.snapshot_every == 0 || last))
      rec.snapshots.push_back(snapshot_alpha(epoch));
    if (!ckpt_path.empty() && cfg_.checkpoint_every > 0 &&
        ((epoch + 1) % cfg_.checkpoint_every == 0 || last)) {
      save_checkpoint(ckpt_path, epoch + 1);
      write_metrics_csv(rec, run_dir + "/metrics.csv");
    }
    if (!rec.abort_reason.empty()) break;
  }

  if (cfg_.epochs == 0) rec.snapshots.push_back(snapshot_alpha(0));
  rec.genotype = current_genotype();
  return rec;
}

// ---- checkpointing ----

namespace {

constexpr uint32_t kCkptMagic = 0x4d44434bu;  // "MDCK"
constexpr uint32_t kCkptVersion = 1;

void write_buf(std::ofstream& f, const Buffer& b) {
  const uint64_t n = uint64_t(b.size());
  f.write(reinterpret_cast<const char*>(&n), sizeof(n));
  f.write(reinterpret_cast<const char*>(b.data()), int64_t(n) * int64_t(sizeof(Scalar)));
}

void read_buf(std::ifstream& f, Buffer& b, bool allow_resize = false) {
  uint64_t n = 0;
  f.read(reinterpret_cast<char*>(&n), sizeof(n));
  if (f && allow_resize && int64_t(n) != b.size()) b.resize(int64_t(n));
  if (!f || int64_t(n) != b.size())
    throw std::runtime_error("checkpoint: buffer size mismatch (" + std::to_string(n) + " vs " +
                             std::to_string(b.size()) + ")");
  f.read(reinterpret_cast<char*>(b.data()), int64_t(n) * int64_t(sizeof(Scalar)));
  if (!f) throw std::runtime_error("checkpoint: truncated file");
}

}  // namespace

void SearchEngine::save_checkpoint(const std::string& path, int next_epoch) const {
  std::ofstream f(path + ".tmp", std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot write " + path);
  f.write(reinterpret_cast<const char*>(&kCkptMagic), sizeof(kCkptMagic));
  f.write(reinterpret_cast<const char*>(&kCkptVersion), sizeof(kCkptVersion));
  const int32_t ep = int32_t(next_epoch);
  f.write(reinterpret_cast<const char*>(&ep), sizeof(ep));
  const int64_t t = const_cast<Adam&>(*alpha_opt_).t();
  f.write(reinterpret_cast<const char*>(&t), sizeof(t));
  for (const auto& p : weights_.params) write_buf(f, p.data());
  for (const auto& p : alpha_.params()) write_buf(f, p.data());
  for (const auto& v : const_cast<SgdMomentum&>(*w_opt_).velocity()) write_buf(f, v);
  for (const auto& m : const_cast<Adam&>(*alpha_opt_).m()) write_buf(f, m);
  for (const auto& v : const_cast<Adam&>(*alpha_opt_).v()) write_buf(f, v);
  for (const auto* s : weights_.bn_stats) {
    write_buf(f, s->running_mean);
    write_buf(f, s->running_var);
  }
  f.close();
  std::filesystem::rename(path + ".tmp", path);
}

int SearchEngine::load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
  uint32_t magic = 0, version = 0;
  f.read(reinterpret_cast<char*>(&magic), sizeof(magic));
  f.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (magic != kCkptMagic) throw std::runtime_error("checkpoint: bad magic in " + path);
  if (version != kCkptVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  int32_t ep = 0;
  f.read(reinterpret_cast<char*>(&ep), sizeof(ep));
  int64_t t = 0;
  f.read(reinterpret_cast<char*>(&t), sizeof(t));
  alpha_opt_->t() = t;
  for (auto& p : weights_.params) read_buf(f, p.data());
  for (auto p : alpha_.params()) read_buf(f, p.data());
  for (auto& v : w_opt_->velocity()) read_buf(f, v);
  for (auto& m : alpha_opt_->m()) read_buf(f, m);
  for (auto& v : alpha_opt_->v()) read_buf(f, v);
  for (auto* s : weights_.bn_stats) {
    // running stats are lazily sized on first use; size them from the file
    read_buf(f, s->running_mean, /*allow_resize=*/true);
    read_buf(f, s->running_var, /*allow_resize=*/true);
  }
  return int(ep);
}

RunRecord run_search(const SearchConfig& cfg, const std::string& run_dir) {
  SearchEngine engine(cfg);
  return engine.run(run_dir);
}

// ---- genotype evaluation ----

EvalReport evaluate_genotype(const Genotype& genotype, const SearchConfig& cfg,
                             const ImageDataset& dataset, const SplitPlan& plan) {
  SupernetConfig net_cfg;
  net_cfg.space = genotype.space;
  net_cfg.in_channels = dataset.C;
  net_cfg.num_classes = dataset.num_classes;
  net_cfg.init_channels = cfg.init_channels;
  net_cfg.cells = cfg.cells;
  net_cfg.n_nodes = int(genotype.normal.size());

  Rng rng(cfg.seed * 131 + 17);
  FixedNet net(net_cfg, genotype, rng);
  ClassifierHead head(net.out_channels(), dataset.num_classes, rng);
  ModuleState state;
  net.collect(state);
  head.collect(state);
  SgdMomentum opt(state.params, cfg.w_lr, cfg.w_momentum, cfg.w_weight_decay);

  BatchStream train(dataset, plan.eval_train, cfg.eval_batch_size, SplitTag::kEvalTrain,
                    /*shuffle=*/true, /*augment=*/true, cfg.seed * 5 + 11);
  EvalReport report;
  report.epochs = cfg.eval_epochs;
  for (int epoch = 0; epoch < cfg.eval_epochs; ++epoch) {
    opt.set_lr(cosine_lr(cfg.w_lr, cfg.w_lr_min, epoch, cfg.eval_epochs));
    train.start_epoch(epoch);
    Batch batch;
    double loss_sum = 0;
    int n = 0;
    while (train.next(batch)) {
      for (auto& p : state.params) p.zero_grad();
      Tensor logits = head.forward(net.forward_features(batch.images, true), true);
      Tensor loss = cross_entropy(logits, batch.labels);
      loss.backward();
      opt.step();
      loss_sum += double(loss.item());
      ++n;
    }
    report.final_train_loss = n > 0 ? loss_sum / n : 0.0;
  }

  // top-1 on the held-out test split
  int correct = 0;
  Rng dummy(0);
  const auto& idx = plan.eval_test;
  for (size_t start = 0; start < idx.size(); start += size_t(cfg.eval_batch_size)) {
    std::vector<int> chunk(idx.begin() + start,
                           idx.begin() + std::min(start + size_t(cfg.eval_batch_size), idx.size()));
    Batch batch = assemble_batch(dataset, chunk, SplitTag::kEvalTest, false, dummy);
    Tensor logits = head.forward(net.forward_features(batch.images, false), false);
    const int K = logits.shape()[1];
    for (size_t b = 0; b < chunk.size(); ++b) {
      const Scalar* row = logits.data().data() + int64_t(b) * K;
      int best = 0;
      for (int k = 1; k < K; ++k)
        if (row[k] > row[best]) best = k;
      correct += (best == batch.labels[b]);
    }
  }
  report.n_test = int(idx.size());
  report.accuracy = idx.empty() ? 0.0 : double(correct) / double(idx.size());
  return report;
}

EvalReport evaluate_genotype(const Genotype& genotype, const SearchConfig& cfg) {
  ImageDataset ds = make_dataset(cfg);
  SplitPlan plan = make_plan_for(cfg, ds);
  std::vector<int> pool = plan.search_train;
  pool.insert(pool.end(), plan.search_val.begin(), plan.search_val.end());
  pool.insert(pool.end(), plan.eval_train.begin(), plan.eval_train.end());
  ds.compute_stats(pool);
  return evaluate_genotype(genotype, cfg, ds, plan);
}

}  // namespace mimdarts
