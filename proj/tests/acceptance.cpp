// Acceptance gate: one pass/fail line per criterion, printed to stdout.
// Criteria 5-7 share a grid of desk-scale searches (synthetic data, 4k
// samples, 3-cell supernet, 30 epochs, 4 seeds) so the whole binary stays
// inside a 2 h single-core budget. Run it with the CLI binary path as the
// last argument (the exit-code checks in criterion 8 shell out to it).
#define DOCTEST_CONFIG_IMPLEMENT
#include "doctest.h"

#include "mimdarts/bilevel.hpp"
#include "mimdarts/heads.hpp"
#include "mimdarts/losses.hpp"
#include "mimdarts/masking.hpp"
#include "mimdarts/nn.hpp"
#include "mimdarts/search_space.hpp"
#include "testing.hpp"

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>
#include <vector>

namespace fs = std::filesystem;
using namespace mimdarts;
using testing::grad_check;
using testing::random_tensor;

namespace {

std::string g_binary;  // CLI under test (criterion 8)

void verdict(int n, const char* name, bool ok, const std::string& detail) {
  std::printf("criterion %d (%s): %s — %s\n", n, name, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
}

double now_s() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

/// The shared desk-scale configuration. 16x16 noise-free gratings keep the
/// reconstruction task learnable through the stride-4 encoder (identity
/// pressure needs a converging MSE), and 16 classes (11 degree orientation
/// steps) keep single-conv genotypes away from the accuracy ceiling. One
/// search epoch is ~25 s on one core.
SearchConfig desk_config(uint64_t seed) {
  SearchConfig cfg;
  cfg.dataset = "synthetic";
  cfg.synthetic_n = 4000;
  cfg.image_size = 16;
  cfg.num_classes = 16;
  cfg.synthetic_noise = 0.0;
  cfg.synthetic_phase_jitter = 1.0;
  cfg.patch_size = 4;
  cfg.init_channels = 4;
  cfg.decoder_width = 32;
  cfg.batch_size = 32;
  cfg.cells = 3;
  cfg.n_nodes = 2;
  cfg.epochs = 30;
  cfg.order = "first";
  cfg.alpha_lr = 3e-3;  // ~1100 alpha steps per run; the default 3e-4 cannot
                        // move the logits far enough to differentiate ops
  cfg.seed = seed;
  cfg.snapshot_every = 10;
  cfg.checkpoint_every = 1000;  // no checkpoint I/O during the grid
  cfg.eval_epochs = 30;
  cfg.eval_batch_size = 64;
  return cfg;
}

const std::vector<uint64_t> kSeeds{1, 2, 3, 4};

// populated by criterion 5, reused by 6 and 7
std::vector<RunRecord> g_joint_runs;
std::vector<RunRecord> g_rec_only_runs;

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

struct CliResult {
  int exit_code;
  std::string output;
};

CliResult run_cli(const std::string& args) {
  const std::string out_file = "/tmp/mimdarts_acc_cli.txt";
  int status = std::system(("'" + g_binary + "' " + args + " > " + out_file + " 2>&1").c_str());
  CliResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream f(out_file);
  std::stringstream ss;
  ss << f.rdbuf();
  r.output = ss.str();
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------
// 1. Gradients: every primitive op per-element against central differences
//    (rel err < 1e-3, abs floor 1e-5, 20 seeds each); the full
//    supernet+heads+joint-loss graph with an aggregate relative-L2 metric
//    (deep BN+relu stacks defeat per-element float32 FD near the kinks; see
//    the dedicated gradient test binary for the isolation of that effect).
// ---------------------------------------------------------------------------
TEST_CASE("criterion 1: gradient suite") {
  const double t0 = now_s();
  bool ok = true;
  double worst_op = 0.0, worst_graph = 0.0;

  auto track = [&](const testing::GradCheckResult& r) {
    worst_op = std::max(worst_op, r.max_rel_err);
    if (!r.ok()) ok = false;
  };

  for (uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    Tensor a = random_tensor({3, 4}, rng);
    Tensor b = random_tensor({3, 4}, rng);
    Tensor s = random_tensor({1}, rng);
    track(grad_check([&] { return sum(mul(add(a, b), add(a, b))); }, {a, b}));
    track(grad_check([&] { return sum(mul(sub(a, b), sub(a, b))); }, {a, b}));
    track(grad_check([&] { return sum(mul(mul(a, b), b)); }, {a, b}));
    track(grad_check([&] { return sum(mul(scale(a, 1.7f), b)); }, {a, b}));
    track(grad_check([&] { return sum(mul(add_scalar(a, 0.3f), b)); }, {a, b}));
    track(grad_check([&] { return sum(mul(scale_by(a, s), b)); }, {a, b, s}));
    track(grad_check([&] { return mean(mul(a, a)); }, {a}));
    track(grad_check([&] { return sum(mul(reshape(a, {12}), reshape(b, {12}))); }, {a, b}));
    track(grad_check([&] { return sum(mul(softmax(a, 1), b)); }, {a}));

    // keep random inputs away from the relu/hardtanh kinks
    for (int64_t i = 0; i < a.numel(); ++i)
      if (std::abs(a.data()[i]) < 0.05f) a.data()[i] = a.data()[i] < 0 ? -0.05f : 0.05f;
    track(grad_check([&] { return sum(mul(relu(a), b)); }, {a}));

    Tensor x = random_tensor({2, 4, 6, 6}, rng);
    Tensor cw = random_tensor({3, 4, 3, 3}, rng, 0.5f);
    Tensor dw = random_tensor({4, 1, 3, 3}, rng, 0.5f);
    Tensor pw = random_tensor({5, 4, 1, 1}, rng, 0.5f);
    Tensor p3 = random_tensor({2, 3, 6, 6}, rng, 1.f, false);
    Tensor p3s = random_tensor({2, 3, 3, 3}, rng, 1.f, false);
    Tensor p4 = random_tensor({2, 4, 6, 6}, rng, 1.f, false);
    Tensor p5 = random_tensor({2, 5, 6, 6}, rng, 1.f, false);
    track(grad_check([&] { return sum(mul(conv2d(x, cw, 1, 1), p3)); }, {x, cw}));
    track(grad_check([&] { return sum(mul(conv2d(x, cw, 2, 1), p3s)); }, {x, cw}));
    track(grad_check([&] { return sum(mul(conv2d(x, dw, 1, 1, 1, 4), p4)); }, {x, dw}));
    track(grad_check([&] { return sum(mul(conv2d(x, dw, 1, 2, 2, 4), p4)); }, {x, dw}));
    track(grad_check([&] { return sum(mul(conv2d(x, pw, 1, 0), p5)); }, {x, pw}));

    Tensor xt = random_tensor({2, 3, 3, 3}, rng);
    Tensor wt = random_tensor({3, 2, 4, 4}, rng, 0.5f);
    Tensor pt = random_tensor({2, 2, 6, 6}, rng, 1.f, false);
    track(grad_check([&] { return sum(mul(conv_transpose2d(xt, wt, 2, 1), pt)); }, {xt, wt}));

    Tensor xb = random_tensor({4, 3, 4, 4}, rng);
    Tensor gamma = random_tensor({3}, rng, 0.3f);
    Tensor beta = random_tensor({3}, rng, 0.3f);
    for (int64_t i = 0; i < 3; ++i) gamma.data()[i] += 1.f;
    Tensor pb = random_tensor({4, 3, 4, 4}, rng, 1.f, false);
    // probe sums reach |f| ~ 20; float32 forward rounding leaves an absolute
    // FD floor near |f|*2^-24/h ~ 2e-5 even at the best ladder step
    track(grad_check(
        [&] {
          BatchNormStats stats;
          return sum(mul(batch_norm(xb, gamma, beta, stats, true), pb));
        },
        {xb, gamma, beta}, 1e-2, 1e-4));

    Tensor pp = random_tensor({4, 3, 2, 2}, rng, 1.f, false);
    track(grad_check([&] { return sum(mul(avg_pool2d(xb, 3, 2, 1), pp)); }, {xb}));

    // max_pool: distinct values spaced wider than the largest FD step so no
    // step flips a window argmax
    Tensor xm = Tensor::zeros({2, 2, 4, 4}, true);
    std::vector<int> order(size_t(xm.numel()));
    for (size_t i = 0; i < order.size(); ++i) order[i] = int(i);
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[size_t(rng.uniform() * double(i))]);
    for (int64_t i = 0; i < xm.numel(); ++i) xm.data()[i] = 0.5f * float(order[size_t(i)]) - 16.f;
    track(grad_check(
        [&] {
          Tensor p = Tensor::full({2, 2, 2, 2}, 1.f);
          return sum(mul(max_pool2d(xm, 3, 2, 1), p));
        },
        {xm}));

    track(grad_check([&] { return mean(mul(global_avg_pool(xb), global_avg_pool(xb))); }, {xb}));

    Tensor xf = random_tensor({3, 5}, rng);
    Tensor wf = random_tensor({5, 4}, rng, 0.5f);
    Tensor bf = random_tensor({4}, rng, 0.5f);
    Tensor pl = random_tensor({3, 4}, rng, 1.f, false);
    track(grad_check([&] { return sum(mul(linear(xf, wf, bf), pl)); }, {xf, wf, bf}));

    Tensor logits = random_tensor({4, 6}, rng, 2.f);
    std::vector<int> labels{1, 0, 5, 3};
    track(grad_check([&] { return cross_entropy(logits, labels); }, {logits}));

    Tensor rec = random_tensor({2, 3, 4, 4}, rng);
    Tensor target = random_tensor({2, 3, 4, 4}, rng, 1.f, false);
    PatchGeometry geom(4, 4, 3, 2);
    Rng mrng(seed);
    MaskPlan plan = sample_mask(geom, 2, 0.5f, mrng);
    Tensor pm = plan.pixel_mask();
    track(grad_check([&] { return masked_mse(rec, target, pm, MseReduction::kMean); }, {rec}));
  }

  // full pipeline at toy size, aggregate metric (see header comment)
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(500 + seed);
    SupernetConfig scfg;
    scfg.in_channels = 3;
    scfg.num_classes = 3;
    scfg.init_channels = 2;
    scfg.cells = 3;
    scfg.n_nodes = 2;
    Supernet net(scfg, rng);
    ClassifierHead head(net.out_channels(), 3, rng);
    DecoderConfig dec;
    dec.in_channels = net.out_channels();
    dec.width = 4;
    dec.out_channels = 3;
    dec.hardtanh_lo = -10.f;
    dec.hardtanh_hi = 10.f;
    ReconstructionDecoder decoder(dec, rng);
    Alpha alpha = Alpha::init(SpaceId::kDarts, 2, rng, 0.3f);
    ModuleState state;
    net.collect(state);
    head.collect(state);
    decoder.collect(state);

    Tensor x = random_tensor({2, 3, 8, 8}, rng, 1.f, false);
    PatchGeometry geom(8, 8, 3, 4);
    Rng mrng(seed);
    MaskPlan plan = sample_mask(geom, 2, 0.5f, mrng);
    Tensor x_in = apply_mask(x, plan);
    Tensor m = plan.pixel_mask();
    std::vector<int> labels{0, 2};

    JointLossReport rep0;
    auto loss_at = [&](LambdaMode mode, double lam, JointLossReport& rep) {
      for (auto* st : state.bn_stats) {
        st->running_mean.setZero();
        st->running_var.setZero();
      }
      Tensor inter = net.forward_features(x_in, alpha, true);
      Tensor l_cls = cross_entropy(head.forward(inter, true), labels);
      Tensor l_mse = masked_mse(decoder.forward(inter, true), x, m, MseReduction::kMean);
      return joint_loss(l_cls, l_mse, mode, lam, rep);
    };
    loss_at(LambdaMode::kAdaptive, 1.0, rep0);
    auto loss_fn = [&] {
      JointLossReport rep;
      return loss_at(LambdaMode::kFixed, rep0.lambda, rep);
    };
    std::vector<Tensor> leaves = {alpha.normal, alpha.reduce};
    for (size_t i = 0; i < state.params.size(); i += state.params.size() / 6 + 1)
      leaves.push_back(state.params[i]);
    auto res = grad_check(loss_fn, leaves, 2e-3);
    worst_graph = std::max(worst_graph, res.rel_l2_err);
    if (res.rel_l2_err >= 0.08) ok = false;
  }

  const double dt = now_s() - t0;
  if (dt >= 120.0) ok = false;
  verdict(1, "gradient suite", ok,
          fmt("per-op worst rel err %.2e (< 1e-3), full-graph worst rel-L2 %.3f (< 0.08), %.0f s "
              "(< 120 s)",
              worst_op, worst_graph, dt));
  CHECK(ok);
}

// ---------------------------------------------------------------------------
// 2. Masking: exact count floor(ratio*N) over a grid, exact patch round-trip,
//    uniform 2-subset frequency at N=4.
// ---------------------------------------------------------------------------
TEST_CASE("criterion 2: masking suite") {
  bool ok = true;
  Rng rng(11);

  // count grid: N in {4, 16, 64, 256}, every ratio k/N plus interior points
  for (int side : {2, 4, 8, 16}) {
    PatchGeometry geom(side, side, 3, 1);
    const int N = geom.N;
    for (int k = 0; k <= N; ++k) {
      float ratio = float(k) / float(N);
      MaskPlan plan = sample_mask(geom, 2, ratio, rng);
      if (plan.masked_count_per_image() != k) ok = false;
      MaskPlan plan2 = sample_mask(geom, 1, std::nextafterf(ratio, 0.f), rng);
      int expect = int(std::floor(double(std::nextafterf(ratio, 0.f)) * N));
      if (plan2.masked_count_per_image() != expect) ok = false;
    }
  }

  // exact round-trip for several patch sizes
  for (int P : {1, 2, 4, 8}) {
    Tensor x = random_tensor({2, 3, 8, 8}, rng, 1.f, false);
    PatchGeometry geom(8, 8, 3, P);
    Tensor back = unpatchify(patchify(x, P), geom);
    for (int64_t i = 0; i < x.numel(); ++i)
      if (back.data()[i] != x.data()[i]) ok = false;
  }

  // uniformity: N=4, ratio=0.5 -> 6 possible 2-subsets, each 1/6 +- 0.01
  PatchGeometry g4(2, 2, 3, 1);
  std::vector<int> counts(6, 0);
  auto subset_id = [](int a, int b) {  // a < b in [0,4)
    static const int id[4][4] = {{-1, 0, 1, 2}, {0, -1, 3, 4}, {1, 3, -1, 5}, {2, 4, 5, -1}};
    return id[a][b];
  };
  const int draws = 40000;
  for (int d = 0; d < draws; ++d) {
    MaskPlan plan = sample_mask(g4, 1, 0.5f, rng);
    int a = -1, b = -1;
    for (int p = 0; p < 4; ++p)
      if (plan.masked(0, p)) (a < 0 ? a : b) = p;
    counts[size_t(subset_id(a, b))]++;
  }
  double worst_dev = 0.0;
  for (int c : counts) worst_dev = std::max(worst_dev, std::abs(double(c) / draws - 1.0 / 6.0));
  if (worst_dev >= 0.01) ok = false;

  verdict(2, "masking suite", ok,
          fmt("counts exact on N in {4..256}, round-trip bit-exact for P in {1,2,4,8}, subset "
              "frequency max dev %.4f (< 0.01)",
              worst_dev));
  CHECK(ok);
}

// ---------------------------------------------------------------------------
// 3. Adaptive-lambda identity: total == 2*l_cls within 1e-6 on every logged
//    step of a 5-epoch run; frozen-lambda gradient equivalence within 1e-6.
// ---------------------------------------------------------------------------
TEST_CASE("criterion 3: joint-loss identity") {
  bool ok = true;

  SearchConfig cfg = desk_config(7);
  cfg.epochs = 5;
  cfg.synthetic_n = 800;  // a short run is enough; the identity is per-step
  cfg.image_size = 8;
  cfg.num_classes = 4;
  cfg.eval_epochs = 0;
  RunRecord rec = run_search(cfg);
  double worst = 0.0;
  int steps = 0;
  for (const auto& r : rec.step_reports) {
    if (r.epsilon_guard_triggered) continue;  // identity only defined for l_mse > eps
    worst = std::max(worst, std::abs(r.total - 2.0 * r.l_cls));
    ++steps;
  }
  if (steps == 0 || worst >= 1e-6) ok = false;

  // frozen-lambda equivalence: the adaptive total must backprop exactly like
  // a fixed-lambda total evaluated at the captured batch lambda
  double worst_grad = 0.0;
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor logits = random_tensor({4, 5}, rng, 2.f);
    Tensor recon = random_tensor({2, 3, 4, 4}, rng);
    Tensor target = random_tensor({2, 3, 4, 4}, rng, 1.f, false);
    PatchGeometry geom(4, 4, 3, 2);
    Rng mrng{uint64_t(trial)};
    MaskPlan plan = sample_mask(geom, 2, 0.5f, mrng);
    Tensor mask = plan.pixel_mask();
    std::vector<int> labels{1, 0, 4, 2};

    auto grads_for = [&](LambdaMode mode, double lam, double* lam_out) {
      logits.zero_grad();
      recon.zero_grad();
      JointLossReport rep;
      Tensor l_cls = cross_entropy(logits, labels);
      Tensor l_mse = masked_mse(recon, target, mask, MseReduction::kMean);
      joint_loss(l_cls, l_mse, mode, lam, rep).backward();
      if (lam_out) *lam_out = rep.lambda;
      std::vector<double> g;
      for (int64_t i = 0; i < logits.numel(); ++i) g.push_back(double(logits.grad()[i]));
      for (int64_t i = 0; i < recon.numel(); ++i) g.push_back(double(recon.grad()[i]));
      return g;
    };
    double lam = 0.0;
    auto ga = grads_for(LambdaMode::kAdaptive, 0.0, &lam);
    auto gf = grads_for(LambdaMode::kFixed, lam, nullptr);
    for (size_t i = 0; i < ga.size(); ++i)
      worst_grad = std::max(worst_grad, std::abs(ga[i] - gf[i]));
  }
  if (worst_grad >= 1e-6) ok = false;

  verdict(3, "joint-loss identity", ok,
          fmt("|total - 2*l_cls| <= %.2e over %d steps (< 1e-6), frozen-lambda grad gap %.2e "
              "(< 1e-6)",
              worst, steps, worst_grad));
  CHECK(ok);
}

// ---------------------------------------------------------------------------
// 4. Bi-level correctness on the analytic toy; xi = 0 equals first order
//    exactly.
// ---------------------------------------------------------------------------
TEST_CASE("criterion 4: second-order gradient") {
  bool ok = true;

  // L_train = (w - a)^2, L_val = w^2; unrolled dL_val/da = 4*xi*w',
  // w' = w - 2*xi*(w - a)
  const float w0 = 1.5f, a0 = 0.4f;
  const double xi = 0.1;
  Tensor w = Tensor::full({1}, w0, true);
  Tensor a = Tensor::full({1}, a0, true);
  auto train_loss = [&] {
    Tensor d = sub(w, a);
    return sum(mul(d, d));
  };
  auto val_loss = [&] { return sum(mul(w, w)); };
  auto grads = second_order_alpha_grad(train_loss, val_loss, {w}, {a}, xi);
  const double w_prime = double(w0) - xi * 2.0 * (double(w0) - double(a0));
  const double gap = std::abs(double(grads[0][0]) - 4.0 * xi * w_prime);
  if (gap >= 1e-4 || w.data()[0] != w0) ok = false;

  // xi = 0: bitwise equal to the direct validation gradient
  bool exact = true;
  Rng rng(7);
  Tensor w2 = random_tensor({6}, rng);
  Tensor a2 = random_tensor({3}, rng);
  Tensor m = random_tensor({3, 6}, rng, 0.5f, false);
  auto train2 = [&] {
    Tensor pred = reshape(linear(reshape(a2, {1, 3}), m, Tensor::zeros({6})), {6});
    Tensor d = sub(w2, pred);
    return sum(mul(d, d));
  };
  auto val2 = [&] { return sum(mul(w2, w2)); };
  auto g0 = second_order_alpha_grad(train2, val2, {w2}, {a2}, 0.0);
  a2.zero_grad();
  val2().backward();
  Buffer direct = a2.has_grad() ? a2.grad() : Buffer::Zero(3);
  for (int i = 0; i < 3; ++i)
    if (g0[0][i] != direct[i]) exact = false;
  if (!exact) ok = false;

  verdict(4, "second-order gradient", ok,
          fmt("analytic toy gap %.2e (< 1e-4), xi=0 %s first-order", gap,
              exact ? "bitwise equals" : "DIFFERS from"));
  CHECK(ok);
}

// ---------------------------------------------------------------------------
// 5. Collapse ablation: reconstruction-only on clean images drives the
//    normal cell towards skip connections (>= 0.5 skip fraction in >= 3 of 4
//    seeds); adding classification + masking yields a strictly lower mean
//    skip fraction. Shares its searches with criteria 6 and 7.
// ---------------------------------------------------------------------------
TEST_CASE("criterion 5: collapse ablation") {
  const double t0 = now_s();
  int rec_collapsed = 0;
  double rec_mean = 0.0, joint_mean = 0.0;

  for (uint64_t seed : kSeeds) {
    SearchConfig rec_cfg = desk_config(seed);
    rec_cfg.task_cls = false;
    rec_cfg.input_mode = "clean";  // full-image reconstruction of the clean input
    RunRecord rec = run_search(rec_cfg);
    double sf = skip_fraction(rec.genotype);
    rec_mean += sf / double(kSeeds.size());
    if (sf >= 0.5) ++rec_collapsed;
    g_rec_only_runs.push_back(std::move(rec));

    RunRecord joint = run_search(desk_config(seed));
    joint_mean += skip_fraction(joint.genotype) / double(kSeeds.size());
    g_joint_runs.push_back(std::move(joint));
    std::printf("  seed %llu: rec-only skip %.3f, joint skip %.3f\n",
                (unsigned long long)seed, sf, skip_fraction(g_joint_runs.back().genotype));
    std::fflush(stdout);
  }

  const double dt = now_s() - t0;
  bool ok = rec_collapsed >= 3 && joint_mean < rec_mean && dt < 7200.0;
  verdict(5, "collapse ablation", ok,
          fmt("rec-only skip >= 0.5 in %d/4 seeds (need >= 3), joint mean %.3f < rec-only mean "
              "%.3f, %.0f s (< 7200 s)",
              rec_collapsed, joint_mean, rec_mean, dt));
  CHECK(ok);
}

// ---------------------------------------------------------------------------
// 6. Search quality: the searched genotype, retrained from scratch, beats the
//    all-skip genotype and the median of 5 random genotypes in >= 3/4 seeds.
// ---------------------------------------------------------------------------
TEST_CASE("criterion 6: end-to-end search quality") {
  REQUIRE(g_joint_runs.size() == kSeeds.size());
  int wins = 0;
  std::string lines;
  for (size_t si = 0; si < kSeeds.size(); ++si) {
    SearchConfig cfg = desk_config(kSeeds[si]);
    double searched = evaluate_genotype(g_joint_runs[si].genotype, cfg).accuracy;
    double all_skip = evaluate_genotype(Genotype::all_skip(space_from_name(cfg.space), cfg.n_nodes), cfg).accuracy;
    std::vector<double> rnd;
    for (int k = 0; k < 5; ++k) {
      Rng grng(1000 + kSeeds[si] * 10 + uint64_t(k));
      rnd.push_back(
          evaluate_genotype(Genotype::random(space_from_name(cfg.space), cfg.n_nodes, grng), cfg).accuracy);
    }
    std::nth_element(rnd.begin(), rnd.begin() + 2, rnd.end());
    double median = rnd[2];
    if (searched > all_skip && searched > median) ++wins;
    lines += fmt(" s%llu: %.3f vs skip %.3f / rnd-med %.3f;", (unsigned long long)kSeeds[si],
                 searched, all_skip, median);
  }
  bool ok = wins >= 3;
  verdict(6, "end-to-end search quality", ok,
          fmt("searched beats both baselines in %d/4 seeds (need >= 3):%s", wins, lines.c_str()));
  CHECK(ok);
}

// ---------------------------------------------------------------------------
// 7. Diagnostics integrity: alpha_std_total and skip_fraction recomputed from
//    the persisted alpha snapshots match the live-logged values within 1e-6;
//    the joint-vs-classification-only spread comparison is informational.
// ---------------------------------------------------------------------------
TEST_CASE("criterion 7: diagnostics integrity") {
  REQUIRE(!g_joint_runs.empty());
  bool ok = true;
  double worst = 0.0;
  int checked = 0;

  auto recheck = [&](const RunRecord& rec) {
    for (const auto& snap : rec.snapshots) {
      Alpha a;
      a.space = rec.genotype.space;
      Buffer nb(int64_t(snap.normal.size()));
      for (size_t i = 0; i < snap.normal.size(); ++i) nb[int64_t(i)] = snap.normal[i];
      a.normal = Tensor::from_buffer({snap.num_edges, snap.num_ops}, std::move(nb), false);
      if (!snap.reduce.empty()) {
        Buffer rb(int64_t(snap.reduce.size()));
        for (size_t i = 0; i < snap.reduce.size(); ++i) rb[int64_t(i)] = snap.reduce[i];
        a.reduce = Tensor::from_buffer({snap.num_edges, snap.num_ops}, std::move(rb), false);
      }
      const MetricRow& row = rec.rows.at(size_t(snap.epoch));
      double d1 = std::abs(alpha_std_total(a) - row.alpha_std_total);
      double d2 = std::abs(skip_fraction(discretize(a, 2)) - row.skip_fraction);
      worst = std::max(worst, std::max(d1, d2));
      ++checked;
    }
  };
  for (const auto& r : g_joint_runs) recheck(r);
  if (checked == 0 || worst >= 1e-6) ok = false;

  // informational only: joint-MIM runs should end with a tighter alpha spread
  // than classification-only runs on matched seeds (reference context 0.70 vs
  // 2.19 at full scale)
  int directional = 0;
  const size_t n_dir = 2;  // informational check on a 2-seed subset (cost)
  for (size_t si = 0; si < n_dir; ++si) {
    SearchConfig cls_cfg = desk_config(kSeeds[si]);
    cls_cfg.task_mim = false;
    cls_cfg.input_mode = "clean";
    cls_cfg.eval_epochs = 0;
    RunRecord cls = run_search(cls_cfg);
    double mim_total = g_joint_runs[si].rows.back().alpha_std_total;
    double cls_total = cls.rows.back().alpha_std_total;
    if (mim_total <= cls_total) ++directional;
    std::printf("  [info] seed %llu: alpha_std_total joint %.4f vs cls-only %.4f\n",
                (unsigned long long)kSeeds[si], mim_total, cls_total);
    std::fflush(stdout);
  }
  std::printf("  [info] directional check (not gated): joint <= cls-only in %d/%zu seeds\n",
              directional, n_dir);

  verdict(7, "diagnostics integrity", ok,
          fmt("%d snapshots recomputed, worst gap %.2e (< 1e-6); directional %d/%zu "
              "(informational)",
              checked, worst, directional, n_dir));
  CHECK(ok);
}

// ---------------------------------------------------------------------------
// 8. Determinism and formats: same seed/config reproduces genotype JSON and
//    metric values exactly; CIFAR binary round-trip is byte-exact; malformed
//    inputs produce the documented exit codes via the CLI.
// ---------------------------------------------------------------------------
TEST_CASE("criterion 8: determinism and formats") {
  bool ok = true;
  std::string notes;

  SearchConfig cfg = desk_config(13);
  cfg.epochs = 3;
  cfg.synthetic_n = 640;
  cfg.eval_epochs = 0;
  RunRecord r1 = run_search(cfg);
  RunRecord r2 = run_search(cfg);
  bool det = r1.genotype.to_json() == r2.genotype.to_json() && r1.rows.size() == r2.rows.size();
  if (det)
    for (size_t i = 0; i < r1.rows.size(); ++i)
      det = det && metric_row_csv(r1.rows[i]).substr(0, metric_row_csv(r1.rows[i]).rfind(',')) ==
                       metric_row_csv(r2.rows[i]).substr(0, metric_row_csv(r2.rows[i]).rfind(','));
  if (!det) ok = false;
  notes += det ? "determinism ok" : "DETERMINISM BROKEN";

  // CIFAR round-trip: bytes -> dataset -> bytes must be identical
  DatasetMeta meta;
  meta.num_classes = 4;
  meta.H = meta.W = 4;
  meta.C = 3;
  const std::string p1 = "/tmp/mimdarts_acc_rt1.bin", p2 = "/tmp/mimdarts_acc_rt2.bin";
  {
    std::ofstream f(p1, std::ios::binary);
    Rng rng{uint64_t(3)};
    for (int rec = 0; rec < 6; ++rec) {
      f.put(char(rec % 4));
      for (int i = 0; i < 48; ++i) f.put(char(int(rng.uniform() * 256.0) & 0xff));
    }
  }
  write_cifar_binary(load_cifar_binary(p1, meta), p2);
  auto slurp_bin = [](const std::string& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  };
  bool rt = slurp_bin(p1) == slurp_bin(p2);
  if (!rt) ok = false;
  notes += rt ? ", cifar round-trip byte-exact" : ", CIFAR ROUND-TRIP BROKEN";

  // documented exit codes through the CLI binary
  bool codes = true;
  if (g_binary.empty()) {
    codes = false;
    notes += ", NO CLI BINARY GIVEN";
  } else {
    std::ofstream("/tmp/mimdarts_acc_bad.json") << "{ not json";
    codes &= run_cli("eval --genotype /tmp/mimdarts_acc_bad.json").exit_code == 2;
    codes &= run_cli("eval --genotype /tmp/mimdarts_acc_missing.json").exit_code == 2;
    codes &= run_cli("search --no-such-flag 1").exit_code == 2;
    codes &= run_cli("search --epochs 1 --set bogus_key=1").exit_code == 2;
    CliResult blow = run_cli(
        "search --epochs 2 --seed 3 --set w_lr=1e18 --set w_lr_min=1e18 --dataset synthetic"
        " --set synthetic_n=160 --image-size 8 --num-classes 4 --patch-size 4 --init-channels 2"
        " --cells 3 --set n_nodes=2 --set decoder_width=4 --batch-size 8 --set eval_epochs=0"
        " --run-dir /tmp/mimdarts_acc_abort");
    codes &= blow.exit_code == 3;
    notes += codes ? ", exit codes 2/2/2/2/3 as documented" : ", EXIT CODES WRONG";
  }
  if (!codes) ok = false;

  verdict(8, "determinism and formats", ok, notes);
  CHECK(ok);
}

int main(int argc, char** argv) {
  doctest::Context ctx;
  std::vector<char*> pass{argv[0]};
  for (int i = 1; i < argc; ++i) {
    if (argv[i][0] != '-' && fs::exists(argv[i]))
      g_binary = argv[i];
    else
      pass.push_back(argv[i]);
  }
  ctx.applyCommandLine(int(pass.size()), pass.data());
  return ctx.run();
}
