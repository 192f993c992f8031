#include "mimdarts/search_space.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mimdarts {

using ordered_json = nlohmann::ordered_json;

std::string space_name(SpaceId space) {
  return space == SpaceId::kDarts ? "darts" : "nb201";
}

SpaceId space_from_name(const std::string& name) {
  if (name == "darts") return SpaceId::kDarts;
  if (name == "nb201") return SpaceId::kNb201;
  throw std::invalid_argument("unknown search space: " + name);
}

const OperationSet& OperationSet::of(SpaceId space) {
  static const OperationSet darts{
      SpaceId::kDarts,
      {"none", "skip_connect", "max_pool_3x3", "avg_pool_3x3", "sep_conv_3x3", "sep_conv_5x5",
       "dil_conv_3x3", "dil_conv_5x5"}};
  static const OperationSet nb201{
      SpaceId::kNb201, {"none", "skip_connect", "conv_1x1", "conv_3x3", "avg_pool_3x3"}};
  return space == SpaceId::kDarts ? darts : nb201;
}

int OperationSet::index_of(const std::string& name) const {
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return int(i);
  throw std::invalid_argument("unknown operation '" + name + "' in space " + space_name(space));
}

int num_edges(SpaceId space, int n_nodes) {
  if (space == SpaceId::kDarts) return n_nodes * 2 + n_nodes * (n_nodes - 1) / 2;
  return n_nodes * (n_nodes + 1) / 2;  // nodes 1..n, node j has j predecessors
}

Alpha Alpha::init(SpaceId space, int n_nodes, Rng& rng, Scalar noise_std) {
  const int E = num_edges(space, n_nodes);
  const int K = OperationSet::of(space).size();
  Alpha a;
  a.space = space;
  auto make = [&]() {
    Tensor t = Tensor::zeros({E, K}, /*requires_grad=*/true);
    for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = Scalar(noise_std * rng.normal());
    return t;
  };
  a.normal = make();
  if (space == SpaceId::kDarts) a.reduce = make();
  return a;
}

std::vector<Tensor> Alpha::params() const {
  std::vector<Tensor> out{normal};
  if (reduce.defined()) out.push_back(reduce);
  return out;
}

// ---- genotype ----

static ordered_json edges_to_json(const std::vector<std::vector<GenotypeEdge>>& nodes) {
  ordered_json arr = ordered_json::array();
  for (const auto& node : nodes) {
    ordered_json n = ordered_json::array();
    for (const auto& e : node) n.push_back(ordered_json::array({e.op, e.from}));
    arr.push_back(n);
  }
  return arr;
}

static std::vector<std::vector<GenotypeEdge>> edges_from_json(const ordered_json& arr) {
  std::vector<std::vector<GenotypeEdge>> nodes;
  for (const auto& n : arr) {
    std::vector<GenotypeEdge> node;
    for (const auto& e : n) node.push_back({e.at(0).get<std::string>(), e.at(1).get<int>()});
    nodes.push_back(std::move(node));
  }
  return nodes;
}

std::string Genotype::to_json() const {
  ordered_json j;
  j["space"] = space_name(space);
  j["normal"] = edges_to_json(normal);
  j["reduce"] = edges_to_json(reduce);
  return j.dump(2) + "\n";
}

Genotype Genotype::from_json(const std::string& text) {
  ordered_json j = ordered_json::parse(text);
  Genotype g;
  g.space = space_from_name(j.at("space").get<std::string>());
  g.normal = edges_from_json(j.at("normal"));
  g.reduce = edges_from_json(j.at("reduce"));
  const OperationSet& ops = OperationSet::of(g.space);
  for (const auto* cell : {&g.normal, &g.reduce})
    for (const auto& node : *cell)
      for (const auto& e : node) ops.index_of(e.op);  // validates op names
  return g;
}

Genotype Genotype::all_skip(SpaceId space, int n_nodes) {
  Genotype g;
  g.space = space;
  if (space == SpaceId::kDarts) {
    for (int j = 0; j < n_nodes; ++j)
      g.normal.push_back({{"skip_connect", 0}, {"skip_connect", 1}});
    g.reduce = g.normal;
  } else {
    for (int j = 1; j <= n_nodes; ++j) {
      std::vector<GenotypeEdge> node;
      for (int i = 0; i < j; ++i) node.push_back({"skip_connect", i});
      g.normal.push_back(std::move(node));
    }
  }
  return g;
}

Genotype Genotype::random(SpaceId space, int n_nodes, Rng& rng) {
  const OperationSet& ops = OperationSet::of(space);
  Genotype g;
  g.space = space;
  if (space == SpaceId::kDarts) {
    auto random_cell = [&]() {
      std::vector<std::vector<GenotypeEdge>> cell;
      for (int j = 0; j < n_nodes; ++j) {
        const int n_in = 2 + j;
        int a = int(rng.below(uint32_t(n_in)));
        int b = int(rng.below(uint32_t(n_in - 1)));
        if (b >= a) ++b;
        if (a > b) std::swap(a, b);
        auto pick_op = [&]() { return ops.names[1 + rng.below(uint32_t(ops.size() - 1))]; };
        cell.push_back({{pick_op(), a}, {pick_op(), b}});
      }
      return cell;
    };
    g.normal = random_cell();
    g.reduce = random_cell();
  } else {
    for (int j = 1; j <= n_nodes; ++j) {
      std::vector<GenotypeEdge> node;
      for (int i = 0; i < j; ++i)
        node.push_back({ops.names[rng.below(uint32_t(ops.size()))], i});
      g.normal.push_back(std::move(node));
    }
  }
  return g;
}

namespace {

std::vector<std::vector<double>> softmax_rows(const Tensor& m) {
  const int E = m.shape()[0], K = m.shape()[1];
  std::vector<std::vector<double>> rows(static_cast<size_t>(E), std::vector<double>(static_cast<size_t>(K)));
  for (int e = 0; e < E; ++e) {
    const Scalar* r = m.data().data() + int64_t(e) * K;
    double mx = r[0];
    for (int k = 1; k < K; ++k) mx = std::max(mx, double(r[k]));
    double denom = 0.0;
    for (int k = 0; k < K; ++k) denom += std::exp(double(r[k]) - mx);
    for (int k = 0; k < K; ++k) rows[size_t(e)][size_t(k)] = std::exp(double(r[k]) - mx) / denom;
  }
  return rows;
}

std::vector<std::vector<GenotypeEdge>> discretize_darts_cell(const Tensor& matrix, int n_nodes) {
  const OperationSet& ops = OperationSet::of(SpaceId::kDarts);
  auto probs = softmax_rows(matrix);
  std::vector<std::vector<GenotypeEdge>> cell;
  int edge = 0;
  for (int j = 0; j < n_nodes; ++j) {
    const int n_in = 2 + j;
    struct Cand {
      double strength;
      int from;
      int op;
    };
    std::vector<Cand> cands;
    for (int i = 0; i < n_in; ++i, ++edge) {
      int best_op = -1;
      double best = -1.0;
      for (int k = 0; k < ops.size(); ++k) {
        if (k == ops.none_index()) continue;
        if (probs[size_t(edge)][size_t(k)] > best) {  // strict: ties keep lowest op index
          best = probs[size_t(edge)][size_t(k)];
          best_op = k;
        }
      }
      cands.push_back({best, i, best_op});
    }
    std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      if (a.strength != b.strength) return a.strength > b.strength;
      return a.from < b.from;
    });
    std::vector<GenotypeEdge> node{{ops.names[size_t(cands[0].op)], cands[0].from},
                                   {ops.names[size_t(cands[1].op)], cands[1].from}};
    std::sort(node.begin(), node.end(),
              [](const GenotypeEdge& a, const GenotypeEdge& b) { return a.from < b.from; });
    cell.push_back(std::move(node));
  }
  return cell;
}

}  // namespace

Genotype discretize(const Alpha& alpha, int n_nodes) {
  Genotype g;
  g.space = alpha.space;
  if (alpha.space == SpaceId::kDarts) {
    g.normal = discretize_darts_cell(alpha.normal, n_nodes);
    g.reduce = discretize_darts_cell(alpha.reduce, n_nodes);
  } else {
    const OperationSet& ops = OperationSet::of(SpaceId::kNb201);
    auto probs = softmax_rows(alpha.normal);
    int edge = 0;
    for (int j = 1; j <= n_nodes; ++j) {
      std::vector<GenotypeEdge> node;
      for (int i = 0; i < j; ++i, ++edge) {
        int best_op = 0;
        double best = probs[size_t(edge)][0];
        for (int k = 1; k < ops.size(); ++k)
          if (probs[size_t(edge)][size_t(k)] > best) {
            best = probs[size_t(edge)][size_t(k)];
            best_op = k;
          }
        node.push_back({ops.names[size_t(best_op)], i});
      }
      g.normal.push_back(std::move(node));
    }
  }
  return g;
}

double skip_fraction(const Genotype& g, bool include_reduce) {
  int skips = 0, total = 0;
  auto count = [&](const std::vector<std::vector<GenotypeEdge>>& cell) {
    for (const auto& node : cell)
      for (const auto& e : node) {
        ++total;
        if (e.op == "skip_connect") ++skips;
      }
  };
  count(g.normal);
  if (include_reduce) count(g.reduce);
  return total == 0 ? 0.0 : double(skips) / double(total);
}

double alpha_matrix_std_total(const Tensor& matrix) {
  auto probs = softmax_rows(matrix);
  double total = 0.0;
  for (const auto& row : probs) {
    double m = 0.0, m2 = 0.0;
    for (double p : row) {
      m += p;
      m2 += p * p;
    }
    m /= double(row.size());
    m2 /= double(row.size());
    total += std::sqrt(std::max(m2 - m * m, 0.0));
  }
  return total;
}

double alpha_std_total(const Alpha& alpha) {
  double total = alpha_matrix_std_total(alpha.normal);
  if (alpha.reduce.defined()) total += alpha_matrix_std_total(alpha.reduce);
  return total;
}

// ---- mixed op ----

std::unique_ptr<Module> make_candidate_op(SpaceId space, const std::string& name, int channels,
                                          int stride, Rng& rng) {
  if (name == "none") return std::make_unique<ZeroOp>(stride);
  if (name == "skip_connect") {
    if (stride == 1) return std::make_unique<Identity>();
    return std::make_unique<FactorizedReduce>(channels, channels, rng);
  }
  if (name == "max_pool_3x3") return std::make_unique<PoolOp>(true, stride);
  if (name == "avg_pool_3x3") return std::make_unique<PoolOp>(false, stride);
  if (name == "sep_conv_3x3") return std::make_unique<SepConv>(channels, 3, stride, rng);
  if (name == "sep_conv_5x5") return std::make_unique<SepConv>(channels, 5, stride, rng);
  if (name == "dil_conv_3x3") return std::make_unique<DilConv>(channels, 3, stride, rng);
  if (name == "dil_conv_5x5") return std::make_unique<DilConv>(channels, 5, stride, rng);
  if (name == "conv_1x1") return std::make_unique<ReluConvBn>(channels, channels, 1, stride, 0, rng);
  if (name == "conv_3x3") return std::make_unique<ReluConvBn>(channels, channels, 3, stride, 1, rng);
  throw std::invalid_argument("unknown candidate op: " + name);
}

MixedOp::MixedOp(SpaceId space, int channels, int stride, Rng& rng) {
  for (const auto& name : OperationSet::of(space).names)
    candidates.push_back(make_candidate_op(space, name, channels, stride, rng));
}

Tensor MixedOp::forward(const Tensor& x, bool training) {
  if (!probs.defined()) throw std::logic_error("MixedOp: probs not set");
  const int K = int(candidates.size());
  Tensor out;
  for (int k = 0; k < K; ++k) {
    Tensor term = scale_by(candidates[size_t(k)]->forward(x, training),
                           select(probs, int64_t(alpha_row) * K + k));
    out = out.defined() ? add(out, term) : term;
  }
  return out;
}

void MixedOp::collect(ModuleState& s) {
  for (auto& c : candidates) c->collect(s);
}

// ---- supernet ----

namespace {

struct DartsCellPlan {
  bool reduction;
  bool reduction_prev;
};

void check_reduction_layout(const SupernetConfig& cfg) {
  if (cfg.cells < 2)
    throw std::invalid_argument("supernet: need at least 2 cells for the stride-4 contract");
  if (cfg.cells / 3 == 2 * cfg.cells / 3)
    throw std::invalid_argument("supernet: reduction positions coincide for cells=" +
                                std::to_string(cfg.cells));
}

bool is_reduction_index(const SupernetConfig& cfg, int i) {
  if (cfg.cells == 3) return i == 1 || i == 2;  // floor(L/3)=1 alone would break stride 4
  return i == cfg.cells / 3 || i == 2 * cfg.cells / 3;
}

}  // namespace

struct Supernet::CellImpl {
  SpaceId space;
  bool reduction = false;
  int n_nodes;
  int edge_offset;  // row of the first edge in the alpha matrix
  std::unique_ptr<Module> preprocess0, preprocess1;        // darts
  std::unique_ptr<Module> fixed_block;                     // nb201 reduction block
  std::vector<std::unique_ptr<MixedOp>> edges;             // flat, cell edge order

  Tensor forward(const Tensor& s0, const Tensor& s1, const Tensor& probs, bool training);
};

Tensor Supernet::CellImpl::forward(const Tensor& s0, const Tensor& s1, const Tensor& probs,
                                   bool training) {
  if (fixed_block) return fixed_block->forward(s1, training);
  for (size_t e = 0; e < edges.size(); ++e) {
    edges[e]->alpha_row = edge_offset + int(e);
    edges[e]->probs = probs;
  }
  if (space == SpaceId::kDarts) {
    std::vector<Tensor> states{preprocess0->forward(s0, training),
                               preprocess1->forward(s1, training)};
    int edge = 0;
    std::vector<Tensor> nodes;
    for (int j = 0; j < n_nodes; ++j) {
      Tensor acc;
      for (int i = 0; i < 2 + j; ++i, ++edge) {
        Tensor term = edges[size_t(edge)]->forward(states[size_t(i)], training);
        acc = acc.defined() ? add(acc, term) : term;
      }
      states.push_back(acc);
      nodes.push_back(acc);
    }
    return concat_channels(nodes);
  }
  // nb201: node 0 is the cell input
  std::vector<Tensor> states{s1};
  int edge = 0;
  for (int j = 1; j <= n_nodes; ++j) {
    Tensor acc;
    for (int i = 0; i < j; ++i, ++edge) {
      Tensor term = edges[size_t(edge)]->forward(states[size_t(i)], training);
      acc = acc.defined() ? add(acc, term) : term;
    }
    states.push_back(acc);
  }
  return states.back();
}

Supernet::~Supernet() = default;

Supernet::Supernet(const SupernetConfig& cfg, Rng& rng) : cfg_(cfg) {
  check_reduction_layout(cfg);
  const int n_nodes = cfg.space == SpaceId::kDarts ? cfg.n_nodes : 3;
  if (cfg.space == SpaceId::kDarts) {
    int c_curr = cfg.init_channels * cfg.stem_multiplier;
    stem_conv_ = std::make_unique<Conv2dLayer>(cfg.in_channels, c_curr, 3, 1, 1, rng);
    stem_bn_ = std::make_unique<BatchNormLayer>(c_curr);
    int c_pp = c_curr, c_p = c_curr;
    c_curr = cfg.init_channels;
    bool reduction_prev = false;
    for (int i = 0; i < cfg.cells; ++i) {
      const bool reduction = is_reduction_index(cfg, i);
      if (reduction) c_curr *= 2;
      auto cell = std::make_unique<CellImpl>();
      cell->space = cfg.space;
      cell->reduction = reduction;
      cell->n_nodes = n_nodes;
      cell->edge_offset = 0;
      cell->preprocess0 = reduction_prev
                              ? std::unique_ptr<Module>(std::make_unique<FactorizedReduce>(c_pp, c_curr, rng))
                              : std::unique_ptr<Module>(std::make_unique<ReluConvBn>(c_pp, c_curr, 1, 1, 0, rng));
      cell->preprocess1 = std::make_unique<ReluConvBn>(c_p, c_curr, 1, 1, 0, rng);
      for (int j = 0; j < n_nodes; ++j)
        for (int e = 0; e < 2 + j; ++e) {
          const int stride = (reduction && e < 2) ? 2 : 1;
          cell->edges.push_back(std::make_unique<MixedOp>(cfg.space, c_curr, stride, rng));
        }
      cells_.push_back(std::move(cell));
      reduction_prev = reduction;
      c_pp = c_p;
      c_p = n_nodes * c_curr;
    }
    out_channels_ = c_p;
  } else {
    int c = cfg.init_channels;
    stem_conv_ = std::make_unique<Conv2dLayer>(cfg.in_channels, c, 3, 1, 1, rng);
    stem_bn_ = std::make_unique<BatchNormLayer>(c);
    for (int i = 0; i < cfg.cells; ++i) {
      if (is_reduction_index(cfg, i)) {
        auto red = std::make_unique<CellImpl>();
        red->space = cfg.space;
        red->n_nodes = n_nodes;
        red->fixed_block = std::make_unique<ReluConvBn>(c, 2 * c, 3, 2, 1, rng);
        c *= 2;
        cells_.push_back(std::move(red));
      }
      auto cell = std::make_unique<CellImpl>();
      cell->space = cfg.space;
      cell->n_nodes = n_nodes;
      cell->edge_offset = 0;
      for (int j = 1; j <= n_nodes; ++j)
        for (int i2 = 0; i2 < j; ++i2)
          cell->edges.push_back(std::make_unique<MixedOp>(cfg.space, c, 1, rng));
      cells_.push_back(std::move(cell));
    }
    // the two fixed reduction blocks provide the overall stride of 4
    out_channels_ = c;
  }
}

Tensor Supernet::forward_features(const Tensor& x, const Alpha& alpha, bool training) {
  const Shape& s = x.shape();
  if (s.size() != 4 || s[2] % 4 != 0 || s[3] % 4 != 0)
    throw std::invalid_argument("supernet: input spatial size must be divisible by 4, got " +
                                shape_str(s));
  Tensor probs_normal = softmax(alpha.normal, 1);
  Tensor probs_reduce = alpha.reduce.defined() ? softmax(alpha.reduce, 1) : Tensor();

  Tensor stem = stem_bn_->forward(stem_conv_->forward(x, training), training);
  Tensor s0 = stem, s1 = stem;
  for (auto& cell : cells_) {
    const Tensor& probs =
        (cfg_.space == SpaceId::kDarts && cell->reduction) ? probs_reduce : probs_normal;
    Tensor out = cell->forward(s0, s1, probs, training);
    s0 = s1;
    s1 = out;
  }
  return s1;
}

void Supernet::collect(ModuleState& s) {
  stem_conv_->collect(s);
  stem_bn_->collect(s);
  for (auto& cell : cells_) {
    if (cell->fixed_block) {
      cell->fixed_block->collect(s);
      continue;
    }
    if (cell->preprocess0) cell->preprocess0->collect(s);
    if (cell->preprocess1) cell->preprocess1->collect(s);
    for (auto& e : cell->edges) e->collect(s);
  }
}

// ---- fixed (discretized) network ----

struct FixedNet::CellImpl {
  SpaceId space;
  bool reduction = false;
  std::unique_ptr<Module> preprocess0, preprocess1;
  std::unique_ptr<Module> fixed_block;
  // per node: (module, from) pairs
  std::vector<std::vector<std::pair<std::unique_ptr<Module>, int>>> node_ops;

  Tensor forward(const Tensor& s0, const Tensor& s1, bool training);
};

Tensor FixedNet::CellImpl::forward(const Tensor& s0, const Tensor& s1, bool training) {
  if (fixed_block) return fixed_block->forward(s1, training);
  if (space == SpaceId::kDarts) {
    std::vector<Tensor> states{preprocess0->forward(s0, training),
                               preprocess1->forward(s1, training)};
    std::vector<Tensor> nodes;
    for (auto& node : node_ops) {
      Tensor acc;
      for (auto& [op, from] : node) {
        Tensor term = op->forward(states[size_t(from)], training);
        acc = acc.defined() ? add(acc, term) : term;
      }
      states.push_back(acc);
      nodes.push_back(acc);
    }
    return concat_channels(nodes);
  }
  std::vector<Tensor> states{s1};
  for (auto& node : node_ops) {
    Tensor acc;
    for (auto& [op, from] : node) {
      Tensor term = op->forward(states[size_t(from)], training);
      acc = acc.defined() ? add(acc, term) : term;
    }
    states.push_back(acc);
  }
  return states.back();
}

FixedNet::~FixedNet() = default;

FixedNet::FixedNet(const SupernetConfig& cfg, const Genotype& genotype, Rng& rng) : cfg_(cfg) {
  check_reduction_layout(cfg);
  if (genotype.space != cfg.space)
    throw std::invalid_argument("genotype space does not match network config");
  if (cfg.space == SpaceId::kDarts) {
    const int n_nodes = int(genotype.normal.size());
    int c_curr = cfg.init_channels * cfg.stem_multiplier;
    stem_conv_ = std::make_unique<Conv2dLayer>(cfg.in_channels, c_curr, 3, 1, 1, rng);
    stem_bn_ = std::make_unique<BatchNormLayer>(c_curr);
    int c_pp = c_curr, c_p = c_curr;
    c_curr = cfg.init_channels;
    bool reduction_prev = false;
    for (int i = 0; i < cfg.cells; ++i) {
      const bool reduction = is_reduction_index(cfg, i);
      if (reduction) c_curr *= 2;
      const auto& cell_geno = reduction ? genotype.reduce : genotype.normal;
      auto cell = std::make_unique<CellImpl>();
      cell->space = cfg.space;
      cell->reduction = reduction;
      cell->preprocess0 = reduction_prev
                              ? std::unique_ptr<Module>(std::make_unique<FactorizedReduce>(c_pp, c_curr, rng))
                              : std::unique_ptr<Module>(std::make_unique<ReluConvBn>(c_pp, c_curr, 1, 1, 0, rng));
      cell->preprocess1 = std::make_unique<ReluConvBn>(c_p, c_curr, 1, 1, 0, rng);
      for (const auto& node : cell_geno) {
        std::vector<std::pair<std::unique_ptr<Module>, int>> node_ops;
        for (const auto& e : node) {
          const int stride = (reduction && e.from < 2) ? 2 : 1;
          node_ops.emplace_back(make_candidate_op(cfg.space, e.op, c_curr, stride, rng), e.from);
        }
        cell->node_ops.push_back(std::move(node_ops));
      }
      cells_.push_back(std::move(cell));
      reduction_prev = reduction;
      c_pp = c_p;
      c_p = n_nodes * c_curr;
    }
    out_channels_ = c_p;
  } else {
    int c = cfg.init_channels;
    stem_conv_ = std::make_unique<Conv2dLayer>(cfg.in_channels, c, 3, 1, 1, rng);
    stem_bn_ = std::make_unique<BatchNormLayer>(c);
    for (int i = 0; i < cfg.cells; ++i) {
      if (is_reduction_index(cfg, i)) {
        auto red = std::make_unique<CellImpl>();
        red->space = cfg.space;
        red->fixed_block = std::make_unique<ReluConvBn>(c, 2 * c, 3, 2, 1, rng);
        c *= 2;
        cells_.push_back(std::move(red));
      }
      auto cell = std::make_unique<CellImpl>();
      cell->space = cfg.space;
      for (const auto& node : genotype.normal) {
        std::vector<std::pair<std::unique_ptr<Module>, int>> node_ops;
        for (const auto& e : node)
          node_ops.emplace_back(make_candidate_op(cfg.space, e.op, c, 1, rng), e.from);
        cell->node_ops.push_back(std::move(node_ops));
      }
      cells_.push_back(std::move(cell));
    }
    out_channels_ = c;
  }
}

Tensor FixedNet::forward_features(const Tensor& x, bool training) {
  const Shape& s = x.shape();
  if (s.size() != 4 || s[2] % 4 != 0 || s[3] % 4 != 0)
    throw std::invalid_argument("network: input spatial size must be divisible by 4");
  Tensor stem = stem_bn_->forward(stem_conv_->forward(x, training), training);
  Tensor s0 = stem, s1 = stem;
  for (auto& cell : cells_) {
    Tensor out = cell->forward(s0, s1, training);
    s0 = s1;
    s1 = out;
  }
  return s1;
}

void FixedNet::collect(ModuleState& s) {
  stem_conv_->collect(s);
  stem_bn_->collect(s);
  for (auto& cell : cells_) {
    if (cell->fixed_block) {
      cell->fixed_block->collect(s);
      continue;
    }
    if (cell->preprocess0) cell->preprocess0->collect(s);
    if (cell->preprocess1) cell->preprocess1->collect(s);
    for (auto& node : cell->node_ops)
      for (auto& [op, from] : node) op->collect(s);
  }
}

}  // namespace mimdarts
