#pragma once

#include "mimdarts/modules.hpp"

#include <memory>
#include <string>
#include <vector>

namespace mimdarts {

enum class SpaceId { kDarts, kNb201 };
std::string space_name(SpaceId space);
SpaceId space_from_name(const std::string& name);

/// Ordered candidate operation identifiers; alpha columns index into it.
struct OperationSet {
  SpaceId space;
  std::vector<std::string> names;

  static const OperationSet& of(SpaceId space);
  int size() const { return int(names.size()); }
  int index_of(const std::string& name) const;
  int none_index() const { return 0; }
};

/// Learnable architecture logits, one row per edge.
struct Alpha {
  SpaceId space;
  Tensor normal;  // [num_edges, |O|]
  Tensor reduce;  // darts space only; undefined for nb201

  static Alpha init(SpaceId space, int n_nodes, Rng& rng, Scalar noise_std = Scalar(1e-3));
  std::vector<Tensor> params() const;
};

/// Edge count of one cell: darts has 2 input nodes, nb201 one.
int num_edges(SpaceId space, int n_nodes);

struct GenotypeEdge {
  std::string op;
  int from;
};

struct Genotype {
  SpaceId space;
  std::vector<std::vector<GenotypeEdge>> normal;  // grouped per intermediate node
  std::vector<std::vector<GenotypeEdge>> reduce;

  std::string to_json() const;
  static Genotype from_json(const std::string& text);
  static Genotype all_skip(SpaceId space, int n_nodes);
  static Genotype random(SpaceId space, int n_nodes, Rng& rng);
};

/// Argmax discretization. Darts: strongest non-none op per edge, two strongest
/// edges per node; ties break to the lowest op index, then lowest source node.
/// Nb201: plain argmax per edge, none allowed.
Genotype discretize(const Alpha& alpha, int n_nodes);

/// Share of skip_connect among the genotype's choices (normal cell only
/// unless include_reduce).
double skip_fraction(const Genotype& g, bool include_reduce = false);

/// Sum over all edges of the population standard deviation of the softmaxed
/// row; the alpha-spread collapse diagnostic.
double alpha_std_total(const Alpha& alpha);
double alpha_matrix_std_total(const Tensor& matrix);

/// One weight set per candidate op; output is the softmax-weighted sum
/// over its row of the softmaxed alpha matrix.
struct MixedOp : Module {
  std::vector<std::unique_ptr<Module>> candidates;
  int alpha_row = 0;
  Tensor probs;  // softmaxed [E,|O|] matrix on the tape, set before forward

  MixedOp(SpaceId space, int channels, int stride, Rng& rng);
  Tensor forward(const Tensor& x, bool training) override;
  void collect(ModuleState& s) override;
};

/// Dispatch a single named candidate op (used by discretized networks).
std::unique_ptr<Module> make_candidate_op(SpaceId space, const std::string& name, int channels,
                                          int stride, Rng& rng);

struct SupernetConfig {
  SpaceId space = SpaceId::kDarts;
  int in_channels = 3;
  int num_classes = 10;
  int init_channels = 16;
  int cells = 3;
  int n_nodes = 4;       // intermediate nodes (darts); nb201 uses 3 steps
  int stem_multiplier = 3;
};

class Supernet;

/// Weight-sharing encoder E: stem + stacked cells, reductions at L/3 and 2L/3,
/// overall stride 4. forward_features yields x_inter.
class Supernet {
 public:
  Supernet(const SupernetConfig& cfg, Rng& rng);
  ~Supernet();

  Tensor forward_features(const Tensor& x, const Alpha& alpha, bool training);
  int out_channels() const { return out_channels_; }
  const SupernetConfig& config() const { return cfg_; }
  void collect(ModuleState& s);

 private:
  struct CellImpl;
  SupernetConfig cfg_;
  std::unique_ptr<Module> stem_conv_;
  std::unique_ptr<BatchNormLayer> stem_bn_;
  std::vector<std::unique_ptr<CellImpl>> cells_;
  int out_channels_ = 0;
};

/// Discretized network built from a genotype; same stem/reduction layout.
class FixedNet {
 public:
  FixedNet(const SupernetConfig& cfg, const Genotype& genotype, Rng& rng);
  ~FixedNet();

  Tensor forward_features(const Tensor& x, bool training);
  int out_channels() const { return out_channels_; }
  void collect(ModuleState& s);

 private:
  struct CellImpl;
  SupernetConfig cfg_;
  std::unique_ptr<Module> stem_conv_;
  std::unique_ptr<BatchNormLayer> stem_bn_;
  std::vector<std::unique_ptr<CellImpl>> cells_;
  int out_channels_ = 0;
};

}  // namespace mimdarts
