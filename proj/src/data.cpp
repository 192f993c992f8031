#include "mimdarts/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mimdarts {

void ImageDataset::compute_stats(const std::vector<int>& indices) {
  channel_mean.assign(C, 0.f);
  channel_std.assign(C, 1.f);
  const int64_t plane = int64_t(H) * W;
  for (int c = 0; c < C; ++c) {
    double s = 0.0, s2 = 0.0;
    for (int idx : indices) {
      const float* p = images.data() + int64_t(idx) * image_len() + c * plane;
      for (int64_t i = 0; i < plane; ++i) {
        s += p[i];
        s2 += double(p[i]) * p[i];
      }
    }
    const double n = double(indices.size()) * double(plane);
    const double mu = s / n;
    const double var = std::max(s2 / n - mu * mu, 1e-12);
    channel_mean[c] = float(mu);
    channel_std[c] = float(std::sqrt(var));
  }
  float lo = 0.f, hi = 0.f;
  for (int c = 0; c < C; ++c) {
    lo = std::min(lo, (0.f - channel_mean[c]) / channel_std[c]);
    hi = std::max(hi, (1.f - channel_mean[c]) / channel_std[c]);
  }
  norm_lo = lo;
  norm_hi = hi;
}

ImageDataset load_cifar_binary(const std::string& path, const DatasetMeta& meta) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open dataset file: " + path);
  f.seekg(0, std::ios::end);
  const int64_t file_len = f.tellg();
  f.seekg(0);
  const int64_t pix_len = int64_t(meta.C) * meta.H * meta.W;
  const int64_t rec_len = 1 + pix_len;
  if (file_len % rec_len != 0)
    throw std::runtime_error("truncated dataset file " + path + ": length " +
                             std::to_string(file_len) + " is not a multiple of record size " +
                             std::to_string(rec_len) + " (trailing bytes start at offset " +
                             std::to_string((file_len / rec_len) * rec_len) + ")");
  const int64_t n = file_len / rec_len;
  ImageDataset ds;
  ds.num_classes = meta.num_classes;
  ds.C = meta.C;
  ds.H = meta.H;
  ds.W = meta.W;
  ds.images.resize(size_t(n * pix_len));
  ds.labels.resize(size_t(n));
  std::vector<unsigned char> rec(static_cast<size_t>(rec_len));
  for (int64_t i = 0; i < n; ++i) {
    f.read(reinterpret_cast<char*>(rec.data()), rec_len);
    if (!f)
      throw std::runtime_error("read error in " + path + " at offset " +
                               std::to_string(i * rec_len));
    if (rec[0] >= meta.num_classes)
      throw std::runtime_error("label " + std::to_string(int(rec[0])) + " out of range at offset " +
                               std::to_string(i * rec_len) + " in " + path);
    ds.labels[size_t(i)] = int(rec[0]);
    float* dst = ds.images.data() + i * pix_len;
    for (int64_t j = 0; j < pix_len; ++j) dst[j] = float(rec[size_t(1 + j)]) / 255.f;
  }
  return ds;
}

void write_cifar_binary(const ImageDataset& ds, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  const int64_t pix_len = ds.image_len();
  std::vector<unsigned char> rec(static_cast<size_t>(1 + pix_len));
  for (int64_t i = 0; i < ds.size(); ++i) {
    rec[0] = static_cast<unsigned char>(ds.labels[size_t(i)]);
    const float* src = ds.images.data() + i * pix_len;
    for (int64_t j = 0; j < pix_len; ++j)
      rec[size_t(1 + j)] = static_cast<unsigned char>(std::lround(src[j] * 255.f));
    f.write(reinterpret_cast<const char*>(rec.data()), int64_t(rec.size()));
  }
}

DatasetMeta load_meta_sidecar(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open meta sidecar: " + path);
  DatasetMeta m;
  std::string line;
  while (std::getline(f, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos || line.empty() || line[0] == '#') continue;
    std::string key = line.substr(0, eq), val = line.substr(eq + 1);
    if (key == "num_classes") m.num_classes = std::stoi(val);
    else if (key == "height") m.H = std::stoi(val);
    else if (key == "width") m.W = std::stoi(val);
    else if (key == "channels") m.C = std::stoi(val);
  }
  return m;
}

void write_meta_sidecar(const DatasetMeta& meta, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << "# record layout: 1 label byte + channels*height*width pixel bytes,\n"
    << "# channel-planar, row-major\n"
    << "num_classes=" << meta.num_classes << "\n"
    << "height=" << meta.H << "\n"
    << "width=" << meta.W << "\n"
    << "channels=" << meta.C << "\n";
}

ImageDataset make_synthetic(const SyntheticSpec& spec) {
  ImageDataset ds;
  ds.num_classes = spec.num_classes;
  ds.C = spec.C;
  ds.H = spec.H;
  ds.W = spec.W;
  ds.images.resize(size_t(int64_t(spec.n) * ds.image_len()));
  ds.labels.resize(size_t(spec.n));
  Rng rng(spec.seed);
  const double two_pi = 2.0 * M_PI;
  for (int i = 0; i < spec.n; ++i) {
    const int k = i % spec.num_classes;  // balanced classes
    ds.labels[size_t(i)] = k;
    const double theta = M_PI * double(k) / double(spec.num_classes);
    const double freq = double(spec.freq_base) + double(k % 3);  // cycles across the image
    const double phase = two_pi * double(spec.phase_jitter) * rng.uniform();
    const double cs = std::cos(theta), sn = std::sin(theta);
    float* img = ds.images.data() + int64_t(i) * ds.image_len();
    for (int c = 0; c < spec.C; ++c) {
      const double amp = 0.4 * (1.0 - 0.15 * c);
      for (int h = 0; h < spec.H; ++h)
        for (int w = 0; w < spec.W; ++w) {
          const double u = (cs * h + sn * w) / double(spec.H);
          double v = 0.5 + amp * std::sin(phase + two_pi * freq * u);
          if (spec.noise_std > 0) v += double(spec.noise_std) * rng.normal();
          img[(int64_t(c) * spec.H + h) * spec.W + w] = float(std::clamp(v, 0.0, 1.0));
        }
    }
  }
  return ds;
}

void SplitPlan::validate(int64_t n) const {
  std::vector<int> all;
  for (const auto* part : {&search_train, &search_val, &eval_train, &eval_test})
    all.insert(all.end(), part->begin(), part->end());
  if (int64_t(all.size()) != n)
    throw std::invalid_argument("split plan covers " + std::to_string(all.size()) +
                                " of " + std::to_string(n) + " samples");
  std::vector<int> sorted = all;
  std::sort(sorted.begin(), sorted.end());
  for (int64_t i = 0; i < n; ++i)
    if (sorted[size_t(i)] != int(i))
      throw std::invalid_argument("split plan is not a permutation-partition (duplicate or "
                                  "out-of-range index near " + std::to_string(sorted[size_t(i)]) + ")");
}

SplitPlan make_split_plan(int64_t n, double f_search_train, double f_search_val,
                          double f_eval_train, uint64_t seed) {
  if (f_search_train + f_search_val + f_eval_train > 1.0 + 1e-9)
    throw std::invalid_argument("split fractions exceed 1");
  std::vector<int> perm(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) perm[size_t(i)] = int(i);
  Rng rng(seed ^ 0x51eed517u);
  rng.shuffle(perm);
  SplitPlan plan;
  plan.seed = seed;
  int64_t a = int64_t(f_search_train * double(n));
  int64_t b = a + int64_t(f_search_val * double(n));
  int64_t c = b + int64_t(f_eval_train * double(n));
  plan.search_train.assign(perm.begin(), perm.begin() + a);
  plan.search_val.assign(perm.begin() + a, perm.begin() + b);
  plan.eval_train.assign(perm.begin() + b, perm.begin() + c);
  plan.eval_test.assign(perm.begin() + c, perm.end());
  plan.validate(n);
  return plan;
}

Batch assemble_batch(const ImageDataset& ds, const std::vector<int>& indices, SplitTag tag,
                     bool augment, Rng& rng) {
  const int B = int(indices.size());
  const int C = ds.C, H = ds.H, W = ds.W;
  const int64_t plane = int64_t(H) * W;
  Tensor images = Tensor::zeros({B, C, H, W});
  Buffer& out = images.data();
  const int pad = 4;
  for (int b = 0; b < B; ++b) {
    const float* src = ds.images.data() + int64_t(indices[size_t(b)]) * ds.image_len();
    int dy = 0, dx = 0;
    bool flip = false;
    if (augment) {
      dy = int(rng.below(uint32_t(2 * pad + 1))) - pad;
      dx = int(rng.below(uint32_t(2 * pad + 1))) - pad;
      flip = rng.below(2) == 1;
    }
    for (int c = 0; c < C; ++c) {
      const float mu = ds.channel_mean.empty() ? 0.f : ds.channel_mean[size_t(c)];
      const float sd = ds.channel_std.empty() ? 1.f : ds.channel_std[size_t(c)];
      Scalar* dst = out.data() + (int64_t(b) * C + c) * plane;
      for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w) {
          int sh = h + dy;
          int sw = flip ? (W - 1 - (w + dx)) : (w + dx);
          float raw = 0.f;  // zero-padded border
          if (sh >= 0 && sh < H && sw >= 0 && sw < W) raw = src[(int64_t(c) * H + sh) * W + sw];
          dst[int64_t(h) * W + w] = (raw - mu) / sd;
        }
    }
  }
  Batch batch;
  batch.images = images;
  batch.labels.reserve(size_t(B));
  for (int idx : indices) batch.labels.push_back(ds.labels[size_t(idx)]);
  batch.tag = tag;
  return batch;
}

BatchStream::BatchStream(const ImageDataset& ds, std::vector<int> indices, int batch_size,
                         SplitTag tag, bool shuffle, bool augment, uint64_t seed)
    : ds_(ds),
      indices_(std::move(indices)),
      batch_size_(batch_size),
      tag_(tag),
      shuffle_(shuffle),
      augment_(augment),
      seed_(seed),
      rng_(seed) {
  order_ = indices_;
}

void BatchStream::start_epoch(int epoch) {
  order_ = indices_;
  rng_ = Rng(seed_ * 0x9e3779b97f4a7c15ull + uint64_t(epoch) + 1);
  if (shuffle_) rng_.shuffle(order_);
  cursor_ = 0;
}

bool BatchStream::next(Batch& out) {
  if (cursor_ + batch_size_ > int(order_.size())) return false;
  std::vector<int> idx(order_.begin() + cursor_, order_.begin() + cursor_ + batch_size_);
  cursor_ += batch_size_;
  out = assemble_batch(ds_, idx, tag_, augment_, rng_);
  return true;
}

}  // namespace mimdarts
