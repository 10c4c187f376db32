// Copyright (c) 2026 The CDS Authors
// SPDX-License-Identifier: Apache-2.0

#include "testkit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <numbers>
#include <queue>
#include <set>
#include <sstream>

#include <unistd.h>

#include "cds/grad_check.hpp"
#include "cds/losses.hpp"
#include "cds/model.hpp"
#include "cds/ops.hpp"
#include "cds/rng.hpp"

namespace cds::testkit {

Tensor<double> random_tensor(Shape shape, std::uint64_t seed, double lo, double hi) {
  Tensor<double> t(std::move(shape));
  Rng rng(seed);
  for (double& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

Var<double> probe(const Var<double>& y, std::uint64_t seed) {
  const Var<double> w = y.tape().constant(random_tensor(y.shape(), seed));
  return sum(mul(y, w));
}

TempDir::TempDir(const std::string& tag) {
  static int counter = 0;
  const auto base = std::filesystem::temp_directory_path();
  for (;;) {
    path_ = base / ("cds_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    if (std::filesystem::create_directories(path_)) break;
  }
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------

namespace {

using VarList = std::vector<Var<double>>;
using MultiFn = std::function<Var<double>(VarList&)>;

// Gradient of probe(f(args)) with respect to args[which]; all other arguments
// enter as constants.
double check_arg(std::vector<Tensor<double>> args, std::size_t which, const MultiFn& f) {
  Objective obj = [&](Tape<double>& tape) {
    VarList v;
    for (std::size_t i = 0; i < args.size(); ++i) v.push_back(i == which ? tape.leaf(args[i]) : tape.constant_ref(args[i]));
    return probe(f(v));
  };
  return grad_check_tensor(obj, args[which]);
}

double check_unary(Tensor<double> x, const std::function<Var<double>(const Var<double>&)>& f) {
  return check_arg({std::move(x)}, 0, [&](VarList& v) { return f(v[0]); });
}

// Random values with |x| >= margin, away from activation kinks.
Tensor<double> away_from_zero(Shape shape, std::uint64_t seed, double margin) {
  Tensor<double> t = random_tensor(std::move(shape), seed);
  for (double& v : t.data) v = (v < 0 ? -1.0 : 1.0) * (margin + (1.0 - margin) * std::abs(v));
  return t;
}

}  // namespace

VariationalParams<double> identity_variational() {
  VariationalParams<double> vp;
  vp.fc1.weight = Tensor<double>({2, 1}, {1.0, -1.0});
  vp.fc1.bias = Tensor<double>({2});
  vp.fc2.weight = Tensor<double>({2, 2}, {1.0, -1.0, 0.0, 0.0});
  vp.fc2.bias = Tensor<double>({2});
  return vp;
}

std::vector<GradCase> op_grad_cases() {
  std::vector<GradCase> cases;
  auto add_case = [&](std::string name, std::function<double()> run) { cases.push_back({std::move(name), std::move(run)}); };

  // conv2d
  for (int which = 0; which < 3; ++which) {
    static const char* names[] = {"input", "weight", "bias"};
    add_case(std::string("conv2d 3x3 pad1 / ") + names[which], [which] {
      return check_arg({random_tensor({2, 5, 5}, 1), random_tensor({3, 2, 3, 3}, 2), random_tensor({3}, 3)},
                       static_cast<std::size_t>(which),
                       [](VarList& v) { return conv2d(v[0], v[1], v[2], 1, 1); });
    });
    add_case(std::string("conv2d batched stride2 / ") + names[which], [which] {
      return check_arg({random_tensor({2, 2, 6, 5}, 4), random_tensor({3, 2, 3, 3}, 5), random_tensor({3}, 6)},
                       static_cast<std::size_t>(which),
                       [](VarList& v) { return conv2d(v[0], v[1], v[2], 2, 1); });
    });
  }
  add_case("conv2d 1x1 / weight", [] {
    return check_arg({random_tensor({1, 4, 3, 3}, 7), random_tensor({2, 4, 1, 1}, 8), random_tensor({2}, 9)}, 1,
                     [](VarList& v) { return conv2d(v[0], v[1], v[2], 1, 0); });
  });

  // linear
  for (int which = 0; which < 3; ++which) {
    add_case("linear / arg" + std::to_string(which), [which] {
      return check_arg({random_tensor({3, 4}, 10), random_tensor({5, 4}, 11), random_tensor({5}, 12)},
                       static_cast<std::size_t>(which), [](VarList& v) { return linear(v[0], v[1], v[2]); });
    });
  }

  // elementwise
  add_case("relu", [] { return check_unary(away_from_zero({3, 4}, 13, 0.05), [](auto& x) { return relu(x); }); });
  add_case("tanh", [] { return check_unary(random_tensor({3, 4}, 24, -2, 2), [](auto& x) { return tanh(x); }); });
  add_case("sigmoid", [] { return check_unary(random_tensor({3, 4}, 14, -3, 3), [](auto& x) { return sigmoid(x); }); });
  add_case("exp", [] { return check_unary(random_tensor({3, 4}, 15), [](auto& x) { return cds::exp(x); }); });
  add_case("log", [] { return check_unary(random_tensor({3, 4}, 16, 0.2, 2.0), [](auto& x) { return cds::log(x); }); });
  add_case("clamp", [] {
    return check_unary(away_from_zero({4, 4}, 17, 0.05), [](auto& x) { return clamp(mul_scalar(x, 2.0), -1.0, 1.0); });
  });
  for (int which = 0; which < 2; ++which) {
    add_case("add / arg" + std::to_string(which), [which] {
      return check_arg({random_tensor({2, 3}, 18), random_tensor({2, 3}, 19)}, static_cast<std::size_t>(which),
                       [](VarList& v) { return add(v[0], v[1]); });
    });
    add_case("sub / arg" + std::to_string(which), [which] {
      return check_arg({random_tensor({2, 3}, 20), random_tensor({2, 3}, 21)}, static_cast<std::size_t>(which),
                       [](VarList& v) { return sub(v[0], v[1]); });
    });
    add_case("mul / arg" + std::to_string(which), [which] {
      return check_arg({random_tensor({2, 3}, 22), random_tensor({2, 3}, 23)}, static_cast<std::size_t>(which),
                       [](VarList& v) { return mul(v[0], v[1]); });
    });
  }
  add_case("add_scalar", [] { return check_unary(random_tensor({5}, 24), [](auto& x) { return add_scalar(x, 0.7); }); });
  add_case("mul_scalar", [] { return check_unary(random_tensor({5}, 25), [](auto& x) { return mul_scalar(x, -1.3); }); });

  // reductions and pooling
  add_case("sum", [] { return check_unary(random_tensor({2, 3, 2}, 26), [](auto& x) { return mul_scalar(sum(x), 1.7); }); });
  add_case("mean", [] { return check_unary(random_tensor({2, 3, 2}, 27), [](auto& x) { return mul_scalar(mean(x), 1.7); }); });
  add_case("sum_last", [] { return check_unary(random_tensor({2, 3, 4}, 28), [](auto& x) { return sum_last(x); }); });
  add_case("spatial_mean", [] { return check_unary(random_tensor({2, 3, 4, 5}, 29), [](auto& x) { return spatial_mean(x); }); });
  add_case("channel_mean", [] { return check_unary(random_tensor({2, 3, 4, 5}, 30), [](auto& x) { return channel_mean(x); }); });
  add_case("avgpool2d", [] { return check_unary(random_tensor({2, 2, 4, 6}, 31), [](auto& x) { return avgpool2d(x, 2); }); });

  // resampling
  add_case("bilinear_resize down", [] {
    return check_unary(random_tensor({2, 5, 5}, 32), [](auto& x) { return bilinear_resize(x, 3, 4); });
  });
  add_case("bilinear_resize up", [] {
    return check_unary(random_tensor({1, 2, 3, 3}, 33), [](auto& x) { return bilinear_resize(x, 7, 5); });
  });

  // normalisation
  add_case("softmax last axis", [] { return check_unary(random_tensor({3, 5}, 34, -2, 2), [](auto& x) { return softmax(x, -1); }); });
  add_case("softmax axis 1", [] { return check_unary(random_tensor({2, 4, 3}, 35, -2, 2), [](auto& x) { return softmax(x, 1); }); });
  add_case("masked_softmax", [] {
    const NeighbourIndex idx = grid_index_map(4, 4, 2);
    return check_unary(random_tensor({2, 9, 4, 4}, 36, -2, 2),
                       [valid = idx.valid](auto& x) { return masked_softmax(x, valid); });
  });
  for (int which = 0; which < 3; ++which) {
    add_case("batch_norm / arg" + std::to_string(which), [which] {
      auto rm = std::make_shared<Tensor<double>>(Shape{3});
      auto rv = std::make_shared<Tensor<double>>(Shape{3}, 1.0);
      return check_arg({random_tensor({2, 3, 3, 3}, 37), random_tensor({3}, 38, 0.5, 1.5), random_tensor({3}, 39)},
                       static_cast<std::size_t>(which), [rm, rv](VarList& v) {
                         BatchNormOptions opts;
                         opts.update_running = false;
                         return batch_norm(v[0], v[1], v[2], *rm, *rv, opts);
                       });
    });
  }

  // structural
  for (int which = 0; which < 2; ++which) {
    add_case("concat_channels / arg" + std::to_string(which), [which] {
      return check_arg({random_tensor({2, 2, 3, 3}, 40), random_tensor({2, 3, 3, 3}, 41)},
                       static_cast<std::size_t>(which), [](VarList& v) { return concat_channels(v[0], v[1]); });
    });
    add_case("scale_channels / arg" + std::to_string(which), [which] {
      return check_arg({random_tensor({2, 3, 2, 2}, 42), random_tensor({2, 3}, 43)}, static_cast<std::size_t>(which),
                       [](VarList& v) { return scale_channels(v[0], v[1]); });
    });
  }
  add_case("unfold_grids", [] { return check_unary(random_tensor({2, 4, 6}, 44), [](auto& x) { return unfold_grids(x, 2); }); });
  add_case("narrow_last", [] { return check_unary(random_tensor({3, 6}, 45), [](auto& x) { return narrow_last(x, 2, 3); }); });
  add_case("gather_rows", [] {
    return check_unary(random_tensor({3, 4}, 46), [](auto& x) { return gather_rows(x, {2, 0, 2, 1, 1}); });
  });
  add_case("reshape", [] { return check_unary(random_tensor({2, 6}, 47), [](auto& x) { return reshape(x, {3, 4}); }); });

  // losses
  add_case("reconstruct", [] {
    const NeighbourIndex idx = grid_index_map(4, 4, 2);
    const Tensor<double> f = random_tensor({2, 3, 4, 4}, 48, 0, 1);
    return check_unary(random_tensor({2, 9, 4, 4}, 49, -1, 1), [valid = idx.valid, f](auto& x) {
      return reconstruct(masked_softmax(x, valid), f, 2);
    });
  });
  add_case("superpixel_loss", [] {
    const NeighbourIndex idx = grid_index_map(4, 6, 2);
    LabelMap a = random_label_map(4, 6, 3, 50), b = random_label_map(4, 6, 3, 51);
    const Tensor<double> sem = semantic_onehot<double>({a, b});
    const Tensor<double> pos = position_features<double>(2, 4, 6);
    Objective obj;
    Tensor<double> logits = random_tensor({2, 9, 4, 6}, 52);
    obj = [&](Tape<double>& tape) {
      return superpixel_loss(masked_softmax(tape.leaf(logits), idx.valid), sem, pos, 2, 0.003);
    };
    return grad_check_tensor(obj, logits);
  });
  for (int which = 0; which < 2; ++which) {
    add_case("alignment_loss / arg" + std::to_string(which), [which] {
      return check_arg({random_tensor({2, 3, 4, 4}, 53), random_tensor({2, 3, 4, 4}, 54)},
                       static_cast<std::size_t>(which), [](VarList& v) {
                         return mul_scalar(alignment_loss(v[0], v[1], 2), 10.0);
                       });
    });
    add_case("mi_loss / style arg" + std::to_string(which), [which] {
      auto vp = std::make_shared<VariationalParams<double>>(init_variational<double>(55, 4));
      return check_arg({random_tensor({3, 4}, 56), random_tensor({3, 4}, 57)}, static_cast<std::size_t>(which),
                       [vp](VarList& v) {
                         ParamBinder<double> frozen(v[0].tape(), false);
                         return mi_loss(frozen, *vp, v[0], v[1]);
                       });
    });
  }
  add_case("variational_loglik / parameters", [] {
    VariationalParams<double> vp = init_variational<double>(58, 4);
    const Tensor<double> vi = random_tensor({3, 4}, 59), va = random_tensor({3, 4}, 60);
    double worst = 0.0;
    for (Tensor<double>* p : {&vp.fc1.weight, &vp.fc1.bias, &vp.fc2.weight, &vp.fc2.bias}) {
      Objective obj = [&](Tape<double>& tape) {
        ParamBinder<double> bind(tape, true);
        return probe(variational_loglik(bind, vp, tape.constant(vi), tape.constant(va)));
      };
      worst = std::max(worst, grad_check_tensor(obj, *p));
    }
    return worst;
  });
  add_case("variational_nll / parameters", [] {
    VariationalParams<double> vp = init_variational<double>(61, 4);
    const Tensor<double> vi = random_tensor({5, 4}, 62), va = random_tensor({5, 4}, 63);
    double worst = 0.0;
    for (Tensor<double>* p : {&vp.fc1.weight, &vp.fc1.bias, &vp.fc2.weight, &vp.fc2.bias}) {
      Objective obj = [&](Tape<double>& tape) {
        ParamBinder<double> bind(tape, true);
        return variational_nll(bind, vp, vi, va);
      };
      worst = std::max(worst, grad_check_tensor(obj, *p));
    }
    return worst;
  });
  return cases;
}

double composite_grad_error(std::size_t samples_per_tensor) {
  const ModelConfig cfg{8, 4, 4};
  ModelParams<double> params = init_params<double>(2026, cfg);
  // The zero-initialised last conv of Phi would feed a zero-variance batch
  // norm; give it weights so its gradient is checked in a regular regime.
  for (EncoderParams<double>* enc : {&params.enc_rgb, &params.enc_aux})
    enc->phi[2].weight = random_tensor(enc->phi[2].weight.shape, 64, -0.3, 0.3);
  params.var = init_variational<double>(65, cfg.channels);

  const Tensor<double> x_i = random_tensor({2, 3, 8, 8}, 66, 0, 1);
  const Tensor<double> x_a = random_tensor({2, 3, 8, 8}, 67, 0, 1);
  const Tensor<double> sem = semantic_onehot<double>({random_label_map(8, 8, 3, 68), random_label_map(8, 8, 4, 69)});
  const Tensor<double> pos = position_features<double>(2, 8, 8);

  Objective obj = [&](Tape<double>& tape) {
    ParamBinder<double> main(tape, true);
    ParamBinder<double> frozen(tape, false);
    ForwardOptions fwd;
    fwd.update_running = false;
    const BranchOutput<double> bi = branch_forward(main, params.enc_rgb, params, tape.constant_ref(x_i), fwd);
    const BranchOutput<double> ba = branch_forward(main, params.enc_aux, params, tape.constant_ref(x_a), fwd);
    LossParts<double> parts;
    parts.sp_i = superpixel_loss(bi.q, sem, pos, cfg.d, kDefaultLambdaPos);
    parts.sp_a = superpixel_loss(ba.q, sem, pos, cfg.d, kDefaultLambdaPos);
    parts.align = alignment_loss(bi.gated.content, ba.gated.content, cfg.d);
    parts.mi = mi_loss(frozen, params.var, bi.gated.style, ba.gated.style);
    return total_loss(parts);
  };

  GradCheckOptions opts;
  opts.max_samples = samples_per_tensor;
  double worst = 0.0;
  for (const auto& ref : named_tensors(params)) {
    if (ref.group != ParamGroup::Main) continue;
    worst = std::max(worst, grad_check_tensor(obj, *ref.tensor, opts));
  }
  return worst;
}

// ---------------------------------------------------------------------------

SuperpixelLabeling random_labeling(int height, int width, int max_labels, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::int32_t> ids(static_cast<std::size_t>(height) * width);
  // Mix of blocky and noisy maps so that boundaries are neither all nor none.
  const bool blocky = rng.bernoulli(0.5);
  const int bh = rng.uniform_int(1, 4), bw = rng.uniform_int(1, 4);
  std::vector<std::int32_t> block_ids(64);
  for (auto& b : block_ids) b = rng.uniform_int(0, max_labels - 1);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      ids[static_cast<std::size_t>(y) * width + x] =
          blocky ? block_ids[((y / bh) * 8 + x / bw) % 64] : rng.uniform_int(0, max_labels - 1);
  return make_labeling(height, width, std::move(ids));
}

LabelMap random_label_map(int height, int width, int max_labels, std::uint64_t seed) {
  SuperpixelLabeling s = random_labeling(height, width, max_labels, seed);
  return make_label_map(height, width, std::move(s.labels));
}

double naive_asa(const SuperpixelLabeling& sp, const LabelMap& gt) {
  const std::set<int> sps(sp.labels.begin(), sp.labels.end());
  const std::set<int> gts(gt.labels.begin(), gt.labels.end());
  double total = 0.0;
  for (int s : sps) {
    long best = 0;
    for (int g : gts) {
      long inter = 0;
      for (std::size_t p = 0; p < sp.labels.size(); ++p) inter += sp.labels[p] == s && gt.labels[p] == g;
      best = std::max(best, inter);
    }
    total += static_cast<double>(best);
  }
  return total / static_cast<double>(sp.labels.size());
}

double naive_ue(const SuperpixelLabeling& sp, const LabelMap& gt) {
  const std::set<int> sps(sp.labels.begin(), sp.labels.end());
  const std::set<int> gts(gt.labels.begin(), gt.labels.end());
  double total = 0.0;
  for (int g : gts) {
    for (int s : sps) {
      long inter = 0, outside = 0;
      for (std::size_t p = 0; p < sp.labels.size(); ++p) {
        if (sp.labels[p] != s) continue;
        if (gt.labels[p] == g)
          ++inter;
        else
          ++outside;
      }
      if (inter > 0) total += static_cast<double>(std::min(inter, outside));
    }
  }
  return total / static_cast<double>(sp.labels.size());
}

double naive_co(const SuperpixelLabeling& sp) {
  std::map<int, std::pair<long, long>> area_perim;
  const int h = sp.height, w = sp.width;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int l = sp.at(y, x);
      auto& [a, p] = area_perim[l];
      ++a;
      const int dy[] = {-1, 1, 0, 0}, dx[] = {0, 0, -1, 1};
      for (int k = 0; k < 4; ++k) {
        const int yy = y + dy[k], xx = x + dx[k];
        if (yy < 0 || yy >= h || xx < 0 || xx >= w || sp.at(yy, xx) != l) ++p;
      }
    }
  }
  double total = 0.0;
  for (const auto& [l, ap] : area_perim) {
    const double a = static_cast<double>(ap.first), p = static_cast<double>(ap.second);
    total += a * 4.0 * std::numbers::pi * a / (p * p);
  }
  return total / static_cast<double>(h * w);
}

namespace {

std::vector<std::pair<int, int>> boundary_pixels(const std::vector<std::int32_t>& labels, int h, int w) {
  std::vector<std::pair<int, int>> out;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int l = labels[static_cast<std::size_t>(y) * w + x];
      bool edge = false;
      if (y > 0 && labels[static_cast<std::size_t>(y - 1) * w + x] != l) edge = true;
      if (y + 1 < h && labels[static_cast<std::size_t>(y + 1) * w + x] != l) edge = true;
      if (x > 0 && labels[static_cast<std::size_t>(y) * w + x - 1] != l) edge = true;
      if (x + 1 < w && labels[static_cast<std::size_t>(y) * w + x + 1] != l) edge = true;
      if (edge) out.emplace_back(y, x);
    }
  }
  return out;
}

double matched_fraction(const std::vector<std::pair<int, int>>& from, const std::vector<std::pair<int, int>>& to,
                        int tol) {
  if (from.empty()) return 1.0;
  long hit = 0;
  for (const auto& [y, x] : from) {
    for (const auto& [yy, xx] : to) {
      if (std::max(std::abs(y - yy), std::abs(x - xx)) <= tol) {
        ++hit;
        break;
      }
    }
  }
  return static_cast<double>(hit) / static_cast<double>(from.size());
}

}  // namespace

std::pair<double, double> naive_br_bp(const SuperpixelLabeling& sp, const LabelMap& gt, int tol) {
  const auto bs = boundary_pixels(sp.labels, sp.height, sp.width);
  const auto bg = boundary_pixels(gt.labels, gt.height, gt.width);
  return {matched_fraction(bg, bs, tol), matched_fraction(bs, bg, tol)};
}

double naive_superpixel_loss(const Tensor<double>& q, const Tensor<double>& semantic,
                             const Tensor<double>& position, int d, double lambda_pos) {
  const int n = static_cast<int>(q.dim(0)), h = static_cast<int>(q.dim(2)), w = static_cast<int>(q.dim(3));
  const int kh = h / d, kw = w / d;
  auto qv = [&](int b, int k, int y, int x) { return q.data[((static_cast<std::size_t>(b) * 9 + k) * h + y) * w + x]; };
  // Neighbour k of pixel (y, x) as a cell index, or -1.
  auto cell = [&](int k, int y, int x) {
    const int r = y / d + k / 3 - 1, c = x / d + k % 3 - 1;
    return (r < 0 || r >= kh || c < 0 || c >= kw) ? -1 : r * kw + c;
  };
  double ce = 0.0, pos_err = 0.0;
  for (int b = 0; b < n; ++b) {
    for (int which = 0; which < 2; ++which) {
      const Tensor<double>& f = which == 0 ? semantic : position;
      const int dch = static_cast<int>(f.dim(1));
      auto fv = [&](int ch, int y, int x) { return f.data[((static_cast<std::size_t>(b) * dch + ch) * h + y) * w + x]; };
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          for (int ch = 0; ch < dch; ++ch) {
            double rec = 0.0;
            for (int k = 0; k < 9; ++k) {
              const int s = cell(k, y, x);
              if (s < 0) continue;
              double num = 0.0, den = 0.0;
              for (int yy = 0; yy < h; ++yy)
                for (int xx = 0; xx < w; ++xx)
                  for (int kk = 0; kk < 9; ++kk)
                    if (cell(kk, yy, xx) == s) {
                      num += qv(b, kk, yy, xx) * fv(ch, yy, xx);
                      den += qv(b, kk, yy, xx);
                    }
              rec += qv(b, k, y, x) * num / (den + 1e-8);
            }
            if (which == 0)
              ce -= fv(ch, y, x) * std::log(rec + 1e-8);
            else
              pos_err += (fv(ch, y, x) - rec) * (fv(ch, y, x) - rec);
          }
        }
      }
    }
  }
  const double pixels = static_cast<double>(n) * h * w;
  return ce / pixels + lambda_pos * pos_err / pixels;
}

bool all_regions_connected(const std::vector<std::int32_t>& labels, int height, int width) {
  std::vector<char> seen(labels.size(), 0);
  std::set<int> started;
  for (std::size_t start = 0; start < labels.size(); ++start) {
    if (seen[start]) continue;
    const int l = labels[start];
    if (!started.insert(l).second) return false;
    std::queue<std::size_t> todo;
    todo.push(start);
    seen[start] = 1;
    while (!todo.empty()) {
      const std::size_t p = todo.front();
      todo.pop();
      const int y = static_cast<int>(p) / width, x = static_cast<int>(p) % width;
      const int dy[] = {-1, 1, 0, 0}, dx[] = {0, 0, -1, 1};
      for (int k = 0; k < 4; ++k) {
        const int yy = y + dy[k], xx = x + dx[k];
        if (yy < 0 || yy >= height || xx < 0 || xx >= width) continue;
        const std::size_t q = static_cast<std::size_t>(yy) * width + xx;
        if (!seen[q] && labels[q] == l) {
          seen[q] = 1;
          todo.push(q);
        }
      }
    }
  }
  return true;
}

// ---------------------------------------------------------------------------

double ce_fixture() {
  Tensor<double> q({1, 9, 1, 2});
  auto at = [&](int k, int x) -> double& { return q.data[static_cast<std::size_t>(k) * 2 + x]; };
  at(kCenterChannel, 0) = 0.5;
  at(5, 0) = 0.5;  // east
  at(3, 1) = 0.5;  // west
  at(kCenterChannel, 1) = 0.5;
  const Tensor<double> sem({1, 2, 1, 2}, {1.0, 0.0, 0.0, 1.0});
  const Tensor<double> pos = position_features<double>(1, 1, 2);
  Tape<double> tape;
  return superpixel_loss(tape.constant(q), sem, pos, 1, 0.0).value()[0];
}

double kl_fixture() {
  const double l3 = std::log(3.0);
  Tape<double> tape;
  const Var<double> ci = tape.constant(Tensor<double>({1, 1, 2, 2}));
  const Var<double> ca = tape.constant(Tensor<double>({1, 1, 2, 2}, {l3, l3, 0.0, 0.0}));
  return alignment_loss(ci, ca, 2).value()[0];
}

double mi_fixture() {
  VariationalParams<double> vp = identity_variational();
  Tape<double> tape;
  ParamBinder<double> frozen(tape, false);
  const Var<double> v = tape.constant(Tensor<double>({2, 1}, {0.0, 2.0}));
  return mi_loss(frozen, vp, v, v).value()[0];
}

}  // namespace cds::testkit
