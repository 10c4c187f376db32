// Copyright (c) 2026 The CDS Authors
// SPDX-License-Identifier: Apache-2.0

#include "cds/inference.hpp"

#include "cds/errors.hpp"

namespace cds {

AssociationMap predict_association(ModelParams<float>& params, const ImageRGB& image) {
  Tape<float> tape;
  ParamBinder<float> bind(tape, false);
  const Var<float> x = tape.constant(to_tensor(std::vector<ImageRGB>{image}));
  ForwardOptions opts;
  opts.training = false;
  opts.update_running = false;
  opts.checked = true;
  const BranchOutput<float> out = branch_forward(bind, params.enc_rgb, params, x, opts);
  return association_from_tensor(out.q.value(), 0);
}

SuperpixelLabeling infer_labels(ModelParams<float>& params, const ImageRGB& image, const InferenceOptions& opts) {
  const int d = params.config.d;
  const auto [h2, w2] = plan_resize(image.height, image.width, opts.sp_h, opts.sp_w, d);
  const ImageRGB resized = resize_bilinear(image, h2, w2);
  const GridSpec grid = GridSpec::make(h2, w2, d);
  SuperpixelLabeling labels = hard_assign(predict_association(params, resized), grid);
  if (opts.connectivity) {
    labels = enforce_connectivity(labels, opts.min_size > 0 ? opts.min_size : default_min_size(d));
  }
  if (h2 != image.height || w2 != image.width) {
    labels = make_labeling(image.height, image.width,
                           resize_nearest(labels.labels, h2, w2, image.height, image.width));
    if (opts.connectivity) labels = enforce_connectivity(labels, 1);
  }
  return labels;
}

}  // namespace cds
