// Copyright (c) 2026 The CDS Authors
// SPDX-License-Identifier: Apache-2.0
//
// Superpixel inference with a trained model. Only the RGB branch runs; no
// auxiliary modality is ever built here.

#pragma once

#include "cds/image.hpp"
#include "cds/model.hpp"
#include "cds/superpixel.hpp"

namespace cds {

struct InferenceOptions {
  int sp_h = 0;
  int sp_w = 0;
  bool connectivity = true;
  // 0 selects d²/16.
  int min_size = 0;
};

// Association map for an image already sized to a multiple of d.
AssociationMap predict_association(ModelParams<float>& params, const ImageRGB& image);

// Resize to (sp_h*d, sp_w*d), forward, hard assignment, optional connectivity
// enforcement, nearest resize back to the input size. With connectivity on,
// fragments split by the final resize are merged again so that every label is
// 4-connected at the original resolution.
SuperpixelLabeling infer_labels(ModelParams<float>& params, const ImageRGB& image, const InferenceOptions& opts);

}  // namespace cds
