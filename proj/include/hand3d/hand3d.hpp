// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "hand3d/error.hpp"
#include "hand3d/geometry.hpp"
#include "hand3d/hand_kinematics.hpp"
#include "hand3d/scale_calibration.hpp"
#include "hand3d/spatial_labeling.hpp"
#include "hand3d/motion_tokens.hpp"
#include "hand3d/vqa_generator.hpp"
#include "hand3d/dataset_io.hpp"
#include "hand3d/ref_model_math.hpp"
#include "hand3d/eval_metrics.hpp"
#include "hand3d/synth_oracle.hpp"
#include "hand3d/pipeline.hpp"
