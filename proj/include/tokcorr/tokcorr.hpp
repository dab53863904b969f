// Copyright (C) 2026 The tokcorr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "tokcorr/aggregation.hpp"
#include "tokcorr/core.hpp"
#include "tokcorr/density.hpp"
#include "tokcorr/harness/baselines.hpp"
#include "tokcorr/harness/oracle_suite.hpp"
#include "tokcorr/harness/synthetic.hpp"
#include "tokcorr/io/config.hpp"
#include "tokcorr/io/manifest.hpp"
#include "tokcorr/io/masks.hpp"
#include "tokcorr/io/results.hpp"
#include "tokcorr/io/tensor_file.hpp"
#include "tokcorr/pipeline.hpp"
#include "tokcorr/random.hpp"
#include "tokcorr/selection.hpp"
