#pragma once

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRAM Authors

#include "mram/aggregator.hpp"
#include "mram/checkpoint.hpp"
#include "mram/config.hpp"
#include "mram/data.hpp"
#include "mram/error.hpp"
#include "mram/experts.hpp"
#include "mram/frl.hpp"
#include "mram/losses.hpp"
#include "mram/metrics.hpp"
#include "mram/optimizer.hpp"
#include "mram/router.hpp"
#include "mram/stats.hpp"
#include "mram/trainer.hpp"
