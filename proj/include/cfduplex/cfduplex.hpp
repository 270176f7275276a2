// SPDX-License-Identifier: Apache-2.0
//
// cfduplex: cell-free MIMO uplink/downlink spectral-efficiency simulator
// Copyright (C) 2026 the cfduplex authors
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

#pragma once

// Convenience umbrella for the whole library.

#include "cfduplex/config.hpp"
#include "cfduplex/estimation.hpp"
#include "cfduplex/experiment.hpp"
#include "cfduplex/geometry.hpp"
#include "cfduplex/mc.hpp"
#include "cfduplex/pilot.hpp"
#include "cfduplex/powerctl.hpp"
#include "cfduplex/realization.hpp"
#include "cfduplex/rng.hpp"
#include "cfduplex/schedule.hpp"
#include "cfduplex/se.hpp"
#include "cfduplex/stats.hpp"
