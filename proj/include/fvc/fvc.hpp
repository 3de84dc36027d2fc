// Copyright (c) 2026 The fvc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "fvc/audio.hpp"
#include "fvc/core_model.hpp"
#include "fvc/embeddings.hpp"
#include "fvc/error.hpp"
#include "fvc/evaluation.hpp"
#include "fvc/io.hpp"
#include "fvc/metrics.hpp"
#include "fvc/prep.hpp"
#include "fvc/scoring.hpp"
#include "fvc/synthetic.hpp"
