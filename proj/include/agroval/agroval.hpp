/*
 * Copyright 2026 the agroval authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include "agroval/csv.hpp"
#include "agroval/dates.hpp"
#include "agroval/errors.hpp"
#include "agroval/evaluate.hpp"
#include "agroval/experiment.hpp"
#include "agroval/explain.hpp"
#include "agroval/features.hpp"
#include "agroval/indicators.hpp"
#include "agroval/models.hpp"
#include "agroval/panels.hpp"
#include "agroval/pet.hpp"
#include "agroval/rng.hpp"
#include "agroval/splits.hpp"
#include "agroval/standardized_index.hpp"
#include "agroval/stats.hpp"
#include "agroval/synth.hpp"
#include "agroval/targets.hpp"
