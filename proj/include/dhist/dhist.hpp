// Copyright 2026 The dhist Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "dhist/error.hpp"
#include "dhist/operator.hpp"
#include "dhist/history.hpp"
#include "dhist/decoherence.hpp"
#include "dhist/records.hpp"
#include "dhist/classicality.hpp"
#include "dhist/models.hpp"
