// Copyright 2026 The convqa Authors.
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

// Independent checks of the structural dialog invariants. Each violation is
// returned as a readable line.

#ifndef CONVQA_TESTS_SUPPORT_DIALOG_CHECK_H_
#define CONVQA_TESTS_SUPPORT_DIALOG_CHECK_H_

#include <string>
#include <vector>

#include "convqa/dialog.h"

namespace convqa::testing {

struct DialogCheckCounts {
  size_t questions = 0;
  size_t linked = 0;
  size_t clarifications = 0;
  size_t clarifications_ok = 0;
  size_t answers = 0;
  size_t answers_replayed = 0;
};

std::vector<std::string> DialogViolations(const KgStore& store, const Dialog& dialog,
                                          DialogCheckCounts* counts = nullptr);

}  // namespace convqa::testing

#endif  // CONVQA_TESTS_SUPPORT_DIALOG_CHECK_H_
