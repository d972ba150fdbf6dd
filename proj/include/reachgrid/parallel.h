/* Copyright 2026 The Reachgrid Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef REACHGRID_PARALLEL_H_
#define REACHGRID_PARALLEL_H_

#include <cstddef>
#include <functional>

namespace reachgrid {

// Runs fn(task) for task in [0, tasks) on up to `workers` threads. Tasks are
// claimed dynamically, so fn must write only to per-task state. The first
// exception thrown by any task is rethrown after all threads join.
void parallel_for(std::size_t tasks, int workers,
                  const std::function<void(std::size_t)>& fn);

}  // namespace reachgrid

#endif  // REACHGRID_PARALLEL_H_
