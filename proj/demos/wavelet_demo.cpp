// Copyright 2026 The CAG Surrogate Authors
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


// Adaptive sampling of the wavelet-like function and a sweep against uniform GPR.

#include <cstdio>

#include "cag/bench.hpp"

int main() {
    const cag::Solver solver = cag::make_wavelet_solver();
    cag::ComparisonConfig cc;
    cc.problem = "wavelet";
    cc.base = cag::wavelet_defaults();
    cc.sizes = {54, 71};
    cc.grid = {-15.0, 15.0, 1000};
    const auto rows = cag::run_comparison(solver, cc);
    std::printf("%8s %10s %14s %14s\n", "samples", "method", "max rel err", "mse");
    for (const auto& r : rows) {
        if (!r.error.empty()) {
            std::printf("target %zu failed: %s\n", r.target, r.error.c_str());
            continue;
        }
        for (const auto* rep : {&*r.uniform, &*r.cag}) {
            std::printf("%8zu %10s %14.4e %14.4e\n", rep->samples, rep->method.c_str(), rep->max_relative_error,
                        rep->mse);
        }
    }
    return 0;
}
