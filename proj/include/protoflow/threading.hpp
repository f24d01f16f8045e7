#pragma once

namespace protoflow {

// Global worker-thread cap for the OpenMP kernels. Defaults to 1 so every
// run is serial unless explicitly widened (--threads on the CLI). Kernels
// partition work per output element, so results are bit-identical for any
// thread count.
void set_threads(int n);
int threads();

}  // namespace protoflow
