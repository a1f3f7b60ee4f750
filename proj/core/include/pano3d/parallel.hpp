#pragma once

#include <functional>

namespace pano3d {

/// Worker count used by the per-row loops. Read once from PANO3D_THREADS
/// (default 1). Results never depend on this value.
int thread_count();

/// Overrides the worker count for the rest of the process (values < 1 mean 1).
void set_thread_count(int n);

/// Runs body(row) for row in [0, rows). Rows are split into contiguous blocks,
/// one per worker; body must only write state owned by its row.
void parallel_rows(int rows, const std::function<void(int)>& body);

}  // namespace pano3d
