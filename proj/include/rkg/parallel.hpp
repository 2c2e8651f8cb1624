#pragma once

namespace rkg {

/// Caps library-internal parallelism. n <= 0 restores the default, which honours
/// the RESONANT_KG_THREADS environment variable.
void set_threads(int n);
int threads();

}  // namespace rkg
