#pragma once

#ifdef _OPENMP
#include <omp.h>
#endif

// Forces a multi-threaded team for the duration of a test, even on one core.
struct ThreadScope {
    explicit ThreadScope(int n = 4) {
#ifdef _OPENMP
        saved = omp_get_max_threads();
        omp_set_num_threads(n);
#else
        (void)n;
#endif
    }
    ~ThreadScope() {
#ifdef _OPENMP
        omp_set_num_threads(saved);
#endif
    }
    ThreadScope(const ThreadScope&) = delete;
    ThreadScope& operator=(const ThreadScope&) = delete;
    int saved = 1;
};
