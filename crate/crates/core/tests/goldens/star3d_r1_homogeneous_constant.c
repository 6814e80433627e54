/* 3D-1r-homo-star-const-double | generated stencil benchmark */
#define _POSIX_C_SOURCE 200112L

#include <stdint.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>
#include <time.h>


typedef double real_t;
#define NDIM 3
#define RADIUS 1
#define NSCALAR 1
#define NWEIGHT 0
#define LINE_SIZE_BYTES 64
#define BLOCKED 0
#define DEFAULT_BLOCK 0

static real_t coef[NSCALAR > 0 ? NSCALAR : 1];

static void sweep(long M, long N, long P, long bs,
                  const real_t *restrict a_, real_t *restrict b_,
                  const real_t *restrict w_)
{
    const real_t (*restrict a)[N][P] = (const real_t (*)[N][P])a_;
    real_t (*restrict b)[N][P] = (real_t (*)[N][P])b_;
    const real_t c0 = coef[0];
    (void)M; (void)bs; (void)w_;

    for (long k = RADIUS; k < M - RADIUS; ++k) {
        for (long j = RADIUS; j < N - RADIUS; ++j) {
            for (long i = RADIUS; i < P - RADIUS; ++i) {
                b[k][j][i] = c0 * (a[k][j][i]
                    + a[k-1][j][i]
                    + a[k][j-1][i]
                    + a[k][j][i-1]
                    + a[k][j][i+1]
                    + a[k][j+1][i]
                    + a[k+1][j][i]);
            }
        }
    }
}

static double now_s(void)
{
    struct timespec ts;
    clock_gettime(CLOCK_MONOTONIC, &ts);
    return (double)ts.tv_sec + 1e-9 * (double)ts.tv_nsec;
}

static void *alloc_grid(size_t elems)
{
    void *p = NULL;
    if (elems == 0)
        elems = 1;
    if (posix_memalign(&p, LINE_SIZE_BYTES, elems * sizeof(real_t)) != 0) {
        fprintf(stderr, "allocation of %zu elements failed\n", elems);
        exit(2);
    }
    return p;
}

static long parse_long(const char *s, const char *what)
{
    char *end = NULL;
    long v = strtol(s, &end, 10);
    if (end == s || *end != '\0' || v < 0) {
        fprintf(stderr, "invalid %s: %s\n", what, s);
        exit(1);
    }
    return v;
}

int main(int argc, char **argv)
{
    long M = 1, N, P;
    int arg = 1;
    if (argc < NDIM + 1) {
        fprintf(stderr, "usage: %s %s [min_runtime_s] [clock_hz] [seed] [block]\n",
                argv[0], NDIM == 3 ? "M N P" : "N P");
        return 1;
    }
    if (NDIM == 3)
        M = parse_long(argv[arg++], "M");
    N = parse_long(argv[arg++], "N");
    P = parse_long(argv[arg++], "P");
    double min_runtime = argc > arg ? atof(argv[arg]) : 1.0;
    arg++;
    double clock_hz = argc > arg ? atof(argv[arg]) : 1e9;
    arg++;
    uint64_t seed = argc > arg ? (uint64_t)parse_long(argv[arg], "seed") : 0;
    arg++;
    long bs = argc > arg ? parse_long(argv[arg], "block") : DEFAULT_BLOCK;

    long lo = NDIM == 3 ? 2 * RADIUS + 2 : 1;
    if ((NDIM == 3 && M < lo) || N < 2 * RADIUS + 2 || P < 2 * RADIUS + 2) {
        fprintf(stderr, "grid too small for radius %d\n", RADIUS);
        return 1;
    }
    if (BLOCKED && bs < 1) {
        fprintf(stderr, "block size must be at least 1\n");
        return 1;
    }

    size_t plane = (size_t)N * (size_t)P;
    size_t len = (size_t)M * plane;
    real_t *a = alloc_grid(len);
    real_t *b = alloc_grid(len);
    real_t *w = alloc_grid((size_t)NWEIGHT * len);

    long outer = NDIM == 3 ? M : N;
    size_t chunk = NDIM == 3 ? plane : (size_t)P;

    for (long o = 0; o < outer; ++o) {
        for (size_t r = 0; r < chunk; ++r) {
            uint64_t idx = (uint64_t)o * chunk + r;
            real_t v = (real_t)((double)((idx * UINT64_C(2654435761) + seed) % 1021) / 1021.0);
            a[idx] = v;
            b[idx] = v;
            for (uint64_t c = 0; c < NWEIGHT; ++c)
                w[c * len + idx] = (real_t)((double)((idx * 40503 + c * 7919 + seed) % 509) / 509.0);
        }
    }
    for (int n = 0; n < NSCALAR; ++n)
        coef[n] = (real_t)(1.0 / (double)(n + 2));

    long sweeps = 0;
    double total = 0.0, best = -1.0;

    do {
        double t0 = now_s();
        sweep(M, N, P, bs, a, b, w);
        double dt = now_s() - t0;
        total += dt;
        if (best < 0.0 || dt < best)
            best = dt;
        sweeps++;
    } while (total < min_runtime);


    double checksum = 0.0;
    for (size_t idx = 0; idx < len; ++idx)
        checksum += (double)b[idx];

    double interior = (double)(N - 2 * RADIUS) * (double)(P - 2 * RADIUS);
    if (NDIM == 3)
        interior *= (double)(M - 2 * RADIUS);
    double lup_per_cl = (double)LINE_SIZE_BYTES / (double)sizeof(real_t);
    if (best <= 0.0)
        best = 1e-9;

    printf("sweeps=%ld\n", sweeps);
    printf("wall_s=%.9e\n", best);
    printf("mean_wall_s=%.9e\n", total / (double)sweeps);
    printf("cycles_per_cl=%.9e\n", best * clock_hz / (interior / lup_per_cl));
    printf("mlups=%.9e\n", interior / best / 1e6);
    printf("checksum=%.17g\n", checksum);

    free(a);
    free(b);
    free(w);
    return 0;
}
