/* C interface to liblpshrink.
 *
 * Every function returns an lps_status; on failure lps_last_error() holds a
 * message for the calling thread until its next failing call. Handles are
 * opaque and owned by the caller, who releases them with the matching _free.
 */
#ifndef LPSHRINK_H
#define LPSHRINK_H

#include <stddef.h>
#include <stdint.h>

#if defined(LPSHRINK_BUILDING_LIBRARY)
#define LPS_API __attribute__((visibility("default")))
#else
#define LPS_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lps_status {
  LPS_OK = 0,
  LPS_ERR_DOMAIN = 1,   /* invalid input or configuration */
  LPS_ERR_NUMERIC = 2,  /* solver / linear algebra / quadrature failure */
  LPS_ERR_IO = 3,       /* file system or parse failure */
  LPS_ERR_INTERNAL = 4
} lps_status;

typedef struct lps_psm lps_psm;
typedef struct lps_profile lps_profile;

LPS_API const char* lps_version(void);
LPS_API const char* lps_last_error(void);
/* 0 trace .. 6 off (spdlog levels). Log output goes to stderr. */
LPS_API void lps_set_log_level(int level);

/* ---- population spectral measure ---------------------------------------- */

/* CSV with columns tau,weight. */
LPS_API lps_status lps_psm_load(const char* path, lps_psm** out);
LPS_API lps_status lps_psm_from_atoms(const double* tau, const double* weight, size_t count,
                                      lps_psm** out);
LPS_API lps_status lps_psm_identity(lps_psm** out);
LPS_API size_t lps_psm_size(const lps_psm* psm);
LPS_API lps_status lps_psm_atom(const lps_psm* psm, size_t index, double* tau, double* weight);
LPS_API void lps_psm_free(lps_psm* psm);

/* ---- self-consistent equation ------------------------------------------- */

typedef struct lps_solution {
  double m_re;
  double m_im;
  double residual;
  int iterations;
} lps_solution;

/* tol <= 0 selects the default (1e-12). */
LPS_API lps_status lps_solve_m(const lps_psm* psm, double phi, double z_re, double z_im,
                               double tol, lps_solution* out);

/* ---- boundary profile (densities) --------------------------------------- */

LPS_API lps_status lps_profile_compute(const lps_psm* psm, double phi, double emin, double emax,
                                       int points, lps_profile** out);
LPS_API size_t lps_profile_size(const lps_profile* profile);
LPS_API lps_status lps_profile_point(const lps_profile* profile, size_t index, double* E,
                                     double* w, double* hilbert_w, double* w_S);
LPS_API size_t lps_profile_edge_count(const lps_profile* profile);
LPS_API lps_status lps_profile_edge(const lps_profile* profile, size_t index, double* lower,
                                    double* upper);
LPS_API double lps_profile_atom_at_zero(const lps_profile* profile);
/* CSV E,w,hilbert_w,w_S (csv_path NULL: skipped) and JSON sidecar with edges
 * and atom_at_zero (json_path NULL: skipped). */
LPS_API lps_status lps_profile_write(const lps_profile* profile, const char* csv_path,
                                     const char* json_path);
/* CSV text as a malloc'd string the caller frees with lps_string_free. */
LPS_API lps_status lps_profile_csv(const lps_profile* profile, char** out);
LPS_API void lps_profile_free(lps_profile* profile);
LPS_API void lps_string_free(char* s);

/* ---- simulation and shrinkage ------------------------------------------- */

/* Samples S for M = round(phi N) and writes out_dir/spectrum.csv (column
 * lambda, descending). With write_eigensystem != 0 also writes
 * out_dir/eigensystem.bin:
 *   bytes 0..7   magic "LPEIG1\0\0"
 *   int64        M
 *   int64        N
 *   uint64       seed
 *   M doubles    eigenvalues (descending)
 *   M*M doubles  eigenvectors, row-major (column j is eigenvector j)
 * All integers and doubles little-endian. */
LPS_API lps_status lps_simulate(const lps_psm* psm, double phi, int N, uint64_t seed,
                                const char* out_dir, int write_eigensystem, int* M_out);

typedef struct lps_shrink_summary {
  double trace_in;
  double trace_out;
  int clamped_count;
  int flagged_count;
  int count;
} lps_shrink_summary;

/* Reads column lambda from spectrum_csv, writes CSV lambda,delta to out_csv
 * and the summary as JSON to json_path (NULL: skipped). N is round(M / phi). */
LPS_API lps_status lps_shrink(const lps_psm* psm, double phi, const char* spectrum_csv,
                              const char* out_csv, const char* json_path,
                              lps_shrink_summary* out);

/* ---- Monte Carlo experiments -------------------------------------------- */

typedef struct lps_experiment {
  const char* law; /* bottom-trace, top-trace, entrywise, identities, mu-interval,
                      nu-interval, excess-loss (ignored by lps_losses) */
  const lps_psm* psm;
  const char* psm_file; /* recorded in config.json only; may be NULL */
  double phi;
  double z_re;
  double z_im;
  const int* n_list;
  size_t n_count;
  int replicates;
  uint64_t seed;
  int grid_size; /* <= 0: 200 */
  int threads;   /* 0: hardware concurrency */
} lps_experiment;

typedef struct lps_run_summary {
  size_t rows;
  size_t failures;
  int has_fit;
  double slope;
  double intercept;
  double stderr_slope;
  int dominance_passed; /* -1 when not evaluated */
  int optimality_violations;
} lps_run_summary;

/* results.csv n,seed,residual,psi_or_bound (entrywise: one row per test pair)
 * plus config.json in out_dir. */
LPS_API lps_status lps_verify(const lps_experiment* config, const char* out_dir,
                              lps_run_summary* out);
/* which: "mu" or "nu". results.csv n,seed,distance plus config.json. */
LPS_API lps_status lps_measure_distance(const lps_experiment* config, const char* which,
                                        const char* out_dir, lps_run_summary* out);
/* Full run directory (config.json, results.csv n,seed,value,bound,
 * summary.json with rate fit and dominance at epsilon, manifest.json). */
LPS_API lps_status lps_rate(const lps_experiment* config, double epsilon, const char* out_dir,
                            lps_run_summary* out);
/* Run directory with results.csv n,seed,estimator,mv_loss. */
LPS_API lps_status lps_losses(const lps_experiment* config, const char* out_dir,
                              lps_run_summary* out);

#ifdef __cplusplus
}
#endif

#endif /* LPSHRINK_H */
