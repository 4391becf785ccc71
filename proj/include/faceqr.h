/* faceqr: no-reference face quality assessment via restoration.
 *
 * A generator network restores a 32x32 RGB face crop toward its high-quality
 * appearance; quality is how little that restoration changes the input
 * (pixel MSE and SSIM) plus a discriminator's realism score of the restored
 * image. This header is the only public surface: opaque handles, integer
 * status codes, and a thread-local error message.
 */
#ifndef FACEQR_H
#define FACEQR_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fqr_status {
  FQR_OK = 0,
  FQR_ERR_INVALID_ARGUMENT = 1,
  FQR_ERR_IO = 2,
  FQR_ERR_DECODE = 3,
  FQR_ERR_FORMAT = 4,
  FQR_ERR_SHAPE = 5,
  FQR_ERR_DIVERGED = 6,
  FQR_ERR_INTERNAL = 7
} fqr_status;

/* Library version, "major.minor.patch". */
const char* fqr_version(void);

/* Message describing the calling thread's last failed call; empty string if
 * none. The pointer stays valid until the thread's next API call. */
const char* fqr_last_error(void);

/* Side of the square face crop every model consumes (32). */
int fqr_face_size(void);

/* ---- Scoring engine: a trained generator/discriminator pair. ---- */

typedef struct fqr_engine fqr_engine;

/* Loads both checkpoints. On success *out_engine must be released with
 * fqr_engine_close. */
fqr_status fqr_engine_open(const char* generator_checkpoint,
                           const char* discriminator_checkpoint,
                           fqr_engine** out_engine);

/* Scores one image file (decoded, resized to 32x32, values scaled to [0,1]).
 * Any output pointer may be NULL to skip that measure. */
fqr_status fqr_engine_score_file(fqr_engine* engine, const char* image_path,
                                 double* q_mse, double* q_ssim, double* q_disc);

/* Scores a raw 32x32x3 row-major RGB buffer with values in [0,1]
 * (3072 doubles, channel fastest). */
fqr_status fqr_engine_score_rgb(fqr_engine* engine, const double* rgb,
                                double* q_mse, double* q_ssim, double* q_disc);

/* Runs only the restoration half; out_rgb receives 3072 doubles in the same
 * layout as the input. in and out may alias. */
fqr_status fqr_engine_restore_rgb(fqr_engine* engine, const double* rgb,
                                  double* out_rgb);

void fqr_engine_close(fqr_engine* engine);

/* ---- Run driver: config-file commands producing files on disk. ---- */

typedef struct fqr_run fqr_run;

/* Loads a JSON config and resolves the output directory (creating it and
 * copying the config into it). output_dir, when non-NULL, overrides the
 * config's value; seed overrides when use_seed is nonzero. The FACEQR_OUT_ROOT
 * environment variable, when set, is prepended to relative output dirs. */
fqr_status fqr_run_open(const char* config_path, const char* output_dir,
                        int use_seed, uint64_t seed, fqr_run** out_run);

/* Resolved output directory; pointer valid until fqr_run_close. */
const char* fqr_run_output_dir(const fqr_run* run);

/* Generates the synthetic face corpus plus manifest under <out>/dataset. */
fqr_status fqr_run_synth(fqr_run* run);

/* Trains both stages and writes generator/discriminator checkpoints plus
 * training_log.csv. */
fqr_status fqr_run_train(fqr_run* run);

/* Scores the manifest corpus (n_images == 0) or the listed image files,
 * writing scores.csv. Unreadable images become error rows, not failures. */
fqr_status fqr_run_score(fqr_run* run, const char* const* image_paths,
                         size_t n_images);

/* Error-versus-reject curves for q_mse/q_ssim/q_disc plus the
 * max(initial_fnmr - r, 0) reference curve; CSV + SVG per curve. NULL paths
 * fall back to <out>/scores.csv and internally computed similarities. */
fqr_status fqr_run_erc(fqr_run* run, const char* scores_csv,
                       const char* similarities_csv);

/* DET curves for low/medium/high quality tertiles plus all data, with an
 * EER summary. Same input conventions as fqr_run_erc. */
fqr_status fqr_run_det(fqr_run* run, const char* scores_csv,
                       const char* similarities_csv);

void fqr_run_close(fqr_run* run);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* FACEQR_H */
