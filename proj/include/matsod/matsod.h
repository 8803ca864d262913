/*
 * Copyright (c) 2026 The matsod authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface to the matsod arbitrary-modality saliency library.
 *
 * Every function returns a matsod_status. On failure a description is
 * available from matsod_last_error() on the calling thread until the next
 * call. Strings returned through char** outputs are owned by the caller and
 * must be released with matsod_string_free().
 *
 * Config text uses the `key = value` format, one pair per line, `#` starts a
 * comment. Model keys are `model.*`, training keys `train.*`.
 */
#ifndef MATSOD_MATSOD_H
#define MATSOD_MATSOD_H

#include <stdint.h>

#if defined(_WIN32)
#define MATSOD_API __declspec(dllexport)
#else
#define MATSOD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum matsod_status {
  MATSOD_OK = 0,
  MATSOD_ERR_INVALID_ARGUMENT = 1,
  MATSOD_ERR_SHAPE = 2,
  MATSOD_ERR_IO = 3,
  MATSOD_ERR_FORMAT = 4,
  MATSOD_ERR_INTERNAL = 5
} matsod_status;

typedef struct matsod_model matsod_model;

typedef void (*matsod_progress_fn)(int epoch, int phase, int step, double loss, void* user);

MATSOD_API const char* matsod_version(void);
MATSOD_API const char* matsod_last_error(void);
MATSOD_API void matsod_string_free(char* s);

/* Parses config_text (may be NULL), sets key to value and returns the
 * re-formatted text. Unknown key prefixes are rejected. */
MATSOD_API matsod_status matsod_config_set(const char* config_text, const char* key, const char* value, char** out);

/* Writes <root>/<split>/... and a manifest. mix may be NULL (uniform over the
 * seven combinations) or "RGB=0.5,RGB-D-T=0.5". depth_baseline may be NULL. */
MATSOD_API matsod_status matsod_generate_dataset(const char* root, const char* split, int n, const char* mix,
                                                 uint64_t seed, int size, double* depth_baseline);

/* Newline-separated problems; an empty string means the split is consistent. */
MATSOD_API matsod_status matsod_audit_dataset(const char* root, const char* split, int size, char** problems);

/* config_text may be NULL for the defaults. */
MATSOD_API matsod_status matsod_model_create(const char* config_text, matsod_model** out);
MATSOD_API matsod_status matsod_model_load(const char* checkpoint_dir, matsod_model** out);
/* extra_config_text (may be NULL) is stored with the checkpoint. */
MATSOD_API matsod_status matsod_model_save(const matsod_model* model, const char* checkpoint_dir,
                                           const char* extra_config_text);
MATSOD_API void matsod_model_destroy(matsod_model* model);

/* JSON object with the config and per-module parameter counts. */
MATSOD_API matsod_status matsod_model_describe(const matsod_model* model, char** json);
/* Config snapshot as key-value text. */
MATSOD_API matsod_status matsod_model_config(const matsod_model* model, char** text);

/* Trains on <data_root>/<split>. history receives "step<TAB>loss" lines and
 * warnings newline-separated notes; either may be NULL. */
MATSOD_API matsod_status matsod_train(matsod_model* model, const char* data_root, const char* split,
                                      const char* train_config_text, matsod_progress_fn progress, void* user,
                                      char** history, char** warnings);

/* mode: "sole" or "joint"; subsets: comma list or NULL for all; policy:
 * "sweep" (NULL) or "adaptive". */
MATSOD_API matsod_status matsod_evaluate(const matsod_model* model, const char* data_root, const char* split,
                                         const char* mode, const char* subsets, const char* fbeta_policy,
                                         char** table, char** records);

/* inputs: "rgb=a.png,d=b.png". Writes S1 to out_png as 8-bit grey; with aux
 * set, S2..S4 go to <stem>_s2.png ... next to it. */
MATSOD_API matsod_status matsod_predict(const matsod_model* model, const char* inputs, const char* out_png,
                                        int aux);

/* Forward-cost table for 1..N modalities on a synthetic scene. */
MATSOD_API matsod_status matsod_arity_report(const matsod_model* model, uint64_t seed, char** table);

#ifdef __cplusplus
}
#endif

#endif /* MATSOD_MATSOD_H */
