/* SPDX-License-Identifier: MIT OR Apache-2.0 */

#include <math.h>
#include <stdio.h>
#include <string.h>

#include "diffconcepts.h"

#define CHECK(cond)                                                   \
    do {                                                              \
        if (!(cond)) {                                                \
            fprintf(stderr, "check failed at line %d: %s\n", __LINE__, #cond); \
            return 1;                                                 \
        }                                                             \
    } while (0)

int main(int argc, char **argv) {
    enum { N = 400, D = 6 };
    static float data[N * D];
    unsigned state = 12345u;
    for (size_t i = 0; i < N; i++) {
        for (size_t t = 0; t < D; t++) {
            state = state * 1103515245u + 12345u;
            data[i * D + t] = (float)((state >> 8) & 0xffff) / 65536.0f - 0.5f;
        }
        if (i % 5 == 0) data[i * D] += 3.0f;
    }

    DcMatrix *acts = NULL;
    CHECK(dc_matrix_new(data, N, D, &acts) == DC_STATUS_OK);

    DcExtractOptions opts = dc_extract_options_default();
    opts.k = 4;
    opts.seed = 7;
    DcDictionary *dict = NULL;
    CHECK(dc_extract(acts, &opts, &dict) == DC_STATUS_OK);
    size_t k = 0, d = 0;
    CHECK(dc_dictionary_shape(dict, &k, &d) == DC_STATUS_OK && k == 4 && d == D);

    DcMatrix *scores = NULL;
    CHECK(dc_score(acts, dict, &scores) == DC_STATUS_OK);
    size_t n = 0;
    CHECK(dc_matrix_shape(scores, &n, &k) == DC_STATUS_OK && n == N && k == 4);

    float y[D];
    CHECK(dc_zero_out(data, D, dict, 1, y) == DC_STATUS_OK);
    const float *c = dc_dictionary_directions(dict) + D;
    double dot = 0.0;
    for (size_t t = 0; t < D; t++) dot += (double)y[t] * c[t];
    CHECK(fabs(dot) < 1e-5);

    CHECK(dc_steer(data, D, dict, 9, 1.0, y) == DC_STATUS_INVALID_INPUT);
    CHECK(strstr(dc_last_error_message(), "out of range") != NULL);

    if (argc > 1) {
        CHECK(dc_dictionary_write(dict, argv[1]) == DC_STATUS_OK);
    }
    CHECK(dc_matrix_read_npy("/nonexistent/acts.npy", &acts) == DC_STATUS_INVALID_INPUT && acts == NULL);

    dc_matrix_free(scores);
    dc_dictionary_free(dict);
    printf("ok %s\n", dc_version());
    return 0;
}
