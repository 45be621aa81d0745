#include <math.h>
#include <stdio.h>
#include <string.h>
#include "fbmlab.h"

#define CHECK(cond)                                                   \
  do {                                                                \
    if (!(cond)) {                                                    \
      fprintf(stderr, "line %d: %s (%s)\n", __LINE__, #cond,          \
              fbm_last_error());                                      \
      return 1;                                                       \
    }                                                                 \
  } while (0)

int main(void) {
  FbmKernel *k = NULL;
  double v = 0.0;
  CHECK(fbm_kernel_new(0.75, &k) == FBM_STATUS_OK);
  CHECK(fbm_kernel_cross_covariance(k, 1.0, 1.0, &v) == FBM_STATUS_OK);
  CHECK(fabs(v - 1.0) < 1e-6);
  CHECK(fbm_kernel_cross_covariance(k, 0.2, 0.1, &v) == FBM_STATUS_DOMAIN);
  CHECK(strlen(fbm_last_error()) > 0);
  fbm_kernel_free(k);

  double times[3] = {0.25, 0.5, 1.0};
  FbmCovariance *c = NULL;
  size_t dim = 0;
  CHECK(fbm_covariance_new(0.75, times, 3, &c) == FBM_STATUS_OK);
  CHECK(fbm_covariance_dim(c, &dim) == FBM_STATUS_OK && dim == 3);
  CHECK(fbm_rate_exceedance_inf(c, 1.0, true, &v) == FBM_STATUS_OK && v == 0.5);
  double draws[6];
  CHECK(fbm_covariance_sample(c, 1, 0, 2, draws, 6) == FBM_STATUS_OK);
  CHECK(fbm_covariance_sample(c, 1, 0, 3, draws, 6) == FBM_STATUS_DIMENSION_MISMATCH);
  fbm_covariance_free(c);
  printf("%s\n", fbm_version());
  return 0;
}
