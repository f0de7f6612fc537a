#include <math.h>
#include <stdio.h>
#include "destimate.h"

#define CHECK(call)                                                   \
  do {                                                                \
    DestStatus s_ = (call);                                           \
    if (s_ != DEST_STATUS_OK) {                                       \
      fprintf(stderr, "%s -> %d: %s\n", #call, (int)s_,               \
              dest_last_error_message());                             \
      return 1;                                                       \
    }                                                                 \
  } while (0)

int main(void) {
  DestScenario *sc = NULL;
  DestEstimator *est = NULL;
  DestTrace *tr = NULL;
  size_t q = 0, len = 0, nodes = 0;
  double gamma = 0.0, t = 0.0, e = 0.0;
  int ok = 0;

  CHECK(dest_scenario_demo(&sc));
  CHECK(dest_analyze(sc, &ok, NULL));
  CHECK(dest_synthesize(sc, NAN, &est));
  CHECK(dest_estimator_info(est, &q, &gamma));
  CHECK(dest_simulate(sc, est, 0.0, 0.0, &tr));
  CHECK(dest_trace_size(tr, &len, &nodes));
  CHECK(dest_trace_sample(tr, len - 1, 1, &t, &e));
  printf("version %s ok %d q %zu gamma %.2f samples %zu t %.1f e %.3e\n",
         dest_version(), ok, q, gamma, len, t, e);

  if (dest_synthesize(NULL, NAN, &est) != DEST_STATUS_NULL_POINTER) return 2;

  dest_trace_free(tr);
  dest_estimator_free(est);
  dest_scenario_free(sc);
  return (ok == 1 && e < 1e-6) ? 0 : 3;
}
