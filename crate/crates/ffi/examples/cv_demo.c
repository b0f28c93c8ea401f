#include <stdio.h>

#include "tlnas.h"

int main(void) {
  const double acc[] = {0.1, 0.2, 0.3};
  double cv = -1.0;
  if (tlnas_cv_u(acc, 3, &cv) != TLNAS_STATUS_OK) {
    fprintf(stderr, "tlnas_cv_u: %s\n", tlnas_last_error_message());
    return 1;
  }
  printf("cv_u %.15f\n", cv);

  TlnasDataset *ds = NULL;
  TlnasStatus st = tlnas_dataset_open("/nonexistent/tlnas-data", &ds);
  printf("open missing: status %d (%s)\n", (int)st, tlnas_last_error_message());
  tlnas_dataset_free(ds);
  return st == TLNAS_STATUS_DATA ? 0 : 2;
}
