/* Exercises the public C API from plain C, linked against the shared library only. */

#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "ieqa/ieqa.h"

static int failures = 0;

#define CHECK(cond)                                                   \
  do {                                                                \
    if (!(cond)) {                                                    \
      fprintf(stderr, "%s:%d: CHECK(%s) failed\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                     \
    }                                                                 \
  } while (0)

#define CHECK_OK(expr)                                                              \
  do {                                                                              \
    ieqa_status st_ = (expr);                                                       \
    if (st_ != IEQA_OK) {                                                           \
      fprintf(stderr, "%s:%d: %s -> %s: %s\n", __FILE__, __LINE__, #expr,           \
              ieqa_status_string(st_), ieqa_last_error());                          \
      ++failures;                                                                   \
    }                                                                               \
  } while (0)

static char work[512];

static const char* path(const char* rel) {
  static char buf[8][1024];
  static int slot = 0;
  slot = (slot + 1) % 8;
  snprintf(buf[slot], sizeof buf[slot], "%s/%s", work, rel);
  return buf[slot];
}

static int calls = 0;

/* Mean brightness of the edited image; fails on one case to exercise exclusion. */
static int brightness(const ieqa_scoring_input* in, void* user, double* out) {
  size_t n = (size_t)in->edited_width * (size_t)in->edited_height * 3, i;
  double sum = 0;
  ++*(int*)user;
  if (strcmp(in->case_id, "case0003") == 0) return 1;
  for (i = 0; i < n; ++i) sum += in->edited_rgb[i];
  *out = sum / (double)n;
  return 0;
}

static int has_artifact(const ieqa_result* r, const char* suffix) {
  size_t i, n = ieqa_result_artifact_count(r), ls = strlen(suffix);
  for (i = 0; i < n; ++i) {
    const char* a = ieqa_result_artifact(r, i);
    size_t la = strlen(a);
    if (la >= ls && strcmp(a + la - ls, suffix) == 0) return 1;
  }
  return 0;
}

static void test_metrics(void) {
  const double p[] = {1, 2, 2, 3}, t[] = {1, 3, 2, 4};
  const double p3[] = {1, 2, 4}, t3[] = {1, 2, 3};
  double v = 0;
  uint8_t a[48], b[48];
  int i;
  CHECK_OK(ieqa_srocc(p, t, 4, &v));
  CHECK(fabs(v - 4.5 / sqrt(4.5 * 5)) < 1e-12);
  CHECK_OK(ieqa_plcc(p3, t3, 3, &v));
  CHECK(fabs(v - 3.0 / sqrt(42.0 / 9.0 * 2.0)) < 1e-12);
  CHECK_OK(ieqa_krcc(t3, p3, 3, &v));
  CHECK(fabs(v - 1.0) < 1e-12);
  CHECK_OK(ieqa_rmse(p, t, 4, &v));
  CHECK(fabs(v - sqrt(0.5)) < 1e-12);
  CHECK(ieqa_srocc(p, t, 1, &v) == IEQA_ERR_VALIDATION);
  CHECK(ieqa_srocc(NULL, t, 4, &v) == IEQA_ERR_INVALID_ARGUMENT);
  {
    const double flat[] = {1, 1, 1};
    CHECK(ieqa_plcc(flat, t3, 3, &v) == IEQA_ERR_DEGENERATE);
    CHECK(strlen(ieqa_last_error()) > 0);
  }

  for (i = 0; i < 48; ++i) {
    a[i] = (uint8_t)(i * 5);
    b[i] = (uint8_t)(i * 5 + 1);
  }
  CHECK_OK(ieqa_mse(a, b, 4, 4, &v));
  CHECK(v == 1.0);
  CHECK_OK(ieqa_psnr(a, b, 4, 4, &v));
  CHECK(fabs(v - 48.1308) < 1e-3);
  CHECK_OK(ieqa_psnr(a, a, 4, 4, &v));
  CHECK(isinf(v));
  CHECK(ieqa_ssim(a, a, 4, 4, &v) == IEQA_ERR_VALIDATION);
  {
    uint8_t img[16 * 16 * 3];
    for (i = 0; i < 16 * 16 * 3; ++i) img[i] = (uint8_t)((i * 37) % 251);
    CHECK_OK(ieqa_ssim(img, img, 16, 16, &v));
    CHECK(fabs(v - 1.0) < 1e-12);
  }
}

static void test_pipeline(void) {
  ieqa_result* r = NULL;
  ieqa_caseset* cs = NULL;
  ieqa_scorer_registry* reg = NULL;
  ieqa_model* m = NULL;
  ieqa_model* back = NULL;
  char* mos = NULL;
  double a = 0, b = 0;
  int user_calls = 0;
  FILE* f;

  CHECK_OK(ieqa_cmd_synth(path("study"), 12, 6, 1, 3, &r));
  CHECK(ieqa_result_exit_code(r) == 0);
  CHECK(has_artifact(r, "manifest.jsonl"));
  ieqa_result_free(r);

  CHECK_OK(ieqa_caseset_load(path("study/manifest.jsonl"), &cs));
  CHECK(ieqa_caseset_size(cs) == 12);
  CHECK(strcmp(ieqa_caseset_case_id(cs, 0), "case0000") == 0);
  CHECK(strlen(ieqa_caseset_prompt(cs, 0)) > 0);
  CHECK(ieqa_caseset_case_id(cs, 12) == NULL);
  ieqa_caseset_free(cs);
  CHECK(ieqa_caseset_load(path("missing.jsonl"), &cs) != IEQA_OK);

  CHECK_OK(ieqa_cmd_ingest(path("study/manifest.jsonl"), path("ingest"), &r));
  ieqa_result_free(r);
  CHECK_OK(ieqa_cmd_mos(path("study/ratings.csv"), path("mos"), NULL, &r));
  CHECK(has_artifact(r, "mos.csv"));
  CHECK(has_artifact(r, "screening.json"));
  CHECK(strlen(ieqa_result_summary(r)) > 0);
  ieqa_result_free(r);

  {
    const char* csv =
        "rater_id,case_id,dim,score,timestamp\n"
        "a,c1,overall_quality,3,0\n"
        "a,c2,overall_quality,7,0\n"
        "b,c1,overall_quality,2,0\n"
        "b,c2,overall_quality,9,0\n";
    CHECK_OK(ieqa_mos_from_ratings(csv, &mos));
    CHECK(mos && strncmp(mos, "case_id", 7) == 0);
    ieqa_string_free(mos);
    CHECK(ieqa_mos_from_ratings("garbage", &mos) == IEQA_ERR_PARSE);
  }

  CHECK_OK(ieqa_scorer_registry_builtin(&reg));
  CHECK(ieqa_scorer_registry_size(reg) == 4);
  CHECK_OK(ieqa_scorer_registry_add(reg, "brightness", IEQA_SCORER_NO_REFERENCE, brightness, &user_calls));
  CHECK(ieqa_scorer_registry_add(reg, "brightness", IEQA_SCORER_NO_REFERENCE, brightness, &user_calls) ==
        IEQA_ERR_VALIDATION);
  CHECK(ieqa_scorer_registry_size(reg) == 5);
  CHECK_OK(ieqa_cmd_baselines(path("study/manifest.jsonl"), path("mos/mos.csv"), path("baselines"), "psnr,brightness",
                              NULL, reg, &r));
  CHECK(user_calls == 12);
  CHECK(has_artifact(r, "baselines.csv"));
  ieqa_result_free(r);
  CHECK(ieqa_cmd_baselines(path("study/manifest.jsonl"), path("mos/mos.csv"), path("baselines2"), "nope", NULL, reg,
                           &r) == IEQA_ERR_VALIDATION);
  CHECK(ieqa_result_exit_code(r) == 1);
  ieqa_result_free(r);
  ieqa_scorer_registry_free(reg);
  {
    char line[256];
    int found = 0;
    f = fopen(path("baselines/baselines.csv"), "r");
    CHECK(f != NULL);
    while (f && fgets(line, sizeof line, f))
      if (strncmp(line, "brightness,", 11) == 0) {
        found = 1;
        CHECK(strstr(line, ",11,ok") != NULL); /* one case excluded */
      }
    if (f) fclose(f);
    CHECK(found);
  }

  f = fopen(path("stub.json"), "w");
  fputs("{\"model\":{\"preset\":\"stub\"},\"train\":{\"stage1_epochs\":4,\"stage2_epochs\":2},\"k\":2}\n", f);
  fclose(f);
  {
    ieqa_train_options o;
    const char* reports[2];
    memset(&o, 0, sizeof o);
    o.manifest = path("study/manifest.jsonl");
    o.mos = path("mos/mos.csv");
    o.config = path("stub.json");
    o.out_dir = path("train");
    o.has_seed = 1;
    o.seed = 4;
    CHECK_OK(ieqa_cmd_train(&o, &r));
    CHECK(has_artifact(r, "report.json"));
    ieqa_result_free(r);

    o.out_dir = path("ablate");
    o.variants = "no_text,fusion_concat";
    CHECK_OK(ieqa_cmd_ablate(&o, &r));
    ieqa_result_free(r);
    o.variants = "bogus";
    CHECK(ieqa_cmd_ablate(&o, NULL) == IEQA_ERR_VALIDATION);

    reports[0] = path("train/report.json");
    reports[1] = path("ablate/no_text/report.json");
    CHECK_OK(ieqa_cmd_report(reports, 2, path("report"), &r));
    CHECK(has_artifact(r, "comparison.csv"));
    ieqa_result_free(r);
  }

  CHECK_OK(ieqa_model_create("{\"preset\":\"stub\"}", 9, &m));
  CHECK(ieqa_model_parameter_count(m) > 0 && ieqa_model_parameter_count(m) <= 2000);
  CHECK_OK(ieqa_model_predict(m, path("study/images/case0000_source.png"), path("study/images/case0000_edited.png"),
                              "make it warmer", &a));
  CHECK(isfinite(a));
  CHECK_OK(ieqa_model_save(m, path("model.json")));
  CHECK_OK(ieqa_model_load(path("model.json"), &back));
  CHECK_OK(ieqa_model_predict(back, path("study/images/case0000_source.png"),
                              path("study/images/case0000_edited.png"), "make it warmer", &b));
  CHECK(a == b);
  CHECK(ieqa_model_predict(m, path("study/images/case0000_source.png"), path("study/images/case0000_edited.png"), "",
                           &b) == IEQA_ERR_VALIDATION);
  ieqa_model_free(back);
  back = NULL;
  CHECK(ieqa_model_create("{\"fusion\":\"sum\"}", 1, &back) == IEQA_ERR_PARSE);
  CHECK(back == NULL);
  ieqa_model_free(m);
  ieqa_model_free(NULL);
}

static void test_server(void) {
  ieqa_rating_server_options o;
  ieqa_rating_server* s = NULL;
  int port = 0;
  memset(&o, 0, sizeof o);
  o.manifest = path("study/manifest.jsonl");
  o.journal = path("journal.jsonl");
  CHECK_OK(ieqa_rating_server_start(&o, &port, &s));
  CHECK(port > 0);
  ieqa_rating_server_stop(s);
  ieqa_rating_server_free(s);
  o.manifest = path("missing.jsonl");
  CHECK(ieqa_rating_server_start(&o, &port, &s) != IEQA_OK);
}

int main(int argc, char** argv) {
  (void)calls;
  snprintf(work, sizeof work, "%s", argc > 1 ? argv[1] : "capi_work");
  ieqa_set_log_level(IEQA_LOG_ERROR);
  CHECK(strlen(ieqa_version()) > 0);
  CHECK(strcmp(ieqa_status_string(IEQA_OK), ieqa_status_string(IEQA_ERR_IO)) != 0);
  test_metrics();
  test_pipeline();
  test_server();
  if (failures) {
    fprintf(stderr, "%d check(s) failed\n", failures);
    return 1;
  }
  printf("all C API checks passed\n");
  return 0;
}
