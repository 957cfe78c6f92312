#include <math.h>
#include <stdio.h>
#include "kato.h"

#define CHECK(call)                                                         \
    do {                                                                    \
        KatoStatus s_ = (call);                                             \
        if (s_ != KATO_STATUS_OK) {                                         \
            fprintf(stderr, "%s -> %d: %s\n", #call, s_, kato_last_error()); \
            return 1;                                                       \
        }                                                                   \
    } while (0)

int main(void) {
    KatoProblem *problem = NULL;
    KatoScheme *scheme = NULL;
    KatoMesh *mesh = NULL;
    KatoReport *report = NULL;

    CHECK(kato_problem_new("rank1", &problem));
    CHECK(kato_scheme_new("greedy2", &scheme));
    CHECK(kato_mesh_new("circle:0,0:0.5:64", &mesh));
    CHECK(kato_continue(problem, scheme, mesh, NULL, 0, 0, false, &report));

    double closure = -1.0;
    CHECK(kato_report_closure_error(report, &closure));
    KatoCounters counters;
    CHECK(kato_report_counters(report, &counters));

    KatoComplex lambda, basis[2];
    CHECK(kato_report_frame(report, 64, &lambda, basis, 2));

    KatoScheme *bad = NULL;
    KatoStatus s = kato_scheme_new("greedy9", &bad);

    printf("closure=%.3e steps=%llu p_evals=%llu mults=%llu lambda=%.3f%+.3fi bad=%d\n", closure,
           (unsigned long long)counters.steps, (unsigned long long)counters.p_evals,
           (unsigned long long)counters.mat_mults, lambda.re, lambda.im, (int)s);

    kato_report_free(report);
    kato_mesh_free(mesh);
    kato_scheme_free(scheme);
    kato_problem_free(problem);

    if (!(closure < 1e-10) || counters.steps != 64 || counters.p_evals != 128 || counters.mat_mults != 192 ||
        s == KATO_STATUS_OK || kato_status_is_numerical(s) || bad != NULL || fabs(lambda.re - 0.5) > 1e-15) {
        return 2;
    }
    return 0;
}
