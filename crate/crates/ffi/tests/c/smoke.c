#include <math.h>
#include <stdio.h>
#include "oscstab.h"

int main(void) {
    OscSystem *sys = NULL;
    OscLaw *law = NULL;
    OscTrajectory *traj = NULL;
    double x0[10] = {1, -1, 1.5, -0.5, 2, -2, 2.5, -2.5, 3, -3};
    double br[10], w, norms[51];
    size_t samples, windows;
    int diverged;
    char msg[256];

    if (osc_system_brockett(&sys) != OSC_STATUS_OK) return 1;
    if (osc_system_lie_bracket(sys, 1, 2, x0, 10, br, 10) != OSC_STATUS_OK) return 2;
    if (br[7] != 2.0) return 3;
    if (osc_law_brockett(1.0, 0.5, 0.1, NULL, 0, 0, &law) != OSC_STATUS_OK) return 4;
    if (osc_law_certificate(law, x0, 10, 0.5, &w, NULL, NULL) != OSC_STATUS_OK || !(w < 0)) return 5;
    if (osc_integrate(law, x0, 10, 5.0, 400, OSC_MODE_CLASSICAL, &traj) != OSC_STATUS_OK) return 6;
    if (osc_trajectory_info(traj, &samples, &windows, &diverged) != OSC_STATUS_OK) return 7;
    if (windows != 50 || diverged) return 8;
    if (osc_trajectory_boundary_norms(traj, norms, 51) != OSC_STATUS_OK || !(norms[50] < norms[0])) return 9;
    if (osc_system_lie_bracket(sys, 0, 1, x0, 3, br, 10) != OSC_STATUS_INVALID_ARGUMENT) return 10;
    if (osc_last_error_message(msg, sizeof msg) == 0) return 11;
    printf("ok %zu %.6f\n", samples, norms[50]);
    osc_trajectory_free(traj);
    osc_law_free(law);
    osc_system_free(sys);
    return 0;
}
